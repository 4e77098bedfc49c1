//! Quadratic fermion Hamiltonians and Gaussian states.
//!
//! Majoranas are interleaved by site: `c_x = (a_{2x} + i a_{2x+1})/2`.
//! A quadratic form is kept as `H = (i/4) Σ h_pq a_p a_q + const` with `h`
//! real antisymmetric, and a Gaussian state by `Γ_pq = i<a_p a_q>` (p ≠ q).

mod pfaffian;

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::edcore::{Boundary, ChainModel, Family};
use crate::error::{ensure_finite, Error, Result};
use crate::linalg::{self, I, ONE, ZERO};

pub use pfaffian::pfaffian;

/// Modes with energy below this are treated as zero modes.
pub const ZERO_MODE_TOL: f64 = 1e-12;

/// Boundary condition seen by the fermions.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FermionBoundary {
    Open,
    Periodic,
    Antiperiodic,
}

/// `H = Σ A_ij c†_i c_j + ½ Σ (B_ij c†_i c†_j + h.c.) + constant`.
#[derive(Clone, Debug, PartialEq)]
pub struct BdGForm {
    pub a: DMatrix<C64>,
    pub b: DMatrix<C64>,
    pub constant: f64,
    pub boundary: FermionBoundary,
}

impl BdGForm {
    pub fn new(a: DMatrix<C64>, b: DMatrix<C64>, constant: f64, boundary: FermionBoundary) -> Result<Self> {
        let f = Self { a, b, constant, boundary };
        f.validate()?;
        Ok(f)
    }

    pub fn sites(&self) -> usize {
        self.a.nrows()
    }

    pub fn validate(&self) -> Result<()> {
        let l = self.a.nrows();
        if l == 0 || self.a.ncols() != l || self.b.nrows() != l || self.b.ncols() != l {
            return Err(Error::Validation("A and B must be square blocks of equal size".into()));
        }
        ensure_finite("constant", self.constant)?;
        if self.a.iter().chain(self.b.iter()).any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::Validation("non-finite entry in a BdG block".into()));
        }
        let ha = (&self.a - self.a.adjoint()).iter().map(|z| z.norm()).fold(0.0, f64::max);
        let hb = (&self.b + self.b.transpose()).iter().map(|z| z.norm()).fold(0.0, f64::max);
        if ha > 1e-13 || hb > 1e-13 {
            return Err(Error::Validation(format!("BdG symmetry violated: |A - A†| = {ha:e}, |B + Bᵀ| = {hb:e}")));
        }
        Ok(())
    }

    /// Fermionic form of a transverse-Ising or XX chain.
    ///
    /// `boundary` only matters for periodic spin chains, where it selects the
    /// sign of the closing bond (see `jordanwigner::sector_hamiltonians`).
    pub fn from_chain(model: &ChainModel, boundary: FermionBoundary) -> Result<Self> {
        model.validate()?;
        let l = model.length;
        let (j, h) = (model.j, model.field);
        let (hop, pair) = match model.family {
            Family::TransverseIsing => (-j / 2.0, -j / 2.0),
            Family::Xx => (-j, 0.0),
            Family::Heisenberg => {
                return Err(Error::Validation("the Heisenberg chain is not quadratic in fermions".into()));
            }
        };
        let mut a = DMatrix::<C64>::zeros(l, l);
        let mut b = DMatrix::<C64>::zeros(l, l);
        for x in 0..l {
            a[(x, x)] += C64::new(j * h, 0.0);
        }
        let mut bond = |x: usize, y: usize, s: f64| {
            a[(x, y)] += C64::new(s * hop, 0.0);
            a[(y, x)] += C64::new(s * hop, 0.0);
            b[(x, y)] += C64::new(s * pair, 0.0);
            b[(y, x)] -= C64::new(s * pair, 0.0);
        };
        for x in 0..l.saturating_sub(1) {
            bond(x, x + 1, 1.0);
        }
        let effective = match (model.boundary, boundary) {
            (Boundary::Open, _) | (_, FermionBoundary::Open) => FermionBoundary::Open,
            (Boundary::Periodic, fb) => fb,
        };
        if l >= 2 {
            match effective {
                FermionBoundary::Periodic => bond(l - 1, 0, 1.0),
                FermionBoundary::Antiperiodic => bond(l - 1, 0, -1.0),
                FermionBoundary::Open => {}
            }
        }
        Self::new(a, b, -j * h * l as f64 / 2.0, effective)
    }

    /// True when the form has no pairing terms (particle number conserved).
    pub fn conserves_number(&self) -> bool {
        self.b.iter().all(|z| *z == ZERO)
    }

    /// Majorana form `(h, const)` with `H = (i/4) aᵀ h a + const`.
    pub fn majorana_form(&self) -> (DMatrix<f64>, f64) {
        let l = self.sites();
        // c = W a, W[j, 2j] = 1/2, W[j, 2j+1] = i/2
        let w = |j: usize, p: usize| -> C64 {
            if p == 2 * j {
                C64::new(0.5, 0.0)
            } else if p == 2 * j + 1 {
                C64::new(0.0, 0.5)
            } else {
                ZERO
            }
        };
        let n = 2 * l;
        let mut k = DMatrix::<C64>::zeros(n, n);
        for i in 0..l {
            for jj in 0..l {
                let (aij, bij) = (self.a[(i, jj)], self.b[(i, jj)]);
                if aij == ZERO && bij == ZERO {
                    continue;
                }
                for p in [2 * i, 2 * i + 1] {
                    for q in [2 * jj, 2 * jj + 1] {
                        k[(p, q)] += aij * w(i, p).conj() * w(jj, q);
                        k[(p, q)] += 0.5 * bij * w(i, p).conj() * w(jj, q).conj();
                    }
                }
                for p in [2 * jj, 2 * jj + 1] {
                    for q in [2 * i, 2 * i + 1] {
                        k[(p, q)] += 0.5 * bij.conj() * w(jj, p) * w(i, q);
                    }
                }
            }
        }
        let anti = (&k - k.transpose()) * C64::new(0.0, -2.0);
        let h = anti.map(|z| z.re);
        (h, self.constant + k.trace().re)
    }
}

/// Canonical decomposition `O h Oᵀ = ⊕_k [[0, ε_k], [-ε_k, 0]]`, `ε_k ≥ 0`.
#[derive(Clone, Debug)]
pub struct BdgSpectrum {
    pub energies: Vec<f64>,
    /// Rows `2k, 2k+1` span the k-th mode.
    pub transform: DMatrix<f64>,
    /// `const − ½ Σ ε_k`.
    pub ground_energy: f64,
    pub zero_modes: usize,
    /// Number-conserving forms keep the single-particle data for the fast paths.
    pub single_particle: Option<(Vec<f64>, DMatrix<C64>)>,
    /// Fermion parity `e^{iπN}` of the mode vacuum.
    pub vacuum_parity: f64,
}

impl BdgSpectrum {
    pub fn degenerate(&self) -> bool {
        self.zero_modes > 0
    }

    /// The 2L eigenvalues `±ε_k` of the BdG matrix, ascending.
    pub fn particle_hole_spectrum(&self) -> Vec<f64> {
        let mut s: Vec<f64> = self.energies.iter().flat_map(|&e| [e, -e]).collect();
        s.sort_by(f64::total_cmp);
        s
    }

    /// Every many-body level `(energy, parity)`; parity is `e^{iπN}`.
    pub fn many_body_levels(&self) -> Result<Vec<(f64, f64)>> {
        let l = self.energies.len();
        if l > 20 {
            return Err(Error::Capacity(format!("2^{l} many-body levels")));
        }
        Ok((0..1usize << l)
            .map(|mask| {
                let e: f64 = (0..l).filter(|k| mask >> k & 1 == 1).map(|k| self.energies[k]).sum();
                let sign = if mask.count_ones() % 2 == 0 { 1.0 } else { -1.0 };
                (self.ground_energy + e, self.vacuum_parity * sign)
            })
            .collect())
    }

    /// Covariance with mode weights `t_k = <−i b_{2k} b_{2k+1}>·(−1)`.
    fn covariance_from_weights(&self, t: &[f64]) -> DMatrix<f64> {
        let l = t.len();
        let o = &self.transform;
        let mut block = DMatrix::<f64>::zeros(2 * l, 2 * l);
        for k in 0..l {
            block[(2 * k, 2 * k + 1)] = -t[k];
            block[(2 * k + 1, 2 * k)] = t[k];
        }
        let g = o.transpose() * block * o;
        (&g - g.transpose()) * 0.5
    }
}

/// Diagonalizes a quadratic form.
pub fn bdg_diagonalize(form: &BdGForm) -> Result<BdgSpectrum> {
    form.validate()?;
    let l = form.sites();
    let (h, constant) = form.majorana_form();
    let real_blocks = form.a.iter().chain(form.b.iter()).all(|z| z.im == 0.0);

    let (energies, transform) = if real_blocks {
        // h only couples even to odd Majoranas: M_xy = h_{2x,2y+1}
        let m = DMatrix::from_fn(l, l, |x, y| h[(2 * x, 2 * y + 1)]);
        let svd = m.svd(true, true);
        let u = svd.u.ok_or_else(|| Error::Numerical("SVD produced no U".into()))?;
        let vt = svd.v_t.ok_or_else(|| Error::Numerical("SVD produced no V".into()))?;
        let mut o = DMatrix::<f64>::zeros(2 * l, 2 * l);
        for k in 0..l {
            for x in 0..l {
                o[(2 * k, 2 * x)] = u[(x, k)];
                o[(2 * k + 1, 2 * x + 1)] = vt[(k, x)];
            }
        }
        (svd.singular_values.iter().copied().collect::<Vec<_>>(), o)
    } else {
        general_canonical_form(&h)?
    };

    let zero_modes = energies.iter().filter(|&&e| e < ZERO_MODE_TOL).count();
    let ground_energy = constant - 0.5 * energies.iter().sum::<f64>();
    let vacuum_parity = transform.determinant().signum();
    let single_particle = if form.conserves_number() {
        let (vals, vecs) = linalg::eigh(&form.a);
        Some((vals, vecs))
    } else {
        None
    };
    Ok(BdgSpectrum { energies, transform, ground_energy, zero_modes, single_particle, vacuum_parity })
}

fn general_canonical_form(h: &DMatrix<f64>) -> Result<(Vec<f64>, DMatrix<f64>)> {
    let n = h.nrows();
    let l = n / 2;
    let ih = h.map(|x| C64::new(0.0, x));
    let (vals, vecs) = linalg::eigh(&ih);
    let mut energies = Vec::with_capacity(l);
    let mut rows: Vec<Vec<f64>> = Vec::with_capacity(n);
    let mut null: Vec<Vec<f64>> = Vec::new();
    for (k, &e) in vals.iter().enumerate() {
        let v = vecs.column(k);
        if e > ZERO_MODE_TOL {
            let s = std::f64::consts::SQRT_2;
            rows.push(v.iter().map(|z| s * z.im).collect());
            rows.push(v.iter().map(|z| s * z.re).collect());
            energies.push(e);
        } else if e.abs() <= ZERO_MODE_TOL {
            null.push(v.iter().map(|z| z.re).collect());
            null.push(v.iter().map(|z| z.im).collect());
        }
    }
    // real orthonormal basis of the null space
    let mut basis: Vec<Vec<f64>> = Vec::new();
    for mut cand in null {
        for _ in 0..2 {
            for b in &basis {
                let d: f64 = b.iter().zip(&cand).map(|(x, y)| x * y).sum();
                cand.iter_mut().zip(b).for_each(|(c, bi)| *c -= d * bi);
            }
        }
        let nrm = cand.iter().map(|x| x * x).sum::<f64>().sqrt();
        if nrm > 1e-8 {
            cand.iter_mut().for_each(|c| *c /= nrm);
            basis.push(cand);
        }
    }
    if basis.len() % 2 == 1 || rows.len() + basis.len() != n {
        return Err(Error::Numerical("could not bring the quadratic form to canonical form".into()));
    }
    for b in basis {
        rows.push(b);
    }
    energies.resize(l, 0.0);
    let o = DMatrix::from_fn(n, n, |i, j| rows[i][j]);
    let defect = (&o * o.transpose() - DMatrix::<f64>::identity(n, n)).abs().max();
    if defect > 1e-9 {
        return Err(Error::Numerical(format!("mode transform not orthogonal (defect {defect:e})")));
    }
    Ok((energies, o))
}

/// Majorana covariance `Γ_pq = i<a_p a_q>` of a Gaussian state.
#[derive(Clone, Debug, PartialEq)]
pub struct MajoranaCovariance {
    pub gamma: DMatrix<f64>,
    /// Zero modes were assigned occupation one half.
    pub degenerate: bool,
    /// Number-conserving states carry `C_ij = <c†_i c_j>` directly.
    pub number_correlation: Option<DMatrix<C64>>,
}

impl MajoranaCovariance {
    pub fn new(gamma: DMatrix<f64>) -> Result<Self> {
        let n = gamma.nrows();
        if n % 2 == 1 || gamma.ncols() != n {
            return Err(Error::Validation("covariance must be square of even size".into()));
        }
        let anti = (&gamma + gamma.transpose()).abs().max();
        if anti > 1e-10 {
            return Err(Error::Validation(format!("covariance not antisymmetric (defect {anti:e})")));
        }
        Ok(Self { gamma, degenerate: false, number_correlation: None })
    }

    pub fn sites(&self) -> usize {
        self.gamma.nrows() / 2
    }

    /// The infinite-temperature state Γ = 0.
    pub fn maximally_mixed(sites: usize) -> Self {
        Self { gamma: DMatrix::zeros(2 * sites, 2 * sites), degenerate: false, number_correlation: None }
    }

    /// Fock state with the listed sites occupied.
    pub fn fock(sites: usize, occupied: &[usize]) -> Result<Self> {
        let mut g = DMatrix::zeros(2 * sites, 2 * sites);
        for x in 0..sites {
            // empty site: i<a_{2x} a_{2x+1}> = -1; filled: +1
            let s = if occupied.contains(&x) { 1.0 } else { -1.0 };
            g[(2 * x, 2 * x + 1)] = s;
            g[(2 * x + 1, 2 * x)] = -s;
        }
        if let Some(&x) = occupied.iter().find(|&&x| x >= sites) {
            return Err(Error::Index(format!("site {x} out of range")));
        }
        Self::new(g)
    }

    /// Restriction to a set of sites (both Majoranas of each site, in the given order).
    pub fn restrict(&self, region: &[usize]) -> Result<DMatrix<f64>> {
        validate_region(region, self.sites())?;
        let idx: Vec<usize> = region.iter().flat_map(|&x| [2 * x, 2 * x + 1]).collect();
        Ok(DMatrix::from_fn(idx.len(), idx.len(), |i, j| self.gamma[(idx[i], idx[j])]))
    }

    /// `<e^{iπN}>` = `(−1)^L Pf(Γ)`.
    pub fn parity(&self) -> Result<f64> {
        let pf = pfaffian(&self.gamma)?;
        Ok(if self.sites() % 2 == 0 { pf } else { -pf })
    }
}

pub(crate) fn validate_region(region: &[usize], sites: usize) -> Result<()> {
    for (k, &x) in region.iter().enumerate() {
        if x >= sites {
            return Err(Error::Index(format!("region site {x} out of range for L = {sites}")));
        }
        if region[..k].contains(&x) {
            return Err(Error::Validation(format!("region lists site {x} twice")));
        }
    }
    Ok(())
}

/// Ground state of the form; zero modes are half filled.
pub fn ground_covariance(form: &BdGForm) -> Result<MajoranaCovariance> {
    let spec = bdg_diagonalize(form)?;
    Ok(covariance_with(&spec, |e| if e < ZERO_MODE_TOL { 0.0 } else { 1.0 }, None))
}

/// Ground state of a transverse-Ising or XX spin chain as a Gaussian state, with its energy.
///
/// Open chains map to open fermions. A periodic chain splits into the even sector
/// (antiperiodic fermions) and the odd sector (periodic fermions); the lower of the two
/// parity-projected ground states is returned, with the lowest mode filled when the
/// sector vacuum has the wrong parity.
pub fn chain_ground_covariance(model: &ChainModel) -> Result<(MajoranaCovariance, f64)> {
    if model.boundary == Boundary::Open {
        let form = BdGForm::from_chain(model, FermionBoundary::Open)?;
        let spec = bdg_diagonalize(&form)?;
        let e = spec.ground_energy;
        return Ok((covariance_with(&spec, |e| if e < ZERO_MODE_TOL { 0.0 } else { 1.0 }, None), e));
    }
    let sector = |boundary: FermionBoundary, parity: f64| -> Result<(BdgSpectrum, f64, bool)> {
        let spec = bdg_diagonalize(&BdGForm::from_chain(model, boundary)?)?;
        let flip = spec.vacuum_parity != parity;
        let e = spec.ground_energy + if flip { spec.energies.iter().copied().fold(f64::INFINITY, f64::min) } else { 0.0 };
        Ok((spec, e, flip))
    };
    let even = sector(FermionBoundary::Antiperiodic, 1.0)?;
    let odd = sector(FermionBoundary::Periodic, -1.0)?;
    let scale = 1.0 + even.1.abs();
    let degenerate = (even.1 - odd.1).abs() < 1e-10 * scale;
    let (spec, energy, flip) = if odd.1 < even.1 && !degenerate { odd } else { even };
    let mut t = vec![1.0; spec.energies.len()];
    let mut cov = if flip {
        let k = (0..t.len()).min_by(|&a, &b| spec.energies[a].total_cmp(&spec.energies[b])).expect("at least one mode");
        t[k] = -1.0;
        MajoranaCovariance { gamma: spec.covariance_from_weights(&t), degenerate: false, number_correlation: None }
    } else {
        covariance_with(&spec, |e| if e < ZERO_MODE_TOL { 0.0 } else { 1.0 }, None)
    };
    cov.degenerate |= degenerate || spec.zero_modes > 0;
    Ok((cov, energy))
}

/// Thermal state `e^{−βH}/Z`.
pub fn thermal_covariance(form: &BdGForm, beta: f64) -> Result<MajoranaCovariance> {
    if !(beta >= 0.0) || !beta.is_finite() {
        return Err(Error::Validation(format!("inverse temperature must be finite and non-negative, got {beta}")));
    }
    let spec = bdg_diagonalize(form)?;
    Ok(covariance_with(&spec, |e| (0.5 * beta * e).tanh(), Some(beta)))
}

fn covariance_with(spec: &BdgSpectrum, weight: impl Fn(f64) -> f64, beta: Option<f64>) -> MajoranaCovariance {
    let t: Vec<f64> = spec.energies.iter().map(|&e| weight(e)).collect();
    let gamma = spec.covariance_from_weights(&t);
    let number_correlation = spec.single_particle.as_ref().map(|(vals, vecs)| {
        let occ: Vec<f64> = vals
            .iter()
            .map(|&e| match beta {
                Some(b) => fermi(b * e),
                None if e.abs() < ZERO_MODE_TOL => 0.5,
                None if e < 0.0 => 1.0,
                None => 0.0,
            })
            .collect();
        let n = vecs.nrows();
        let mut scaled = vecs.clone();
        for (k, &f) in occ.iter().enumerate() {
            for i in 0..n {
                scaled[(i, k)] *= C64::new(f, 0.0);
            }
        }
        (scaled * vecs.adjoint()).transpose()
    });
    let degenerate = spec.zero_modes > 0 && beta.is_none();
    MajoranaCovariance { gamma, degenerate, number_correlation }
}

fn fermi(x: f64) -> f64 {
    if x > 0.0 {
        let e = (-x).exp();
        e / (1.0 + e)
    } else {
        1.0 / (1.0 + x.exp())
    }
}

/// `<a_{i_1} a_{i_2} … a_{i_k}>` in the Gaussian state by Wick's theorem.
///
/// Repeated indices are first reduced with `a_p² = 1` and the anticommutation relations.
pub fn majorana_string_expectation(cov: &MajoranaCovariance, indices: &[usize]) -> Result<C64> {
    let n = cov.gamma.nrows();
    if let Some(&p) = indices.iter().find(|&&p| p >= n) {
        return Err(Error::Index(format!("Majorana index {p} out of range (2L = {n})")));
    }
    let (sign, reduced) = reduce_majorana_word(indices);
    if reduced.len() % 2 == 1 {
        return Ok(ZERO);
    }
    if reduced.is_empty() {
        return Ok(C64::new(sign, 0.0));
    }
    let k = reduced.len();
    let m = DMatrix::from_fn(k, k, |r, s| {
        if r < s {
            -I * cov.gamma[(reduced[r], reduced[s])]
        } else if r > s {
            I * cov.gamma[(reduced[s], reduced[r])]
        } else {
            ZERO
        }
    });
    Ok(pfaffian::pfaffian_unchecked(m) * sign)
}

/// Sorts a Majorana word, tracking the anticommutation sign and cancelling squares.
pub(crate) fn reduce_majorana_word(indices: &[usize]) -> (f64, Vec<usize>) {
    let mut w = indices.to_vec();
    let mut sign = 1.0;
    // insertion sort: each adjacent swap of distinct Majoranas flips the sign
    for i in 1..w.len() {
        let mut j = i;
        while j > 0 && w[j - 1] > w[j] {
            w.swap(j - 1, j);
            sign = -sign;
            j -= 1;
        }
    }
    let mut out: Vec<usize> = Vec::with_capacity(w.len());
    for p in w {
        if out.last() == Some(&p) {
            out.pop();
        } else {
            out.push(p);
        }
    }
    (sign, out)
}

/// `C_ij = <c†_i c_j>` for sites `i, j` in the region.
pub fn number_correlation_matrix(cov: &MajoranaCovariance, region: &[usize]) -> Result<DMatrix<C64>> {
    validate_region(region, cov.sites())?;
    if let Some(c) = &cov.number_correlation {
        return Ok(DMatrix::from_fn(region.len(), region.len(), |i, j| c[(region[i], region[j])]));
    }
    let g = &cov.gamma;
    let pair = |p: usize, q: usize| -> C64 {
        if p == q {
            ONE
        } else {
            -I * g[(p, q)]
        }
    };
    Ok(DMatrix::from_fn(region.len(), region.len(), |i, j| {
        let (x, y) = (region[i], region[j]);
        (pair(2 * x, 2 * y) + I * pair(2 * x, 2 * y + 1) - I * pair(2 * x + 1, 2 * y) + pair(2 * x + 1, 2 * y + 1)) * 0.25
    }))
}
