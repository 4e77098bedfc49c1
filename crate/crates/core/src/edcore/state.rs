use nalgebra::DMatrix;
use num_complex::Complex64 as C64;

use super::operator::ManyBodyOperator;
use crate::error::{Error, Result};
use crate::linalg::{self, ONE, ZERO};

/// Largest chain handled by dense diagonalization (thermal states, evolution).
pub const MAX_DENSE_SITES: usize = 12;
/// Above this dimension ground states are found by Lanczos.
const DENSE_GROUND_DIM: usize = 1024;

#[derive(Clone, Debug, PartialEq)]
pub enum StatePayload {
    Pure(Vec<C64>),
    Density(DMatrix<C64>),
}

#[derive(Clone, Debug, PartialEq)]
pub struct StateRecord {
    pub sites: usize,
    pub payload: StatePayload,
    pub energy: Option<f64>,
    pub beta: Option<f64>,
    /// Set when the lowest level is degenerate within the threshold.
    pub degenerate: bool,
    /// Distance to the next level, when known.
    pub gap: Option<f64>,
}

impl StateRecord {
    pub fn pure(sites: usize, v: Vec<C64>) -> Result<Self> {
        let expected = 1usize << sites;
        if v.len() != expected {
            return Err(Error::DimensionMismatch { expected, found: v.len() });
        }
        let n = linalg::norm(&v);
        if (n - 1.0).abs() > 1e-12 {
            return Err(Error::Validation(format!("state vector has norm {n}")));
        }
        Ok(Self { sites, payload: StatePayload::Pure(v), energy: None, beta: None, degenerate: false, gap: None })
    }

    pub fn density(sites: usize, rho: DMatrix<C64>) -> Result<Self> {
        let expected = 1usize << sites;
        if rho.nrows() != expected || rho.ncols() != expected {
            return Err(Error::DimensionMismatch { expected, found: rho.nrows() });
        }
        let s = Self { sites, payload: StatePayload::Density(rho), energy: None, beta: None, degenerate: false, gap: None };
        s.validate()?;
        Ok(s)
    }

    /// Product state with the given local amplitudes `(a_up, a_down)` per site.
    pub fn product(local: &[(C64, C64)]) -> Result<Self> {
        let mut v = vec![ONE];
        for &(a, b) in local {
            let n = (a.norm_sqr() + b.norm_sqr()).sqrt();
            let mut next = Vec::with_capacity(v.len() * 2);
            for amp in &v {
                next.push(amp * a / n);
                next.push(amp * b / n);
            }
            v = next;
        }
        Self::pure(local.len(), v)
    }

    pub fn dim(&self) -> usize {
        1 << self.sites
    }

    pub fn validate(&self) -> Result<()> {
        match &self.payload {
            StatePayload::Pure(v) => {
                let n = linalg::norm(v);
                if (n - 1.0).abs() > 1e-12 {
                    return Err(Error::Validation(format!("state vector has norm {n}")));
                }
            }
            StatePayload::Density(rho) => {
                let herm = (rho - rho.adjoint()).iter().map(|z| z.norm()).fold(0.0, f64::max);
                if herm > 1e-10 {
                    return Err(Error::Validation(format!("density matrix not Hermitian (defect {herm:e})")));
                }
                let tr = rho.trace();
                if (tr - ONE).norm() > 1e-10 {
                    return Err(Error::Validation(format!("density matrix trace {tr}")));
                }
                let (vals, _) = linalg::eigh(rho);
                if vals.first().copied().unwrap_or(0.0) < -1e-10 {
                    return Err(Error::Validation("density matrix has a negative eigenvalue".into()));
                }
            }
        }
        Ok(())
    }

    /// The state as a density matrix.
    pub fn to_density(&self) -> DMatrix<C64> {
        match &self.payload {
            StatePayload::Pure(v) => {
                let n = v.len();
                DMatrix::from_fn(n, n, |i, j| v[i] * v[j].conj())
            }
            StatePayload::Density(rho) => rho.clone(),
        }
    }
}

#[derive(Clone, Debug)]
pub struct GroundStateOptions<'a> {
    /// Relative degeneracy threshold; the flag is raised when the gap is below `tol·‖H‖`.
    pub degeneracy_tol: f64,
    /// Restrict to the `s` eigenspace of an involutive symmetry `S` (S² = 1, [H, S] = 0).
    pub sector: Option<(&'a ManyBodyOperator, f64)>,
    /// Residual tolerance for the Lanczos path.
    pub lanczos_tol: f64,
}

impl Default for GroundStateOptions<'_> {
    fn default() -> Self {
        Self { degeneracy_tol: 1e-10, sector: None, lanczos_tol: 1e-12 }
    }
}

/// Lowest eigenvector of a Hermitian operator.
pub fn ground_state(h: &ManyBodyOperator) -> Result<StateRecord> {
    ground_state_with(h, &GroundStateOptions::default())
}

pub fn ground_state_with(h: &ManyBodyOperator, opts: &GroundStateOptions) -> Result<StateRecord> {
    let defect = h.hermiticity_defect();
    let scale = h.matrix().max_abs().max(1.0);
    if defect > 1e-12 * scale {
        return Err(Error::Validation(format!("Hamiltonian is not Hermitian (defect {defect:e})")));
    }
    let bound = h.matrix().norm_bound();
    let work = match opts.sector {
        Some((s, value)) => {
            if s.dim() != h.dim() {
                return Err(Error::DimensionMismatch { expected: h.dim(), found: s.dim() });
            }
            // H + shift·(1 - value·S)/2 pushes the unwanted sector above the spectrum
            let shift = C64::new(2.0 * bound + 1.0, 0.0);
            let id = ManyBodyOperator::identity(h.sites());
            let proj_out = id.combine(C64::new(0.5, 0.0), s, C64::new(-0.5 * value, 0.0))?;
            h.combine(ONE, &proj_out, shift)?
        }
        None => h.clone(),
    };

    let (e0, e1, mut v, hnorm) = if h.dim() <= DENSE_GROUND_DIM {
        let (vals, vecs) = linalg::eigh(&work.to_dense());
        let hnorm = h.eigenvalues_hermitian().iter().map(|e| e.abs()).fold(0.0, f64::max);
        let v: Vec<C64> = vecs.column(0).iter().copied().collect();
        (vals[0], vals.get(1).copied(), v, hnorm)
    } else {
        let apply = |x: &[C64]| work.apply(x);
        let r0 = linalg::lanczos_lowest(&apply, work.dim(), &[], opts.lanczos_tol, 300)?;
        let r1 = linalg::lanczos_lowest(&apply, work.dim(), std::slice::from_ref(&r0.vector), opts.lanczos_tol, 300)?;
        (r0.value, Some(r1.value), r0.vector, bound)
    };
    fix_phase(&mut v);
    let gap = e1.map(|e| e - e0);
    let degenerate = gap.is_some_and(|g| g < opts.degeneracy_tol * hnorm.max(f64::MIN_POSITIVE));
    let energy = {
        let hv = h.apply(&v);
        linalg::dot(&v, &hv).re
    };
    Ok(StateRecord { sites: h.sites(), payload: StatePayload::Pure(v), energy: Some(energy), beta: None, degenerate, gap })
}

/// Makes the first component of (near-)maximal modulus real and positive.
fn fix_phase(v: &mut [C64]) {
    let max = v.iter().map(|z| z.norm()).fold(0.0, f64::max);
    if let Some(pivot) = v.iter().copied().find(|z| z.norm() >= 0.5 * max) {
        let phase = pivot.conj() / pivot.norm();
        v.iter_mut().for_each(|z| *z *= phase);
    }
}

fn check_dense(h: &ManyBodyOperator) -> Result<()> {
    if h.sites() > MAX_DENSE_SITES {
        return Err(Error::Capacity(format!(
            "dense diagonalization is limited to {MAX_DENSE_SITES} sites, got {}",
            h.sites()
        )));
    }
    Ok(())
}

/// `exp(-βH)/Tr exp(-βH)`.
pub fn thermal_density_matrix(h: &ManyBodyOperator, beta: f64) -> Result<StateRecord> {
    if !(beta >= 0.0) || !beta.is_finite() {
        return Err(Error::Validation(format!("inverse temperature must be finite and non-negative, got {beta}")));
    }
    check_dense(h)?;
    let (vals, vecs) = linalg::eigh(&h.to_dense());
    let e0 = vals[0];
    let weights: Vec<f64> = vals.iter().map(|e| (-beta * (e - e0)).exp()).collect();
    let z: f64 = weights.iter().sum();
    let n = h.dim();
    let mut scaled = vecs.clone();
    for (k, w) in weights.iter().enumerate() {
        let f = C64::new(w / z, 0.0);
        for i in 0..n {
            scaled[(i, k)] *= f;
        }
    }
    let mut rho = scaled * vecs.adjoint();
    rho = (&rho + rho.adjoint()) * C64::new(0.5, 0.0);
    let energy = vals.iter().zip(&weights).map(|(e, w)| e * w / z).sum();
    Ok(StateRecord {
        sites: h.sites(),
        payload: StatePayload::Density(rho),
        energy: Some(energy),
        beta: Some(beta),
        degenerate: false,
        gap: vals.get(1).map(|e| e - e0),
    })
}

/// `<ψ|o|ψ>` or `Tr(ρ o)`.
pub fn expectation(state: &StateRecord, o: &ManyBodyOperator) -> Result<C64> {
    if state.dim() != o.dim() {
        return Err(Error::DimensionMismatch { expected: state.dim(), found: o.dim() });
    }
    Ok(match &state.payload {
        StatePayload::Pure(v) => linalg::dot(v, &o.apply(v)),
        StatePayload::Density(rho) => {
            let m = o.matrix();
            let mut acc = ZERO;
            for i in 0..m.dim() {
                for (j, a) in m.row(i) {
                    acc += a * rho[(j, i)];
                }
            }
            acc
        }
    })
}

/// `e^{iHt} o e^{-iHt}` from the spectral decomposition of `H`.
pub fn heisenberg_evolve(h: &ManyBodyOperator, o: &ManyBodyOperator, t: f64) -> Result<ManyBodyOperator> {
    if h.dim() != o.dim() {
        return Err(Error::DimensionMismatch { expected: h.dim(), found: o.dim() });
    }
    if !t.is_finite() {
        return Err(Error::Validation(format!("time must be finite, got {t}")));
    }
    if t == 0.0 {
        return Ok(o.clone());
    }
    check_dense(h)?;
    let u = linalg::hermitian_function(&h.to_dense(), |e| C64::from_polar(1.0, e * t));
    let evolved = &u * o.to_dense() * u.adjoint();
    ManyBodyOperator::from_dense(h.sites(), &evolved)
}

/// `e^{-iHt} v` by Krylov propagation (no dense diagonalization).
pub fn evolve_vector(h: &ManyBodyOperator, v: &[C64], t: f64) -> Result<Vec<C64>> {
    if v.len() != h.dim() {
        return Err(Error::DimensionMismatch { expected: h.dim(), found: v.len() });
    }
    Ok(linalg::krylov_evolve(&|x| h.apply(x), v, t, h.matrix().norm_bound()))
}
