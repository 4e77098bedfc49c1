//! Jordan-Wigner dictionary between spin-1/2 chains and lattice fermions.
//!
//! `c_x = (∏_{x'<x} σ³_{x'}) σ⁺_x`, so `σ³_x = 1 − 2 c†_x c_x` and the
//! string extends to the left of its site.

use num_complex::Complex64 as C64;

use crate::edcore::{
    build_spin_hamiltonian, expectation, product_operator, ChainModel, Family, ManyBodyOperator, SiteOp, StateRecord,
    Support, Boundary,
};
use crate::error::{Error, Result};
use crate::gaussian::{BdGForm, FermionBoundary, MajoranaCovariance};
use crate::linalg::{I, ONE};

/// Tolerance for the anticommutator checks done at construction.
const CAR_TOL: f64 = 1e-13;

#[derive(Clone, Debug)]
pub struct FermionOperatorSet {
    pub sites: usize,
    pub c: Vec<ManyBodyOperator>,
    pub c_dag: Vec<ManyBodyOperator>,
    /// `e^{iπN}`.
    pub parity: ManyBodyOperator,
    pub number: ManyBodyOperator,
}

fn string_factors(x: usize, last: SiteOp) -> Vec<(usize, crate::edcore::Local2)> {
    let mut f: Vec<_> = (0..x).map(|y| (y, SiteOp::Sigma3.matrix())).collect();
    f.push((x, last.matrix()));
    f
}

/// Fermion operators built from spin operators; checks the canonical anticommutation relations.
pub fn jw_fermions_from_spins(sites: usize) -> Result<FermionOperatorSet> {
    let mut c = Vec::with_capacity(sites);
    let mut c_dag = Vec::with_capacity(sites);
    for x in 0..sites {
        c.push(product_operator(sites, &string_factors(x, SiteOp::SigmaPlus))?.with_support(Some(Support::new(0, x))));
        c_dag.push(product_operator(sites, &string_factors(x, SiteOp::SigmaMinus))?.with_support(Some(Support::new(0, x))));
    }
    let parity = product_operator(sites, &(0..sites).map(|y| (y, SiteOp::Sigma3.matrix())).collect::<Vec<_>>())?;
    let mut number = ManyBodyOperator::zeros(sites);
    for x in 0..sites {
        number = number.add(&c_dag[x].mul(&c[x])?)?;
    }
    let set = FermionOperatorSet { sites, c, c_dag, parity, number };
    let defect = set.car_defect()?;
    if defect > CAR_TOL {
        return Err(Error::Numerical(format!("anticommutation relations violated by {defect:e}")));
    }
    Ok(set)
}

impl FermionOperatorSet {
    /// Largest entry of any `{c_x, c†_y} − δ_xy` or `{c_x, c_y}`.
    pub fn car_defect(&self) -> Result<f64> {
        let id = ManyBodyOperator::identity(self.sites);
        let mut worst: f64 = 0.0;
        for x in 0..self.sites {
            for y in 0..self.sites {
                let mut ac = self.c[x].anticommutator(&self.c_dag[y])?;
                if x == y {
                    ac = ac.sub(&id)?;
                }
                worst = worst.max(ac.matrix().max_abs());
                worst = worst.max(self.c[x].anticommutator(&self.c[y])?.matrix().max_abs());
            }
        }
        Ok(worst)
    }

    pub fn n(&self, x: usize) -> Result<ManyBodyOperator> {
        self.c_dag[x].mul(&self.c[x])
    }

    /// Majorana operators `a_{2x} = c_x + c†_x`, `a_{2x+1} = −i(c_x − c†_x)`.
    pub fn majoranas(&self) -> Result<Vec<ManyBodyOperator>> {
        let mut out = Vec::with_capacity(2 * self.sites);
        for x in 0..self.sites {
            out.push(self.c[x].add(&self.c_dag[x])?);
            out.push(self.c[x].combine(-I, &self.c_dag[x], I)?);
        }
        Ok(out)
    }

    /// `Σ A_ij c†_i c_j + ½ Σ (B_ij c†_i c†_j + h.c.) + const` on the spin space.
    pub fn quadratic_operator(&self, form: &BdGForm) -> Result<ManyBodyOperator> {
        let l = self.sites;
        if form.sites() != l {
            return Err(Error::DimensionMismatch { expected: l, found: form.sites() });
        }
        let mut h = ManyBodyOperator::identity(l).scale(C64::new(form.constant, 0.0));
        for i in 0..l {
            for j in 0..l {
                let a = form.a[(i, j)];
                if a != C64::new(0.0, 0.0) {
                    h = h.add(&self.c_dag[i].mul(&self.c[j])?.scale(a))?;
                }
                let b = form.b[(i, j)];
                if b != C64::new(0.0, 0.0) {
                    let pair = self.c_dag[i].mul(&self.c_dag[j])?;
                    h = h.add(&pair.scale(0.5 * b))?;
                    h = h.add(&pair.adjoint().scale(0.5 * b.conj()))?;
                }
            }
        }
        Ok(h)
    }
}

/// Fermionic forms of a periodic chain in the two parity sectors.
#[derive(Clone, Debug)]
pub struct SectorForms {
    /// Acts on even fermion number (antiperiodic fermions).
    pub even: BdGForm,
    /// Acts on odd fermion number (periodic fermions).
    pub odd: BdGForm,
    /// `max |H − P_e H_e − P_o H_o|` on the spin space.
    pub residual: f64,
}

/// Splits a periodic transverse-Ising or XX chain into its parity sectors and checks
/// `H = P_e H_e + P_o H_o` as a matrix identity.
pub fn sector_hamiltonians(model: &ChainModel) -> Result<SectorForms> {
    if !matches!(model.family, Family::TransverseIsing | Family::Xx) {
        return Err(Error::Validation("sector decomposition needs a quadratic (transverse-Ising or XX) chain".into()));
    }
    if model.boundary != Boundary::Periodic {
        return Err(Error::Validation("sector decomposition is defined for periodic chains".into()));
    }
    let even = BdGForm::from_chain(model, FermionBoundary::Antiperiodic)?;
    let odd = BdGForm::from_chain(model, FermionBoundary::Periodic)?;
    let fermions = jw_fermions_from_spins(model.length)?;
    let h = build_spin_hamiltonian(model)?;
    let id = ManyBodyOperator::identity(model.length);
    let half = C64::new(0.5, 0.0);
    let p_even = id.combine(half, &fermions.parity, half)?;
    let p_odd = id.combine(half, &fermions.parity, -half)?;
    let rebuilt = p_even
        .mul(&fermions.quadratic_operator(&even)?)?
        .add(&p_odd.mul(&fermions.quadratic_operator(&odd)?)?)?;
    let residual = h.max_abs_diff(&rebuilt)?;
    Ok(SectorForms { even, odd, residual })
}

/// Compares `<σ⁻_x σ⁺_{x'}>` with the two-point function of the Z₂-odd fermionic twist
/// `𝒯(x) = ∏_{y≥x}(1 − 2 n_y) c_x`; returns `(direct, via twists, |difference|)`.
pub fn spin_twist_identity_check(x: usize, xp: usize, state: &StateRecord) -> Result<(C64, C64, f64)> {
    let l = state.sites;
    if x > xp || xp >= l {
        return Err(Error::Index(format!("need x <= x' < L, got x = {x}, x' = {xp}, L = {l}")));
    }
    let sm = product_operator(l, &[(x, SiteOp::SigmaMinus.matrix())])?;
    let sp = product_operator(l, &[(xp, SiteOp::SigmaPlus.matrix())])?;
    let direct = expectation(state, &sm.mul(&sp)?)?;

    let f = jw_fermions_from_spins(l)?;
    let twist = |y0: usize| -> Result<ManyBodyOperator> {
        let id = ManyBodyOperator::identity(l);
        let mut t = id.clone();
        for y in y0..l {
            t = t.mul(&id.combine(ONE, &f.n(y)?, C64::new(-2.0, 0.0))?)?;
        }
        t.mul(&f.c[y0])
    };
    let via = expectation(state, &twist(x)?.adjoint().mul(&twist(xp)?)?)?;
    Ok((direct, via, (direct - via).norm()))
}

/// `Γ_pq = i<a_p a_q>` measured on a spin state (p ≠ q).
pub fn majorana_covariance_of_state(state: &StateRecord) -> Result<MajoranaCovariance> {
    let f = jw_fermions_from_spins(state.sites)?;
    let a = f.majoranas()?;
    let n = a.len();
    let mut g = nalgebra::DMatrix::<f64>::zeros(n, n);
    for p in 0..n {
        for q in p + 1..n {
            let v = I * expectation(state, &a[p].mul(&a[q])?)?;
            g[(p, q)] = v.re;
            g[(q, p)] = -v.re;
        }
    }
    MajoranaCovariance::new(g)
}
