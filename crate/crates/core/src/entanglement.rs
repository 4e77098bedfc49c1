//! Rényi entropies three ways: replica permutation strings, reduced density
//! matrices, and Gaussian correlation spectra.

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::correlators::{linear_fit, RegionCorrelations};
use crate::edcore::{CsrMatrix, ManyBodyOperator, StatePayload, StateRecord};
use crate::error::{ensure_finite, Error, Result};
use crate::gaussian::{number_correlation_matrix, MajoranaCovariance};
use crate::linalg::{self, ZERO};

/// Largest region for a dense reduced density matrix.
pub const MAX_RDM_SITES: usize = 12;
/// Largest replica space `n·L` for the permutation-string path.
pub const MAX_REPLICA_QUBITS: usize = 24;
/// Largest replica space for which the permutation string is built as a matrix.
pub const MAX_REPLICA_OPERATOR_QUBITS: usize = 16;

/// Eigenvalues below this are dropped from `Tr ρ^n`.
const SPECTRUM_FLOOR: f64 = 1e-14;
const NEGATIVITY_TOL: f64 = 1e-10;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EntropyMethod {
    Replica,
    ReducedDensityMatrix,
    Covariance,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EntropyRecord {
    pub region: Vec<usize>,
    pub order: f64,
    /// `Tr ρ_A^n`; for n = 1 this is 1.
    pub trace_power: f64,
    /// `log(Tr ρ_A^n)/(1−n)`, or the von Neumann entropy at n = 1.
    pub entropy: f64,
    pub method: EntropyMethod,
}

impl EntropyRecord {
    pub fn with_region(mut self, region: &[usize]) -> Self {
        self.region = region.to_vec();
        self
    }
}

fn validate_order(n: f64) -> Result<()> {
    ensure_finite("Renyi order", n)?;
    if n <= 0.0 {
        return Err(Error::Validation(format!("Renyi order must be positive, got {n}")));
    }
    Ok(())
}

fn validate_region(region: &[usize], sites: usize) -> Result<()> {
    if region.is_empty() {
        return Err(Error::Validation("empty region".into()));
    }
    let mut seen = vec![false; sites];
    for &x in region {
        if x >= sites {
            return Err(Error::Index(format!("site {x} outside a chain of {sites}")));
        }
        if std::mem::replace(&mut seen[x], true) {
            return Err(Error::Validation(format!("site {x} repeated in region")));
        }
    }
    Ok(())
}

/// Partial trace onto `region`; the first listed site is the most significant bit of ρ_A.
pub fn reduced_density_matrix(state: &StateRecord, region: &[usize]) -> Result<DMatrix<C64>> {
    let l = state.sites;
    validate_region(region, l)?;
    if region.len() > MAX_RDM_SITES {
        return Err(Error::Capacity(format!("region of {} sites exceeds {MAX_RDM_SITES}", region.len())));
    }
    let rest: Vec<usize> = (0..l).filter(|x| !region.contains(x)).collect();
    let (da, db) = (1usize << region.len(), 1usize << rest.len());
    // full basis index of (a, b); site x is bit L−1−x
    let compose = |sites: &[usize], k: usize| -> usize {
        sites.iter().enumerate().fold(0, |acc, (i, &x)| acc | ((k >> (sites.len() - 1 - i)) & 1) << (l - 1 - x))
    };
    let a_part: Vec<usize> = (0..da).map(|a| compose(region, a)).collect();
    let b_part: Vec<usize> = (0..db).map(|b| compose(&rest, b)).collect();
    let mut rho = DMatrix::<C64>::zeros(da, da);
    match &state.payload {
        StatePayload::Pure(v) => {
            let m = DMatrix::from_fn(da, db, |a, b| v[a_part[a] | b_part[b]]);
            rho = &m * m.adjoint();
        }
        StatePayload::Density(full) => {
            for a in 0..da {
                for ap in 0..da {
                    rho[(a, ap)] = b_part.iter().map(|&b| full[(a_part[a] | b, a_part[ap] | b)]).sum();
                }
            }
        }
    }
    Ok((&rho + rho.adjoint()) * C64::new(0.5, 0.0))
}

fn entropy_from_probabilities(p: &[f64], n: f64) -> (f64, f64) {
    if n == 1.0 {
        let s = p.iter().filter(|&&x| x >= SPECTRUM_FLOOR).map(|&x| -x * x.ln()).sum();
        return (1.0, s);
    }
    let tr: f64 = p.iter().filter(|&&x| x >= SPECTRUM_FLOOR).map(|&x| x.powf(n)).sum();
    (tr, tr.ln() / (1.0 - n))
}

/// `S_n` from the spectrum of ρ_A; n = 1 gives the von Neumann entropy.
pub fn renyi_from_rdm(rho: &DMatrix<C64>, n: f64) -> Result<EntropyRecord> {
    validate_order(n)?;
    if !rho.is_square() {
        return Err(Error::Validation("reduced density matrix must be square".into()));
    }
    let (p, _) = linalg::eigh(rho);
    if let Some(&low) = p.first() {
        if low < -NEGATIVITY_TOL {
            return Err(Error::Numerical(format!("reduced density matrix has eigenvalue {low:e}")));
        }
    }
    let (trace_power, entropy) = entropy_from_probabilities(&p, n);
    Ok(EntropyRecord { region: vec![], order: n, trace_power, entropy, method: EntropyMethod::ReducedDensityMatrix })
}

fn replica_site(copy: usize, x: usize, sites: usize) -> usize {
    copy * sites + x
}

/// Image of a replica basis index under the cyclic permutation on `region`:
/// copy `r+1` receives what copy `r` held (copy `r−1` with `inverse`).
fn permute_replicas(index: usize, sites: usize, n: usize, region: &[usize], inverse: bool) -> usize {
    let total = n * sites;
    let bit = |q: usize| total - 1 - q;
    let mut out = index;
    for &x in region {
        for r in 0..n {
            let src = replica_site(r, x, sites);
            let dst = replica_site(if inverse { (r + n - 1) % n } else { (r + 1) % n }, x, sites);
            let v = (index >> bit(src)) & 1;
            out = (out & !(1 << bit(dst))) | (v << bit(dst));
        }
    }
    out
}

/// `∏_{x∈A} P_s(x)` on `n` copies of an L-site chain; copy r, site x is replica site `rL + x`.
pub fn replica_permutation_operator(sites: usize, n: usize, region: &[usize], inverse: bool) -> Result<ManyBodyOperator> {
    validate_region(region, sites)?;
    if n == 0 {
        return Err(Error::Validation("replica number must be at least 1".into()));
    }
    let total = n * sites;
    if total > MAX_REPLICA_OPERATOR_QUBITS {
        return Err(Error::Capacity(format!("replica space of {total} qubits exceeds {MAX_REPLICA_OPERATOR_QUBITS}")));
    }
    let dim = 1usize << total;
    let triplets = (0..dim)
        .map(|i| (permute_replicas(i, sites, n, region, inverse), i, C64::new(1.0, 0.0)))
        .collect();
    ManyBodyOperator::new(total, CsrMatrix::from_triplets(dim, triplets), None)
}

/// `Tr(ρ^{⊗n} ∏_{x∈A} P_s(x))`, which equals `Tr ρ_A^n`.
///
/// The replica state is never stored: each basis term is a product of n entries of ρ.
pub fn tr_rhoa_n_replica(state: &StateRecord, region: &[usize], n: usize) -> Result<f64> {
    let l = state.sites;
    validate_region(region, l)?;
    if n == 0 {
        return Err(Error::Validation("replica number must be at least 1".into()));
    }
    if n * l > MAX_REPLICA_QUBITS {
        return Err(Error::Capacity(format!("replica space 2^{} exceeds 2^{MAX_REPLICA_QUBITS}", n * l)));
    }
    let d = 1usize << l;
    let mask = d - 1;
    let digit = |index: usize, r: usize| (index >> ((n - 1 - r) * l)) & mask;
    let entry: Box<dyn Fn(usize, usize) -> C64> = match &state.payload {
        StatePayload::Pure(v) => Box::new(move |i, j| v[i] * v[j].conj()),
        StatePayload::Density(rho) => Box::new(move |i, j| rho[(i, j)]),
    };
    let mut total = ZERO;
    for i in 0..1usize << (n * l) {
        let j = permute_replicas(i, l, n, region, false);
        let mut term = C64::new(1.0, 0.0);
        for r in 0..n {
            term *= entry(digit(i, r), digit(j, r));
            if term == ZERO {
                break;
            }
        }
        total += term;
    }
    if total.im.abs() > 1e-10 {
        return Err(Error::Numerical(format!("replica trace has imaginary part {:e}", total.im)));
    }
    Ok(total.re)
}

/// Entanglement spectrum `ν_k ∈ [0, 1]` of a Gaussian region.
pub fn entanglement_spectrum(input: RegionCorrelations<'_>) -> Result<Vec<f64>> {
    input.validate()?;
    let raw: Vec<f64> = match input {
        RegionCorrelations::NumberConserving(c) => linalg::eigh(&((c + c.adjoint()) * C64::new(0.5, 0.0))).0,
        RegionCorrelations::Majorana(g) => {
            // iΓ has eigenvalues ±γ_k; ν_k = (1 + γ_k)/2
            let ig = g.map(|x| C64::new(0.0, x));
            let (vals, _) = linalg::eigh(&ig);
            let l = vals.len() / 2;
            vals[l..].iter().map(|&gk| 0.5 * (1.0 + gk)).collect()
        }
    };
    raw.into_iter()
        .map(|nu| {
            if !(-NEGATIVITY_TOL..=1.0 + NEGATIVITY_TOL).contains(&nu) {
                Err(Error::Numerical(format!("occupation {nu} outside [0, 1]")))
            } else {
                Ok(nu.clamp(0.0, 1.0))
            }
        })
        .collect()
}

/// `Tr ρ_A^n = ∏_k [ν_k^n + (1−ν_k)^n]` from the correlation spectrum.
pub fn renyi_from_covariance(input: RegionCorrelations<'_>, n: f64) -> Result<EntropyRecord> {
    validate_order(n)?;
    let nu = entanglement_spectrum(input)?;
    let binary = |x: f64| if x <= 0.0 || x >= 1.0 { 0.0 } else { -x * x.ln() - (1.0 - x) * (1.0 - x).ln() };
    let (trace_power, entropy) = if n == 1.0 {
        (1.0, nu.iter().map(|&x| binary(x)).sum())
    } else {
        let log_tr: f64 = nu
            .iter()
            .map(|&x| if x == 0.0 || x == 1.0 { 0.0 } else { (x.powf(n) + (1.0 - x).powf(n)).ln() })
            .sum();
        (log_tr.exp(), log_tr / (1.0 - n))
    };
    Ok(EntropyRecord { region: vec![], order: n, trace_power, entropy, method: EntropyMethod::Covariance })
}

/// Rényi entropy of `region` in a Gaussian state, with the determinant data when available.
pub fn renyi_from_gaussian(cov: &MajoranaCovariance, region: &[usize], n: f64) -> Result<EntropyRecord> {
    let rec = if cov.number_correlation.is_some() {
        let c = number_correlation_matrix(cov, region)?;
        renyi_from_covariance(RegionCorrelations::NumberConserving(&c), n)?
    } else {
        let g = cov.restrict(region)?;
        renyi_from_covariance(RegionCorrelations::Majorana(&g), n)?
    };
    Ok(rec.with_region(region))
}

/// Power-law fit of `−log Tr ρ_A^n` against the chord length.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CftFit {
    pub exponent: f64,
    /// `c = 6K·n/(n²−1)`.
    pub central_charge: f64,
    pub intercept: f64,
    pub r_squared: f64,
    pub poor_fit: bool,
    pub rms_residual: f64,
    /// Region sizes that entered the fit.
    pub sizes: Vec<usize>,
}

/// Smallest coefficient of determination accepted without a poor-fit flag.
pub const MIN_R_SQUARED: f64 = 0.999;

/// Fits `−log Tr ρ_A^n = K log((L/π) sin(πℓ/L)) + const` using even ℓ in `[L/16, L/4]`.
pub fn cft_exponent_fit(data: &[(usize, f64)], chain_length: usize, n: f64) -> Result<CftFit> {
    validate_order(n)?;
    if n == 1.0 {
        return Err(Error::Validation("the trace exponent is defined for n ≠ 1".into()));
    }
    let l = chain_length as f64;
    let (lo, hi) = (chain_length.div_ceil(16), chain_length / 4);
    let pts: Vec<(usize, f64)> =
        data.iter().copied().filter(|&(s, _)| s % 2 == 0 && (lo..=hi).contains(&s)).collect();
    if pts.len() < 3 {
        return Err(Error::Validation(format!(
            "need at least 3 even region sizes in [{lo}, {hi}], got {}",
            pts.len()
        )));
    }
    let xs: Vec<f64> = pts.iter().map(|&(s, _)| (l / std::f64::consts::PI * (std::f64::consts::PI * s as f64 / l).sin()).ln()).collect();
    let ys: Vec<f64> = pts.iter().map(|p| p.1).collect();
    for &y in &ys {
        ensure_finite("-log Tr rho^n", y)?;
    }
    let (k, c0, rms) = linear_fit(&xs, &ys);
    let my = ys.iter().sum::<f64>() / ys.len() as f64;
    let sst: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    let sse = rms * rms * ys.len() as f64;
    let r_squared = if sst > 0.0 { 1.0 - sse / sst } else { 0.0 };
    Ok(CftFit {
        exponent: k,
        central_charge: 6.0 * k * n / (n * n - 1.0),
        intercept: c0,
        r_squared,
        poor_fit: r_squared < MIN_R_SQUARED,
        rms_residual: rms,
        sizes: pts.iter().map(|p| p.0).collect(),
    })
}
