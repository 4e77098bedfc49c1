//! Twist-field two-point functions in Gaussian states.
//!
//! Z₂ twists give the Ising order and disorder correlators, U(1) twists give the
//! full counting statistics `<e^{iλN_A}>` of the fermion number.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{ensure_finite, Error, Result};
use crate::gaussian::{number_correlation_matrix, pfaffian, MajoranaCovariance};
use crate::linalg::{det_complex, I, ONE};
use crate::quad::{integrate_complex, QuadOptions};

/// Largest Majorana string (or FCS region, in sites) evaluated densely.
pub const MAX_STRING_SITES: usize = 2048;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TwistKind {
    /// `<σ¹_x σ¹_x'>`.
    Order,
    /// `<∏_{x≤y<x'} σ³_y>`, the Kramers-Wannier dual string.
    Disorder,
}

/// Order or disorder two-point function as a Pfaffian of `2(x'−x)` Majorana contractions.
///
/// `σ¹_x σ¹_x' = (−i)^d a_{2x+1} … a_{2x'}` and `∏ σ³ = (−i)^d a_{2x} … a_{2x'−1}`, `d = x'−x`.
pub fn order_disorder_two_point(cov: &MajoranaCovariance, kind: TwistKind, x: usize, xp: usize) -> Result<f64> {
    let l = cov.sites();
    if x >= xp || xp >= l {
        return Err(Error::Index(format!("need x < x' < L, got x = {x}, x' = {xp}, L = {l}")));
    }
    let d = xp - x;
    if d > MAX_STRING_SITES {
        return Err(Error::Capacity(format!("string of {d} sites exceeds the cap of {MAX_STRING_SITES}")));
    }
    let first = match kind {
        TwistKind::Order => 2 * x + 1,
        TwistKind::Disorder => 2 * x,
    };
    let sub = cov.gamma.view((first, first), (2 * d, 2 * d)).into_owned();
    let pf = pfaffian(&sub)?;
    Ok(if d % 2 == 0 { pf } else { -pf })
}

/// `(ℓ, G(ℓ))` for pairs placed symmetrically about the middle of the chain.
pub fn centered_two_point_sequence(
    cov: &MajoranaCovariance,
    kind: TwistKind,
    separations: &[usize],
) -> Result<Vec<(usize, f64)>> {
    let l = cov.sites();
    separations
        .iter()
        .map(|&s| {
            if s == 0 || s >= l {
                return Err(Error::Index(format!("separation {s} does not fit in {l} sites")));
            }
            let x = (l - s) / 2;
            Ok((s, order_disorder_two_point(cov, kind, x, x + s)?))
        })
        .collect()
}

/// Restricted Gaussian data from which the FCS of a region is computed.
#[derive(Clone, Copy, Debug)]
pub enum RegionCorrelations<'a> {
    /// `C_A[i][j] = <c†_i c_j>` of a number-conserving state.
    NumberConserving(&'a DMatrix<C64>),
    /// Restricted Majorana covariance `Γ_A` (`2ℓ × 2ℓ`, sites interleaved).
    Majorana(&'a DMatrix<f64>),
}

impl RegionCorrelations<'_> {
    pub fn region_size(&self) -> usize {
        match self {
            RegionCorrelations::NumberConserving(c) => c.nrows(),
            RegionCorrelations::Majorana(g) => g.nrows() / 2,
        }
    }

    pub(crate) fn validate(&self) -> Result<()> {
        let (r, c) = match self {
            RegionCorrelations::NumberConserving(m) => m.shape(),
            RegionCorrelations::Majorana(m) => m.shape(),
        };
        if r != c {
            return Err(Error::Validation(format!("correlation matrix is {r}×{c}, not square")));
        }
        if matches!(self, RegionCorrelations::Majorana(_)) && r % 2 == 1 {
            return Err(Error::Validation("Majorana covariance needs even size".into()));
        }
        if self.region_size() > MAX_STRING_SITES {
            return Err(Error::Capacity(format!(
                "region of {} sites exceeds the cap of {MAX_STRING_SITES}",
                self.region_size()
            )));
        }
        Ok(())
    }

    /// `<e^{iλN_A}>`.
    pub fn evaluate(&self, lambda: f64) -> Result<C64> {
        self.validate()?;
        ensure_finite("lambda", lambda)?;
        let phase = C64::from_polar(1.0, lambda);
        match self {
            RegionCorrelations::NumberConserving(c) => {
                let n = c.nrows();
                let m = DMatrix::from_fn(n, n, |i, j| {
                    let delta = if i == j { ONE } else { C64::new(0.0, 0.0) };
                    delta + (phase - ONE) * c[(i, j)]
                });
                Ok(det_complex(&m))
            }
            RegionCorrelations::Majorana(g) => {
                // e^{iλn_x} = e^{iλ/2}(cos(λ/2) − sin(λ/2) a_{2x} a_{2x+1}), resummed into one Pfaffian
                let n = g.nrows();
                let (s, c) = (0.5 * lambda).sin_cos();
                let m = DMatrix::from_fn(n, n, |p, q| {
                    let j = if p / 2 == q / 2 && p != q {
                        if p < q {
                            1.0
                        } else {
                            -1.0
                        }
                    } else {
                        0.0
                    };
                    C64::new(c * j, s * g[(p, q)])
                });
                let pf = pfaffian(&m)?;
                Ok(pf * C64::from_polar(1.0, 0.25 * lambda * n as f64))
            }
        }
    }
}

/// `<e^{iλN_A}>` sampled on a λ grid, with a continuous logarithm.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FcsCurve {
    pub lambdas: Vec<f64>,
    pub values: Vec<C64>,
    /// Branch of `log F` continuous along the grid, principal at the point nearest 0.
    pub log_values: Vec<C64>,
    pub region_size: usize,
    pub label: String,
}

impl FcsCurve {
    /// `−log|F(λ)|/ℓ` at every grid point.
    pub fn decay_rates(&self) -> Vec<f64> {
        self.log_values.iter().map(|z| -z.re / self.region_size as f64).collect()
    }
}

/// Full counting statistics of a region on a strictly increasing λ grid.
///
/// Fails with [`Error::Refinement`] where neighbouring values differ by more than half
/// their modulus, since the logarithm branch is then ambiguous.
pub fn fcs_generating_function(input: RegionCorrelations<'_>, lambdas: &[f64], label: &str) -> Result<FcsCurve> {
    input.validate()?;
    if lambdas.is_empty() {
        return Err(Error::Validation("empty lambda grid".into()));
    }
    for &l in lambdas {
        ensure_finite("lambda", l)?;
    }
    if lambdas.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::Validation("lambda grid must be strictly increasing".into()));
    }
    let values: Vec<C64> = lambdas.iter().map(|&l| input.evaluate(l)).collect::<Result<_>>()?;
    let log_values = track_log(lambdas, &values)?;
    Ok(FcsCurve {
        lambdas: lambdas.to_vec(),
        values,
        log_values,
        region_size: input.region_size(),
        label: label.to_string(),
    })
}

/// FCS of `region` in a Gaussian state, using the determinant when the state conserves number.
pub fn fcs_from_covariance(cov: &MajoranaCovariance, region: &[usize], lambdas: &[f64], label: &str) -> Result<FcsCurve> {
    if region.len() > MAX_STRING_SITES {
        return Err(Error::Capacity(format!("region of {} sites exceeds the cap of {MAX_STRING_SITES}", region.len())));
    }
    if cov.number_correlation.is_some() {
        let c = number_correlation_matrix(cov, region)?;
        fcs_generating_function(RegionCorrelations::NumberConserving(&c), lambdas, label)
    } else {
        let g = cov.restrict(region)?;
        fcs_generating_function(RegionCorrelations::Majorana(&g), lambdas, label)
    }
}

fn track_log(lambdas: &[f64], values: &[C64]) -> Result<Vec<C64>> {
    let start = lambdas
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.abs().total_cmp(&b.1.abs()))
        .map(|(i, _)| i)
        .expect("non-empty grid");
    let mut logs = vec![C64::new(0.0, 0.0); values.len()];
    if values[start].norm() == 0.0 {
        return Err(Error::Refinement { lambda: lambdas[start] });
    }
    logs[start] = values[start].ln();
    let mut step = |from: usize, to: usize| -> Result<()> {
        let (a, b) = (values[from], values[to]);
        if b.norm() == 0.0 || (b - a).norm() > 0.5 * a.norm() {
            return Err(Error::Refinement { lambda: lambdas[to] });
        }
        // the ratio stays near 1, so its principal log is the continuous increment
        logs[to] = logs[from] + (b / a).ln();
        Ok(())
    };
    for i in start + 1..values.len() {
        step(i - 1, i)?;
    }
    for i in (0..start).rev() {
        step(i + 1, i)?;
    }
    Ok(logs)
}

/// Scaled cumulants `c_n = lim <N_A^n>^c / ℓ`, one entry per order.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CumulantSet {
    pub orders: Vec<usize>,
    /// Fitted slope per unit length.
    pub values: Vec<f64>,
    pub intercepts: Vec<f64>,
    /// RMS deviation from the linear fit.
    pub residuals: Vec<f64>,
    pub poor_fit: Vec<bool>,
    /// The cumulant saturates instead of growing with ℓ.
    pub sub_extensive: Vec<bool>,
    pub region_sizes: Vec<usize>,
    /// `<N_A^n>^c` per order and region size.
    pub raw: Vec<Vec<f64>>,
}

/// Relative RMS residual above which a linear-in-ℓ fit is flagged.
const LINEAR_FIT_TOL: f64 = 1e-3;

/// Cumulants of `N_A` from a curve: derivatives of `log F` at λ = 0 by a local polynomial fit.
pub fn region_cumulants(curve: &FcsCurve, n_max: usize) -> Result<Vec<f64>> {
    let pts: Vec<(f64, C64)> = {
        let mut idx: Vec<usize> = (0..curve.lambdas.len()).collect();
        idx.sort_by(|&a, &b| curve.lambdas[a].abs().total_cmp(&curve.lambdas[b].abs()));
        let k = (n_max + 7).max(9);
        if idx.len() < k {
            return Err(Error::Validation(format!(
                "need at least {k} grid points around lambda = 0 for cumulants up to order {n_max}"
            )));
        }
        idx.truncate(k);
        idx.iter().map(|&i| (curve.lambdas[i], curve.log_values[i])).collect()
    };
    if pts[0].0.abs() > 1e-12 {
        return Err(Error::Validation("cumulants need lambda = 0 on the grid".into()));
    }
    let scale = pts.iter().map(|p| p.0.abs()).fold(0.0, f64::max);
    let degree = (n_max + 4).min(pts.len() - 1);
    let design = DMatrix::from_fn(pts.len(), degree + 1, |r, c| (pts[r].0 / scale).powi(c as i32));
    let svd = design.svd(true, true);
    let solve = |rhs: DVector<f64>| -> Result<DVector<f64>> {
        svd.solve(&rhs, 1e-14).map_err(|e| Error::Numerical(e.to_string()))
    };
    let re = solve(DVector::from_iterator(pts.len(), pts.iter().map(|p| p.1.re)))?;
    let im = solve(DVector::from_iterator(pts.len(), pts.iter().map(|p| p.1.im)))?;
    let mut out = Vec::with_capacity(n_max);
    let mut fact = 1.0;
    for n in 1..=n_max {
        fact *= n as f64;
        let coef = C64::new(re[n], im[n]) / scale.powi(n as i32);
        // log F = Σ κ_n (iλ)^n / n!
        out.push((coef * fact * (-I).powu(n as u32)).re);
    }
    Ok(out)
}

/// Scaled cumulants from curves at ≥ 4 region sizes, by a linear fit of `<N_A^n>^c` in ℓ.
pub fn scaled_cumulants(curves: &[FcsCurve], n_max: usize) -> Result<CumulantSet> {
    if n_max == 0 {
        return Err(Error::Validation("n_max must be at least 1".into()));
    }
    let mut sizes: Vec<usize> = curves.iter().map(|c| c.region_size).collect();
    sizes.sort_unstable();
    sizes.dedup();
    if sizes.len() < 4 || sizes.len() != curves.len() {
        return Err(Error::Validation("need curves at four or more distinct region sizes".into()));
    }
    let mut order: Vec<&FcsCurve> = curves.iter().collect();
    order.sort_by_key(|c| c.region_size);
    let per_curve: Vec<Vec<f64>> = order.iter().map(|c| region_cumulants(c, n_max)).collect::<Result<_>>()?;
    let ls: Vec<f64> = sizes.iter().map(|&s| s as f64).collect();
    let l_max = *ls.last().expect("non-empty");

    let mut set = CumulantSet {
        orders: (1..=n_max).collect(),
        values: vec![],
        intercepts: vec![],
        residuals: vec![],
        poor_fit: vec![],
        sub_extensive: vec![],
        region_sizes: sizes.clone(),
        raw: vec![],
    };
    for n in 0..n_max {
        let ys: Vec<f64> = per_curve.iter().map(|k| k[n]).collect();
        let (slope, intercept, rms) = linear_fit(&ls, &ys);
        let scale = ys.iter().map(|y| y.abs()).fold(0.0, f64::max);
        set.poor_fit.push(rms > LINEAR_FIT_TOL * scale + 1e-10);
        set.sub_extensive.push((slope * l_max).abs() < 0.01 * scale + 1e-10);
        set.values.push(slope);
        set.intercepts.push(intercept);
        set.residuals.push(rms);
        set.raw.push(ys);
    }
    if n_max >= 2 && set.values[1] < -1e-10 {
        return Err(Error::Numerical(format!("negative scaled variance {:e}", set.values[1])));
    }
    Ok(set)
}

/// Least-squares line; returns `(slope, intercept, rms residual)`.
pub(crate) fn linear_fit(xs: &[f64], ys: &[f64]) -> (f64, f64, f64) {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let rms = (xs.iter().zip(ys).map(|(x, y)| (y - intercept - slope * x).powi(2)).sum::<f64>() / n).sqrt();
    (slope, intercept, rms)
}

fn fermi(x: f64) -> f64 {
    if x > 0.0 {
        let e = (-x).exp();
        e / (1.0 + e)
    } else {
        1.0 / (1.0 + x.exp())
    }
}

/// `log((1−n) + n e^{iλ})` continued from λ = 0; the curve winds the origin only for n > 1/2.
fn log_occupation_factor(n: f64, lambda: f64) -> C64 {
    let turns = ((lambda + PI) / (2.0 * PI)).floor();
    let r = lambda - 2.0 * PI * turns;
    let z = C64::new(1.0 - n, 0.0) + C64::from_polar(n, r);
    let mut lg = z.ln();
    if n > 0.5 {
        lg.im += 2.0 * PI * turns;
    }
    lg
}

/// `f(λ) − f(0) = −(1/2π) ∫ dk log[1 + n_k(e^{iλ} − 1)]` for free fermions with dispersion `ε(k)`.
///
/// The real part is the decay rate of `|<e^{iλN_A}>|` per site.
pub fn free_energy_rate_oracle(dispersion: &dyn Fn(f64) -> f64, beta: f64, mu: f64, lambda: f64) -> Result<C64> {
    ensure_finite("beta", beta)?;
    ensure_finite("mu", mu)?;
    ensure_finite("lambda", lambda)?;
    if beta <= 0.0 {
        return Err(Error::Validation(format!("inverse temperature must be positive, got {beta}")));
    }
    if lambda == 0.0 {
        return Ok(C64::new(0.0, 0.0));
    }
    let integrand = |k: f64| log_occupation_factor(fermi(beta * (dispersion(k) - mu)), lambda);
    let opts = QuadOptions { abs_tol: 1e-12, rel_tol: 1e-10, max_intervals: 4000 };
    let r = integrate_complex(&integrand, &[-PI, 0.0, PI], opts)?;
    Ok(-r.value / (2.0 * PI))
}

/// Result of a saturation fit `G(ℓ) = V² + a e^{−ℓ/ξ'} ℓ^{−p}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VevEstimate {
    /// `V = |<vac|𝒯|vac>|`.
    pub value: f64,
    pub error: f64,
    pub exponent: f64,
    pub correlation_length: f64,
    pub rms_residual: f64,
}

/// Relative last-step increment above which a sequence counts as unsaturated.
pub const DEFAULT_SATURATION_TOL: f64 = 1e-6;

/// Twist-field VEV from the large-distance plateau of a two-point sequence.
pub fn extract_vev(sequence: &[(usize, f64)], xi: f64) -> Result<VevEstimate> {
    extract_vev_with(sequence, xi, DEFAULT_SATURATION_TOL)
}

pub fn extract_vev_with(sequence: &[(usize, f64)], xi: f64, saturation_tol: f64) -> Result<VevEstimate> {
    ensure_finite("correlation length", xi)?;
    if xi <= 0.0 {
        return Err(Error::Validation(format!("correlation length must be positive, got {xi}")));
    }
    if sequence.len() < 6 {
        return Err(Error::Validation(format!("need at least 6 separations, got {}", sequence.len())));
    }
    if sequence.windows(2).any(|w| w[1].0 <= w[0].0) || sequence[0].0 == 0 {
        return Err(Error::Validation("separations must be positive and strictly increasing".into()));
    }
    for &(_, g) in sequence {
        ensure_finite("correlator", g)?;
    }
    let (l0, l1) = (sequence[0].0 as f64, sequence[sequence.len() - 1].0 as f64);
    if l1 - l0 < 4.0 * xi {
        return Err(Error::Validation(format!(
            "separations span {} sites, fewer than four correlation lengths ({xi})",
            l1 - l0
        )));
    }
    let n = sequence.len();
    let (last, prev) = (sequence[n - 1].1, sequence[n - 2].1);
    let increment = (last - prev).abs();
    let tolerance = saturation_tol * last.abs();
    if increment > tolerance {
        return Err(Error::NoSaturation { increment, tolerance });
    }

    let ys: Vec<f64> = sequence.iter().map(|p| p.1).collect();
    let spread = ys.iter().map(|y| (y - last).abs()).fold(0.0, f64::max);
    if spread <= 4.0 * f64::EPSILON * last.abs() {
        if last < 0.0 {
            return Err(Error::Numerical("plateau is negative".into()));
        }
        return Ok(VevEstimate { value: last.sqrt(), error: 0.0, exponent: 0.0, correlation_length: xi, rms_residual: 0.0 });
    }

    let mut best: Option<(f64, f64, f64, DVector<f64>, DMatrix<f64>)> = None;
    for p in [0.0, 0.5, 1.0] {
        let rss_at = |log_xi: f64| vev_linear_fit(sequence, log_xi.exp(), p).map(|f| f.0);
        // coarse scan then golden-section refinement in log ξ'
        let (lo, hi) = ((xi / 8.0).ln(), (8.0 * xi).ln());
        let grid: Vec<f64> = (0..=40).map(|i| lo + (hi - lo) * i as f64 / 40.0).collect();
        let mut scan = Vec::with_capacity(grid.len());
        for &g in &grid {
            scan.push(rss_at(g)?);
        }
        let i = (0..grid.len()).min_by(|&a, &b| scan[a].total_cmp(&scan[b])).expect("non-empty");
        let (mut a, mut b) = (grid[i.saturating_sub(1)], grid[(i + 1).min(grid.len() - 1)]);
        let phi = 0.5 * (5f64.sqrt() - 1.0);
        for _ in 0..60 {
            let c = b - phi * (b - a);
            let d = a + phi * (b - a);
            if rss_at(c)? < rss_at(d)? {
                b = d;
            } else {
                a = c;
            }
        }
        let xi_fit = (0.5 * (a + b)).exp();
        let (rss, coef, cov) = vev_linear_fit(sequence, xi_fit, p)?;
        if best.as_ref().is_none_or(|bst| rss < bst.0) {
            best = Some((rss, p, xi_fit, coef, cov));
        }
    }
    let (rss, p, xi_fit, coef, cov) = best.expect("three candidates");
    let v2 = coef[0];
    if v2 <= 0.0 {
        return Err(Error::Numerical(format!("fitted plateau {v2:e} is not positive")));
    }
    let dof = (n - 3) as f64;
    let sigma2 = rss / dof;
    let var_v2 = (sigma2 * cov[(0, 0)]).max(0.0);
    let value = v2.sqrt();
    Ok(VevEstimate {
        value,
        error: var_v2.sqrt() / (2.0 * value),
        exponent: p,
        correlation_length: xi_fit,
        rms_residual: (rss / n as f64).sqrt(),
    })
}

/// Linear least squares for `(V², a)` at fixed `ξ'` and `p`; returns `(RSS, coefficients, (XᵀX)⁻¹)`.
fn vev_linear_fit(sequence: &[(usize, f64)], xi: f64, p: f64) -> Result<(f64, DVector<f64>, DMatrix<f64>)> {
    let l0 = sequence[0].0 as f64;
    let n = sequence.len();
    let x = DMatrix::from_fn(n, 2, |r, c| {
        if c == 0 {
            1.0
        } else {
            let l = sequence[r].0 as f64;
            (-(l - l0) / xi).exp() * (l / l0).powf(-p)
        }
    });
    let y = DVector::from_iterator(n, sequence.iter().map(|s| s.1));
    let xtx = x.transpose() * &x;
    let inv = xtx.clone().try_inverse().ok_or_else(|| Error::Numerical("singular saturation fit".into()))?;
    let coef = &inv * (x.transpose() * &y);
    let rss = (&y - &x * &coef).norm_squared();
    Ok((rss, coef, inv))
}
