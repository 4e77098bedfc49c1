//! Two-particle form factors of Z₂ twist fields in the Ising field theory.
//!
//! Rapidities are complex; a form factor is checked against the kinematic-pole
//! and monodromy-periodicity axioms, then fed into the spectral series for the
//! two-point function.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{ensure_finite, Error, Result};
use crate::linalg::I;
use crate::quad::{integrate, QuadOptions};

/// Closest approach to a pole at which evaluation is still attempted.
const POLE_EPS: f64 = 1e-12;
/// Margin an axiom grid must keep from the kinematic poles.
pub const GRID_POLE_MARGIN: f64 = 1e-3;

type Evaluator = dyn Fn(C64, C64) -> Result<C64> + Send + Sync;

/// A spinless two-particle form factor with its semilocality data.
#[derive(Clone)]
pub struct FormFactor {
    pub name: String,
    pub mass: f64,
    /// Monodromy phase `A` picked up by a particle taken around the field.
    pub monodromy: C64,
    /// `V = <𝒯>`.
    pub vev: f64,
    evaluator: Arc<Evaluator>,
}

impl fmt::Debug for FormFactor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("FormFactor")
            .field("name", &self.name)
            .field("mass", &self.mass)
            .field("monodromy", &self.monodromy)
            .field("vev", &self.vev)
            .finish_non_exhaustive()
    }
}

impl FormFactor {
    pub fn new(
        name: &str,
        mass: f64,
        monodromy: C64,
        vev: f64,
        evaluator: impl Fn(C64, C64) -> Result<C64> + Send + Sync + 'static,
    ) -> Result<Self> {
        ensure_finite("mass", mass)?;
        ensure_finite("vev", vev)?;
        if mass <= 0.0 {
            return Err(Error::Validation(format!("mass must be positive, got {mass}")));
        }
        if (monodromy.norm() - 1.0).abs() > 1e-12 {
            return Err(Error::Validation(format!("monodromy phase must have modulus 1, got {monodromy}")));
        }
        Ok(Self { name: name.to_string(), mass, monodromy, vev, evaluator: Arc::new(evaluator) })
    }

    /// The Ising disorder field: `F = V i tanh((θ₁−θ₂)/2)`, `A = −1`.
    pub fn ising_disorder(mass: f64, vev: f64) -> Result<Self> {
        Self::new("ising-disorder", mass, C64::new(-1.0, 0.0), vev, move |a, b| ising_two_particle_ff(a, b, vev))
    }

    /// A rapidity-independent form factor.
    pub fn constant(value: C64, monodromy: C64) -> Result<Self> {
        Self::new("constant", 1.0, monodromy, value.norm(), move |_, _| Ok(value))
    }

    pub fn eval(&self, theta1: C64, theta2: C64) -> Result<C64> {
        (self.evaluator)(theta1, theta2)
    }
}

fn check_rapidity(theta: C64) -> Result<()> {
    if !theta.re.is_finite() || !theta.im.is_finite() {
        return Err(Error::Validation(format!("rapidity {theta} is not finite")));
    }
    if theta.im.abs() > 2.0 * PI + 1e-12 {
        return Err(Error::Validation(format!("rapidity {theta} outside the strip |Im θ| ≤ 2π")));
    }
    Ok(())
}

/// Distance from `θ₁ − θ₂` to the nearest kinematic pole `iπ(2k+1)`.
fn pole_distance(delta: C64) -> f64 {
    let k = ((delta.im / PI - 1.0) / 2.0).round();
    (delta - I * PI * (2.0 * k + 1.0)).norm()
}

/// `V i tanh((θ₁−θ₂)/2)`, the minimal two-particle solution for the Z₂-odd sector.
pub fn ising_two_particle_ff(theta1: C64, theta2: C64, vev: f64) -> Result<C64> {
    check_rapidity(theta1)?;
    check_rapidity(theta2)?;
    let delta = theta1 - theta2;
    if pole_distance(delta) < POLE_EPS {
        return Err(Error::Pole(format!("θ₁ − θ₂ = {delta} sits on a kinematic pole")));
    }
    Ok(I * vev * (delta * 0.5).tanh())
}

/// Real rapidity grid for the axiom checks.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AxiomGrid {
    pub min: f64,
    pub max: f64,
    pub points: usize,
    /// Imaginary offset added to θ₁ in the periodicity check.
    pub imag_shift: f64,
    /// Largest `θ₁ − θ₂` in the extrapolation toward the kinematic pole.
    pub pole_step: f64,
}

impl Default for AxiomGrid {
    fn default() -> Self {
        Self { min: -3.0, max: 3.0, points: 20, imag_shift: 0.0, pole_step: 0.1 }
    }
}

impl AxiomGrid {
    fn nodes(&self) -> Result<Vec<f64>> {
        for v in [self.min, self.max, self.imag_shift, self.pole_step] {
            ensure_finite("axiom grid", v)?;
        }
        if self.points < 2 || self.max <= self.min || self.pole_step <= 0.0 {
            return Err(Error::Validation("axiom grid needs two or more points on a non-empty range".into()));
        }
        Ok((0..self.points).map(|i| self.min + (self.max - self.min) * i as f64 / (self.points - 1) as f64).collect())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AxiomReport {
    /// `max |F(θ₁+2πi, θ₂) − A F(θ₂, θ₁)|`.
    pub periodicity: f64,
    /// `max |F(θ+α, θ'+α) − F(θ, θ')|` over grid shifts.
    pub boost: f64,
    /// Extrapolated `lim (θ₁−θ₂) F(θ₁+iπ, θ₂)` at the first grid point.
    pub pole_residue: C64,
    /// `i(1 − A⁻¹)V`.
    pub expected_residue: C64,
    /// `max |residue − expected|` over the grid.
    pub pole_mismatch: f64,
}

/// Neville extrapolation to zero of samples `(h_k, g(h_k))`.
fn extrapolate_to_zero(samples: &[(f64, C64)]) -> C64 {
    let n = samples.len();
    let mut p: Vec<C64> = samples.iter().map(|s| s.1).collect();
    for level in 1..n {
        for i in 0..n - level {
            let (hi, hj) = (samples[i].0, samples[i + level].0);
            p[i] = (p[i + 1] * hi - p[i] * hj) / (hi - hj);
        }
    }
    p[0]
}

/// Periodicity, boost and kinematic-pole residuals of a form factor on a grid.
pub fn ff_axiom_residuals(ff: &FormFactor, grid: &AxiomGrid) -> Result<AxiomReport> {
    let nodes = grid.nodes()?;
    let two_pi_i = I * 2.0 * PI;
    let shift = I * grid.imag_shift;
    let mut periodicity: f64 = 0.0;
    let mut boost: f64 = 0.0;
    for &t1 in &nodes {
        for &t2 in &nodes {
            let (a, b) = (C64::new(t1, 0.0) + shift, C64::new(t2, 0.0));
            if pole_distance(a + two_pi_i - b) < GRID_POLE_MARGIN || pole_distance(b - a) < GRID_POLE_MARGIN {
                return Err(Error::Pole(format!("grid point ({a}, {b}) is within {GRID_POLE_MARGIN} of a pole")));
            }
            let lhs = ff.eval(a + two_pi_i, b)?;
            let rhs = ff.monodromy * ff.eval(b, a)?;
            periodicity = periodicity.max((lhs - rhs).norm());
            let base = ff.eval(a, b)?;
            for alpha in [0.37, -1.3] {
                boost = boost.max((ff.eval(a + alpha, b + alpha)? - base).norm());
            }
        }
    }
    let expected = I * (C64::new(1.0, 0.0) - ff.monodromy.inv()) * ff.vev;
    let mut first = None;
    let mut mismatch: f64 = 0.0;
    for &t2 in &nodes {
        let samples: Vec<(f64, C64)> = (0..8)
            .map(|k| {
                let h = grid.pole_step / f64::powi(2.0, k);
                let b = C64::new(t2, 0.0);
                ff.eval(b + h + I * PI, b).map(|f| (h, f * h))
            })
            .collect::<Result<_>>()?;
        let residue = extrapolate_to_zero(&samples);
        first.get_or_insert(residue);
        mismatch = mismatch.max((residue - expected).norm());
    }
    Ok(AxiomReport {
        periodicity,
        boost,
        pole_residue: first.expect("non-empty grid"),
        expected_residue: expected,
        pole_mismatch: mismatch,
    })
}

/// Rapidity cutoff `1 + acosh(max(30/(mr), 1))`, beyond which the series tail is below 1e−12.
pub fn rapidity_cutoff(mr: f64) -> f64 {
    1.0 + (30.0 / mr).max(1.0).acosh()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeriesOptions {
    /// Offset of the interior quadrature breakpoints; the result must not depend on it.
    pub breakpoint_shift: f64,
    pub abs_tol: f64,
}

impl Default for SeriesOptions {
    fn default() -> Self {
        Self { breakpoint_shift: 0.0, abs_tol: 1e-14 }
    }
}

/// `V² + (1/2)(2π)^{−2} ∫∫ |F(θ₁,θ₂)|² e^{−mr(cosh θ₁ + cosh θ₂)}` truncated at 0 or 2 particles.
pub fn ff_series_two_point(ff: &FormFactor, r: f64, truncation: usize) -> Result<f64> {
    ff_series_two_point_with(ff, r, truncation, SeriesOptions::default())
}

pub fn ff_series_two_point_with(ff: &FormFactor, r: f64, truncation: usize, opts: SeriesOptions) -> Result<f64> {
    ensure_finite("separation", r)?;
    if r <= 0.0 {
        return Err(Error::Validation(format!("separation must be positive, got {r}")));
    }
    let v2 = ff.vev * ff.vev;
    match truncation {
        0 => return Ok(v2),
        2 => {}
        other => return Err(Error::Validation(format!("truncation must be 0 or 2 particles, got {other}"))),
    }
    let mr = ff.mass * r;
    let cut = rapidity_cutoff(mr);
    let s = opts.breakpoint_shift;
    let breaks: Vec<f64> = {
        let mut b = vec![-cut];
        b.extend([-0.5 * cut + s, s, 0.5 * cut + s].into_iter().filter(|x| x.abs() < cut));
        b.push(cut);
        b
    };
    let inner_opts = QuadOptions { abs_tol: opts.abs_tol, rel_tol: 1e-13, max_intervals: 2000 };
    let outer_opts = QuadOptions { abs_tol: 10.0 * opts.abs_tol, rel_tol: 1e-12, max_intervals: 2000 };
    let failure = std::cell::RefCell::new(None);
    let inner = |t1: f64| -> f64 {
        let w1 = (-mr * t1.cosh()).exp();
        if w1 == 0.0 {
            return 0.0;
        }
        let f = |t2: f64| -> f64 {
            match ff.eval(C64::new(t1, 0.0), C64::new(t2, 0.0)) {
                Ok(v) => v.norm_sqr() * (-mr * t2.cosh()).exp(),
                Err(e) => {
                    failure.borrow_mut().get_or_insert(e);
                    0.0
                }
            }
        };
        let mut total = 0.0;
        for w in breaks.windows(2) {
            match integrate(&f, w[0], w[1], inner_opts) {
                Ok(q) => total += q.value,
                Err(e) => {
                    failure.borrow_mut().get_or_insert(e);
                }
            }
        }
        w1 * total
    };
    let mut outer = 0.0;
    for w in breaks.windows(2) {
        outer += integrate(&inner, w[0], w[1], outer_opts)?.value;
    }
    if let Some(e) = failure.into_inner() {
        return Err(e);
    }
    Ok(v2 + 0.5 * outer / (4.0 * PI * PI))
}
