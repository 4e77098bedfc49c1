//! Twist strings on finite chains: construction, exchange relations, product
//! structure, left/right tails and topological locality.
//!
//! A twist with generator `g`, angle `λ` and anchor `x` is the half-line product
//! `𝒯 = ∏_{x'} exp(iλ g_{x'})` over `[x, L-1]` (right tail) or `[0, x]` (left tail).

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::edcore::{
    heisenberg_evolve, product_operator, site_operator, Local2, ManyBodyOperator, SiteOp, Support,
};
use crate::error::{ensure_finite, Error, Result};
use crate::linalg::{self, ONE, ZERO};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Tail {
    Right,
    Left,
}

/// Common on-site generators.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Generator {
    Sigma1,
    Sigma2,
    Sigma3,
    /// `n = (1 - σ³)/2`, the fermion number.
    Number,
}

impl Generator {
    pub fn matrix(self) -> Local2 {
        match self {
            Generator::Sigma1 => SiteOp::Sigma1.matrix(),
            Generator::Sigma2 => SiteOp::Sigma2.matrix(),
            Generator::Sigma3 => SiteOp::Sigma3.matrix(),
            Generator::Number => [[ZERO, ZERO], [ZERO, ONE]],
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TwistSpec {
    pub generator: Local2,
    pub lambda: f64,
    pub anchor: usize,
    pub tail: Tail,
    pub length: usize,
}

impl TwistSpec {
    pub fn new(generator: Local2, lambda: f64, anchor: usize, tail: Tail, length: usize) -> Result<Self> {
        let s = Self { generator, lambda, anchor, tail, length };
        s.validate()?;
        Ok(s)
    }

    pub fn right(g: Generator, lambda: f64, anchor: usize, length: usize) -> Result<Self> {
        Self::new(g.matrix(), lambda, anchor, Tail::Right, length)
    }

    pub fn left(g: Generator, lambda: f64, anchor: usize, length: usize) -> Result<Self> {
        Self::new(g.matrix(), lambda, anchor, Tail::Left, length)
    }

    pub fn validate(&self) -> Result<()> {
        ensure_finite("lambda", self.lambda)?;
        let g = &self.generator;
        let defect = (0..2)
            .flat_map(|i| (0..2).map(move |j| (i, j)))
            .map(|(i, j)| (g[i][j] - g[j][i].conj()).norm())
            .fold(0.0, f64::max);
        if defect > 1e-14 {
            return Err(Error::Validation(format!("twist generator is not Hermitian (defect {defect:e})")));
        }
        if self.length == 0 || self.anchor >= self.length {
            return Err(Error::Index(format!("anchor {} out of range for L = {}", self.anchor, self.length)));
        }
        Ok(())
    }

    /// Sites covered by the tail (inclusive).
    pub fn tail_support(&self) -> Support {
        match self.tail {
            Tail::Right => Support::new(self.anchor, self.length - 1),
            Tail::Left => Support::new(0, self.anchor),
        }
    }

    /// The conjugate twist `𝒯̄`, i.e. `λ → −λ`.
    pub fn conjugate(&self) -> Self {
        Self { lambda: -self.lambda, ..self.clone() }
    }

    /// `exp(iλ g)`.
    pub fn onsite_unitary(&self) -> Local2 {
        onsite_exp(&self.generator, self.lambda)
    }
}

fn onsite_exp(g: &Local2, lambda: f64) -> Local2 {
    let m = DMatrix::from_fn(2, 2, |i, j| g[i][j]);
    let u = linalg::hermitian_function(&m, |e| C64::from_polar(1.0, lambda * e));
    [[u[(0, 0)], u[(0, 1)]], [u[(1, 0)], u[(1, 1)]]]
}

fn string_over(g: &Local2, lambda: f64, sites: Support, length: usize) -> Result<ManyBodyOperator> {
    let u = onsite_exp(g, lambda);
    let factors: Vec<(usize, Local2)> = (sites.first..=sites.last).map(|y| (y, u)).collect();
    Ok(product_operator(length, &factors)?.with_support(Some(sites)))
}

/// The half-line product `𝒯`.
pub fn twist_string(spec: &TwistSpec) -> Result<ManyBodyOperator> {
    spec.validate()?;
    string_over(&spec.generator, spec.lambda, spec.tail_support(), spec.length)
}

/// `∏_{x=0}^{L-1} exp(iλ g_x)`.
pub fn global_symmetry_unitary(generator: &Local2, lambda: f64, length: usize) -> Result<ManyBodyOperator> {
    let spec = TwistSpec::new(*generator, lambda, 0, Tail::Right, length)?;
    twist_string(&spec)
}

/// The automorphism `o ↦ U o U†` implemented by the on-site unitaries of a twist.
pub fn conjugation_automorphism(spec: &TwistSpec) -> Result<impl Fn(&ManyBodyOperator) -> Result<ManyBodyOperator>> {
    let u = global_symmetry_unitary(&spec.generator, spec.lambda, spec.length)?;
    Ok(move |o: &ManyBodyOperator| u.mul(o)?.mul(&u.adjoint()))
}

/// `‖𝒯 o − σ(o) 𝒯‖` when the support of `o` lies in the tail, `‖𝒯 o − o 𝒯‖` when it is
/// disjoint from it.
pub fn exchange_residual(
    spec: &TwistSpec,
    o: &ManyBodyOperator,
    automorphism: &dyn Fn(&ManyBodyOperator) -> Result<ManyBodyOperator>,
) -> Result<f64> {
    let t = twist_string(spec)?;
    if o.dim() != t.dim() {
        return Err(Error::DimensionMismatch { expected: t.dim(), found: o.dim() });
    }
    let s = o
        .support()
        .ok_or_else(|| Error::Validation("the observable carries no support annotation".into()))?;
    let tail = spec.tail_support();
    let inside = tail.first <= s.first && s.last <= tail.last;
    let disjoint = s.last < tail.first || s.first > tail.last;
    let diff = if inside {
        t.mul(o)?.sub(&automorphism(o)?.mul(&t)?)?
    } else if disjoint {
        t.mul(o)?.sub(&o.mul(&t)?)?
    } else {
        return Err(Error::Straddle { anchor: spec.anchor });
    };
    Ok(diff.operator_norm())
}

#[derive(Clone, Debug)]
pub struct ProductDecomposition {
    /// `O` supported on `[x, x'-1]`.
    pub factor: ManyBodyOperator,
    /// `‖𝒯_{λ1}(x) 𝒯_{λ2}(x') − O 𝒯_{λ1+λ2}(x')‖`.
    pub residual: f64,
}

/// Splits `𝒯_{λ1}(x) 𝒯_{λ2}(x')` into a factor on `[x, x'-1]` times `𝒯_{λ1+λ2}(x')`.
pub fn twist_product_decomposition(first: &TwistSpec, second: &TwistSpec) -> Result<ProductDecomposition> {
    first.validate()?;
    second.validate()?;
    if first.generator != second.generator {
        return Err(Error::Validation("twist product needs a common generator".into()));
    }
    if first.length != second.length {
        return Err(Error::DimensionMismatch { expected: first.length, found: second.length });
    }
    if first.tail != Tail::Right || second.tail != Tail::Right || first.anchor >= second.anchor {
        return Err(Error::Validation("twist product needs right tails with x < x'".into()));
    }
    let l = first.length;
    let (x, xp) = (first.anchor, second.anchor);
    let factor = string_over(&first.generator, first.lambda, Support::new(x, xp - 1), l)?;
    let combined = TwistSpec { lambda: first.lambda + second.lambda, ..second.clone() };
    let lhs = twist_string(first)?.mul(&twist_string(second)?)?;
    let rhs = factor.mul(&twist_string(&combined)?)?;
    let residual = lhs.sub(&rhs)?.operator_norm();
    Ok(ProductDecomposition { factor, residual })
}

/// `‖U⁻¹ 𝒯_right(λ, x) − 𝒯_left(−λ, x−1)‖`, where the left string is the identity at `x = 0`.
pub fn left_right_residual(spec: &TwistSpec) -> Result<f64> {
    spec.validate()?;
    if spec.tail != Tail::Right {
        return Err(Error::Validation("expects a right-tail twist".into()));
    }
    let u = global_symmetry_unitary(&spec.generator, spec.lambda, spec.length)?;
    let lhs = u.adjoint().mul(&twist_string(spec)?)?;
    let rhs = if spec.anchor == 0 {
        ManyBodyOperator::identity(spec.length)
    } else {
        let left = TwistSpec { tail: Tail::Left, anchor: spec.anchor - 1, lambda: -spec.lambda, ..spec.clone() };
        twist_string(&left)?
    };
    Ok(lhs.sub(&rhs)?.operator_norm())
}

#[derive(Clone, Debug, Serialize)]
pub struct ProfilePoint {
    pub site: usize,
    /// `site − anchor`.
    pub offset: i64,
    pub norm: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct LocalityProfile {
    pub points: Vec<ProfilePoint>,
    /// Estimated Lieb-Robinson radius `v t`.
    pub cone_radius: f64,
    /// The cone covers the whole chain; the profile carries little information.
    pub cone_overflow: bool,
}

impl LocalityProfile {
    /// Checks that norms decrease with |offset| outside the cone, up to `ripple` (relative).
    pub fn monotone_beyond_cone(&self, ripple: f64) -> bool {
        for side in [1i64, -1] {
            let mut pts: Vec<&ProfilePoint> = self
                .points
                .iter()
                .filter(|p| p.offset * side > 0 && (p.offset.abs() as f64) > self.cone_radius)
                .collect();
            pts.sort_by_key(|p| p.offset.abs());
            for w in pts.windows(2) {
                if w[1].norm > w[0].norm * (1.0 + ripple) + 1e-14 {
                    return false;
                }
            }
        }
        true
    }

    pub fn norm_at(&self, offset: i64) -> Option<f64> {
        self.points.iter().find(|p| p.offset == offset).map(|p| p.norm)
    }
}

/// Dense evolution is used up to this many sites; larger chains go matrix-free.
const DENSE_PROFILE_SITES: usize = 8;
pub const MAX_PROFILE_SITES: usize = 12;

/// Commutator norms `‖[D, σ¹_{x'}]‖` for `D = 𝒯(x, t) 𝒯̄(x, 0)`.
pub fn topological_locality_profile(
    spec: &TwistSpec,
    h: &ManyBodyOperator,
    t: f64,
    probes: &[usize],
) -> Result<LocalityProfile> {
    spec.validate()?;
    ensure_finite("t", t)?;
    let l = spec.length;
    if h.sites() != l {
        return Err(Error::DimensionMismatch { expected: 1 << l, found: h.dim() });
    }
    if l > MAX_PROFILE_SITES {
        return Err(Error::Capacity(format!("locality profile is limited to {MAX_PROFILE_SITES} sites")));
    }
    if let Some(&p) = probes.iter().find(|&&p| p >= l) {
        return Err(Error::Index(format!("probe site {p} out of range")));
    }
    let local_norm = h.matrix().norm_bound() / l as f64;
    let cone_radius = 2.0 * std::f64::consts::E * local_norm * t.abs();
    let x = spec.anchor as f64;
    let cone_overflow = x - cone_radius <= 0.0 && x + cone_radius >= (l - 1) as f64;

    let tw = twist_string(spec)?;
    let tw_bar = twist_string(&spec.conjugate())?;
    let mut points = Vec::with_capacity(probes.len());
    if t == 0.0 {
        for &p in probes {
            points.push(ProfilePoint { site: p, offset: p as i64 - spec.anchor as i64, norm: 0.0 });
        }
        return Ok(LocalityProfile { points, cone_radius, cone_overflow });
    }
    if l <= DENSE_PROFILE_SITES {
        let d = heisenberg_evolve(h, &tw, t)?.mul(&tw_bar)?;
        for &p in probes {
            let o = site_operator(SiteOp::Sigma1, p, l)?;
            let norm = d.commutator(&o)?.operator_norm();
            points.push(ProfilePoint { site: p, offset: p as i64 - spec.anchor as i64, norm });
        }
    } else {
        let bound = h.matrix().norm_bound();
        let evolve = |v: &[C64], s: f64| linalg::krylov_evolve(&|y| h.apply(y), v, s, bound);
        // D = e^{iHt} T e^{-iHt} T̄,  D† = T e^{iHt} T̄ e^{-iHt}
        let d = |v: &[C64]| evolve(&tw.apply(&evolve(&tw_bar.apply(v), t)), -t);
        let d_adj = |v: &[C64]| tw.apply(&evolve(&tw_bar.apply(&evolve(v, t)), -t));
        for &p in probes {
            let o = site_operator(SiteOp::Sigma1, p, l)?;
            let comm = |v: &[C64]| {
                let a = d(&o.apply(v));
                let b = o.apply(&d(v));
                a.iter().zip(&b).map(|(x, y)| x - y).collect::<Vec<_>>()
            };
            let comm_adj = |v: &[C64]| {
                let a = o.apply(&d_adj(v));
                let b = d_adj(&o.apply(v));
                a.iter().zip(&b).map(|(x, y)| x - y).collect::<Vec<_>>()
            };
            let norm = linalg::operator_norm_matfree(&comm, &comm_adj, h.dim());
            points.push(ProfilePoint { site: p, offset: p as i64 - spec.anchor as i64, norm });
        }
    }
    Ok(LocalityProfile { points, cone_radius, cone_overflow })
}
