//! Globally adaptive Gauss-Kronrod (7/15) quadrature.

use num_complex::Complex64 as C64;

use crate::error::{Error, Result};

const XGK: [f64; 8] = [
    0.991_455_371_120_812_639_206_854_697_526_329,
    0.949_107_912_342_758_524_526_189_684_047_851,
    0.864_864_423_359_769_072_789_712_788_640_926,
    0.741_531_185_599_394_439_863_864_773_280_788,
    0.586_087_235_467_691_130_294_144_845_693_013,
    0.405_845_151_377_397_166_906_606_412_076_961,
    0.207_784_955_007_898_467_600_689_403_773_245,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_224_963_732_008_058_970,
    0.063_092_092_629_978_553_290_700_663_189_204,
    0.104_790_010_322_250_183_839_876_322_541_518,
    0.140_653_259_715_525_918_745_189_590_510_238,
    0.169_004_726_639_267_902_826_583_426_598_550,
    0.190_350_578_064_785_409_913_256_402_421_014,
    0.204_432_940_075_298_892_414_161_999_234_649,
    0.209_482_141_084_727_828_012_999_174_891_714,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_693_270_611_432_679_082,
    0.279_705_391_489_276_667_901_467_771_423_780,
    0.381_830_050_505_118_944_950_369_775_488_975,
    0.417_959_183_673_469_387_755_102_040_816_327,
];

#[derive(Clone, Copy, Debug)]
pub struct QuadOptions {
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub max_intervals: usize,
}

impl Default for QuadOptions {
    fn default() -> Self {
        Self { abs_tol: 1e-13, rel_tol: 1e-12, max_intervals: 4000 }
    }
}

#[derive(Clone, Copy, Debug)]
pub struct QuadResult<T> {
    pub value: T,
    pub error: f64,
    pub intervals: usize,
}

fn gk15(f: &dyn Fn(f64) -> C64, a: f64, b: f64) -> (C64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut kron = fc * WGK[7];
    let mut gauss = fc * WG[3];
    for k in 0..7 {
        let dx = h * XGK[k];
        let s = f(c - dx) + f(c + dx);
        kron += s * WGK[k];
        if k % 2 == 1 {
            gauss += s * WG[k / 2];
        }
    }
    (kron * h, ((kron - gauss) * h).norm())
}

/// Integral of a complex-valued function over `[a, b]`, with breakpoints splitting the range.
pub fn integrate_complex(f: &dyn Fn(f64) -> C64, breaks: &[f64], opts: QuadOptions) -> Result<QuadResult<C64>> {
    if breaks.len() < 2 || breaks.iter().any(|b| !b.is_finite()) {
        return Err(Error::Quadrature("need at least two finite breakpoints".into()));
    }
    let mut pieces: Vec<(f64, f64, C64, f64)> = breaks
        .windows(2)
        .map(|w| {
            let (v, e) = gk15(f, w[0], w[1]);
            (w[0], w[1], v, e)
        })
        .collect();
    loop {
        let total: C64 = pieces.iter().map(|p| p.2).sum();
        let err: f64 = pieces.iter().map(|p| p.3).sum();
        if !total.re.is_finite() || !total.im.is_finite() {
            return Err(Error::Quadrature("integrand is not finite".into()));
        }
        if err <= opts.abs_tol.max(opts.rel_tol * total.norm()) {
            return Ok(QuadResult { value: total, error: err, intervals: pieces.len() });
        }
        if pieces.len() >= opts.max_intervals {
            return Err(Error::Quadrature(format!(
                "error estimate {err:e} after {} intervals",
                pieces.len()
            )));
        }
        let (worst, _) = pieces
            .iter()
            .enumerate()
            .max_by(|a, b| a.1 .3.total_cmp(&b.1 .3))
            .expect("non-empty");
        let (a, b, _, _) = pieces.swap_remove(worst);
        let m = 0.5 * (a + b);
        if m <= a || m >= b {
            return Err(Error::Quadrature("interval bisection underflow".into()));
        }
        let (v1, e1) = gk15(f, a, m);
        let (v2, e2) = gk15(f, m, b);
        pieces.push((a, m, v1, e1));
        pieces.push((m, b, v2, e2));
    }
}

/// Integral of a real function over `[a, b]`.
pub fn integrate(f: &dyn Fn(f64) -> f64, a: f64, b: f64, opts: QuadOptions) -> Result<QuadResult<f64>> {
    let r = integrate_complex(&|x| C64::new(f(x), 0.0), &[a, b], opts)?;
    Ok(QuadResult { value: r.value.re, error: r.error, intervals: r.intervals })
}
