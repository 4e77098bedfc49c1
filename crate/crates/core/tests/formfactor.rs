use std::f64::consts::PI;

use num_complex::Complex64 as C64;
use proptest::prelude::*;
use twistlab::formfactor::*;
use twistlab::Error;

fn z(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

/// `(V²/8π²) ∫ dθ tanh²(θ/2) 2K₀(2mr cosh(θ/2))`: the relative-rapidity form of the
/// two-particle term, with `K₀(x) = ∫₀^∞ e^{−x cosh t} dt`, both by trapezoid sums.
fn centre_of_mass_oracle(vev: f64, mr: f64) -> f64 {
    let k0 = |x: f64| -> f64 {
        let h: f64 = 0.01;
        let mut s = 0.5 * (-x).exp();
        let mut t: f64 = h;
        loop {
            let v = (-x * t.cosh()).exp();
            s += v;
            if v < 1e-40 {
                break;
            }
            t += h;
        }
        s * h
    };
    let h = 0.01;
    let mut total = 0.0;
    let mut th: f64 = 0.0;
    loop {
        let w = (0.5 * th).tanh().powi(2) * 2.0 * k0(2.0 * mr * (0.5 * th).cosh());
        total += if th == 0.0 { w } else { 2.0 * w };
        if w < 1e-40 && th > 1.0 {
            break;
        }
        th += h;
    }
    vev * vev * total * h / (8.0 * PI * PI)
}

#[test]
fn equal_rapidities_give_zero() {
    for t in [-1.0, 0.0, 2.5] {
        assert_eq!(ising_two_particle_ff(z(t, 0.0), z(t, 0.0), 0.9).unwrap(), z(0.0, 0.0));
    }
}

#[test]
fn evaluation_on_the_pole_is_rejected() {
    assert!(matches!(ising_two_particle_ff(z(0.3, PI), z(0.3, 0.0), 1.0), Err(Error::Pole(_))));
    assert!(matches!(ising_two_particle_ff(z(0.3, -PI), z(0.3, 0.0), 1.0), Err(Error::Pole(_))));
    assert!(ising_two_particle_ff(z(0.0, 7.0), z(0.0, 0.0), 1.0).is_err());
}

#[test]
fn ising_preset_satisfies_the_axioms() {
    let vev = 0.83;
    let ff = FormFactor::ising_disorder(1.0, vev).unwrap();
    let rep = ff_axiom_residuals(&ff, &AxiomGrid::default()).unwrap();
    assert!(rep.periodicity <= 1e-12, "{}", rep.periodicity);
    assert!(rep.boost <= 1e-12);
    assert!((rep.pole_residue - z(0.0, 2.0 * vev)).norm() <= 1e-8);
    assert!(rep.pole_mismatch <= 1e-8);
    assert_eq!(rep.expected_residue, z(0.0, 2.0 * vev));
}

#[test]
fn constant_form_factor_is_trivially_periodic() {
    let ff = FormFactor::constant(z(0.4, 0.0), z(1.0, 0.0)).unwrap();
    let rep = ff_axiom_residuals(&ff, &AxiomGrid::default()).unwrap();
    assert_eq!(rep.periodicity, 0.0);
    assert!(rep.pole_mismatch < 1e-12);
}

#[test]
fn wrong_monodromy_is_detected() {
    let ff = FormFactor::new("wrong", 1.0, z(1.0, 0.0), 1.0, |a, b| ising_two_particle_ff(a, b, 1.0)).unwrap();
    let rep = ff_axiom_residuals(&ff, &AxiomGrid::default()).unwrap();
    assert!(rep.periodicity > 0.1);
    assert!(rep.pole_mismatch > 1.0);
}

#[test]
fn grids_touching_a_pole_are_rejected() {
    let ff = FormFactor::ising_disorder(1.0, 1.0).unwrap();
    let grid = AxiomGrid { imag_shift: -PI, ..AxiomGrid::default() };
    assert!(matches!(ff_axiom_residuals(&ff, &grid), Err(Error::Pole(_))));
    let grid = AxiomGrid { points: 1, ..AxiomGrid::default() };
    assert!(ff_axiom_residuals(&ff, &grid).is_err());
}

#[test]
fn invalid_form_factors() {
    assert!(FormFactor::new("bad", 1.0, z(0.5, 0.0), 1.0, |_, _| Ok(z(0.0, 0.0))).is_err());
    assert!(FormFactor::ising_disorder(-1.0, 1.0).is_err());
}

#[test]
fn zero_particle_truncation_is_the_vev_squared() {
    let ff = FormFactor::ising_disorder(1.0, 0.7).unwrap();
    assert_eq!(ff_series_two_point(&ff, 1.0, 0).unwrap(), 0.7 * 0.7);
    assert!(ff_series_two_point(&ff, 1.0, 4).is_err());
    assert!(ff_series_two_point(&ff, 0.0, 2).is_err());
}

#[test]
fn series_matches_centre_of_mass_quadrature() {
    let vev = 0.9;
    let ff = FormFactor::ising_disorder(1.0, vev).unwrap();
    for mr in [0.5, 1.0, 2.0, 5.0] {
        let g = ff_series_two_point(&ff, mr, 2).unwrap();
        let oracle = vev * vev + centre_of_mass_oracle(vev, mr);
        assert!((g - oracle).abs() <= 1e-9, "mr = {mr}: {g} vs {oracle}");
    }
}

#[test]
fn series_is_independent_of_breakpoints() {
    let ff = FormFactor::ising_disorder(1.0, 1.0).unwrap();
    let base = ff_series_two_point(&ff, 1.0, 2).unwrap();
    for s in [0.31, -0.77] {
        let opts = SeriesOptions { breakpoint_shift: s, ..SeriesOptions::default() };
        assert!((ff_series_two_point_with(&ff, 1.0, 2, opts).unwrap() - base).abs() <= 1e-10);
    }
}

#[test]
fn series_decreases_toward_the_plateau() {
    let vev = 0.8;
    let ff = FormFactor::ising_disorder(1.0, vev).unwrap();
    let rs: Vec<f64> = (0..=20).map(|k| 0.1 * (100f64).powf(k as f64 / 20.0)).collect();
    let g: Vec<f64> = rs.iter().map(|&r| ff_series_two_point(&ff, r, 2).unwrap()).collect();
    for w in g.windows(2) {
        assert!(w[1] < w[0]);
    }
    for (&r, &v) in rs.iter().zip(&g) {
        let corr = v - vev * vev;
        assert!(corr > 0.0);
        // two particles of mass m: the correction sits inside the e^{−2mr} envelope
        assert!(corr <= vev * vev * (-2.0 * r).exp());
    }
}

#[test]
fn cutoff_formula() {
    assert!((rapidity_cutoff(30.0) - 1.0).abs() < 1e-15);
    assert!(rapidity_cutoff(0.1) > rapidity_cutoff(1.0));
    for mr in [0.1, 1.0, 10.0, 100.0] {
        assert!((-mr * rapidity_cutoff(mr).cosh()).exp() < 1e-12);
    }
}

proptest! {
    #[test]
    fn ising_form_factor_is_boost_invariant(a in -4.0f64..4.0, b in -4.0f64..4.0, alpha in -5.0f64..5.0, im in -3.0f64..3.0) {
        let x = ising_two_particle_ff(z(a, im), z(b, 0.0), 1.0);
        let y = ising_two_particle_ff(z(a + alpha, im), z(b + alpha, 0.0), 1.0);
        if let (Ok(x), Ok(y)) = (x, y) {
            prop_assert!((x - y).norm() <= 1e-12 * (1.0 + x.norm()));
        }
    }
}
