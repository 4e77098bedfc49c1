use std::f64::consts::{FRAC_PI_2, PI};

use num_complex::Complex64 as C64;
use proptest::prelude::*;
use twistlab::edcore::*;
use twistlab::twist::*;
use twistlab::Error;

fn c(re: f64) -> C64 {
    C64::new(re, 0.0)
}

/// σ ↦ cos(2λ)σ¹ − sin(2λ)σ² on one site: the image of σ¹ under e^{iλσ³}.
fn rotated_sigma1(x: usize, l: usize, lambda: f64) -> ManyBodyOperator {
    let s1 = site_operator(SiteOp::Sigma1, x, l).unwrap();
    let s2 = site_operator(SiteOp::Sigma2, x, l).unwrap();
    s1.combine(c((2.0 * lambda).cos()), &s2, c(-(2.0 * lambda).sin())).unwrap()
}

#[test]
fn zero_angle_is_identity() {
    let t = twist_string(&TwistSpec::right(Generator::Sigma3, 0.0, 2, 5).unwrap()).unwrap();
    assert!(t.max_abs_diff(&ManyBodyOperator::identity(5)).unwrap() < 1e-15);
    let u = global_symmetry_unitary(&Generator::Sigma1.matrix(), 0.0, 4).unwrap();
    assert!(u.max_abs_diff(&ManyBodyOperator::identity(4)).unwrap() < 1e-15);
}

#[test]
fn quarter_turn_on_last_site() {
    let l = 5;
    let t = twist_string(&TwistSpec::right(Generator::Sigma3, FRAC_PI_2, l - 1, l).unwrap()).unwrap();
    let z = site_operator(SiteOp::Sigma3, l - 1, l).unwrap().scale(C64::new(0.0, 1.0));
    assert!(t.max_abs_diff(&z).unwrap() < 1e-15);
}

#[test]
fn half_turn_is_a_sign() {
    let l = 6;
    for (anchor, tail) in [(0, Tail::Right), (3, Tail::Right), (2, Tail::Left)] {
        let spec = TwistSpec::new(Generator::Sigma3.matrix(), PI, anchor, tail, l).unwrap();
        let s = spec.tail_support();
        let n = s.last - s.first + 1;
        let sign = if n % 2 == 0 { 1.0 } else { -1.0 };
        let t = twist_string(&spec).unwrap();
        assert!(t.max_abs_diff(&ManyBodyOperator::identity(l).scale(c(sign))).unwrap() < 1e-14);
    }
}

#[test]
fn global_unitary_is_right_string_from_zero() {
    let g = Generator::Sigma1.matrix();
    let u = global_symmetry_unitary(&g, 0.37, 5).unwrap();
    let t = twist_string(&TwistSpec::new(g, 0.37, 0, Tail::Right, 5).unwrap()).unwrap();
    assert_eq!(u.max_abs_diff(&t).unwrap(), 0.0);
}

#[test]
fn phase_covariance_of_sigma_plus() {
    let (l, x, lambda) = (4, 2, 0.41);
    let u = global_symmetry_unitary(&Generator::Sigma3.matrix(), lambda, l).unwrap();
    let sp = site_operator(SiteOp::SigmaPlus, x, l).unwrap();
    // U† σ⁺ U = e^{-2iλ} σ⁺, U σ⁺ U† = e^{2iλ} σ⁺
    let back = u.adjoint().mul(&sp).unwrap().mul(&u).unwrap();
    assert!(back.max_abs_diff(&sp.scale(C64::from_polar(1.0, -2.0 * lambda))).unwrap() < 1e-14);
    let fwd = u.mul(&sp).unwrap().mul(&u.adjoint()).unwrap();
    assert!(fwd.max_abs_diff(&sp.scale(C64::from_polar(1.0, 2.0 * lambda))).unwrap() < 1e-14);
}

#[test]
fn exchange_relations() {
    let l = 8;
    let lambda = 0.3;
    let spec = TwistSpec::right(Generator::Sigma3, lambda, 3, l).unwrap();
    let sigma = conjugation_automorphism(&spec).unwrap();
    // σ³ is invariant
    for x in 0..l {
        let z = site_operator(SiteOp::Sigma3, x, l).unwrap();
        assert!(exchange_residual(&spec, &z, &sigma).unwrap() < 1e-13);
    }
    // outside the tail: plain commutation
    for x in 0..3 {
        let o = site_operator(SiteOp::Sigma1, x, l).unwrap();
        assert!(exchange_residual(&spec, &o, &|o| Ok(o.clone())).unwrap() < 1e-13);
    }
    // inside the tail: rotated, and the library automorphism agrees with the formula
    for x in 3..l {
        let o = site_operator(SiteOp::Sigma1, x, l).unwrap();
        let formula = |_: &ManyBodyOperator| Ok(rotated_sigma1(x, l, lambda));
        assert!(exchange_residual(&spec, &o, &formula).unwrap() <= 1e-12);
        assert!(exchange_residual(&spec, &o, &sigma).unwrap() <= 1e-12);
        // the identity automorphism fails inside the tail
        assert!(exchange_residual(&spec, &o, &|o| Ok(o.clone())).unwrap() > 0.1);
    }
}

#[test]
fn straddling_supports_are_rejected() {
    let l = 6;
    let spec = TwistSpec::right(Generator::Sigma3, 0.5, 3, l).unwrap();
    let pair = site_operator(SiteOp::Sigma1, 2, l).unwrap().mul(&site_operator(SiteOp::Sigma1, 3, l).unwrap()).unwrap();
    assert_eq!(pair.support(), Some(Support::new(2, 3)));
    assert!(matches!(exchange_residual(&spec, &pair, &|o| Ok(o.clone())), Err(Error::Straddle { anchor: 3 })));
    let bare = ManyBodyOperator::identity(l);
    assert!(matches!(exchange_residual(&spec, &bare, &|o| Ok(o.clone())), Err(Error::Validation(_))));
}

#[test]
fn invalid_specs() {
    assert!(matches!(TwistSpec::right(Generator::Sigma3, 0.1, 5, 5), Err(Error::Index(_))));
    assert!(TwistSpec::right(Generator::Sigma3, f64::NAN, 0, 5).is_err());
    let non_hermitian = SiteOp::SigmaPlus.matrix();
    assert!(TwistSpec::new(non_hermitian, 0.1, 0, Tail::Right, 3).is_err());
}

#[test]
fn product_decomposition() {
    let l = 8;
    let a = TwistSpec::right(Generator::Sigma3, 0.4, 1, l).unwrap();
    let b = TwistSpec::right(Generator::Sigma3, 0.9, 5, l).unwrap();
    let d = twist_product_decomposition(&a, &b).unwrap();
    assert!(d.residual <= 1e-12);
    assert_eq!(d.factor.support(), Some(Support::new(1, 4)));

    // λ₂ = 0: the factor is the truncated first string
    let b0 = TwistSpec::right(Generator::Sigma3, 0.0, 5, l).unwrap();
    let d = twist_product_decomposition(&a, &b0).unwrap();
    assert!(d.residual < 1e-14);

    // opposite angles: tails cancel and the product lives on [x, x'-1]
    let bm = TwistSpec::right(Generator::Sigma3, -0.4, 5, l).unwrap();
    let prod = twist_string(&a).unwrap().mul(&twist_string(&bm).unwrap()).unwrap();
    let d = twist_product_decomposition(&a, &bm).unwrap();
    assert!(prod.max_abs_diff(&d.factor).unwrap() < 1e-14);

    let other = TwistSpec::right(Generator::Sigma1, 0.9, 5, l).unwrap();
    assert!(twist_product_decomposition(&a, &other).is_err());
    assert!(twist_product_decomposition(&b, &a).is_err());
}

#[test]
fn left_right_tails() {
    for x in 0..6 {
        for g in [Generator::Sigma3, Generator::Sigma1, Generator::Number] {
            let spec = TwistSpec::right(g, 0.73, x, 6).unwrap();
            assert!(left_right_residual(&spec).unwrap() <= 1e-13, "x={x} {g:?}");
        }
    }
}

#[test]
fn strings_are_unitary_and_commute() {
    let l = 7;
    for g in [Generator::Sigma1, Generator::Sigma2, Generator::Sigma3, Generator::Number] {
        let t = twist_string(&TwistSpec::right(g, 1.1, 2, l).unwrap()).unwrap();
        let tt = t.mul(&t.adjoint()).unwrap();
        assert!(tt.max_abs_diff(&ManyBodyOperator::identity(l)).unwrap() <= 1e-13);
        let conj = twist_string(&TwistSpec::right(g, 1.1, 2, l).unwrap().conjugate()).unwrap();
        assert!(conj.max_abs_diff(&t.adjoint()).unwrap() <= 1e-14);
        let s = twist_string(&TwistSpec::right(g, -0.4, 5, l).unwrap()).unwrap();
        assert!(t.commutator(&s).unwrap().matrix().max_abs() <= 1e-13);
    }
}

fn is_fixed(model: &ChainModel, lambda: f64, x: usize) -> f64 {
    let u = global_symmetry_unitary(&Generator::Sigma3.matrix(), lambda, model.length).unwrap();
    let h = local_density(model, x).unwrap();
    u.mul(&h).unwrap().mul(&u.adjoint()).unwrap().max_abs_diff(&h).unwrap()
}

#[test]
fn internal_symmetry_fixes_the_energy_density() {
    let l = 8;
    // XX: any angle
    let xx = ChainModel::xx(l, 1.0, 0.3, Boundary::Open);
    for lambda in [0.2, 0.7, 1.9] {
        assert!(is_fixed(&xx, lambda, 3) <= 1e-12);
    }
    // transverse Ising: only the Z₂ subgroup (λ = π/2) is a symmetry
    let tfim = ChainModel::transverse_ising(l, 1.0, 0.5, Boundary::Open);
    assert!(is_fixed(&tfim, FRAC_PI_2, 3) <= 1e-12);
    assert!(is_fixed(&tfim, 0.7, 3) > 0.1);
}

#[test]
fn trivial_profiles() {
    let l = 6;
    let h = build_spin_hamiltonian(&ChainModel::transverse_ising(l, 1.0, 0.5, Boundary::Open)).unwrap();
    let probes: Vec<usize> = (0..l).collect();
    let spec = TwistSpec::right(Generator::Sigma3, 0.7, 2, l).unwrap();
    let p = topological_locality_profile(&spec, &h, 0.0, &probes).unwrap();
    assert!(p.points.iter().all(|q| q.norm == 0.0));
    let spec = TwistSpec::right(Generator::Sigma3, PI, 2, l).unwrap();
    let p = topological_locality_profile(&spec, &h, 0.8, &probes).unwrap();
    assert!(p.points.iter().all(|q| q.norm < 1e-12));
    let p = topological_locality_profile(&spec, &h, 100.0, &probes).unwrap();
    assert!(p.cone_overflow);
    assert!(topological_locality_profile(&spec, &h, 0.5, &[6]).is_err());
}

#[test]
fn dense_and_matrix_free_profiles_agree() {
    // the dense path is used up to 8 sites; compare with a 9-site chain restricted
    // to the same geometry far from the right edge
    let l = 8;
    let h = build_spin_hamiltonian(&ChainModel::xx(l, 1.0, 0.2, Boundary::Open)).unwrap();
    let spec = TwistSpec::right(Generator::Sigma3, 0.7, 4, l).unwrap();
    let probes = [1, 2, 3, 5];
    let dense = topological_locality_profile(&spec, &h, 0.5, &probes).unwrap();
    // matrix-free reference built by hand
    let tw = twist_string(&spec).unwrap();
    let tb = twist_string(&spec.conjugate()).unwrap();
    let d = heisenberg_evolve(&h, &tw, 0.5).unwrap().mul(&tb).unwrap();
    for (q, &p) in dense.points.iter().zip(&probes) {
        let o = site_operator(SiteOp::Sigma1, p, l).unwrap();
        let exact = d.commutator(&o).unwrap().to_dense().singular_values().max();
        assert!((q.norm - exact).abs() <= 1e-10 * exact.max(1e-12));
    }
}

#[test]
fn ising_profile_is_localized_on_the_untwisted_side() {
    // λ = 0.7 is not a symmetry of the transverse Ising chain: only the side without
    // the tail localizes; the Z₂ twist λ = π/2 localizes on both sides
    let l = 12;
    let h = build_spin_hamiltonian(&ChainModel::transverse_ising(l, 1.0, 0.5, Boundary::Open)).unwrap();
    let spec = TwistSpec::right(Generator::Sigma3, 0.7, 6, l).unwrap();
    let p = topological_locality_profile(&spec, &h, 0.5, &[1, 11]).unwrap();
    assert!(p.norm_at(-5).unwrap() < 1e-6);
    assert!(p.norm_at(5).unwrap() > 0.1);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn exchange_with_random_angles(lambda in -3.0f64..3.0, x in 0usize..6, xp in 0usize..6) {
        let l = 6;
        let spec = TwistSpec::right(Generator::Sigma3, lambda, x, l).unwrap();
        let o = site_operator(SiteOp::Sigma1, xp, l).unwrap();
        let r = if xp >= x {
            exchange_residual(&spec, &o, &|_| Ok(rotated_sigma1(xp, l, lambda))).unwrap()
        } else {
            exchange_residual(&spec, &o, &|o| Ok(o.clone())).unwrap()
        };
        prop_assert!(r <= 1e-12);
    }
}
