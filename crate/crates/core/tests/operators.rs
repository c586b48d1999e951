use std::sync::Arc;

use heun_core::difffield::sample_points;
use heun_core::monodromy::{MonodromyOptions, SolutionFrame};
use heun_core::operators::*;
use heun_core::{Error, FieldExpr, Lattice, LatticeRef, C64};
use proptest::prelude::*;

fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

fn generic() -> LatticeRef {
    Arc::new(Lattice::from_half_periods(c(0.5, 0.0), c(0.2, 0.35)).unwrap())
}

fn lemniscatic() -> LatticeRef {
    Arc::new(Lattice::lemniscatic())
}

#[test]
fn free_hamiltonian_is_minus_second_derivative() {
    let lat = generic();
    let h = hamiltonian(&CouplingVector([0.0; 4]), &lat).unwrap();
    let d2 = DiffOperator::derivative(&lat).compose(&DiffOperator::derivative(&lat)).unwrap();
    assert!(h.canonical_eq(&d2.scale(c(-1.0, 0.0))).unwrap());
}

#[test]
fn single_lame_term() {
    let lat = generic();
    let h = hamiltonian(&CouplingVector([1.0, 0.0, 0.0, 0.0]), &lat).unwrap();
    let d2 = DiffOperator::derivative(&lat).compose(&DiffOperator::derivative(&lat)).unwrap();
    let expect = d2.scale(c(-1.0, 0.0)).add(&DiffOperator::multiplication(&FieldExpr::wp(&lat).scale_real(2.0))).unwrap();
    assert!(h.canonical_eq(&expect).unwrap());
}

#[test]
fn lame_ground_state() {
    // s1 s2 is an eigenfunction of -D^2 + 6 wp with eigenvalue 3 e3
    for lat in [generic(), lemniscatic()] {
        let h = hamiltonian(&CouplingVector([2.0, 0.0, 0.0, 0.0]), &lat).unwrap();
        let phi = FieldExpr::s_monomial(&lat, [1, 1, 0]);
        let e3 = lat.e()[2] * 3.0;
        let hphi = h.apply(&phi).unwrap();
        assert!(hphi.canonical_eq(&phi.scale(e3)).unwrap() || hphi.equals(&phi.scale(e3)).unwrap());
        for x in sample_points(&lat, 20, 5) {
            let (a, b) = (hphi.evaluate(x).unwrap(), phi.evaluate(x).unwrap() * e3);
            assert!((a - b).norm() <= 1e-10 * (1.0 + b.norm()));
        }
    }
}

#[test]
fn coupling_dictionary_round_trip() {
    let lat = generic();
    let t = lattice_modulus(&lat);
    for l in [[2.0, 0.0, 0.0, 0.0], [0.3, 0.7, -0.2, 1.1], [-3.0, 1.5, 0.0, 2.0]] {
        let cv = CouplingVector(l);
        let p = rational_from_couplings(&cv, c(0.4, 0.1), t).unwrap();
        assert!(p.fuchs_defect() < 1e-14);
        let (back, tb) = couplings_from_rational(&p).unwrap();
        assert_eq!(tb, t);
        for (a, b) in back.0.iter().zip(l) {
            assert!((a - b).abs() < 1e-14, "{l:?} -> {back}");
        }
        let e = energy_from_accessory(&p, &lat).unwrap();
        assert!((accessory_from_energy(&p, e, &lat).unwrap() - p.q).norm() < 1e-12);
    }
    // gamma = 1/2 - l1, delta = 1/2 - l2, epsilon = 1/2 - l3, beta - alpha = l0 + 1/2
    let p = rational_from_couplings(&CouplingVector([1.0, 2.0, 0.0, -1.0]), c(0.0, 0.0), t).unwrap();
    assert_eq!((p.gamma.re, p.delta.re, p.epsilon.re), (-1.5, 0.5, 1.5));
    assert_eq!((p.beta - p.alpha).re, 1.5);
}

#[test]
fn dictionary_rejects_bad_input() {
    let g = c(0.5, 0.0);
    assert!(matches!(
        HeunRationalParams::new(g, g, g, g, g, c(0.0, 0.0), c(0.3, 0.0)),
        Err(Error::InvalidParams(_))
    ));
    let complex = HeunRationalParams::new(c(0.5, 0.2), g, g, g, c(0.0, 0.2), c(0.0, 0.0), c(0.3, 0.0)).unwrap();
    assert!(matches!(couplings_from_rational(&complex), Err(Error::InvalidParams(_))));
    let p = rational_from_couplings(&CouplingVector([1.0, 0.0, 0.0, 0.0]), c(0.0, 0.0), c(0.3, 0.0)).unwrap();
    assert!(energy_map(&p, &generic()).is_err(), "modulus mismatch must be reported");
    assert!("1,2,x,4".parse::<CouplingVector>().is_err());
}

/// `-f'' + V f = E f` for `f = y(z) z^(-l1/2) (z-1)^(-l2/2) (z-t)^(-l3/2)` by the chain rule,
/// where `y` solves the rational equation at a point with arbitrary data.
#[test]
fn energy_map_matches_chain_rule() {
    let lat = generic();
    let [e1, e2, _] = lat.e();
    let kappa = e2 - e1;
    let t = lattice_modulus(&lat);
    for l in [[0.3, 0.7, -0.2, 1.1], [2.0, 1.0, 0.0, 0.0], [1.5, -0.25, 0.5, 2.0]] {
        let cv = CouplingVector(l);
        let p = rational_from_couplings(&cv, c(0.4, 0.1), t).unwrap();
        let energy = energy_from_accessory(&p, &lat).unwrap();
        let (a, b, cc) = (-l[1] / 2.0, -l[2] / 2.0, -l[3] / 2.0);
        for x in sample_points(&lat, 8, 21) {
            let wp = lat.wp(x).unwrap();
            let dwp = lat.wp_prime(x).unwrap();
            let ddwp = wp * wp * 6.0 - lat.g2() / 2.0;
            let z = (wp - e1) / kappa;
            let (dz, ddz) = (dwp / kappa, ddwp / kappa);
            let (y, dy) = (c(1.0, 0.3), c(-0.7, 0.2));
            let (pc, rc) = p.coefficients(z);
            let ddy = -pc * dy - rc * y;
            let w = z.powf(a) * (z - 1.0).powf(b) * (z - t).powf(cc);
            let lg = a / z + b / (z - 1.0) + cc / (z - t);
            let dlg = -a / (z * z) - b / ((z - 1.0) * (z - 1.0)) - cc / ((z - t) * (z - t));
            let (dw, ddw) = (w * lg, w * (dlg + lg * lg));
            let (f, df_dz, ddf_dz) = (y * w, dy * w + y * dw, ddy * w + dy * dw * 2.0 + y * ddw);
            let ddf = ddf_dz * dz * dz + df_dz * ddz;
            let v = potential_value(&cv, &lat, x).unwrap();
            let res = -ddf + (v - energy) * f;
            let scale = ddf.norm() + (v * f).norm() + (energy * f).norm();
            assert!(res.norm() <= 1e-8 * scale, "l={l:?} residual {:e}", res.norm() / scale);
        }
    }
}

#[test]
fn fourth_derivative_reduction_matches_integrated_solution() {
    let lat = generic();
    let cv = CouplingVector([2.0, 1.0, 0.0, 0.0]);
    let energy = c(0.8, -0.3);
    let (a4, b4) = reduce_derivative(4, &cv, energy, &lat).unwrap();
    let x0 = lat.anchor();
    let frame = SolutionFrame::identity(&cv, energy, &lat, x0);
    let (f0, df0) = (c(1.0, 0.0), c(0.3, -0.1));
    let h = 2e-3;
    let opts = MonodromyOptions::default();
    let g = |k: f64| {
        let x = x0 + h * k;
        let (end, _) = frame.continue_along(&[x], &opts).unwrap();
        let f = end.f[0][0] * f0 + end.f[0][1] * df0;
        (potential_value(&cv, &lat, x).unwrap() - energy) * f
    };
    // f'''' = ((V - E) f)''
    let fd = (-g(-2.0) + g(-1.0) * 16.0 - g(0.0) * 30.0 + g(1.0) * 16.0 - g(2.0)) / (12.0 * h * h);
    let exact = a4.evaluate(x0).unwrap() * f0 + b4.evaluate(x0).unwrap() * df0;
    assert!((exact - fd).norm() <= 1e-6 * exact.norm().max(1.0), "{exact} vs {fd}");
}

#[test]
fn low_order_reductions() {
    let lat = generic();
    let cv = CouplingVector([1.0, 0.0, 2.0, 0.0]);
    let e = c(0.7, 0.2);
    let (a0, b0) = reduce_derivative(0, &cv, e, &lat).unwrap();
    assert!(a0.canonical_eq(&FieldExpr::one(&lat)).unwrap() && b0.is_zero());
    let (a1, b1) = reduce_derivative(1, &cv, e, &lat).unwrap();
    assert!(a1.is_zero() && b1.canonical_eq(&FieldExpr::one(&lat)).unwrap());
    let (a2, b2) = reduce_derivative(2, &cv, e, &lat).unwrap();
    let vme = &potential(&cv, &lat).unwrap() - &FieldExpr::constant(&lat, e);
    assert!(a2.canonical_eq(&vme).unwrap() && b2.is_zero());
}

#[test]
fn equivalent_couplings_share_the_operator() {
    let lat = generic();
    let a = hamiltonian(&CouplingVector([3.0, 0.0, 1.0, 0.0]), &lat).unwrap();
    let b = hamiltonian(&CouplingVector([-4.0, -1.0, 1.0, -1.0]), &lat).unwrap();
    assert!(a.canonical_eq(&b).unwrap());
    assert!(CouplingVector([-4.0, -1.0, 1.0, -1.0]).equivalent(&CouplingVector([3.0, 0.0, 1.0, 0.0])));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn composition_is_application_in_sequence(
        la in prop::array::uniform4(0i32..3),
        k in 0usize..3,
        a in [-1i64..=1, -1i64..=1, -1i64..=1],
    ) {
        let lat = generic();
        let h = hamiltonian(&CouplingVector(la.map(f64::from)), &lat).unwrap();
        let mut d = DiffOperator::identity(&lat);
        for _ in 0..k {
            d = d.compose(&DiffOperator::derivative(&lat)).unwrap();
        }
        let f = FieldExpr::s_monomial(&lat, a).checked_add(&FieldExpr::wp(&lat)).unwrap();
        let lhs = h.compose(&d).unwrap().apply(&f).unwrap();
        let rhs = h.apply(&d.apply(&f).unwrap()).unwrap();
        prop_assert!(lhs.canonical_eq(&rhs).unwrap() || lhs.equals(&rhs).unwrap());
    }
}
