use std::sync::Arc;

use heun_core::darboux::*;
use heun_core::difffield::sample_points;
use heun_core::operators::{hamiltonian, CouplingVector, DiffOperator};
use heun_core::quasisolvable::{build_space, prefactor, SignChoice};
use heun_core::verify::{explicit_lame_operator, DARBOUX_CASES};
use heun_core::{Error, FieldExpr, Lattice, LatticeRef, C64};
use proptest::prelude::*;

fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

fn lattices() -> Vec<LatticeRef> {
    [(c(0.5, 0.0), c(0.0, 0.5)), (c(0.5, 0.0), c(0.0, 0.3)), (c(0.5, 0.0), c(0.2, 0.35))]
        .into_iter()
        .map(|(a, b)| Arc::new(Lattice::from_half_periods(a, b).unwrap()))
        .collect()
}

fn sign(l: [f64; 4], alpha: [f64; 4]) -> (CouplingVector, SignChoice) {
    let l = CouplingVector(l);
    let s = SignChoice::new(&l, alpha).unwrap();
    (l, s)
}

fn kills(op: &DiffOperator, f: &FieldExpr, lat: &LatticeRef) -> bool {
    let g = op.apply(f).unwrap();
    g.is_zero() || g.vanishes_numerically(&sample_points(lat, 8, 3), 1e-9).unwrap()
}

#[test]
fn lame_first_order_operator_matches_explicit_form() {
    for lat in lattices() {
        let (l, s) = sign([2.0, 0.0, 0.0, 0.0], [-2.0, 1.0, 1.0, 0.0]);
        let op = closed_form_l(&l, &s, &lat).unwrap();
        assert!(op.canonical_eq(&explicit_lame_operator(&lat).unwrap()).unwrap());
        assert!(op.is_monic() && op.order() == 1);
    }
}

#[test]
fn ground_state_is_annihilated() {
    for lat in lattices() {
        let (l, s) = sign([2.0, 0.0, 0.0, 0.0], [-2.0, 1.0, 1.0, 0.0]);
        let op = closed_form_l(&l, &s, &lat).unwrap();
        let phi = prefactor(&s, &lat).unwrap();
        assert!(kills(&op, &phi, &lat));
        // first-order annihilator is D - phi'/phi
        let log_deriv = phi.differentiate().checked_mul(&phi.invert().unwrap()).unwrap();
        let expect = DiffOperator::new(&lat, vec![FieldExpr::one(&lat), -log_deriv]).unwrap();
        assert!(op.canonical_eq(&expect).unwrap() || op.equals(&expect).unwrap());
    }
}

#[test]
fn second_order_operator_kills_one_and_wp() {
    let lat = &lattices()[2];
    let (l, s) = sign([2.0, 0.0, 0.0, 0.0], [-2.0, 0.0, 0.0, 0.0]);
    assert_eq!(s.integer_d(), Some(1));
    let op = closed_form_l(&l, &s, lat).unwrap();
    assert_eq!(op.order(), 2);
    assert!(kills(&op, &FieldExpr::one(lat), lat));
    assert!(kills(&op, &FieldExpr::wp(lat), lat));
    assert!(!kills(&op, &(&FieldExpr::wp(lat) * &FieldExpr::wp(lat)), lat));
}

#[test]
fn closed_form_equals_annihilator() {
    for lat in lattices() {
        for (lv, alpha) in DARBOUX_CASES {
            let (l, s) = sign(lv, alpha);
            let closed = closed_form_l(&l, &s, &lat).unwrap();
            let ann = annihilator_l(&build_space(&l, &s, &lat).unwrap()).unwrap();
            assert_eq!(closed.order(), s.integer_d().unwrap() as usize + 1);
            assert!(closed.canonical_eq(&ann).unwrap(), "{lv:?} {alpha:?}");
        }
    }
}

#[test]
fn identity_step_and_bad_dimension() {
    let lat = &lattices()[2];
    let (l, s) = sign([0.0; 4], [0.0, 1.0, 1.0, 0.0]);
    assert_eq!(s.integer_d(), Some(-1));
    assert!(closed_form_l(&l, &s, lat).unwrap().canonical_eq(&DiffOperator::identity(lat)).unwrap());
    let (l, s) = sign([1.0, 0.0, 0.0, 0.0], [-1.0, 1.0, 1.0, 0.0]);
    assert!(matches!(closed_form_l(&l, &s, lat), Err(Error::NonIntegerDimension { .. })));
}

#[test]
fn shift_targets() {
    let cases = [
        ([2.0, 0.0, 0.0, 0.0], [-2.0, 1.0, 1.0, 0.0], [1.0, 1.0, 1.0, 0.0]),
        ([2.0, 0.0, 0.0, 0.0], [-2.0, 0.0, 0.0, 0.0], [0.0, 1.0, 1.0, 1.0]),
        ([1.0, 1.0, 1.0, 0.0], [2.0, -1.0, -1.0, 0.0], [2.0, 0.0, 0.0, 0.0]),
        ([1.0, 1.0, 1.0, 0.0], [-1.0, -1.0, -1.0, 1.0], [0.0, 0.0, 0.0, 2.0]),
        ([0.0, 0.0, 0.0, 0.0], [0.0, 1.0, 1.0, 0.0], [0.0, 0.0, 0.0, 0.0]),
    ];
    for (lv, alpha, target) in cases {
        let (l, s) = sign(lv, alpha);
        let t = darboux_shift_target(&l, &s);
        assert_eq!(t.0, target, "{lv:?} {alpha:?}");
        assert!(t.is_normalized());
    }
}

#[test]
fn symbolic_intertwining_holds_and_fails_for_wrong_target() {
    let lat = &lattices()[2];
    for (lv, alpha) in DARBOUX_CASES.iter().take(6) {
        let (l, s) = sign(*lv, *alpha);
        let op = closed_form_l(&l, &s, lat).unwrap();
        let t = darboux_shift_target(&l, &s);
        assert!(symbolic_intertwining(&l, &t, &op).unwrap(), "{lv:?} {alpha:?}");
    }
    let (l, s) = sign([2.0, 0.0, 0.0, 0.0], [-2.0, 1.0, 1.0, 0.0]);
    let op = closed_form_l(&l, &s, lat).unwrap();
    assert!(!symbolic_intertwining(&l, &CouplingVector([2.0, 0.0, 0.0, 0.0]), &op).unwrap());
    // the Hamiltonian itself intertwines H with H
    let h = hamiltonian(&l, lat).unwrap();
    assert!(symbolic_intertwining(&l, &l, &h).unwrap());
}

#[test]
fn numeric_checks_separate_right_and_wrong_targets() {
    let lat = &lattices()[2];
    let (l, s) = sign([4.0, 0.0, 0.0, 0.0], [-4.0, 1.0, 1.0, 0.0]);
    let op = closed_form_l(&l, &s, lat).unwrap();
    let pts = sample_points(lat, 4, 9);
    let wrong = numeric_intertwining(&l, &l, &op, c(0.5, 0.5), &pts).unwrap();
    assert!(wrong.residual > 1e-3, "{}", wrong.residual);
    let right = numeric_intertwining(&l, &darboux_shift_target(&l, &s), &op, c(0.5, 0.5), &pts).unwrap();
    assert!(right.residual < 1e-9, "{}", right.residual);
    let factorized = factorized_intertwining(&l, &s, c(0.5, 0.5), lat, &pts).unwrap();
    assert!(factorized < 1e-9, "{factorized}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn numeric_residual_is_small(
        case in 0usize..DARBOUX_CASES.len(),
        li in 0usize..3,
        re in -3.0f64..3.0,
        im in -1.0f64..1.0,
        seed in 0u64..1000,
    ) {
        let lat = &lattices()[li];
        let (lv, alpha) = DARBOUX_CASES[case];
        let (l, s) = sign(lv, alpha);
        let rep = intertwine_residual(&l, &s, c(re, im), lat, 4, seed).unwrap();
        prop_assert!(rep.symbolic);
        prop_assert!(rep.numeric_residual <= 1e-7, "{lv:?} {alpha:?}: {:e}", rep.numeric_residual);
        prop_assert!(rep.expanded_residual <= 1e-7, "{lv:?} {alpha:?}: {:e}", rep.expanded_residual);
        prop_assert_eq!(rep.sample_points.len(), 4);
    }
}
