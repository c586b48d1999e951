use std::f64::consts::PI;
use std::sync::Arc;

use heun_core::monodromy::*;
use heun_core::ode::{Method, Piece};
use heun_core::operators::CouplingVector;
use heun_core::{Error, Lattice, LatticeRef, C64};
use proptest::prelude::*;

fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

fn lemniscatic() -> LatticeRef {
    Arc::new(Lattice::lemniscatic())
}

fn generic() -> LatticeRef {
    Arc::new(Lattice::from_half_periods(c(0.5, 0.0), c(0.2, 0.35)).unwrap())
}

fn rkf45() -> MonodromyOptions {
    let mut o = MonodromyOptions::default();
    o.tol = o.tol.with_method(Method::Rkf45);
    o
}

const LAME2: CouplingVector = CouplingVector([2.0, 0.0, 0.0, 0.0]);

#[test]
fn free_trace_is_cosine_on_a_grid() {
    let lat = lemniscatic();
    let free = CouplingVector([0.0; 4]);
    let grid = [c(1.0, 0.0), c(2.0, 0.0), c(3.0, 0.0)];
    for k in [1u8, 3] {
        let rows = trace_scan(&free, k, &grid, &lat, None, &MonodromyOptions::default());
        let w = if k == 1 { lat.omega1() } else { lat.omega3() };
        for r in &rows {
            let expect = (w * 2.0 * r.energy.sqrt()).cos() * 2.0;
            assert!((r.trace.unwrap() - expect).norm() < 1e-9, "k={k} E={}", r.energy);
            assert!((r.det.unwrap() - 1.0).norm() < 1e-9);
        }
    }
    assert!(trace_scan(&free, 1, &[], &lat, None, &MonodromyOptions::default()).is_empty());
}

#[test]
fn periodic_free_solution_has_unit_multipliers() {
    // 2 omega1 = 1 and sqrt(E) = 2 pi
    let lat = lemniscatic();
    let m = period_monodromy(&CouplingVector([0.0; 4]), c(4.0 * PI * PI, 0.0), 1, &lat, None, &MonodromyOptions::default())
        .unwrap();
    for ev in m.eigenvalues() {
        assert!((ev - 1.0).norm() < 1e-4, "{ev}");
    }
    assert!((m.trace() - 2.0).norm() < 1e-9);
}

#[test]
fn lame_eigenfunction_multipliers() {
    // the (2,0,0,0) eigenfunction at 3 e3 is a Bloch solution with multipliers -1 and +1
    let lat = lemniscatic();
    let e = lat.e()[2] * 3.0;
    for (k, expect) in [(1u8, -2.0), (3u8, 2.0)] {
        let a = period_monodromy(&LAME2, e, k, &lat, None, &MonodromyOptions::default()).unwrap();
        let b = period_monodromy(&LAME2, e, k, &lat, None, &rkf45()).unwrap();
        assert!((a.trace() - expect).norm() < 1e-8, "k={k}: {}", a.trace());
        assert!((a.trace() - b.trace()).norm() < 1e-8, "k={k}");
        assert!((a.det() - 1.0).norm() < 1e-9);
    }
}

fn parse_fixture() -> Vec<(C64, C64, C64)> {
    let text = include_str!("fixtures/lame2_lemniscatic_k1.csv");
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), CSV_HEADER);
    lines
        .map(|line| {
            let f: Vec<f64> = line.split(',').take(6).map(|t| t.parse().unwrap()).collect();
            (c(f[0], f[1]), c(f[2], f[3]), c(f[4], f[5]))
        })
        .collect()
}

#[test]
fn frozen_real_axis_scan() {
    // frozen after two integrators agreed to 1.5e-11 on every row
    let lat = lemniscatic();
    let rows = parse_fixture();
    assert_eq!(rows.len(), 64);
    let grid: Vec<C64> = rows.iter().map(|r| r.0).collect();
    let now = trace_scan(&LAME2, 1, &grid, &lat, None, &MonodromyOptions::default());
    for (r, n) in rows.iter().zip(&now) {
        assert!((n.trace.unwrap() - r.1).norm() < 1e-9, "E={}", r.0);
        assert!((n.det.unwrap() - r.2).norm() < 1e-9);
    }
    let sub: Vec<C64> = grid.iter().step_by(8).copied().collect();
    let other = trace_scan(&LAME2, 1, &sub, &lat, None, &rkf45());
    for (o, r) in other.iter().zip(rows.iter().step_by(8)) {
        assert!((o.trace.unwrap() - r.1).norm() < 1e-8, "E={}", r.0);
    }
}

#[test]
fn transfer_preserves_wronskian() {
    let lat = generic();
    let l = CouplingVector([3.0, 1.0, 0.0, 0.0]);
    let frame = SolutionFrame::with_matrix(&l, c(1.5, 0.4), &lat, lat.anchor(), [[c(1.0, 0.2), c(0.3, 0.0)], [c(-0.5, 0.1), c(2.0, 0.0)]]);
    let w0 = frame.wronskian();
    let (end, _) = frame
        .continue_along(&[lat.anchor() + lat.omega1() * 2.0 + lat.omega3() * 2.0], &MonodromyOptions::default())
        .unwrap();
    assert!((end.wronskian() - w0).norm() < 1e-9 * w0.norm());
}

#[test]
fn loop_around_lame_pole_is_trivial() {
    // integer exponents without logarithms at every pole of a Lame potential
    let lat = generic();
    let frame = SolutionFrame::identity(&LAME2, c(0.7, 0.2), &lat, c(0.1, 0.0));
    let arc = Piece::Arc {
        center: c(0.0, 0.0),
        radius: 0.1,
        start_angle: 0.0,
        sweep: 2.0 * PI,
    };
    let (end, _) = frame.continue_pieces(&[arc], &MonodromyOptions::default().tol).unwrap();
    for i in 0..2 {
        for j in 0..2 {
            let id = if i == j { 1.0 } else { 0.0 };
            assert!((end.f[i][j] - id).norm() < 1e-8, "{i}{j}: {}", end.f[i][j]);
        }
    }
}

#[test]
fn trace_is_basis_and_basepoint_independent() {
    let lat = generic();
    let l = CouplingVector([3.0, 1.0, 0.0, 0.0]);
    let e = c(2.0, -0.5);
    let opts = MonodromyOptions::default();
    for k in [1u8, 3] {
        let base = period_monodromy(&l, e, k, &lat, None, &opts).unwrap();
        let frame = SolutionFrame::with_matrix(&l, e, &lat, lat.anchor(), [[c(2.0, 1.0), c(0.5, 0.0)], [c(0.1, -0.3), c(1.0, 0.4)]]);
        let other_basis = period_monodromy_from(&frame, k, &opts).unwrap();
        let moved = period_monodromy(&l, e, k, &lat, Some(lat.anchor() + c(0.04, 0.03)), &opts).unwrap();
        assert!((base.trace() - other_basis.trace()).norm() < 1e-8, "k={k}");
        assert!((base.trace() - moved.trace()).norm() < 1e-8, "k={k}");
        assert!((other_basis.det() - 1.0).norm() < 1e-9);
    }
}

#[test]
fn deformed_path_gives_the_same_monodromy() {
    let lat = generic();
    let e = c(-1.0, 0.3);
    let opts = MonodromyOptions::default();
    let x0 = lat.anchor();
    let shift = lat.omega1() * 2.0;
    let reference = period_monodromy(&LAME2, e, 1, &lat, None, &opts).unwrap();
    for path in [vec![x0 + shift], vec![x0 + shift * 0.5 + c(0.0, 0.03), x0 + shift]] {
        let (end, _) = SolutionFrame::identity(&LAME2, e, &lat, x0).continue_along(&path, &opts).unwrap();
        for i in 0..2 {
            for j in 0..2 {
                assert!((end.f[i][j] - reference.m[i][j]).norm() < 1e-8, "{path:?}");
            }
        }
    }
}

#[test]
fn pair_validation() {
    let a = CouplingVector([2.0, 0.0, 0.0, 0.0]);
    assert!(validate_pair(&a, &CouplingVector([1.0, 1.0, 1.0, 0.0])).unwrap().is_some());
    assert!(validate_pair(&a, &a).is_ok());
    let err = validate_pair(&a, &CouplingVector([5.0, 0.0, 0.0, 0.0])).unwrap_err();
    assert!(matches!(err, Error::InvalidPair(_)));
    let lat = generic();
    let same = compare_traces(&a, &a, 1, &[c(1.0, 0.0), c(2.0, 0.5)], &lat, &MonodromyOptions::default()).unwrap();
    assert_eq!(same.max_diff, 0.0);
}

#[test]
fn multiplier_pairing_is_symmetric() {
    let a = [c(1.0, 0.0), c(-1.0, 0.5)];
    let b = [c(-1.0, 0.5), c(1.0, 1e-3)];
    assert!((pair_distance(&a, &b) - 1e-3).abs() < 1e-15);
    let [x, y] = eigenvalues_from(c(2.5, 0.0), c(1.0, 0.0));
    assert!((x * y - 1.0).norm() < 1e-15 && (x + y - 2.5).norm() < 1e-15);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(6))]

    #[test]
    fn intertwined_pair_shares_traces(re in -4.0f64..8.0, im in -0.5f64..0.5) {
        let lat = generic();
        let r = compare_traces(
            &LAME2,
            &CouplingVector([1.0, 1.0, 1.0, 0.0]),
            1,
            &[c(re, im)],
            &lat,
            &MonodromyOptions::default(),
        )
        .unwrap();
        prop_assert!(r.max_diff < 1e-7, "diff {}", r.max_diff);
        prop_assert!(r.max_det_defect < 1e-8);
    }
}
