//! Period monodromy of `(H^(l) - E) f = 0` by analytic continuation along pole-avoiding paths.
//!
//! Paths are straight segments; a pole of the potential closer than the detour
//! radius is passed on a circular arc on the same side as the straight segment,
//! so the homotopy class is that of the segment. A pole exactly on the segment is
//! passed with the detour to the left of the direction of travel.

use std::f64::consts::PI;
use std::io::Write;

use rayon::prelude::*;
use serde::Serialize;

use crate::darboux::darboux_shift_target;
use crate::elliptic::{Lattice, LatticeRef, C64};
use crate::error::{Error, Result};
use crate::ode::{integrate_along, Piece, Stats, Tolerances};
use crate::operators::{potential_value, CouplingVector};
use crate::quasisolvable::SignChoice;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MonodromyOptions {
    pub tol: Tolerances,
    /// Detour radius relative to `min(|omega1|, |omega3|)`.
    pub detour_factor: f64,
}

impl Default for MonodromyOptions {
    fn default() -> Self {
        MonodromyOptions {
            tol: Tolerances::default(),
            detour_factor: 0.05,
        }
    }
}

impl MonodromyOptions {
    pub fn detour_radius(&self, lat: &Lattice) -> f64 {
        self.detour_factor * lat.omega1().norm().min(lat.omega3().norm())
    }
}

/// Poles of the potential: translates of `omega_i` for every nonzero `l_i (l_i + 1)`.
pub fn active_half_periods(l: &CouplingVector) -> Vec<usize> {
    l.strengths()
        .iter()
        .enumerate()
        .filter(|(_, s)| **s != 0.0)
        .map(|(i, _)| i)
        .collect()
}

fn poles_near_segment(lat: &Lattice, active: &[usize], a: C64, b: C64, radius: f64) -> Vec<C64> {
    let mut out = Vec::new();
    let seg = Piece::Segment { from: a, to: b };
    for &i in active {
        let w = lat.half_period(i);
        let (a0, b0) = lat.lattice_coords(a - w);
        let (a1, b1) = lat.lattice_coords(b - w);
        let (mlo, mhi) = (a0.min(a1).floor() as i64 - 1, a0.max(a1).ceil() as i64 + 1);
        let (nlo, nhi) = (b0.min(b1).floor() as i64 - 1, b0.max(b1).ceil() as i64 + 1);
        for m in mlo..=mhi {
            for n in nlo..=nhi {
                let p = w + lat.omega1() * (2.0 * m as f64) + lat.omega3() * (2.0 * n as f64);
                if seg.distance_to(p) < radius {
                    out.push(p);
                }
            }
        }
    }
    out
}

fn poles_in_region(lat: &Lattice, active: &[usize], corners: &[C64], margin: f64) -> Vec<C64> {
    let mut out = Vec::new();
    for &i in active {
        let w = lat.half_period(i);
        let coords: Vec<(f64, f64)> = corners.iter().map(|c| lat.lattice_coords(c - w)).collect();
        let lo_a = coords.iter().map(|c| c.0).fold(f64::INFINITY, f64::min).floor() as i64 - 1;
        let hi_a = coords.iter().map(|c| c.0).fold(f64::NEG_INFINITY, f64::max).ceil() as i64 + 1;
        let lo_b = coords.iter().map(|c| c.1).fold(f64::INFINITY, f64::min).floor() as i64 - 1;
        let hi_b = coords.iter().map(|c| c.1).fold(f64::NEG_INFINITY, f64::max).ceil() as i64 + 1;
        for m in lo_a..=hi_a {
            for n in lo_b..=hi_b {
                let p = w + lat.omega1() * (2.0 * m as f64) + lat.omega3() * (2.0 * n as f64);
                let near = corners
                    .windows(2)
                    .any(|c| Piece::Segment { from: c[0], to: c[1] }.distance_to(p) < margin);
                if near || margin.is_infinite() {
                    out.push(p);
                }
            }
        }
    }
    out
}

/// Polyline from `x0` to `x0 + shift` in the class of the straight segment, kept as far from
/// the poles as a parallel displacement allows.
///
/// The segment is displaced by `delta` perpendicular to itself; a displacement is admissible
/// when the parallelogram it sweeps contains no pole.
pub fn period_path(lat: &Lattice, l: &CouplingVector, x0: C64, shift: C64) -> Vec<C64> {
    let active = active_half_periods(l);
    let end = x0 + shift;
    if active.is_empty() {
        return vec![end];
    }
    let u = shift / shift.norm();
    let nrm = u * C64::i();
    let other = if (shift - lat.omega1() * 2.0).norm() < (shift - lat.omega3() * 2.0).norm() {
        lat.omega3() * 2.0
    } else {
        lat.omega1() * 2.0
    };
    let height = (other * nrm.conj()).re.abs();
    let poles = poles_in_region(
        lat,
        &active,
        &[x0 - nrm * height, x0 + nrm * height, end + nrm * height, end - nrm * height],
        f64::INFINITY,
    );
    let clearance = |pts: &[C64]| -> f64 {
        let mut c = f64::INFINITY;
        for w in pts.windows(2) {
            let seg = Piece::Segment { from: w[0], to: w[1] };
            for &p in &poles {
                c = c.min(seg.distance_to(p));
            }
        }
        c
    };
    let mut best = (clearance(&[x0, end]), 0.0);
    const STEPS: i32 = 32;
    for j in 1..=STEPS {
        for sgn in [1.0, -1.0] {
            let t = sgn * height * j as f64 / (STEPS as f64 * 2.0);
            let delta = nrm * t;
            // no pole inside the swept parallelogram
            let swept = poles.iter().any(|p| {
                let rel = (p - x0) * u.conj();
                let along = rel.re / shift.norm();
                let across = rel.im / t;
                (-1e-12..=1.0 + 1e-12).contains(&along) && (-1e-12..=1.0 + 1e-12).contains(&across)
            });
            if swept {
                continue;
            }
            let c = clearance(&[x0, x0 + delta, end + delta, end]);
            if c > best.0 * (1.0 + 1e-9) {
                best = (c, t);
            }
        }
    }
    if best.1 == 0.0 {
        vec![end]
    } else {
        let delta = nrm * best.1;
        vec![x0 + delta, end + delta, end]
    }
}

/// Straight segment from `a` to `b` with arcs of radius `radius` around nearby poles.
pub fn plan_segment(lat: &Lattice, l: &CouplingVector, a: C64, b: C64, radius: f64) -> Result<Vec<Piece>> {
    let active = active_half_periods(l);
    let len = (b - a).norm();
    if len == 0.0 {
        return Ok(Vec::new());
    }
    let u = (b - a) / len;
    let mut poles = poles_near_segment(lat, &active, a, b, radius);
    for &p in &poles {
        if (p - a).norm() < radius || (p - b).norm() < radius {
            return Err(Error::PathRejected {
                point: p,
                reason: format!("endpoint within detour radius {radius:e} of a pole"),
            });
        }
    }
    poles.sort_by(|p, q| {
        let tp = ((p - a) * u.conj()).re;
        let tq = ((q - a) * u.conj()).re;
        tp.partial_cmp(&tq).expect("finite")
    });
    let mut pieces = Vec::new();
    let mut cursor = a;
    let mut cursor_t = 0.0;
    for p in poles {
        let rel = (p - a) * u.conj();
        let (t, delta) = (rel.re, rel.im);
        let half = (radius * radius - delta * delta).max(0.0).sqrt();
        let (t_in, t_out) = (t - half, t + half);
        if t_in < cursor_t {
            return Err(Error::PathRejected {
                point: p,
                reason: "overlapping detours; choose a different path".into(),
            });
        }
        let entry = a + u * t_in;
        let exit = a + u * t_out;
        pieces.push(Piece::Segment { from: cursor, to: entry });
        let th_in = (entry - p).arg();
        let th_out = (exit - p).arg();
        let ccw = (th_out - th_in).rem_euclid(2.0 * PI);
        let sweep = if delta.abs() <= 1e-12 * radius {
            -PI
        } else if delta > 0.0 {
            ccw
        } else {
            ccw - 2.0 * PI
        };
        pieces.push(Piece::Arc {
            center: p,
            radius,
            start_angle: th_in,
            sweep,
        });
        cursor = exit;
        cursor_t = t_out;
    }
    pieces.push(Piece::Segment { from: cursor, to: b });
    Ok(pieces.into_iter().filter(|p| p.length() > 0.0).collect())
}

/// Fundamental pair carried along a path: `f[0][j] = f_j`, `f[1][j] = f_j'`.
#[derive(Debug, Clone)]
pub struct SolutionFrame {
    pub x: C64,
    pub f: [[C64; 2]; 2],
    pub energy: C64,
    pub l: CouplingVector,
    pub lat: LatticeRef,
}

impl SolutionFrame {
    /// Frame with `F(x0) = I`.
    pub fn identity(l: &CouplingVector, energy: C64, lat: &LatticeRef, x0: C64) -> Self {
        Self::with_matrix(l, energy, lat, x0, [[C64::new(1.0, 0.0), C64::new(0.0, 0.0)], [C64::new(0.0, 0.0), C64::new(1.0, 0.0)]])
    }

    pub fn with_matrix(l: &CouplingVector, energy: C64, lat: &LatticeRef, x0: C64, f: [[C64; 2]; 2]) -> Self {
        SolutionFrame {
            x: x0,
            f,
            energy,
            l: *l,
            lat: lat.clone(),
        }
    }

    pub fn wronskian(&self) -> C64 {
        det2(&self.f)
    }

    /// Continues the frame along a chain of pieces starting at `self.x`.
    pub fn continue_pieces(&self, pieces: &[Piece], tol: &Tolerances) -> Result<(SolutionFrame, Stats)> {
        let y0 = [self.f[0][0], self.f[1][0], self.f[0][1], self.f[1][1]];
        let lat = &self.lat;
        let (l, energy) = (self.l, self.energy);
        let (y, stats) = integrate_along(pieces, &y0, tol, |x, y, dy| {
            let w = potential_value(&l, lat, x)? - energy;
            dy[0] = y[1];
            dy[1] = w * y[0];
            dy[2] = y[3];
            dy[3] = w * y[2];
            Ok(())
        })?;
        let end = pieces.last().map(|p| p.end()).unwrap_or(self.x);
        let mut out = self.clone();
        out.x = end;
        out.f = [[y[0], y[2]], [y[1], y[3]]];
        Ok((out, stats))
    }

    /// Continues the frame along a polyline, planning detours around poles.
    pub fn continue_along(&self, path: &[C64], opts: &MonodromyOptions) -> Result<(SolutionFrame, Stats)> {
        let radius = opts.detour_radius(&self.lat);
        let mut pieces = Vec::new();
        let mut prev = self.x;
        for &p in path {
            pieces.extend(plan_segment(&self.lat, &self.l, prev, p, radius)?);
            prev = p;
        }
        self.continue_pieces(&pieces, &opts.tol)
    }

    /// Values and derivatives of both solutions at `self.x`.
    pub fn values(&self) -> ([C64; 2], [C64; 2]) {
        (self.f[0], self.f[1])
    }
}

pub fn det2(m: &[[C64; 2]; 2]) -> C64 {
    m[0][0] * m[1][1] - m[0][1] * m[1][0]
}

fn inv2(m: &[[C64; 2]; 2]) -> [[C64; 2]; 2] {
    let d = det2(m);
    [[m[1][1] / d, -m[0][1] / d], [-m[1][0] / d, m[0][0] / d]]
}

fn mul2(a: &[[C64; 2]; 2], b: &[[C64; 2]; 2]) -> [[C64; 2]; 2] {
    std::array::from_fn(|i| std::array::from_fn(|j| a[i][0] * b[0][j] + a[i][1] * b[1][j]))
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct MonodromyMatrix {
    pub m: [[C64; 2]; 2],
    pub k: u8,
    pub energy: C64,
    pub basepoint: C64,
}

impl MonodromyMatrix {
    pub fn trace(&self) -> C64 {
        self.m[0][0] + self.m[1][1]
    }

    pub fn det(&self) -> C64 {
        det2(&self.m)
    }

    /// Roots of `lambda^2 - tr lambda + det`.
    pub fn eigenvalues(&self) -> [C64; 2] {
        eigenvalues_from(self.trace(), self.det())
    }
}

pub fn eigenvalues_from(tr: C64, det: C64) -> [C64; 2] {
    let disc = (tr * tr - det * 4.0).sqrt();
    let (a, b) = ((tr + disc) / 2.0, (tr - disc) / 2.0);
    // the smaller root from the product avoids cancellation
    if a.norm() >= b.norm() && a.norm() > 0.0 {
        [a, det / a]
    } else if b.norm() > 0.0 {
        [det / b, b]
    } else {
        [a, b]
    }
}

fn period(lat: &Lattice, k: u8) -> Result<C64> {
    match k {
        1 => Ok(lat.omega1() * 2.0),
        3 => Ok(lat.omega3() * 2.0),
        _ => Err(Error::Schema(format!("period index must be 1 or 3, got {k}"))),
    }
}

/// `M = F(x0)^-1 F(x0 + 2 omega_k)` along the straight-segment class.
pub fn period_monodromy(
    l: &CouplingVector,
    energy: C64,
    k: u8,
    lat: &LatticeRef,
    basepoint: Option<C64>,
    opts: &MonodromyOptions,
) -> Result<MonodromyMatrix> {
    let x0 = basepoint.unwrap_or_else(|| lat.anchor());
    let frame = SolutionFrame::identity(l, energy, lat, x0);
    period_monodromy_from(&frame, k, opts)
}

/// Monodromy in the basis given by an arbitrary initial frame.
pub fn period_monodromy_from(frame: &SolutionFrame, k: u8, opts: &MonodromyOptions) -> Result<MonodromyMatrix> {
    let shift = period(&frame.lat, k)?;
    let path = period_path(&frame.lat, &frame.l, frame.x, shift);
    let (end, _) = frame.continue_along(&path, opts)?;
    let m = mul2(&inv2(&frame.f), &end.f);
    Ok(MonodromyMatrix {
        m,
        k,
        energy: frame.energy,
        basepoint: frame.x,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct ScanRow {
    pub energy: C64,
    pub trace: Option<C64>,
    pub det: Option<C64>,
    pub error: Option<String>,
}

/// One row per energy, computed in parallel, in grid order.
pub fn trace_scan(
    l: &CouplingVector,
    k: u8,
    grid: &[C64],
    lat: &LatticeRef,
    basepoint: Option<C64>,
    opts: &MonodromyOptions,
) -> Vec<ScanRow> {
    grid.par_iter()
        .map(|&e| match period_monodromy(l, e, k, lat, basepoint, opts) {
            Ok(m) => ScanRow {
                energy: e,
                trace: Some(m.trace()),
                det: Some(m.det()),
                error: None,
            },
            Err(err) => ScanRow {
                energy: e,
                trace: None,
                det: None,
                error: Some(err.to_string()),
            },
        })
        .collect()
}

/// Sign choice of `la` whose shifted target is equivalent to `lb`; identical couplings pass trivially.
pub fn validate_pair(la: &CouplingVector, lb: &CouplingVector) -> Result<Option<SignChoice>> {
    for s in SignChoice::all_for(la) {
        if darboux_shift_target(la, &s).equivalent(lb) {
            return Ok(Some(s));
        }
    }
    if la.equivalent(lb) {
        return Ok(None);
    }
    Err(Error::InvalidPair(format!(
        "({la}) -> ({lb}): no alpha with alpha_i in {{-l_i, l_i + 1}} has (alpha_i + d) equivalent to the target under l ~ -l - 1"
    )))
}

#[derive(Debug, Clone, Serialize)]
pub struct TraceComparison {
    pub sign: Option<SignChoice>,
    pub rows: Vec<ComparisonRow>,
    pub max_diff: f64,
    pub max_det_defect: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct ComparisonRow {
    pub energy: C64,
    pub trace_a: C64,
    pub trace_b: C64,
    pub det_a: C64,
    pub det_b: C64,
}

/// `max |tr M_A(E) - tr M_B(E)|` over the grid for a valid pair.
pub fn compare_traces(
    la: &CouplingVector,
    lb: &CouplingVector,
    k: u8,
    grid: &[C64],
    lat: &LatticeRef,
    opts: &MonodromyOptions,
) -> Result<TraceComparison> {
    let sign = validate_pair(la, lb)?;
    let rows: Vec<Result<ComparisonRow>> = grid
        .par_iter()
        .map(|&e| {
            let a = period_monodromy(la, e, k, lat, None, opts)?;
            let b = period_monodromy(lb, e, k, lat, None, opts)?;
            Ok(ComparisonRow {
                energy: e,
                trace_a: a.trace(),
                trace_b: b.trace(),
                det_a: a.det(),
                det_b: b.det(),
            })
        })
        .collect();
    let rows: Vec<ComparisonRow> = rows.into_iter().collect::<Result<_>>()?;
    let max_diff = rows.iter().map(|r| (r.trace_a - r.trace_b).norm()).fold(0.0, f64::max);
    let max_det_defect = rows
        .iter()
        .map(|r| (r.det_a - 1.0).norm().max((r.det_b - 1.0).norm()))
        .fold(0.0, f64::max);
    Ok(TraceComparison {
        sign,
        rows,
        max_diff,
        max_det_defect,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct PeriodicityReport {
    pub energy: C64,
    pub k: u8,
    pub eigenvalues_a: [C64; 2],
    pub eigenvalues_b: [C64; 2],
    /// Largest distance after the better of the two pairings.
    pub distance: f64,
}

/// Multiplier distance between two pairs of monodromy eigenvalues under optimal pairing.
pub fn pair_distance(a: &[C64; 2], b: &[C64; 2]) -> f64 {
    let direct = (a[0] - b[0]).norm().max((a[1] - b[1]).norm());
    let crossed = (a[0] - b[1]).norm().max((a[1] - b[0]).norm());
    direct.min(crossed)
}

pub fn periodicity_transfer_check(
    la: &CouplingVector,
    lb: &CouplingVector,
    k: u8,
    energy: C64,
    lat: &LatticeRef,
    opts: &MonodromyOptions,
) -> Result<PeriodicityReport> {
    validate_pair(la, lb)?;
    let ma = period_monodromy(la, energy, k, lat, None, opts)?;
    let mb = period_monodromy(lb, energy, k, lat, None, opts)?;
    let (ea, eb) = (ma.eigenvalues(), mb.eigenvalues());
    Ok(PeriodicityReport {
        energy,
        k,
        eigenvalues_a: ea,
        eigenvalues_b: eb,
        distance: pair_distance(&ea, &eb),
    })
}

/// Fixed scientific notation with 15 significant digits.
/// 15 significant digits; `-0` prints as `0`.
pub fn fmt15(v: f64) -> String {
    let v = if v == 0.0 { 0.0 } else { v };
    format!("{v:.14e}")
}

pub fn fmt_complex(z: C64) -> String {
    format!("{}{}{}i", fmt15(z.re), if z.im < 0.0 { "" } else { "+" }, fmt15(z.im))
}

pub const CSV_HEADER: &str = "E_re,E_im,trM_re,trM_im,detM_re,detM_im,k,basepoint,lattice_hash";

/// Writes scan rows; failed rows carry `NaN` in the numeric columns.
pub fn write_scan_csv<W: Write>(
    mut w: W,
    rows: &[ScanRow],
    k: u8,
    basepoint: C64,
    lat: &Lattice,
) -> Result<()> {
    writeln!(w, "{CSV_HEADER}")?;
    let hash = lat.hash();
    let nan = C64::new(f64::NAN, f64::NAN);
    for r in rows {
        let tr = r.trace.unwrap_or(nan);
        let det = r.det.unwrap_or(nan);
        writeln!(
            w,
            "{},{},{},{},{},{},{},{},{}",
            fmt15(r.energy.re),
            fmt15(r.energy.im),
            fmt15(tr.re),
            fmt15(tr.im),
            fmt15(det.re),
            fmt15(det.im),
            k,
            fmt_complex(basepoint),
            hash
        )?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::sync::Arc;

    fn lat() -> LatticeRef {
        Arc::new(Lattice::from_half_periods(C64::new(0.5, 0.0), C64::new(0.2, 0.35)).unwrap())
    }

    #[test]
    fn fixed_width_formatting() {
        assert_eq!(fmt15(-0.0), "0.00000000000000e0");
        assert_eq!(fmt15(0.1 + 0.2), "3.00000000000000e-1");
        assert_eq!(fmt_complex(C64::new(1.0, -0.0)), "1.00000000000000e0+0.00000000000000e0i");
        assert_eq!(fmt_complex(C64::new(-2.5, -1.0)), "-2.50000000000000e0-1.00000000000000e0i");
    }

    #[test]
    fn free_case_trace_is_cosine() {
        let lat = lat();
        let l = CouplingVector([0.0; 4]);
        for &(e, k) in &[(2.0, 1u8), (7.5, 3u8), (-1.0, 1u8)] {
            let energy = C64::new(e, 0.0);
            let m = period_monodromy(&l, energy, k, &lat, None, &MonodromyOptions::default()).unwrap();
            let w = if k == 1 { lat.omega1() } else { lat.omega3() };
            let expect = (w * 2.0 * energy.sqrt()).cos() * 2.0;
            assert!((m.trace() - expect).norm() < 1e-9, "E={e} k={k}");
            assert!((m.det() - 1.0).norm() < 1e-9);
        }
    }

    #[test]
    fn detour_keeps_segment_side() {
        let lat = lat();
        let l = CouplingVector([1.0, 0.0, 0.0, 0.0]);
        let r = 0.05;
        // pole at the origin slightly left of the segment
        let pieces = plan_segment(&lat, &l, C64::new(-0.2, -0.01), C64::new(0.2, -0.01), r).unwrap();
        assert_eq!(pieces.len(), 3);
        let w: f64 = pieces.iter().map(|p| p.winding_around(C64::new(0.0, 0.0), 200)).sum();
        let straight = Piece::Segment {
            from: C64::new(-0.2, -0.01),
            to: C64::new(0.2, -0.01),
        }
        .winding_around(C64::new(0.0, 0.0), 200);
        assert!((w - straight).abs() < 1e-9);
        for p in &pieces {
            assert!(p.distance_to(C64::new(0.0, 0.0)) >= r - 1e-12);
        }
    }

    #[test]
    fn endpoint_on_pole_is_rejected() {
        let lat = lat();
        let l = CouplingVector([1.0, 0.0, 0.0, 0.0]);
        let err = plan_segment(&lat, &l, C64::new(0.001, 0.0), C64::new(0.3, 0.1), 0.02).unwrap_err();
        assert!(matches!(err, Error::PathRejected { .. }));
    }

    #[test]
    fn csv_layout() {
        let lat = lat();
        let rows = trace_scan(&CouplingVector([0.0; 4]), 1, &[C64::new(1.0, 0.0)], &lat, None, &MonodromyOptions::default());
        let mut buf = Vec::new();
        write_scan_csv(&mut buf, &rows, 1, lat.anchor(), &lat).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), CSV_HEADER);
        assert_eq!(lines.next().unwrap().split(',').count(), 9);
        assert!(trace_scan(&CouplingVector([0.0; 4]), 1, &[], &lat, None, &MonodromyOptions::default()).is_empty());
    }
}
