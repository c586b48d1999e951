//! Integral transformation of Heun's equation in the rational coordinate.
//!
//! For `mu` a root of `(mu - (2 - alpha)) (mu - (2 - beta)) = 0`,
//! `y~(z) = \int_[gamma_z, gamma_p] y(w) (z - w)^(-mu) dw` solves Heun's equation with
//! shifted parameters. `[gamma_z, gamma_p]` is the Pochhammer commutator loop based at `o`.
//! The solution `y(w)` and the branch of `log(z - w)` are carried along the contour as
//! one ODE system, together with the three kernel integrals for `y~, y~', y~''`.

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::darboux::darboux_shift_target;
use crate::elliptic::C64;
use crate::error::{Error, Result};
use crate::ode::{integrate_along, Piece, Tolerances};
use crate::operators::{couplings_from_rational, CouplingVector, HeunRationalParams};
use crate::quasisolvable::SignChoice;

const MU_TOL: f64 = 1e-12;

/// Which root of the quadratic fixes `mu`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RootChoice {
    /// `mu = 2 - alpha`
    Alpha,
    /// `mu = 2 - beta`
    Beta,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TransformParams {
    pub mu: C64,
    pub root: RootChoice,
    pub source: HeunRationalParams,
    pub target: HeunRationalParams,
}

/// Parameters of the equation solved by `y~`.
pub fn transformed_params(p: &HeunRationalParams, root: RootChoice) -> Result<TransformParams> {
    p.validate()?;
    let mu = match root {
        RootChoice::Alpha => 2.0 - p.alpha,
        RootChoice::Beta => 2.0 - p.beta,
    };
    let quad = (mu - (2.0 - p.alpha)) * (mu - (2.0 - p.beta));
    debug_assert!(quad.norm() <= MU_TOL * (1.0 + mu.norm_sqr()));
    let shift = mu - 1.0;
    let q = p.q + (mu - 1.0) * (p.epsilon + p.delta * p.t + (p.gamma + mu - 2.0) * (p.t + 1.0));
    let target = HeunRationalParams::new(
        p.gamma + shift,
        p.delta + shift,
        p.epsilon + shift,
        mu,
        2.0 * mu + p.alpha + p.beta - 3.0,
        q,
        p.t,
    )?;
    Ok(TransformParams {
        mu,
        root,
        source: *p,
        target,
    })
}

impl TransformParams {
    /// `mu` as a positive integer, if it is one.
    pub fn integer_mu(&self) -> Option<u32> {
        let r = self.mu.re.round();
        (self.mu.im.abs() < MU_TOL && (self.mu.re - r).abs() < MU_TOL && r >= 1.0).then_some(r as u32)
    }
}

/// Sign choice in coupling space realizing the transformation, with `d = mu - 2`.
///
/// `alpha_i = -l_i` for `i = 1, 2, 3`; `alpha_0 = -l_0` for the root `2 - alpha` and
/// `l_0 + 1` for the root `2 - beta`.
pub fn coupling_sign(tp: &TransformParams) -> Result<(CouplingVector, SignChoice)> {
    let (l, _) = couplings_from_rational(&tp.source)?;
    let [l0, l1, l2, l3] = l.0;
    let a0 = match tp.root {
        RootChoice::Alpha => -l0,
        RootChoice::Beta => l0 + 1.0,
    };
    let sign = SignChoice::new(&l, [a0, -l1, -l2, -l3])?;
    Ok((l, sign))
}

#[derive(Debug, Clone, Serialize)]
pub struct ConsistencyReport {
    pub source: CouplingVector,
    pub sign: SignChoice,
    /// Normalized couplings of the transformed rational equation.
    pub target_from_params: CouplingVector,
    /// Normalized Darboux-Crum target of the source couplings.
    pub target_from_shift: CouplingVector,
    /// `|d - (mu - 2)|`
    pub d_defect: f64,
    pub consistent: bool,
}

/// Compares the rational parameter map with the coupling-space shift `l -> alpha + d`.
pub fn coupling_consistency(tp: &TransformParams) -> Result<ConsistencyReport> {
    let (l, sign) = coupling_sign(tp)?;
    let (lt, _) = couplings_from_rational(&tp.target)?;
    let from_params = lt.normalized();
    let from_shift = darboux_shift_target(&l, &sign);
    let d_defect = (C64::new(sign.d, 0.0) - (tp.mu - 2.0)).norm();
    Ok(ConsistencyReport {
        source: l,
        sign,
        target_from_params: from_params,
        target_from_shift: from_shift,
        d_defect,
        consistent: d_defect < 1e-10 && from_params.equivalent(&from_shift),
    })
}

/// The second puncture of the Pochhammer contour.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Cycle {
    #[serde(rename = "0")]
    Zero,
    #[serde(rename = "1")]
    One,
    #[serde(rename = "t")]
    T,
    #[serde(rename = "inf")]
    Infinity,
}

impl Cycle {
    pub const ALL: [Cycle; 4] = [Cycle::Zero, Cycle::One, Cycle::T, Cycle::Infinity];

    pub fn point(&self, t: C64) -> Option<C64> {
        match self {
            Cycle::Zero => Some(C64::new(0.0, 0.0)),
            Cycle::One => Some(C64::new(1.0, 0.0)),
            Cycle::T => Some(t),
            Cycle::Infinity => None,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Cycle::Zero => "0",
            Cycle::One => "1",
            Cycle::T => "t",
            Cycle::Infinity => "inf",
        }
    }
}

/// Centroid of `{0, 1, t}` moved down by `0.4 i`.
pub fn default_base_point(t: C64) -> C64 {
    (t + 1.0) / 3.0 - C64::new(0.0, 0.4)
}

#[derive(Debug, Clone, PartialEq)]
pub struct PochhammerContour {
    pub base: C64,
    pub z: C64,
    pub cycle: Cycle,
    pub t: C64,
    pub clearance: f64,
    /// `gamma_z`, `gamma_p`, `gamma_z^-1`, `gamma_p^-1`.
    pub legs: [Vec<Piece>; 4],
}

impl PochhammerContour {
    pub fn pieces(&self) -> impl Iterator<Item = &Piece> {
        self.legs.iter().flatten()
    }

    pub fn length(&self) -> f64 {
        self.pieces().map(|p| p.length()).sum()
    }

    /// Winding numbers of the four legs around `point`.
    pub fn leg_windings(&self, point: C64) -> [f64; 4] {
        std::array::from_fn(|k| {
            self.legs[k]
                .iter()
                .map(|p| p.winding_around(point, 256))
                .sum()
        })
    }

    /// Vertices of a polyline approximation, for plotting and fixtures.
    pub fn polyline(&self, per_piece: usize) -> Vec<C64> {
        let mut out = vec![self.base];
        for p in self.pieces() {
            let n = match p {
                Piece::Segment { .. } => 1,
                Piece::Arc { .. } => per_piece.max(1),
            };
            for j in 1..=n {
                out.push(p.point(p.length() * j as f64 / n as f64));
            }
        }
        out
    }
}

/// Loop from `o` to the circle of radius `r` around `c`, once around anticlockwise and back.
fn loop_around(o: C64, c: C64, r: f64, sweep: f64) -> Vec<Piece> {
    let dir = (o - c) / (o - c).norm();
    let touch = c + dir * r;
    vec![
        Piece::Segment { from: o, to: touch },
        Piece::Arc {
            center: c,
            radius: r,
            start_angle: dir.arg(),
            sweep,
        },
        Piece::Segment { from: touch, to: o },
    ]
}

fn reversed(leg: &[Piece]) -> Vec<Piece> {
    leg.iter().rev().map(Piece::reversed).collect()
}

/// Builds `[gamma_z, gamma_p]` based at `o`.
///
/// Each loop runs along the straight segment from `o` to a circle of radius `clearance`
/// around its puncture. `gamma_inf` is the clockwise circle of radius `infinity_radius`
/// about the centroid of `{0, 1, t}`, reached radially from `o`.
pub fn build_pochhammer(
    o: C64,
    z: C64,
    cycle: Cycle,
    t: C64,
    clearance: f64,
    infinity_radius: f64,
) -> Result<PochhammerContour> {
    if !(clearance > 0.0) {
        return Err(Error::Crowding(format!("clearance must be positive, got {clearance}")));
    }
    let finite = [C64::new(0.0, 0.0), C64::new(1.0, 0.0), t];
    let mut marked: Vec<(&str, C64)> = vec![("0", finite[0]), ("1", finite[1]), ("t", t), ("z", z), ("o", o)];
    for i in 0..marked.len() {
        for j in (i + 1)..marked.len() {
            let dist = (marked[i].1 - marked[j].1).norm();
            if dist <= 3.0 * clearance {
                return Err(Error::Crowding(format!(
                    "{} and {} are {dist:.3e} apart, need more than 3 * clearance = {:.3e}; use a smaller clearance or a different base point",
                    marked[i].0,
                    marked[j].0,
                    3.0 * clearance
                )));
            }
        }
    }
    marked.pop();
    let check_leg = |leg: &[Piece], own: Option<C64>| -> Result<()> {
        for (name, m) in &marked {
            if Some(*m) == own {
                continue;
            }
            for piece in leg {
                if piece.distance_to(*m) <= clearance {
                    return Err(Error::Crowding(format!(
                        "the loop around {} passes within the clearance {clearance:.3e} of {name}; choose a different base point",
                        own.map_or("infinity".to_string(), |p| p.to_string())
                    )));
                }
            }
        }
        Ok(())
    };

    let gz = loop_around(o, z, clearance, 2.0 * PI);
    check_leg(&gz, Some(z))?;
    let gp = match cycle.point(t) {
        Some(p) => loop_around(o, p, clearance, 2.0 * PI),
        None => {
            let c = (t + 1.0) / 3.0;
            let reach = marked
                .iter()
                .map(|(_, m)| (m - c).norm())
                .chain(std::iter::once((o - c).norm()))
                .fold(0.0, f64::max);
            if infinity_radius <= reach + clearance {
                return Err(Error::Crowding(format!(
                    "radius {infinity_radius} of the loop around infinity must exceed {:.3e}",
                    reach + clearance
                )));
            }
            if (o - c).norm() < 1e-12 {
                return Err(Error::Crowding("base point coincides with the centroid of 0, 1, t".into()));
            }
            loop_around(o, c, infinity_radius, -2.0 * PI)
        }
    };
    check_leg(&gp, cycle.point(t))?;
    let legs = [gz.clone(), gp.clone(), reversed(&gz), reversed(&gp)];
    Ok(PochhammerContour {
        base: o,
        z,
        cycle,
        t,
        clearance,
        legs,
    })
}

/// Contour geometry and integration settings; unset fields take their defaults.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
pub struct ContourOptions {
    pub base: Option<C64>,
    pub clearance: Option<f64>,
    pub infinity_radius: Option<f64>,
}

impl ContourOptions {
    pub fn base_point(&self, t: C64) -> C64 {
        self.base.unwrap_or_else(|| default_base_point(t))
    }

    /// A quarter of the smallest distance among `0, 1, t, z, o`, at most `0.1`.
    pub fn clearance_for(&self, t: C64, z: C64) -> f64 {
        self.clearance.unwrap_or_else(|| {
            let o = self.base_point(t);
            let pts = [C64::new(0.0, 0.0), C64::new(1.0, 0.0), t, z, o];
            let mut m = f64::INFINITY;
            for i in 0..pts.len() {
                for j in (i + 1)..pts.len() {
                    m = m.min((pts[i] - pts[j]).norm());
                }
            }
            (m / 4.0).min(0.1)
        })
    }

    /// Twice the largest distance from the centroid of `{0, 1, t}` to `0, 1, t, z, o`.
    pub fn radius_for(&self, t: C64, z: C64) -> f64 {
        self.infinity_radius.unwrap_or_else(|| {
            let c = (t + 1.0) / 3.0;
            let o = self.base_point(t);
            2.0 * [C64::new(0.0, 0.0), C64::new(1.0, 0.0), t, z, o]
                .iter()
                .map(|p| (p - c).norm())
                .fold(0.0, f64::max)
        })
    }

    pub fn contour(&self, t: C64, z: C64, cycle: Cycle) -> Result<PochhammerContour> {
        build_pochhammer(
            self.base_point(t),
            z,
            cycle,
            t,
            self.clearance_for(t, z),
            self.radius_for(t, z),
        )
    }
}

fn heun_rhs(p: &HeunRationalParams, w: C64, y: C64, dy: C64) -> Result<C64> {
    for s in p.singular_points() {
        if (w - s).norm() < 1e-12 {
            return Err(Error::PoleProximity {
                x: w,
                nearest: s,
                radius: 1e-12,
            });
        }
    }
    let (pc, rc) = p.coefficients(w);
    Ok(-pc * dy - rc * y)
}

/// Continues `(y, y')` along `pieces`.
pub fn continue_solution(p: &HeunRationalParams, pieces: &[Piece], y0: [C64; 2], tol: &Tolerances) -> Result<[C64; 2]> {
    let (y, _) = integrate_along(pieces, &y0, tol, |w, y, dy| {
        dy[0] = y[1];
        dy[1] = heun_rhs(p, w, y[0], y[1])?;
        Ok(())
    })?;
    Ok([y[0], y[1]])
}

/// `y~`, `y~'`, `y~''` with a quadrature error estimate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TransformValue {
    pub values: [C64; 3],
    /// `|difference|` against a pass at 100 times looser tolerance, relative to `|y~| + |y~'| + |y~''|`.
    pub error_estimate: f64,
}

fn contour_pass(
    y0: [C64; 2],
    p: &HeunRationalParams,
    mu: C64,
    contour: &PochhammerContour,
    tol: &Tolerances,
) -> Result<[C64; 3]> {
    let z = contour.z;
    let pieces: Vec<Piece> = contour.pieces().copied().collect();
    let zero = C64::new(0.0, 0.0);
    let state = [y0[0], y0[1], (z - contour.base).ln(), zero, zero, zero];
    let (y, _) = integrate_along(&pieces, &state, tol, |w, y, dy| {
        dy[0] = y[1];
        dy[1] = heun_rhs(p, w, y[0], y[1])?;
        // log(z - w) is integrated, not evaluated, so its branch follows the path
        dy[2] = -1.0 / (z - w);
        let k0 = (-mu * y[2]).exp();
        let inv = (-y[2]).exp();
        dy[3] = y[0] * k0;
        dy[4] = y[0] * k0 * inv * (-mu);
        dy[5] = y[0] * k0 * inv * inv * mu * (mu + 1.0);
        Ok(())
    })?;
    Ok([y[3], y[4], y[5]])
}

/// Evaluates the transform of the solution with data `y0 = (y(o), y'(o))`.
pub fn integral_transform(
    y0: [C64; 2],
    tp: &TransformParams,
    contour: &PochhammerContour,
    tol: &Tolerances,
) -> Result<TransformValue> {
    let p = &tp.source;
    if (p.t - contour.t).norm() > 1e-14 * (1.0 + p.t.norm()) {
        return Err(Error::InvalidParams("contour built for a different t".into()));
    }
    let fine = contour_pass(y0, p, tp.mu, contour, tol)?;
    let mut loose = *tol;
    loose.rtol *= 1e2;
    loose.atol *= 1e2;
    let coarse = contour_pass(y0, p, tp.mu, contour, &loose)?;
    let scale: f64 = fine.iter().map(|v| v.norm()).sum();
    let diff: f64 = fine.iter().zip(&coarse).map(|(a, b)| (a - b).norm()).sum();
    let error_estimate = if scale > 0.0 { diff / scale } else { diff };
    Ok(TransformValue {
        values: fine,
        error_estimate,
    })
}

/// `|y'' + p y' + r y| / (|y''| + |p y'| + |r y|)`; zero for the zero function.
pub fn heun_residual(p: &HeunRationalParams, z: C64, v: [C64; 3]) -> f64 {
    let (pc, rc) = p.coefficients(z);
    let terms = [v[2], pc * v[1], rc * v[0]];
    let scale: f64 = terms.iter().map(|t| t.norm()).sum();
    let res = (terms[0] + terms[1] + terms[2]).norm();
    if scale == 0.0 {
        0.0
    } else {
        res / scale
    }
}

/// Taylor coefficients at `z` of the solution with `y(z) = y`, `y'(z) = dy`, up to `h^n`.
pub fn heun_jet(p: &HeunRationalParams, z: C64, y: C64, dy: C64, n: usize) -> Result<Vec<C64>> {
    for s in p.singular_points() {
        if (z - s).norm() < 1e-8 {
            return Err(Error::PoleProximity {
                x: z,
                nearest: s,
                radius: 1e-8,
            });
        }
    }
    // w(w-1)(w-t), gamma (w-1)(w-t) + delta w (w-t) + eps w (w-1), alpha beta w - q in h = w - z
    let mul = |a: &[C64], b: &[C64]| -> Vec<C64> {
        let mut out = vec![C64::new(0.0, 0.0); a.len() + b.len() - 1];
        for (i, x) in a.iter().enumerate() {
            for (j, v) in b.iter().enumerate() {
                out[i + j] += x * v;
            }
        }
        out
    };
    let one = C64::new(1.0, 0.0);
    let lin = |c: C64| [z - c, one];
    let (w0, w1, wt) = (lin(C64::new(0.0, 0.0)), lin(one), lin(p.t));
    let p3 = mul(&mul(&w0, &w1), &wt);
    let mut p2 = [C64::new(0.0, 0.0); 3];
    for (coef, a, b) in [(p.gamma, w1, wt), (p.delta, w0, wt), (p.epsilon, w0, w1)] {
        for (o, v) in p2.iter_mut().zip(mul(&a, &b)) {
            *o += coef * v;
        }
    }
    let ab = p.alpha * p.beta;
    let p1 = [ab * z - p.q, ab];
    let mut c = vec![C64::new(0.0, 0.0); n.max(1) + 1];
    c[0] = y;
    c[1] = dy;
    for m in 0..n.saturating_sub(1) {
        let mut s = C64::new(0.0, 0.0);
        for j in 1..=m.min(3) {
            s += p3[j] * ((m - j + 2) * (m - j + 1)) as f64 * c[m - j + 2];
        }
        for j in 0..=m.min(2) {
            s += p2[j] * (m - j + 1) as f64 * c[m - j + 1];
        }
        for j in 0..=m.min(1) {
            s += p1[j] * c[m - j];
        }
        c[m + 2] = -s / (p3[0] * ((m + 2) * (m + 1)) as f64);
    }
    c.truncate(n + 1);
    Ok(c)
}

/// Solution data of Heun's equation at a point of the rational coordinate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HeunFrame {
    pub z: C64,
    pub y: C64,
    pub dy: C64,
}

/// `(y^(mu-1), y^(mu), y^(mu+1))` at the frame point, higher derivatives from the equation.
pub fn derivative_transform(p: &HeunRationalParams, frame: &HeunFrame, mu: u32) -> Result<[C64; 3]> {
    if mu == 0 {
        return Err(Error::InvalidParams("mu must be a positive integer".into()));
    }
    let k = (mu - 1) as usize;
    let c = heun_jet(p, frame.z, frame.y, frame.dy, k + 2)?;
    let fact = |m: usize| (1..=m).map(|j| j as f64).product::<f64>();
    Ok([c[k] * fact(k), c[k + 1] * fact(k + 1), c[k + 2] * fact(k + 2)])
}

/// One evaluation of the transform at `z` along one cycle.
#[derive(Debug, Clone, Serialize)]
pub struct TransformPoint {
    pub z: C64,
    pub cycle: Cycle,
    pub value: TransformValue,
    /// Relative residual of the transformed equation.
    pub residual: f64,
}

/// Evaluates the transform at every `(z, cycle)` pair, in input order.
pub fn transform_batch(
    y0: [C64; 2],
    tp: &TransformParams,
    zs: &[C64],
    cycles: &[Cycle],
    opts: &ContourOptions,
    tol: &Tolerances,
) -> Vec<Result<TransformPoint>> {
    let jobs: Vec<(C64, Cycle)> = zs.iter().flat_map(|&z| cycles.iter().map(move |&c| (z, c))).collect();
    jobs.par_iter()
        .map(|&(z, cycle)| {
            let contour = opts.contour(tp.source.t, z, cycle)?;
            let value = integral_transform(y0, tp, &contour, tol)?;
            Ok(TransformPoint {
                z,
                cycle,
                residual: heun_residual(&tp.target, z, value.values),
                value,
            })
        })
        .collect()
}

/// Data at `o` of `y - M_p y`, where `M_p y` is `y` continued once around `gamma_p`.
pub fn monodromy_defect(y0: [C64; 2], p: &HeunRationalParams, contour: &PochhammerContour, tol: &Tolerances) -> Result<[C64; 2]> {
    let around = continue_solution(p, &contour.legs[1], y0, tol)?;
    Ok([y0[0] - around[0], y0[1] - around[1]])
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn generic() -> HeunRationalParams {
        let (g, d, e, a) = (c(0.3, 0.1), c(0.45, 0.0), c(0.7, -0.2), c(0.35, 0.15));
        let b = g + d + e - a - 1.0;
        HeunRationalParams::new(g, d, e, a, b, c(0.2, 0.1), c(0.3, 0.1)).unwrap()
    }

    #[test]
    fn unit_mu_is_identity_shift() {
        let (g, d, e) = (c(0.3, 0.0), c(0.45, 0.0), c(0.7, 0.0));
        let a = c(1.0, 0.0);
        let p = HeunRationalParams::new(g, d, e, a, g + d + e - a - 1.0, c(0.2, 0.0), c(0.3, 0.1)).unwrap();
        let tp = transformed_params(&p, RootChoice::Alpha).unwrap();
        assert_eq!(tp.integer_mu(), Some(1));
        assert!((tp.target.gamma - g).norm() < 1e-15);
        assert!((tp.target.q - p.q).norm() < 1e-15);
    }

    #[test]
    fn jet_solves_equation() {
        let p = generic();
        let z = c(0.6, 0.2);
        let jet = heun_jet(&p, z, c(1.0, 0.5), c(-0.3, 0.2), 6).unwrap();
        let v = [jet[0], jet[1], jet[2] * 2.0];
        assert!(heun_residual(&p, z, v) < 1e-15);
    }

    #[test]
    fn contour_windings() {
        let t = c(0.3, 0.1);
        let z = c(0.6, 0.0);
        let k = build_pochhammer(c(0.5, -0.4), z, Cycle::T, t, 0.05, 3.0).unwrap();
        let wz = k.leg_windings(z);
        let wt = k.leg_windings(t);
        for (got, want) in wz.iter().zip([1.0, 0.0, -1.0, 0.0]) {
            assert!((got - want).abs() < 1e-6);
        }
        for (got, want) in wt.iter().zip([0.0, 1.0, 0.0, -1.0]) {
            assert!((got - want).abs() < 1e-6);
        }
        assert!(k.leg_windings(c(1.0, 0.0)).iter().sum::<f64>().abs() < 1e-6);
    }

    #[test]
    fn crowding_is_reported() {
        let t = c(0.3, 0.1);
        let err = build_pochhammer(c(0.5, -0.4), c(0.31, 0.1), Cycle::T, t, 0.05, 3.0).unwrap_err();
        assert!(matches!(err, Error::Crowding(_)));
    }

    #[test]
    fn zero_data_gives_zero() {
        let p = generic();
        let tp = transformed_params(&p, RootChoice::Alpha).unwrap();
        let k = ContourOptions::default().contour(p.t, c(0.6, 0.0), Cycle::One).unwrap();
        let v = integral_transform([C64::new(0.0, 0.0); 2], &tp, &k, &Tolerances::default()).unwrap();
        assert!(v.values.iter().all(|x| x.norm() == 0.0));
    }
}
