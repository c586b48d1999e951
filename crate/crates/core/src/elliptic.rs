//! Weierstrass elliptic functions on a period lattice.
//!
//! The lattice is generated by `2*omega1` and `2*omega3`. Evaluation goes through
//! Jacobi theta functions in the nome `q = exp(i*pi*tau)`: the three quotients
//!
//! ```text
//! t1 = C th3 th4 th2(v)/th1(v),  t2 = C th2 th4 th3(v)/th1(v),  t3 = C th2 th3 th4(v)/th1(v)
//! ```
//!
//! with `C = pi/(2 omega1)` and `v = pi x/(2 omega1)` satisfy `t_i^2 = wp(x) - e_i`
//! and behave like `1/x` at the origin. They are single-valued meromorphic
//! functions of `x`, so the square roots `s_i = sqrt(wp - e_i)` need no branch
//! tracking along paths: only a global sign per root, fixed once at the anchor
//! point `omega1/2 + omega3/3`.

use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

pub type C64 = Complex64;

/// Default pole-exclusion radius relative to the shorter period.
pub const DEFAULT_POLE_RADIUS_FACTOR: f64 = 1e-6;

const THETA_TARGET: f64 = 1e-19;

/// Signs of `s_i` relative to the theta quotients `t_i ~ +1/x`.
///
/// `2 s1 s2 s3 = wp'` forces `signs[0]*signs[1]*signs[2] = -1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BranchSigns(pub [f64; 3]);

impl BranchSigns {
    pub fn new(signs: [f64; 3]) -> Result<Self> {
        let ok = signs.iter().all(|s| *s == 1.0 || *s == -1.0);
        if !ok || signs[0] * signs[1] * signs[2] != -1.0 {
            return Err(Error::BranchConsistency {
                x: C64::new(0.0, 0.0),
                defect: 1.0,
            });
        }
        Ok(BranchSigns(signs))
    }
}

/// Everything the kernel knows about one point.
#[derive(Debug, Clone, Copy)]
pub struct WpValues {
    pub p: C64,
    pub dp: C64,
    pub s: [C64; 3],
}

/// JSON form of a lattice: only the half-periods, derived data is recomputed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LatticeSpec {
    pub omega1: [f64; 2],
    pub omega3: [f64; 2],
}

#[derive(Debug, Clone)]
pub struct Lattice {
    omega1: C64,
    omega3: C64,
    tau: C64,
    g2: C64,
    g3: C64,
    e: [C64; 3],
    scale: C64,
    theta_consts: [C64; 3],
    qa: Vec<C64>,
    qb: Vec<C64>,
    signs: BranchSigns,
    pole_radius: f64,
}

pub type LatticeRef = Arc<Lattice>;

/// Builds the lattice with periods `2*omega1`, `2*omega3`.
pub fn lattice_from_half_periods(omega1: C64, omega3: C64) -> Result<LatticeRef> {
    Lattice::from_half_periods(omega1, omega3).map(Arc::new)
}

impl Lattice {
    pub fn from_half_periods(omega1: C64, omega3: C64) -> Result<Self> {
        if omega1.norm() == 0.0 || omega3.norm() == 0.0 || !omega1.is_finite() || !omega3.is_finite()
        {
            return Err(Error::DegenerateLattice {
                tau: C64::new(f64::NAN, 0.0),
            });
        }
        let mut omega3 = omega3;
        let mut tau = omega3 / omega1;
        if tau.im.abs() <= 1e-9 * tau.norm() || tau.im.abs() < 1e-4 {
            return Err(Error::DegenerateLattice { tau });
        }
        if tau.im < 0.0 {
            omega3 = -omega3;
            tau = -tau;
        }

        // Terms needed so that |q|^(n^2-n) drops below the target; the factor
        // |q|^-n accounts for the growth of cos/sin over the reduced cell.
        let decay = PI * tau.im;
        let mut nterms = 2usize;
        while ((nterms * nterms - nterms) as f64) * decay < -THETA_TARGET.ln() + 4.0 {
            nterms += 1;
            if nterms > 4000 {
                return Err(Error::DegenerateLattice { tau });
            }
        }
        let ipt = C64::i() * PI * tau;
        let qa: Vec<C64> = (0..=nterms)
            .map(|n| {
                let h = n as f64 + 0.5;
                (ipt * (h * h)).exp()
            })
            .collect();
        let qb: Vec<C64> = (0..=nterms).map(|n| (ipt * ((n * n) as f64)).exp()).collect();

        let th2 = qa.iter().fold(C64::new(0.0, 0.0), |acc, t| acc + t) * 2.0;
        let th3 = C64::new(1.0, 0.0) + qb.iter().skip(1).fold(C64::new(0.0, 0.0), |acc, t| acc + t) * 2.0;
        let th4 = C64::new(1.0, 0.0)
            + qb
                .iter()
                .enumerate()
                .skip(1)
                .fold(C64::new(0.0, 0.0), |acc, (n, t)| {
                    if n % 2 == 1 {
                        acc - t
                    } else {
                        acc + t
                    }
                })
                * 2.0;

        let scale = C64::new(PI, 0.0) / (omega1 * 2.0);
        let c = scale * scale / 3.0;
        let (t2p, t3p, t4p) = (th2.powi(4), th3.powi(4), th4.powi(4));
        let e1 = c * (t3p + t4p);
        let e2 = c * (t2p - t4p);
        let e3 = -c * (t2p + t3p);
        let e = [e1, e2, e3];
        let g2 = -(e1 * e2 + e2 * e3 + e3 * e1) * 4.0;
        let g3 = e1 * e2 * e3 * 4.0;

        let pole_radius =
            DEFAULT_POLE_RADIUS_FACTOR * (2.0 * omega1.norm()).min(2.0 * omega3.norm());

        let mut lat = Lattice {
            omega1,
            omega3,
            tau,
            g2,
            g3,
            e,
            scale,
            theta_consts: [th2, th3, th4],
            qa,
            qb,
            signs: BranchSigns([1.0, 1.0, -1.0]),
            pole_radius,
        };

        // s1, s2 principal at the anchor; s3 follows from 2 s1 s2 s3 = wp'.
        let t = lat.theta_quotients(lat.anchor())?;
        let principal = |z: C64| -> f64 {
            if z.re > 0.0 || (z.re == 0.0 && z.im >= 0.0) {
                1.0
            } else {
                -1.0
            }
        };
        let s1 = principal(t[0]);
        let s2 = principal(t[1]);
        lat.signs = BranchSigns([s1, s2, -s1 * s2]);
        Ok(lat)
    }

    pub fn from_spec(spec: &LatticeSpec) -> Result<Self> {
        Self::from_half_periods(
            C64::new(spec.omega1[0], spec.omega1[1]),
            C64::new(spec.omega3[0], spec.omega3[1]),
        )
    }

    pub fn spec(&self) -> LatticeSpec {
        LatticeSpec {
            omega1: [self.omega1.re, self.omega1.im],
            omega3: [self.omega3.re, self.omega3.im],
        }
    }

    /// Square lattice with half-periods 1/2 and i/2.
    pub fn lemniscatic() -> Self {
        Self::from_half_periods(C64::new(0.5, 0.0), C64::new(0.0, 0.5))
            .expect("square lattice is valid")
    }

    pub fn with_pole_radius(mut self, radius: f64) -> Self {
        self.pole_radius = radius;
        self
    }

    pub fn omega1(&self) -> C64 {
        self.omega1
    }

    pub fn omega3(&self) -> C64 {
        self.omega3
    }

    pub fn tau(&self) -> C64 {
        self.tau
    }

    pub fn g2(&self) -> C64 {
        self.g2
    }

    pub fn g3(&self) -> C64 {
        self.g3
    }

    /// Branch values `(e1, e2, e3)`.
    pub fn e(&self) -> [C64; 3] {
        self.e
    }

    pub fn pole_radius(&self) -> f64 {
        self.pole_radius
    }

    pub fn signs(&self) -> BranchSigns {
        self.signs
    }

    /// `omega_i` for `i = 0..=3` with `omega0 = 0` and `omega2 = -omega1 - omega3`.
    pub fn half_period(&self, i: usize) -> C64 {
        match i {
            0 => C64::new(0.0, 0.0),
            1 => self.omega1,
            2 => -self.omega1 - self.omega3,
            3 => self.omega3,
            _ => panic!("half-period index {i} out of range"),
        }
    }

    /// Shared anchor `omega1/2 + omega3/3` fixing the branch of every `s_i`.
    pub fn anchor(&self) -> C64 {
        self.omega1 / 2.0 + self.omega3 / 3.0
    }

    /// Short stable identifier of the lattice (hex of a SHA-256 over the half-period bits).
    pub fn hash(&self) -> String {
        let mut h = Sha256::new();
        for v in [self.omega1.re, self.omega1.im, self.omega3.re, self.omega3.im] {
            h.update(v.to_bits().to_le_bytes());
        }
        hex::encode(&h.finalize()[..8])
    }

    /// Same lattice, same labelling (pointer equality or identical half-periods).
    pub fn same_as(&self, other: &Lattice) -> bool {
        std::ptr::eq(self, other) || (self.omega1 == other.omega1 && self.omega3 == other.omega3)
    }

    /// Coordinates `(a, b)` with `x = 2 omega1 (a + b tau)`.
    pub fn lattice_coords(&self, x: C64) -> (f64, f64) {
        let u = x / (self.omega1 * 2.0);
        let b = u.im / self.tau.im;
        let a = u.re - b * self.tau.re;
        (a, b)
    }

    /// Nearest point of `2Z omega1 + 2Z omega3` and the distance to it.
    pub fn nearest_lattice_point(&self, x: C64) -> (C64, f64) {
        let (a, b) = self.lattice_coords(x);
        let (m0, n0) = (a.round(), b.round());
        let mut best = (C64::new(0.0, 0.0), f64::INFINITY);
        for dm in -1..=1 {
            for dn in -1..=1 {
                let p = self.omega1 * (2.0 * (m0 + dm as f64)) + self.omega3 * (2.0 * (n0 + dn as f64));
                let d = (x - p).norm();
                if d < best.1 {
                    best = (p, d);
                }
            }
        }
        best
    }

    /// Nearest translate of the half-period `omega_i` and the distance to it.
    pub fn nearest_half_period_translate(&self, x: C64, i: usize) -> (C64, f64) {
        let w = self.half_period(i);
        let (p, d) = self.nearest_lattice_point(x - w);
        (p + w, d)
    }

    fn thetas(&self, v: C64) -> [C64; 4] {
        let w = (C64::i() * v).exp();
        let wi = w.inv();
        let w2 = w * w;
        let wi2 = wi * wi;
        // odd harmonics: w^(2n+1)
        let mut wo = w;
        let mut wio = wi;
        // even harmonics: w^(2n)
        let mut we = w2;
        let mut wie = wi2;
        let mut th1 = C64::new(0.0, 0.0);
        let mut th2 = C64::new(0.0, 0.0);
        let mut th3 = C64::new(1.0, 0.0);
        let mut th4 = C64::new(1.0, 0.0);
        for n in 0..self.qa.len() {
            let sin = (wo - wio) / C64::new(0.0, 2.0);
            let cos = (wo + wio) / 2.0;
            let sgn = if n % 2 == 0 { 1.0 } else { -1.0 };
            th1 += self.qa[n] * sin * (2.0 * sgn);
            th2 += self.qa[n] * cos * 2.0;
            wo *= w2;
            wio *= wi2;
            if n >= 1 {
                let cos2 = (we + wie) / 2.0;
                th3 += self.qb[n] * cos2 * 2.0;
                th4 += self.qb[n] * cos2 * (2.0 * sgn);
                we *= w2;
                wie *= wi2;
            }
        }
        [th1, th2, th3, th4]
    }

    /// Theta quotients `t_i` (with `t_i ~ 1/x` at the origin) at `x`.
    pub fn theta_quotients(&self, x: C64) -> Result<[C64; 3]> {
        let (a, b) = self.lattice_coords(x);
        let n = b.round();
        let m = a.round();
        let x_red = x - self.omega1 * (2.0 * m) - self.omega3 * (2.0 * n);
        let (nearest, dist) = self.nearest_lattice_point(x_red);
        if dist < self.pole_radius {
            return Err(Error::PoleProximity {
                x,
                nearest: nearest + self.omega1 * (2.0 * m) + self.omega3 * (2.0 * n),
                radius: self.pole_radius,
            });
        }
        let v = x_red * self.scale;
        let [th1, th2, th3, th4] = self.thetas(v);
        let [c2, c3, c4] = self.theta_consts;
        let k = self.scale / th1;
        let parity = |k: f64| if (k as i64).rem_euclid(2) == 0 { 1.0 } else { -1.0 };
        let (pm, pn) = (parity(m), parity(n));
        Ok([
            k * c3 * c4 * th2 * pn,
            k * c2 * c4 * th3 * (pm * pn),
            k * c2 * c3 * th4 * pm,
        ])
    }

    /// `wp`, `wp'` and the anchored square roots at `x` in one pass.
    pub fn values(&self, x: C64) -> Result<WpValues> {
        self.values_with(x, self.signs)
    }

    pub fn values_with(&self, x: C64, signs: BranchSigns) -> Result<WpValues> {
        let t = self.theta_quotients(x)?;
        let sq = [t[0] * t[0], t[1] * t[1], t[2] * t[2]];
        let p = (sq[0] + sq[1] + sq[2]) / 3.0;
        let scale = p.norm() + self.e.iter().map(|e| e.norm()).fold(0.0, f64::max);
        let defect = (0..3)
            .map(|i| (sq[i] + self.e[i] - p).norm())
            .fold(0.0, f64::max);
        if defect > 1e-8 * scale {
            return Err(Error::BranchConsistency { x, defect });
        }
        let s = [t[0] * signs.0[0], t[1] * signs.0[1], t[2] * signs.0[2]];
        Ok(WpValues {
            p,
            dp: s[0] * s[1] * s[2] * 2.0,
            s,
        })
    }

    pub fn wp(&self, x: C64) -> Result<C64> {
        Ok(self.values(x)?.p)
    }

    pub fn wp_prime(&self, x: C64) -> Result<C64> {
        Ok(self.values(x)?.dp)
    }

    /// `(s1, s2, s3)` with `s_i^2 = wp - e_i` and `2 s1 s2 s3 = wp'` on the anchored branch.
    pub fn half_branch_values(&self, x: C64) -> Result<[C64; 3]> {
        Ok(self.values(x)?.s)
    }

    pub fn half_branch_values_with(&self, x: C64, signs: BranchSigns) -> Result<[C64; 3]> {
        Ok(self.values_with(x, signs)?.s)
    }
}

impl PartialEq for Lattice {
    fn eq(&self, other: &Self) -> bool {
        self.same_as(other)
    }
}

impl Serialize for Lattice {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.spec().serialize(s)
    }
}

impl<'de> Deserialize<'de> for Lattice {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let spec = LatticeSpec::deserialize(d)?;
        Lattice::from_spec(&spec).map_err(serde::de::Error::custom)
    }
}
