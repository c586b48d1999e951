//! Adaptive Runge-Kutta integration of complex linear systems along paths in the plane.
//!
//! Two independent embedded pairs: Dormand-Prince 8(5,3) as the workhorse and
//! Fehlberg 4(5) as the cross-check. Paths are chains of straight segments and
//! circular arcs parametrized by arclength.

use std::f64::consts::PI;

use crate::elliptic::C64;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum Method {
    Dop853,
    Rkf45,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerances {
    pub rtol: f64,
    pub atol: f64,
    pub max_steps: usize,
    pub method: Method,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            rtol: 1e-12,
            atol: 1e-14,
            max_steps: 200_000,
            method: Method::Dop853,
        }
    }
}

impl Tolerances {
    pub fn with_method(mut self, method: Method) -> Self {
        self.method = method;
        self
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Stats {
    pub accepted: usize,
    pub rejected: usize,
}

impl std::ops::AddAssign for Stats {
    fn add_assign(&mut self, o: Stats) {
        self.accepted += o.accepted;
        self.rejected += o.rejected;
    }
}

const A: [[f64; 12]; 12] = [
    [0.0; 12],
    [5.260_015_195_876_773E-2, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [1.972_505_698_453_79E-2, 5.917_517_095_361_37E-2, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [2.958_758_547_680_685E-2, 0.0, 8.876_275_643_042_054E-2, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [
        2.413_651_341_592_667E-1,
        0.0,
        -8.845_494_793_282_861E-1,
        9.248_340_032_617_92E-1,
        0.0,
        0.0,
        0.0,
        0.0,
        0.0,
        0.0,
        0.0,
        0.0,
    ],
    [
        3.703_703_703_703_703_5E-2,
        0.0,
        0.0,
        1.708_286_087_294_738_6E-1,
        1.254_676_875_668_224_2E-1,
        0.0,
        0.0,
        0.0,
        0.0,
        0.0,
        0.0,
        0.0,
    ],
    [
        3.7109375E-2,
        0.0,
        0.0,
        1.702_522_110_195_440_5E-1,
        6.021_653_898_045_596E-2,
        -1.7578125E-2,
        0.0,
        0.0,
        0.0,
        0.0,
        0.0,
        0.0,
    ],
    [
        3.709_200_011_850_479E-2,
        0.0,
        0.0,
        1.703_839_257_122_399_8E-1,
        1.072_620_304_463_732_8E-1,
        -1.531_943_774_862_440_2E-2,
        8.273_789_163_814_023E-3,
        0.0,
        0.0,
        0.0,
        0.0,
        0.0,
    ],
    [
        6.241_109_587_160_757E-1,
        0.0,
        0.0,
        -3.360_892_629_446_941_4,
        -8.682_193_468_417_26E-1,
        2.759_209_969_944_671E1,
        2.015_406_755_047_789_4E1,
        -4.348_988_418_106_996E1,
        0.0,
        0.0,
        0.0,
        0.0,
    ],
    [
        4.776_625_364_382_643_4E-1,
        0.0,
        0.0,
        -2.488_114_619_971_667_7,
        -5.902_908_268_368_43E-1,
        2.123_005_144_818_119_3E1,
        1.527_923_363_288_242_3E1,
        -3.328_821_096_898_486E1,
        -2.033_120_170_850_862_7E-2,
        0.0,
        0.0,
        0.0,
    ],
    [
        -9.371_424_300_859_873E-1,
        0.0,
        0.0,
        5.186_372_428_844_064,
        1.091_437_348_996_729_5,
        -8.149_787_010_746_927,
        -1.852_006_565_999_696E1,
        2.273_948_709_935_050_5E1,
        2.493_605_552_679_652_3,
        -3.046_764_471_898_219_6,
        0.0,
        0.0,
    ],
    [
        2.273_310_147_516_538,
        0.0,
        0.0,
        -1.053_449_546_673_725E1,
        -2.000_872_058_224_862_5,
        -1.795_893_186_311_88E1,
        2.794_888_452_941_996E1,
        -2.858_998_277_135_023_5,
        -8.872_856_933_530_63,
        1.236_056_717_579_430_3E1,
        6.433_927_460_157_636E-1,
        0.0,
    ],
];

const C: [f64; 12] = [
    0.0,
    5.260_015_195_876_773E-2,
    7.890_022_793_815_16E-2,
    1.183_503_419_072_274E-1,
    2.816_496_580_927_726E-1,
    3.333_333_333_333_333E-1,
    0.25,
    3.076_923_076_923_077E-1,
    6.512_820_512_820_513E-1,
    0.6,
    8.571_428_571_428_571E-1,
    1.0,
];

const B: [f64; 12] = [
    5.429_373_411_656_876_5E-2,
    0.0,
    0.0,
    0.0,
    0.0,
    4.450_312_892_752_409,
    1.891_517_899_314_500_3,
    -5.801_203_960_010_585,
    3.111_643_669_578_199E-1,
    -1.521_609_496_625_161E-1,
    2.013_654_008_040_303_4E-1,
    4.471_061_572_777_259E-2,
];

const ER: [f64; 12] = [
    1.312_004_499_419_488E-2,
    0.0,
    0.0,
    0.0,
    0.0,
    -1.225_156_446_376_204_4,
    -4.957_589_496_572_502E-1,
    1.664_377_182_454_986_4,
    -3.503_288_487_499_736_6E-1,
    3.341_791_187_130_175E-1,
    8.192_320_648_511_571E-2,
    -2.235_530_786_388_629_4E-2,
];

const BHH: [f64; 3] = [
    2.440_944_881_889_764E-1,
    7.338_466_882_816_118E-1,
    2.205_882_352_941_176_6E-2,
];

// Fehlberg 4(5)
const FC: [f64; 6] = [0.0, 0.25, 0.375, 12.0 / 13.0, 1.0, 0.5];
const FA: [[f64; 5]; 6] = [
    [0.0; 5],
    [0.25, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 32.0, 9.0 / 32.0, 0.0, 0.0, 0.0],
    [1932.0 / 2197.0, -7200.0 / 2197.0, 7296.0 / 2197.0, 0.0, 0.0],
    [439.0 / 216.0, -8.0, 3680.0 / 513.0, -845.0 / 4104.0, 0.0],
    [-8.0 / 27.0, 2.0, -3544.0 / 2565.0, 1859.0 / 4104.0, -11.0 / 40.0],
];
const FB5: [f64; 6] = [
    16.0 / 135.0,
    0.0,
    6656.0 / 12825.0,
    28561.0 / 56430.0,
    -9.0 / 50.0,
    2.0 / 55.0,
];
const FB4: [f64; 6] = [25.0 / 216.0, 0.0, 1408.0 / 2565.0, 2197.0 / 4104.0, -0.2, 0.0];

fn weighted(k: &[Vec<C64>], w: &[f64], n: usize) -> Vec<C64> {
    let mut out = vec![C64::new(0.0, 0.0); n];
    for (kj, wj) in k.iter().zip(w) {
        if *wj != 0.0 {
            for i in 0..n {
                out[i] += kj[i] * *wj;
            }
        }
    }
    out
}

/// One trial step: state increment and the scaled error norm.
fn try_step<F>(f: &mut F, s: f64, h: f64, y: &[C64], tol: &Tolerances) -> Result<(Vec<C64>, f64)>
where
    F: FnMut(f64, &[C64], &mut [C64]) -> Result<()>,
{
    let n = y.len();
    let (stages, c, a): (usize, &[f64], &dyn Fn(usize, usize) -> f64) = match tol.method {
        Method::Dop853 => (12, &C, &|i, j| A[i][j]),
        Method::Rkf45 => (6, &FC, &|i, j| FA[i][j]),
    };
    let mut k: Vec<Vec<C64>> = Vec::with_capacity(stages);
    let mut tmp = vec![C64::new(0.0, 0.0); n];
    for i in 0..stages {
        for m in 0..n {
            let mut acc = y[m];
            for (j, kj) in k.iter().enumerate() {
                let aij = a(i, j);
                if aij != 0.0 {
                    acc += kj[m] * (h * aij);
                }
            }
            tmp[m] = acc;
        }
        let mut out = vec![C64::new(0.0, 0.0); n];
        f(s + c[i] * h, &tmp, &mut out)?;
        k.push(out);
    }
    let (incr, err) = match tol.method {
        Method::Dop853 => {
            let incr = weighted(&k, &B, n);
            let e5 = weighted(&k, &ER, n);
            let mut e3 = incr.clone();
            for m in 0..n {
                e3[m] -= k[0][m] * BHH[0] + k[8][m] * BHH[1] + k[11][m] * BHH[2];
            }
            let incr: Vec<C64> = incr.iter().map(|v| v * h).collect();
            let ynew: Vec<C64> = (0..n).map(|m| y[m] + incr[m]).collect();
            let (mut s5, mut s3) = (0.0, 0.0);
            for m in 0..n {
                let sk = tol.atol + tol.rtol * y[m].norm().max(ynew[m].norm());
                s5 += (e5[m].norm() / sk).powi(2);
                s3 += (e3[m].norm() / sk).powi(2);
            }
            let deno = s5 + 0.01 * s3;
            let err = if deno > 0.0 {
                h.abs() * s5 * (1.0 / (n as f64 * deno)).sqrt()
            } else {
                0.0
            };
            (incr, err)
        }
        Method::Rkf45 => {
            let incr = weighted(&k, &FB5, n);
            let low = weighted(&k, &FB4, n);
            let ynew: Vec<C64> = (0..n).map(|m| y[m] + incr[m] * h).collect();
            let mut s = 0.0;
            for m in 0..n {
                let sk = tol.atol + tol.rtol * y[m].norm().max(ynew[m].norm());
                s += ((incr[m] - low[m]).norm() * h.abs() / sk).powi(2);
            }
            (incr.iter().map(|v| v * h).collect(), (s / n as f64).sqrt())
        }
    };
    if !err.is_finite() || incr.iter().any(|v| !v.is_finite()) {
        return Ok((incr, f64::INFINITY));
    }
    Ok((incr, err))
}

/// Integrates `dy/ds = f(s, y)` from `s0` to `s1 > s0`.
pub fn integrate<F>(mut f: F, s0: f64, s1: f64, y0: &[C64], tol: &Tolerances) -> Result<(Vec<C64>, Stats)>
where
    F: FnMut(f64, &[C64], &mut [C64]) -> Result<()>,
{
    let mut stats = Stats::default();
    let span = s1 - s0;
    if span <= 0.0 {
        return Ok((y0.to_vec(), stats));
    }
    let order = match tol.method {
        Method::Dop853 => 8.0,
        Method::Rkf45 => 5.0,
    };
    let mut s = s0;
    let mut y = y0.to_vec();
    // compensated summation of the increments keeps long paths at roundoff level
    let mut comp = vec![C64::new(0.0, 0.0); y.len()];
    let mut h = span.min(0.01);
    loop {
        if stats.accepted + stats.rejected >= tol.max_steps {
            return Err(Error::StepBudget {
                budget: tol.max_steps,
            });
        }
        let last = s + h >= s1;
        if last {
            h = s1 - s;
        }
        let (incr, err) = try_step(&mut f, s, h, &y, tol)?;
        if err <= 1.0 {
            stats.accepted += 1;
            s = if last { s1 } else { s + h };
            for m in 0..y.len() {
                let d = incr[m] - comp[m];
                let t = y[m] + d;
                comp[m] = (t - y[m]) - d;
                y[m] = t;
            }
            if last {
                return Ok((y, stats));
            }
            let fac = if err == 0.0 {
                5.0
            } else {
                (0.9 * err.powf(-1.0 / order)).clamp(0.2, 5.0)
            };
            h *= fac;
        } else {
            stats.rejected += 1;
            let fac = if err.is_finite() {
                (0.9 * err.powf(-1.0 / order)).clamp(0.1, 0.9)
            } else {
                0.1
            };
            h *= fac;
        }
        if h < 1e-14 * span.max(1.0) {
            return Err(Error::StepSizeUnderflow { s, h });
        }
    }
}

/// A smooth piece of a path in the complex plane, traversed by arclength.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Piece {
    Segment { from: C64, to: C64 },
    /// Arc of `center + radius e^(i theta)` from `start_angle` through `sweep` radians.
    Arc {
        center: C64,
        radius: f64,
        start_angle: f64,
        sweep: f64,
    },
}

impl Piece {
    pub fn length(&self) -> f64 {
        match *self {
            Piece::Segment { from, to } => (to - from).norm(),
            Piece::Arc { radius, sweep, .. } => radius * sweep.abs(),
        }
    }

    pub fn point(&self, s: f64) -> C64 {
        match *self {
            Piece::Segment { from, to } => {
                let len = (to - from).norm();
                if len == 0.0 {
                    from
                } else {
                    from + (to - from) * (s / len)
                }
            }
            Piece::Arc {
                center,
                radius,
                start_angle,
                sweep,
            } => {
                let th = start_angle + sweep.signum() * s / radius;
                center + C64::from_polar(radius, th)
            }
        }
    }

    /// `dx/ds`, of unit modulus.
    pub fn velocity(&self, s: f64) -> C64 {
        match *self {
            Piece::Segment { from, to } => {
                let d = to - from;
                d / d.norm()
            }
            Piece::Arc {
                start_angle,
                sweep,
                radius,
                ..
            } => {
                let th = start_angle + sweep.signum() * s / radius;
                C64::new(0.0, sweep.signum()) * C64::from_polar(1.0, th)
            }
        }
    }

    pub fn start(&self) -> C64 {
        self.point(0.0)
    }

    pub fn end(&self) -> C64 {
        self.point(self.length())
    }

    pub fn reversed(&self) -> Piece {
        match *self {
            Piece::Segment { from, to } => Piece::Segment { from: to, to: from },
            Piece::Arc {
                center,
                radius,
                start_angle,
                sweep,
            } => Piece::Arc {
                center,
                radius,
                start_angle: start_angle + sweep,
                sweep: -sweep,
            },
        }
    }

    /// Smallest distance from the piece to `p`.
    pub fn distance_to(&self, p: C64) -> f64 {
        match *self {
            Piece::Segment { from, to } => {
                let d = to - from;
                let len2 = d.norm_sqr();
                if len2 == 0.0 {
                    return (p - from).norm();
                }
                let t = (((p - from) * d.conj()).re / len2).clamp(0.0, 1.0);
                (from + d * t - p).norm()
            }
            Piece::Arc {
                center,
                radius,
                start_angle,
                sweep,
            } => {
                let rel = p - center;
                let ang = rel.arg();
                let (lo, hi) = if sweep >= 0.0 {
                    (start_angle, start_angle + sweep)
                } else {
                    (start_angle + sweep, start_angle)
                };
                let mut a = ang;
                while a < lo {
                    a += 2.0 * PI;
                }
                while a > lo + 2.0 * PI {
                    a -= 2.0 * PI;
                }
                if a <= hi && rel.norm() > 0.0 {
                    (rel.norm() - radius).abs()
                } else {
                    (p - self.start()).norm().min((p - self.end()).norm())
                }
            }
        }
    }

    /// Winding contribution of this piece around `p` (in turns).
    pub fn winding_around(&self, p: C64, samples: usize) -> f64 {
        let len = self.length();
        let mut total = 0.0;
        let mut prev = self.point(0.0) - p;
        for i in 1..=samples {
            let cur = self.point(len * i as f64 / samples as f64) - p;
            total += (cur / prev).arg();
            prev = cur;
        }
        total / (2.0 * PI)
    }
}

/// Integrates a system `dy/dx = g(x, y)` holomorphic in `x` along a chain of pieces.
pub fn integrate_along<G>(pieces: &[Piece], y0: &[C64], tol: &Tolerances, mut g: G) -> Result<(Vec<C64>, Stats)>
where
    G: FnMut(C64, &[C64], &mut [C64]) -> Result<()>,
{
    let mut y = y0.to_vec();
    let mut stats = Stats::default();
    for piece in pieces {
        let (ynew, st) = integrate(
            |s, y, dy| {
                let x = piece.point(s);
                g(x, y, dy)?;
                let v = piece.velocity(s);
                for d in dy.iter_mut() {
                    *d *= v;
                }
                Ok(())
            },
            0.0,
            piece.length(),
            &y,
            tol,
        )?;
        y = ynew;
        stats += st;
    }
    Ok((y, stats))
}
