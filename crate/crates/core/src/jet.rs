//! Taylor jets of `wp`, the potential and solutions of `f'' = (V - E) f` around a point.

use crate::elliptic::{Lattice, C64};
use crate::error::Result;
use crate::operators::CouplingVector;

/// Coefficients of `wp(x + h)` in powers of `h`, from `wp'' = 6 wp^2 - g2/2`.
pub fn wp_jet(p: C64, dp: C64, g2: C64, n: usize) -> Vec<C64> {
    let mut c = vec![C64::new(0.0, 0.0); n + 1];
    c[0] = p;
    if n >= 1 {
        c[1] = dp;
    }
    for m in 0..n.saturating_sub(1) {
        let mut s: C64 = (0..=m).map(|k| c[k] * c[m - k]).sum::<C64>() * 6.0;
        if m == 0 {
            s -= g2 / 2.0;
        }
        c[m + 2] = s / ((m + 2) * (m + 1)) as f64;
    }
    c
}

/// Jet of `V(x + h) = sum_i l_i (l_i + 1) wp(x + h + omega_i)`.
pub fn potential_jet(l: &CouplingVector, lat: &Lattice, x: C64, n: usize) -> Result<Vec<C64>> {
    let mut out = vec![C64::new(0.0, 0.0); n + 1];
    for (i, s) in l.strengths().iter().enumerate() {
        if *s == 0.0 {
            continue;
        }
        let v = lat.values(x + lat.half_period(i))?;
        for (o, c) in out.iter_mut().zip(wp_jet(v.p, v.dp, lat.g2(), n)) {
            *o += c * *s;
        }
    }
    Ok(out)
}

/// Jet of the solution with `f(x) = f0`, `f'(x) = f1`, given the jet `w` of `V - E`.
pub fn solution_jet(w: &[C64], f0: C64, f1: C64) -> Vec<C64> {
    let n = w.len().saturating_sub(1);
    let mut f = vec![C64::new(0.0, 0.0); n + 1];
    f[0] = f0;
    if n >= 1 {
        f[1] = f1;
    }
    for m in 0..n.saturating_sub(1) {
        let s: C64 = (0..=m).map(|k| w[k] * f[m - k]).sum();
        f[m + 2] = s / ((m + 2) * (m + 1)) as f64;
    }
    f
}

/// Truncated product of two series.
pub fn series_mul(a: &[C64], b: &[C64]) -> Vec<C64> {
    let n = a.len().min(b.len());
    (0..n).map(|m| (0..=m).map(|k| a[k] * b[m - k]).sum()).collect()
}

/// `1 / a`; needs `a[0] != 0`.
pub fn series_recip(a: &[C64]) -> Vec<C64> {
    let mut r = vec![C64::new(0.0, 0.0); a.len()];
    if a.is_empty() {
        return r;
    }
    r[0] = a[0].inv();
    for m in 1..a.len() {
        let s: C64 = (1..=m).map(|k| a[k] * r[m - k]).sum();
        r[m] = -s * r[0];
    }
    r
}

/// `a^c` with constant term `g0`, one of the values of `a[0]^c`; needs `a[0] != 0`.
pub fn series_pow(a: &[C64], c: f64, g0: C64) -> Vec<C64> {
    // a g' = c a' g, coefficient by coefficient
    let mut g = vec![C64::new(0.0, 0.0); a.len()];
    if a.is_empty() {
        return g;
    }
    g[0] = g0;
    for m in 1..a.len() {
        let s: C64 = (1..=m).map(|k| a[k] * g[m - k] * (c * k as f64 - (m - k) as f64)).sum();
        g[m] = s / (a[0] * m as f64);
    }
    g
}

/// Term-wise derivative; one coefficient shorter.
pub fn series_derivative(a: &[C64]) -> Vec<C64> {
    a.iter().enumerate().skip(1).map(|(k, c)| c * k as f64).collect()
}

/// `d^k/dh^k` of the series at `h`.
pub fn eval_derivative(c: &[C64], k: usize, h: C64) -> C64 {
    let mut acc = C64::new(0.0, 0.0);
    for m in (k..c.len()).rev() {
        let fall: f64 = ((m - k + 1)..=m).map(|j| j as f64).product();
        acc = acc * h + c[m] * fall;
    }
    acc
}

/// Distance from `x` to the nearest translate of an active half-period of `l`.
pub fn pole_distance(l: &CouplingVector, lat: &Lattice, x: C64) -> f64 {
    l.strengths()
        .iter()
        .enumerate()
        .filter(|(_, s)| **s != 0.0)
        .map(|(i, _)| lat.nearest_half_period_translate(x, i).1)
        .fold(f64::INFINITY, f64::min)
}

/// Distance from `x` to the nearest translate of any half-period, including the lattice itself.
pub fn half_period_distance(lat: &Lattice, x: C64) -> f64 {
    (0..4)
        .map(|i| lat.nearest_half_period_translate(x, i).1)
        .fold(f64::INFINITY, f64::min)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn wp_jet_matches_values_nearby() {
        let lat = Lattice::from_half_periods(C64::new(0.5, 0.0), C64::new(0.2, 0.35)).unwrap();
        let x = C64::new(0.31, 0.12);
        let v = lat.values(x).unwrap();
        let c = wp_jet(v.p, v.dp, lat.g2(), 40);
        let h = C64::new(0.02, -0.03);
        assert!((eval_derivative(&c, 0, h) - lat.wp(x + h).unwrap()).norm() < 1e-10 * v.p.norm());
        assert!((eval_derivative(&c, 1, h) - lat.wp_prime(x + h).unwrap()).norm() < 1e-9 * v.dp.norm());
    }

    #[test]
    fn free_solution_jet_is_exponential() {
        let k = C64::new(1.3, 0.2);
        let mut w = vec![C64::new(0.0, 0.0); 30];
        w[0] = k * k;
        let f = solution_jet(&w, C64::new(1.0, 0.0), k);
        let h = C64::new(0.3, 0.1);
        assert!((eval_derivative(&f, 0, h) - (k * h).exp()).norm() < 1e-14);
        assert!((eval_derivative(&f, 2, h) - k * k * (k * h).exp()).norm() < 1e-13);
    }

    #[test]
    fn series_arithmetic() {
        let a: Vec<C64> = [2.0, -1.0, 0.5, 0.25, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0].iter().map(|v| C64::new(*v, 0.1)).collect();
        let h = C64::new(0.05, 0.02);
        let at = |c: &[C64]| eval_derivative(c, 0, h);
        assert!((at(&series_mul(&a, &series_recip(&a))) - 1.0).norm() < 1e-9);
        let root = series_pow(&a, 0.5, a[0].sqrt());
        assert!((at(&root) - at(&a).sqrt()).norm() < 1e-9);
        let cube = series_pow(&a, 3.0, a[0].powi(3));
        assert!((at(&cube) - at(&a).powi(3)).norm() < 1e-12);
        assert!((at(&series_derivative(&a)) - eval_derivative(&a, 1, h)).norm() < 1e-15);
    }
}
