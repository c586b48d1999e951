//! Exact arithmetic in the differential field `C(P)(s1, s2, s3)`.
//!
//! Here `P = wp(x)`, `s_i^2 = P - e_i`, `P' = 2 s1 s2 s3` and `s_i' = s_j s_k`.
//! An element is a sum over the eight square-free monomials `s^eps`, each with
//! a rational coefficient in `P`. Denominators are kept as powers of the
//! `(P - e_i)` plus an optional monic leftover polynomial that only appears
//! after inverting a general expression.
//!
//! Coefficients are machine complex numbers. Every coefficient carries a
//! running magnitude (the sum of absolute values of everything that was added
//! into it), which decides when a cancellation is exact.

use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::elliptic::{Lattice, LatticeRef, WpValues, C64};
use crate::error::{Error, Result};

/// Coefficients below this fraction of their running magnitude are zero.
pub const CLEAN_TOL: f64 = 1e-11;
/// Remainder threshold when cancelling a factor `(P - r)`.
pub const REDUCE_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
struct Coef {
    v: C64,
    m: f64,
}

impl Coef {
    fn new(v: C64) -> Self {
        Coef { v, m: v.norm() }
    }
}

type Poly = Vec<Coef>;

fn zero() -> C64 {
    C64::new(0.0, 0.0)
}

fn clean(mut p: Poly) -> Poly {
    for c in p.iter_mut() {
        if c.v.norm() <= CLEAN_TOL * c.m {
            c.v = zero();
        }
    }
    while p.last().is_some_and(|c| c.v == zero()) {
        p.pop();
    }
    p
}

fn poly_add(a: &[Coef], b: &[Coef]) -> Poly {
    let n = a.len().max(b.len());
    let out = (0..n)
        .map(|k| match (a.get(k), b.get(k)) {
            (Some(x), Some(y)) => Coef {
                v: x.v + y.v,
                m: x.m + y.m,
            },
            (Some(x), None) | (None, Some(x)) => *x,
            (None, None) => unreachable!(),
        })
        .collect();
    clean(out)
}

fn poly_scale(a: &[Coef], s: C64) -> Poly {
    clean(
        a.iter()
            .map(|c| Coef {
                v: c.v * s,
                m: c.m * s.norm(),
            })
            .collect(),
    )
}

fn poly_mul(a: &[Coef], b: &[Coef]) -> Poly {
    if a.is_empty() || b.is_empty() {
        return Vec::new();
    }
    let mut out = vec![Coef { v: zero(), m: 0.0 }; a.len() + b.len() - 1];
    for (i, x) in a.iter().enumerate() {
        for (j, y) in b.iter().enumerate() {
            out[i + j].v += x.v * y.v;
            out[i + j].m += x.m * y.m;
        }
    }
    clean(out)
}

/// Multiplies by `(P - r)`.
fn poly_mul_linear(a: &[Coef], r: C64) -> Poly {
    poly_mul(a, &[Coef::new(-r), Coef::new(C64::new(1.0, 0.0))])
}

/// Synthetic division by `(P - r)`: quotient and the remainder relative to its magnitude.
fn poly_div_linear(a: &[Coef], r: C64) -> (Poly, f64) {
    let n = a.len();
    if n == 0 {
        return (Vec::new(), 0.0);
    }
    let mut q = vec![Coef { v: zero(), m: 0.0 }; n - 1];
    let mut carry = Coef { v: zero(), m: 0.0 };
    for k in (0..n).rev() {
        let cur = Coef {
            v: a[k].v + r * carry.v,
            m: a[k].m + r.norm() * carry.m,
        };
        if k > 0 {
            q[k - 1] = cur;
        }
        carry = cur;
    }
    let rel = if carry.m > 0.0 { carry.v.norm() / carry.m } else { 0.0 };
    (clean(q), rel)
}

/// Long division by a monic polynomial; `None` unless the remainder vanishes.
fn poly_div_exact(a: &[Coef], g: &[C64]) -> Option<Poly> {
    let dg = g.len() - 1;
    if a.len() < g.len() {
        return None;
    }
    let mut rem: Poly = a.to_vec();
    let mut q = vec![Coef { v: zero(), m: 0.0 }; a.len() - dg];
    for k in (0..q.len()).rev() {
        let lead = rem[k + dg];
        q[k] = lead;
        for (j, gj) in g.iter().enumerate() {
            rem[k + j].v -= lead.v * gj;
            rem[k + j].m += lead.m * gj.norm();
        }
    }
    let ok = rem[..dg]
        .iter()
        .all(|c| c.v.norm() <= REDUCE_TOL * c.m.max(f64::MIN_POSITIVE));
    ok.then(|| clean(q))
}

fn poly_deriv(a: &[Coef]) -> Poly {
    clean(
        a.iter()
            .enumerate()
            .skip(1)
            .map(|(k, c)| Coef {
                v: c.v * k as f64,
                m: c.m * k as f64,
            })
            .collect(),
    )
}

/// Value and magnitude of a polynomial at `p`.
fn poly_eval(a: &[Coef], p: C64) -> (C64, f64) {
    let pn = p.norm();
    a.iter().rev().fold((zero(), 0.0), |(v, m), c| (v * p + c.v, m * pn + c.m))
}

fn plain_eval(g: &[C64], p: C64) -> C64 {
    g.iter().rev().fold(zero(), |acc, c| acc * p + c)
}

fn plain_mul(a: &[C64], b: &[C64]) -> Vec<C64> {
    if a.is_empty() || b.is_empty() {
        return Vec::new();
    }
    let mut out = vec![zero(); a.len() + b.len() - 1];
    for (i, x) in a.iter().enumerate() {
        for (j, y) in b.iter().enumerate() {
            out[i + j] += x * y;
        }
    }
    out
}

fn to_plain(a: &[Coef]) -> Vec<C64> {
    a.iter().map(|c| c.v).collect()
}

fn from_plain(a: &[C64]) -> Poly {
    a.iter().map(|v| Coef::new(*v)).collect()
}

/// A rational function `num(P) / (prod (P - e_i)^den_i * extra(P))` in lowest terms.
#[derive(Debug, Clone, PartialEq)]
pub struct RatFn {
    num: Poly,
    den: [u32; 3],
    /// Monic leftover denominator, empty when trivial.
    extra: Vec<C64>,
}

impl RatFn {
    pub fn zero() -> Self {
        RatFn {
            num: Vec::new(),
            den: [0; 3],
            extra: Vec::new(),
        }
    }

    pub fn constant(c: C64) -> Self {
        Self::poly(&[c])
    }

    /// Polynomial in `P` from ascending coefficients.
    pub fn poly(coeffs: &[C64]) -> Self {
        RatFn {
            num: clean(from_plain(coeffs)),
            den: [0; 3],
            extra: Vec::new(),
        }
    }

    /// `1 / (P - e_i)^k` for `i` in `0..3`.
    pub fn inverse_power(i: usize, k: u32) -> Self {
        let mut den = [0; 3];
        den[i] = k;
        RatFn {
            num: vec![Coef::new(C64::new(1.0, 0.0))],
            den,
            extra: Vec::new(),
        }
    }

    pub fn is_zero(&self) -> bool {
        self.num.is_empty()
    }

    /// Ascending numerator coefficients.
    pub fn numerator(&self) -> Vec<C64> {
        to_plain(&self.num)
    }

    /// Powers of `(P - e_i)` in the denominator.
    pub fn denominator_powers(&self) -> [u32; 3] {
        self.den
    }

    pub fn extra_denominator(&self) -> &[C64] {
        &self.extra
    }

    /// Polynomial coefficients when the denominator is trivial.
    pub fn as_polynomial(&self) -> Option<Vec<C64>> {
        (self.den == [0; 3] && self.extra.is_empty()).then(|| self.numerator())
    }

    fn normalized(self, e: &[C64; 3]) -> Self {
        let all = self.den;
        self.normalized_within(e, all)
    }

    /// Cancels at most `limit[i]` factors `(P - e_i)`. Callers pass zero where the
    /// factor provably survives, so a near-vanishing remainder is never mistaken
    /// for a common factor there.
    fn normalized_within(mut self, e: &[C64; 3], limit: [u32; 3]) -> Self {
        self.num = clean(self.num);
        if self.num.is_empty() {
            return RatFn::zero();
        }
        for i in 0..3 {
            let floor = self.den[i].saturating_sub(limit[i]);
            while self.den[i] > floor {
                let (q, rel) = poly_div_linear(&self.num, e[i]);
                if rel <= REDUCE_TOL {
                    self.num = q;
                    self.den[i] -= 1;
                } else {
                    break;
                }
            }
        }
        if self.extra.len() == 1 {
            self.extra.clear();
        }
        if !self.extra.is_empty() {
            if let Some(q) = poly_div_exact(&self.num, &self.extra) {
                self.num = q;
                self.extra.clear();
            }
        }
        self
    }

    fn den_poly(&self, e: &[C64; 3]) -> Poly {
        let mut p = if self.extra.is_empty() {
            vec![Coef::new(C64::new(1.0, 0.0))]
        } else {
            from_plain(&self.extra)
        };
        for i in 0..3 {
            for _ in 0..self.den[i] {
                p = poly_mul_linear(&p, e[i]);
            }
        }
        p
    }

    fn lift(num: &[Coef], from: [u32; 3], to: [u32; 3], e: &[C64; 3]) -> Poly {
        let mut p = num.to_vec();
        for i in 0..3 {
            for _ in from[i]..to[i] {
                p = poly_mul_linear(&p, e[i]);
            }
        }
        p
    }

    fn add(&self, other: &RatFn, e: &[C64; 3]) -> RatFn {
        if self.is_zero() {
            return other.clone();
        }
        if other.is_zero() {
            return self.clone();
        }
        let den = [
            self.den[0].max(other.den[0]),
            self.den[1].max(other.den[1]),
            self.den[2].max(other.den[2]),
        ];
        let mut a = Self::lift(&self.num, self.den, den, e);
        let mut b = Self::lift(&other.num, other.den, den, e);
        let extra = if same_poly(&self.extra, &other.extra) {
            self.extra.clone()
        } else {
            if !other.extra.is_empty() {
                a = poly_mul(&a, &from_plain(&other.extra));
            }
            if !self.extra.is_empty() {
                b = poly_mul(&b, &from_plain(&self.extra));
            }
            plain_mul_or(&self.extra, &other.extra)
        };
        // a factor with unequal powers in the two terms cannot cancel
        let limit = std::array::from_fn(|i| if self.den[i] == other.den[i] { den[i] } else { 0 });
        RatFn {
            num: poly_add(&a, &b),
            den,
            extra,
        }
        .normalized_within(e, limit)
    }

    fn mul(&self, other: &RatFn, e: &[C64; 3]) -> RatFn {
        if self.is_zero() || other.is_zero() {
            return RatFn::zero();
        }
        let den = std::array::from_fn(|i| self.den[i] + other.den[i]);
        // reduced factors have numerators that do not vanish at their poles
        let limit = std::array::from_fn(|i| if self.den[i] == 0 || other.den[i] == 0 { den[i] } else { 0 });
        RatFn {
            num: poly_mul(&self.num, &other.num),
            den,
            extra: plain_mul_or(&self.extra, &other.extra),
        }
        .normalized_within(e, limit)
    }

    fn scale(&self, s: C64) -> RatFn {
        RatFn {
            num: poly_scale(&self.num, s),
            den: self.den,
            extra: self.extra.clone(),
        }
        .normalized_trivially()
    }

    fn normalized_trivially(self) -> Self {
        if self.num.is_empty() {
            RatFn::zero()
        } else {
            self
        }
    }

    /// Multiplies by `(P - e_i)`, cancelling against the denominator exactly when possible.
    fn mul_linear_factor(&self, i: usize, e: &[C64; 3]) -> RatFn {
        if self.is_zero() {
            return RatFn::zero();
        }
        if self.den[i] > 0 {
            let mut out = self.clone();
            out.den[i] -= 1;
            return out;
        }
        self.mul_poly(&[Coef::new(-e[i]), Coef::new(C64::new(1.0, 0.0))], e)
    }

    fn mul_poly(&self, p: &[Coef], e: &[C64; 3]) -> RatFn {
        RatFn {
            num: poly_mul(&self.num, p),
            den: self.den,
            extra: self.extra.clone(),
        }
        .normalized(e)
    }

    fn inv(&self, e: &[C64; 3]) -> Result<RatFn> {
        if self.is_zero() {
            return Err(Error::DivisionByZero);
        }
        let num = self.den_poly(e);
        let mut rest = self.num.clone();
        let mut den = [0u32; 3];
        for i in 0..3 {
            loop {
                let (q, rel) = poly_div_linear(&rest, e[i]);
                if rest.len() > 1 && rel <= REDUCE_TOL {
                    rest = q;
                    den[i] += 1;
                } else {
                    break;
                }
            }
        }
        let lead = rest.last().expect("nonzero numerator").v;
        let scaled = poly_scale(&num, lead.inv());
        let extra = if rest.len() > 1 {
            rest.iter().map(|c| c.v / lead).collect()
        } else {
            Vec::new()
        };
        // the numerator was reduced against its poles, so nothing linear cancels
        Ok(RatFn {
            num: scaled,
            den,
            extra,
        }
        .normalized_within(e, [0; 3]))
    }

    /// Derivative with respect to `P`.
    fn deriv(&self, e: &[C64; 3]) -> RatFn {
        if self.is_zero() {
            return RatFn::zero();
        }
        if self.extra.is_empty() {
            // (N / prod D_i^k_i)' = (N' prod_{k_i>0} D_i - N sum_i k_i prod_{j != i, k_j>0} D_j) / prod D_i^(k_i + [k_i>0])
            let active: Vec<usize> = (0..3).filter(|&i| self.den[i] > 0).collect();
            let linear = |i: usize| vec![Coef::new(-e[i]), Coef::new(C64::new(1.0, 0.0))];
            let mut num = poly_deriv(&self.num);
            for &i in &active {
                num = poly_mul(&num, &linear(i));
            }
            for &i in &active {
                let mut t = poly_scale(&self.num, C64::new(-(self.den[i] as f64), 0.0));
                for &j in &active {
                    if j != i {
                        t = poly_mul(&t, &linear(j));
                    }
                }
                num = poly_add(&num, &t);
            }
            let mut den = self.den;
            for &i in &active {
                den[i] += 1;
            }
            return RatFn {
                num,
                den,
                extra: Vec::new(),
            }
            .normalized(e);
        }
        let first = RatFn {
            num: poly_deriv(&self.num),
            den: self.den,
            extra: self.extra.clone(),
        }
        .normalized(e);
        // log-derivative of the denominator
        let mut logd = RatFn::zero();
        for i in 0..3 {
            if self.den[i] > 0 {
                let t = RatFn::inverse_power(i, 1).scale(C64::new(self.den[i] as f64, 0.0));
                logd = logd.add(&t, e);
            }
        }
        let g = from_plain(&self.extra);
        let t = RatFn {
            num: poly_deriv(&g),
            den: [0; 3],
            extra: self.extra.clone(),
        }
        .normalized(e);
        logd = logd.add(&t, e);
        first.add(&self.mul(&logd, e).scale(C64::new(-1.0, 0.0)), e)
    }

    /// Value and magnitude at `P = p`.
    pub fn eval(&self, p: C64, e: &[C64; 3]) -> Result<(C64, f64)> {
        if self.is_zero() {
            return Ok((zero(), 0.0));
        }
        let (n, m) = poly_eval(&self.num, p);
        let mut d = C64::new(1.0, 0.0);
        for i in 0..3 {
            if self.den[i] > 0 {
                let f = p - e[i];
                if f.norm() <= 1e-14 * (1.0 + p.norm()) {
                    return Err(Error::Pole { p });
                }
                d *= f.powu(self.den[i]);
            }
        }
        if !self.extra.is_empty() {
            d *= plain_eval(&self.extra, p);
        }
        if d.norm() == 0.0 || !d.is_finite() {
            return Err(Error::Pole { p });
        }
        Ok((n / d, m / d.norm()))
    }

    /// Substitutes `P -> e_i + (e_i - e_j)(e_i - e_k)/(P - e_i)`.
    ///
    /// The known factors map exactly: `P - e_i -> c/(P - e_i)` and
    /// `P - e_j -> (e_i - e_j)(P - e_k)/(P - e_i)`, so only the numerator and the
    /// leftover denominator go through a Taylor shift.
    fn shifted(&self, i: usize, e: &[C64; 3]) -> Result<RatFn> {
        if self.is_zero() {
            return Ok(RatFn::zero());
        }
        let (j, k) = others(i);
        let c = (e[i] - e[j]) * (e[i] - e[k]);
        let (num, dn) = mobius_image(&self.num, e[i], c);
        let mut scale = C64::new(1.0, 0.0);
        let mut den = [0u32; 3];
        den[k] += self.den[j];
        den[j] += self.den[k];
        scale /= c.powu(self.den[i]) * (e[i] - e[j]).powu(self.den[j]) * (e[i] - e[k]).powu(self.den[k]);
        // net power of (P - e_i)
        let mut up = self.den[i] as i64 + self.den[j] as i64 + self.den[k] as i64 - dn as i64;
        let mut extra = Vec::new();
        if !self.extra.is_empty() {
            let (g, dg) = mobius_image(&from_plain(&self.extra), e[i], c);
            up += dg as i64;
            let lead = g.last().ok_or(Error::DivisionByZero)?.v;
            scale /= lead;
            if g.len() > 1 {
                extra = g.iter().map(|x| x.v / lead).collect();
            }
        }
        let mut num = poly_scale(&num, scale);
        if up >= 0 {
            for _ in 0..up {
                num = poly_mul_linear(&num, e[i]);
            }
        } else {
            den[i] = (-up) as u32;
        }
        // an automorphism keeps reduced fractions reduced
        Ok(RatFn { num, den, extra }.normalized_within(e, [0; 3]))
    }
}

/// `p(P + r)` by repeated synthetic division.
fn taylor_shift(p: &[Coef], r: C64) -> Poly {
    let mut a = p.to_vec();
    let n = a.len();
    for start in 0..n {
        for k in (start..n - 1).rev() {
            let next = a[k + 1];
            a[k].v += r * next.v;
            a[k].m += r.norm() * next.m;
        }
    }
    clean(a)
}

/// `p(e + c/(P - e))` as `(q, d)` with the value `q(P) / (P - e)^d`.
fn mobius_image(p: &[Coef], e: C64, c: C64) -> (Poly, u32) {
    if p.is_empty() {
        return (Vec::new(), 0);
    }
    // p(e + w) = sum b_n w^n, so the image is sum b_n c^n u^(d - n) / u^d with u = P - e
    let b = taylor_shift(p, e);
    let d = p.len() - 1;
    let mut in_u = vec![Coef { v: zero(), m: 0.0 }; d + 1];
    let mut cn = C64::new(1.0, 0.0);
    for (n, bn) in b.iter().enumerate() {
        in_u[d - n] = Coef {
            v: bn.v * cn,
            m: bn.m * cn.norm(),
        };
        cn *= c;
    }
    (taylor_shift(&clean(in_u), -e), d as u32)
}

fn same_poly(a: &[C64], b: &[C64]) -> bool {
    a.len() == b.len()
        && a
            .iter()
            .zip(b)
            .all(|(x, y)| (x - y).norm() <= 1e-12 * (1.0 + x.norm()))
}

fn plain_mul_or(a: &[C64], b: &[C64]) -> Vec<C64> {
    match (a.is_empty(), b.is_empty()) {
        (true, true) => Vec::new(),
        (false, true) => a.to_vec(),
        (true, false) => b.to_vec(),
        (false, false) => plain_mul(a, b),
    }
}

/// The other two indices of `{0, 1, 2}`.
pub fn others(i: usize) -> (usize, usize) {
    match i {
        0 => (1, 2),
        1 => (0, 2),
        _ => (0, 1),
    }
}

/// Element of `C(P)(s1, s2, s3)` tied to one lattice.
///
/// `terms[eps]` multiplies `s1^(eps&1) s2^(eps>>1&1) s3^(eps>>2&1)`.
#[derive(Debug, Clone)]
pub struct FieldExpr {
    lat: LatticeRef,
    terms: [RatFn; 8],
}

fn empty_terms() -> [RatFn; 8] {
    std::array::from_fn(|_| RatFn::zero())
}

impl FieldExpr {
    pub fn zero(lat: &LatticeRef) -> Self {
        FieldExpr {
            lat: lat.clone(),
            terms: empty_terms(),
        }
    }

    pub fn constant(lat: &LatticeRef, c: C64) -> Self {
        Self::from_rational(lat, 0, RatFn::constant(c))
    }

    pub fn real(lat: &LatticeRef, c: f64) -> Self {
        Self::constant(lat, C64::new(c, 0.0))
    }

    pub fn one(lat: &LatticeRef) -> Self {
        Self::real(lat, 1.0)
    }

    /// `wp(x)` itself.
    pub fn wp(lat: &LatticeRef) -> Self {
        Self::polynomial(lat, &[zero(), C64::new(1.0, 0.0)])
    }

    /// `wp'(x) = 2 s1 s2 s3`.
    pub fn wp_prime(lat: &LatticeRef) -> Self {
        Self::from_rational(lat, 7, RatFn::constant(C64::new(2.0, 0.0)))
    }

    /// Polynomial in `wp` from ascending coefficients.
    pub fn polynomial(lat: &LatticeRef, coeffs: &[C64]) -> Self {
        Self::from_rational(lat, 0, RatFn::poly(coeffs))
    }

    /// `s_i` for `i` in `1..=3`.
    pub fn s(lat: &LatticeRef, i: usize) -> Self {
        assert!((1..=3).contains(&i), "s index {i} out of range");
        Self::from_rational(lat, 1 << (i - 1), RatFn::constant(C64::new(1.0, 0.0)))
    }

    /// `s_i^n = (wp - e_i)^(n/2)` for any integer `n`.
    pub fn s_power(lat: &LatticeRef, i: usize, n: i64) -> Self {
        assert!((1..=3).contains(&i), "s index {i} out of range");
        let half = n.div_euclid(2);
        let odd = n.rem_euclid(2) == 1;
        let e = lat.e();
        let rat = if half >= 0 {
            let mut p = vec![Coef::new(C64::new(1.0, 0.0))];
            for _ in 0..half {
                p = poly_mul_linear(&p, e[i - 1]);
            }
            RatFn {
                num: p,
                den: [0; 3],
                extra: Vec::new(),
            }
        } else {
            RatFn::inverse_power(i - 1, (-half) as u32)
        };
        Self::from_rational(lat, if odd { 1 << (i - 1) } else { 0 }, rat)
    }

    /// `prod_i (wp - e_i)^(a_i/2)` for integer exponents.
    pub fn s_monomial(lat: &LatticeRef, a: [i64; 3]) -> Self {
        let mut out = Self::one(lat);
        for (i, &ai) in a.iter().enumerate() {
            if ai != 0 {
                out = &out * &Self::s_power(lat, i + 1, ai);
            }
        }
        out
    }

    /// Single-monomial expression `rat * s^eps`.
    /// Wraps a fraction already in lowest terms.
    fn from_reduced(lat: &LatticeRef, eps: usize, rat: RatFn) -> Self {
        let mut terms = empty_terms();
        terms[eps] = rat;
        FieldExpr {
            lat: lat.clone(),
            terms,
        }
    }

    pub fn from_rational(lat: &LatticeRef, eps: usize, rat: RatFn) -> Self {
        let mut terms = empty_terms();
        terms[eps] = rat.normalized(&lat.e());
        FieldExpr {
            lat: lat.clone(),
            terms,
        }
    }

    pub fn lattice(&self) -> &LatticeRef {
        &self.lat
    }

    /// Coefficient of the monomial `s^eps`.
    pub fn term(&self, eps: usize) -> &RatFn {
        &self.terms[eps]
    }

    pub fn is_zero(&self) -> bool {
        self.terms.iter().all(RatFn::is_zero)
    }

    /// True when no odd power of any `s_i` appears.
    pub fn is_even(&self) -> bool {
        self.terms[1..].iter().all(RatFn::is_zero)
    }

    /// Number of stored numerator coefficients, a proxy for expression size.
    pub fn size(&self) -> usize {
        self.terms.iter().map(|t| t.num.len() + t.extra.len()).sum()
    }

    fn same_lattice(&self, other: &FieldExpr) -> Result<()> {
        if Arc::ptr_eq(&self.lat, &other.lat) || self.lat.same_as(&other.lat) {
            Ok(())
        } else {
            Err(Error::LatticeMismatch)
        }
    }

    pub fn checked_add(&self, other: &FieldExpr) -> Result<FieldExpr> {
        self.same_lattice(other)?;
        let e = self.lat.e();
        let terms = std::array::from_fn(|k| self.terms[k].add(&other.terms[k], &e));
        Ok(FieldExpr {
            lat: self.lat.clone(),
            terms,
        })
    }

    pub fn checked_sub(&self, other: &FieldExpr) -> Result<FieldExpr> {
        self.checked_add(&other.scale(C64::new(-1.0, 0.0)))
    }

    pub fn checked_mul(&self, other: &FieldExpr) -> Result<FieldExpr> {
        self.same_lattice(other)?;
        let e = self.lat.e();
        let mut terms = empty_terms();
        for a in 0..8 {
            if self.terms[a].is_zero() {
                continue;
            }
            for b in 0..8 {
                if other.terms[b].is_zero() {
                    continue;
                }
                let mut prod = self.terms[a].mul(&other.terms[b], &e);
                let overlap = a & b;
                for i in 0..3 {
                    if overlap & (1 << i) != 0 {
                        prod = prod.mul_linear_factor(i, &e);
                    }
                }
                let k = a ^ b;
                terms[k] = terms[k].add(&prod, &e);
            }
        }
        Ok(FieldExpr {
            lat: self.lat.clone(),
            terms,
        })
    }

    pub fn scale(&self, s: C64) -> FieldExpr {
        FieldExpr {
            lat: self.lat.clone(),
            terms: std::array::from_fn(|k| self.terms[k].scale(s)),
        }
    }

    pub fn scale_real(&self, s: f64) -> FieldExpr {
        self.scale(C64::new(s, 0.0))
    }

    /// Flips the sign of `s_i` (`i` in `0..3`).
    fn conjugate(&self, i: usize) -> FieldExpr {
        FieldExpr {
            lat: self.lat.clone(),
            terms: std::array::from_fn(|k| {
                if k & (1 << i) != 0 {
                    self.terms[k].scale(C64::new(-1.0, 0.0))
                } else {
                    self.terms[k].clone()
                }
            }),
        }
    }

    /// Multiplicative inverse, through the norm down to `C(P)`.
    ///
    /// The norm's degree grows with the number of monomial classes present, and so
    /// does the coefficient growth; expressions spread over three or more classes
    /// can lose several digits, and a root of the norm close to some `e_i` may be
    /// taken for an exact factor.
    pub fn invert(&self) -> Result<FieldExpr> {
        if self.is_zero() {
            return Err(Error::DivisionByZero);
        }
        let mut cofactor = FieldExpr::one(&self.lat);
        let mut acc = self.clone();
        for i in 0..3 {
            // already a pure power of s_i: conjugating would only square the degree
            let parities: Vec<bool> = (0..8).filter(|k| !acc.terms[*k].is_zero()).map(|k| k & (1 << i) != 0).collect();
            if parities.iter().all(|p| *p == parities[0]) {
                continue;
            }
            let c = acc.conjugate(i);
            cofactor = &cofactor * &c;
            acc = &acc * &c;
        }
        if !acc.is_even() {
            // every s_i now enters with one parity, so this is a single odd monomial
            let eps = (0..8).find(|k| !acc.terms[*k].is_zero()).expect("nonzero");
            let mono = FieldExpr::from_rational(&self.lat, eps, RatFn::constant(C64::new(1.0, 0.0)));
            cofactor = &cofactor * &mono;
            acc = &acc * &mono;
        }
        if acc.is_zero() {
            return Err(Error::DivisionByZero);
        }
        let e = self.lat.e();
        let inv = FieldExpr::from_reduced(&self.lat, 0, acc.terms[0].inv(&e)?);
        Ok(&cofactor * &inv)
    }

    pub fn checked_div(&self, other: &FieldExpr) -> Result<FieldExpr> {
        self.same_lattice(other)?;
        self.checked_mul(&other.invert()?)
    }

    /// Integer power, negative exponents through `invert`.
    pub fn pow(&self, n: i64) -> Result<FieldExpr> {
        let base = if n < 0 { self.invert()? } else { self.clone() };
        let mut out = FieldExpr::one(&self.lat);
        for _ in 0..n.unsigned_abs() {
            out = &out * &base;
        }
        Ok(out)
    }

    /// d/dx.
    pub fn differentiate(&self) -> FieldExpr {
        let e = self.lat.e();
        let mut terms = empty_terms();
        for eps in 0..8 {
            let r = &self.terms[eps];
            if r.is_zero() {
                continue;
            }
            // R'(P) * P' * s^eps with P' = 2 s1 s2 s3
            let dr = r.deriv(&e).scale(C64::new(2.0, 0.0));
            let mut dr = dr;
            let mut k = eps ^ 7;
            for i in 0..3 {
                if eps & (1 << i) != 0 {
                    dr = dr.mul_linear_factor(i, &e);
                }
            }
            terms[k] = terms[k].add(&dr, &e);
            // R(P) * d(s^eps): s_i' = s_j s_k replaces s_i by s_j s_k
            for i in 0..3 {
                if eps & (1 << i) == 0 {
                    continue;
                }
                let mut t = r.clone();
                k = eps ^ 7;
                for j in 0..3 {
                    if j != i && eps & (1 << j) != 0 {
                        t = t.mul_linear_factor(j, &e);
                    }
                }
                terms[k] = terms[k].add(&t, &e);
            }
        }
        FieldExpr {
            lat: self.lat.clone(),
            terms,
        }
    }

    /// n-th derivative.
    pub fn derivative(&self, n: usize) -> FieldExpr {
        (0..n).fold(self.clone(), |acc, _| acc.differentiate())
    }

    /// Substitutes `x -> x + omega_i` (`i` in `1..=3`) in an expression without odd parts.
    pub fn shift_half_period(&self, i: usize) -> Result<FieldExpr> {
        assert!((1..=3).contains(&i), "half-period index {i} out of range");
        if !self.is_even() {
            return Err(Error::UnsupportedOddPart);
        }
        let e = self.lat.e();
        let r = self.terms[0].shifted(i - 1, &e)?;
        Ok(FieldExpr::from_reduced(&self.lat, 0, r))
    }

    /// Value at `x` on the anchored branch.
    pub fn evaluate(&self, x: C64) -> Result<C64> {
        Ok(self.evaluate_at(&self.lat.values(x)?)?.0)
    }

    /// Value and magnitude from precomputed kernel values.
    pub fn evaluate_at(&self, v: &WpValues) -> Result<(C64, f64)> {
        let e = self.lat.e();
        let mut val = zero();
        let mut mag = 0.0;
        for eps in 0..8 {
            let r = &self.terms[eps];
            if r.is_zero() {
                continue;
            }
            let (rv, rm) = r.eval(v.p, &e)?;
            let mut mono = C64::new(1.0, 0.0);
            for i in 0..3 {
                if eps & (1 << i) != 0 {
                    mono *= v.s[i];
                }
            }
            val += rv * mono;
            mag += rm * mono.norm();
        }
        Ok((val, mag))
    }

    /// Zero at every sample point up to `tol` times the evaluation magnitude.
    pub fn vanishes_numerically(&self, points: &[C64], tol: f64) -> Result<bool> {
        for &x in points {
            let (v, m) = self.evaluate_at(&self.lat.values(x)?)?;
            if v.norm() > tol * m.max(f64::MIN_POSITIVE) {
                return Ok(false);
            }
        }
        Ok(true)
    }

    /// Structural equality of canonical forms.
    pub fn canonical_eq(&self, other: &FieldExpr) -> Result<bool> {
        Ok(self.checked_sub(other)?.is_zero())
    }

    /// Canonical equality, falling back to agreement at 20 random points (1e-8).
    pub fn equals(&self, other: &FieldExpr) -> Result<bool> {
        let diff = self.checked_sub(other)?;
        if diff.is_zero() {
            return Ok(true);
        }
        let pts = sample_points(&self.lat, 20, 0x5eed);
        let mut scale_ok = true;
        for &x in &pts {
            let v = self.lat.values(x)?;
            let (a, _) = self.evaluate_at(&v)?;
            let (b, _) = other.evaluate_at(&v)?;
            if (a - b).norm() > 1e-8 * (a.norm() + b.norm()).max(1e-300) {
                scale_ok = false;
                break;
            }
        }
        Ok(scale_ok)
    }
}

impl PartialEq for FieldExpr {
    fn eq(&self, other: &Self) -> bool {
        self.canonical_eq(other).unwrap_or(false)
    }
}

macro_rules! binop {
    ($tr:ident, $m:ident, $checked:ident) => {
        impl $tr<&FieldExpr> for &FieldExpr {
            type Output = FieldExpr;
            /// Panics when the operands live on different lattices.
            fn $m(self, rhs: &FieldExpr) -> FieldExpr {
                self.$checked(rhs).expect("operands on the same lattice")
            }
        }
        impl $tr<FieldExpr> for FieldExpr {
            type Output = FieldExpr;
            fn $m(self, rhs: FieldExpr) -> FieldExpr {
                (&self).$m(&rhs)
            }
        }
    };
}

binop!(Add, add, checked_add);
binop!(Sub, sub, checked_sub);
binop!(Mul, mul, checked_mul);

impl Neg for &FieldExpr {
    type Output = FieldExpr;
    fn neg(self) -> FieldExpr {
        self.scale(C64::new(-1.0, 0.0))
    }
}

impl Neg for FieldExpr {
    type Output = FieldExpr;
    fn neg(self) -> FieldExpr {
        -&self
    }
}

fn fmt_c(c: C64) -> String {
    format!("({:.15e}{:+.15e}i)", c.re, c.im)
}

impl fmt::Display for RatFn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let num: Vec<String> = self.num.iter().map(|c| fmt_c(c.v)).collect();
        write!(f, "[{}]", num.join(", "))?;
        let mut den = Vec::new();
        for i in 0..3 {
            if self.den[i] > 0 {
                den.push(format!("(P-e{})^{}", i + 1, self.den[i]));
            }
        }
        if !self.extra.is_empty() {
            let g: Vec<String> = self.extra.iter().map(|c| fmt_c(*c)).collect();
            den.push(format!("[{}]", g.join(", ")));
        }
        if !den.is_empty() {
            write!(f, " / {}", den.join(" "))?;
        }
        Ok(())
    }
}

/// Name of the monomial `s^eps`, `1` for the empty product.
pub fn monomial_name(eps: usize) -> String {
    let names: Vec<String> = (0..3)
        .filter(|i| eps & (1 << i) != 0)
        .map(|i| format!("s{}", i + 1))
        .collect();
    if names.is_empty() {
        "1".into()
    } else {
        names.join(" ")
    }
}

impl fmt::Display for FieldExpr {
    /// One line per monomial: ascending coefficients in `P` over the denominator.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_zero() {
            return write!(f, "0");
        }
        let mut first = true;
        for eps in 0..8 {
            if self.terms[eps].is_zero() {
                continue;
            }
            if !first {
                writeln!(f)?;
            }
            first = false;
            write!(f, "{}: {}", monomial_name(eps), self.terms[eps])?;
        }
        Ok(())
    }
}

/// Deterministic points of the fundamental cell kept away from every half-period translate.
pub fn sample_points(lat: &Lattice, n: usize, seed: u64) -> Vec<C64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let clearance = 0.35 * lat.omega1().norm().min(lat.omega3().norm());
    let mut out = Vec::with_capacity(n);
    while out.len() < n {
        let a: f64 = rng.gen_range(-0.5..0.5);
        let b: f64 = rng.gen_range(-0.5..0.5);
        let x = lat.omega1() * (2.0 * a) + lat.omega3() * (2.0 * b);
        let far = (0..4).all(|i| lat.nearest_half_period_translate(x, i).1 > clearance);
        if far {
            out.push(x);
        }
    }
    out
}
