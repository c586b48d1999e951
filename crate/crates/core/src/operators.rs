//! Differential operators with field coefficients, the elliptic Heun Hamiltonian,
//! and the dictionary between the rational and elliptic forms of Heun's equation.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::difffield::FieldExpr;
use crate::elliptic::{Lattice, LatticeRef, C64};
use crate::error::{Error, Result};

/// Couplings `(l0, l1, l2, l3)` at the half-periods `omega_0..omega_3`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CouplingVector(pub [f64; 4]);

const COUPLING_TOL: f64 = 1e-12;

impl CouplingVector {
    pub fn new(l: [f64; 4]) -> Self {
        CouplingVector(l)
    }

    pub fn l(&self) -> [f64; 4] {
        self.0
    }

    /// `l (l + 1)` per half-period.
    pub fn strengths(&self) -> [f64; 4] {
        self.0.map(|l| l * (l + 1.0))
    }

    /// Representative with every `l_i >= -1/2` under `l ~ -l - 1`.
    pub fn normalized(&self) -> Self {
        CouplingVector(self.0.map(|l| if l < -0.5 { -l - 1.0 } else { l }))
    }

    pub fn is_normalized(&self) -> bool {
        self.0.iter().all(|&l| l >= -0.5)
    }

    /// Same Hamiltonian: equal normalized representatives.
    pub fn equivalent(&self, other: &CouplingVector) -> bool {
        let (a, b) = (self.normalized(), other.normalized());
        a.0.iter().zip(b.0.iter()).all(|(x, y)| (x - y).abs() <= 1e-9 * (1.0 + x.abs()))
    }

    pub fn is_integer(&self) -> bool {
        self.0.iter().all(|l| (l - l.round()).abs() < 1e-12)
    }
}

impl fmt::Display for CouplingVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.0.iter().map(|v| format!("{v}")).collect();
        write!(f, "{}", parts.join(","))
    }
}

impl FromStr for CouplingVector {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let vals = parse_quad(s).map_err(Error::InvalidCoupling)?;
        Ok(CouplingVector(vals))
    }
}

/// Parses four comma-separated reals.
pub fn parse_quad(s: &str) -> std::result::Result<[f64; 4], String> {
    let vals: Vec<f64> = s
        .split(',')
        .map(|t| t.trim().parse::<f64>().map_err(|e| format!("{t:?}: {e}")))
        .collect::<std::result::Result<_, _>>()?;
    vals.try_into()
        .map_err(|v: Vec<f64>| format!("expected 4 comma-separated values, got {}", v.len()))
}

/// Parameters of Heun's equation in the rational coordinate `z` with singular points `{0, 1, t, oo}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HeunRationalParams {
    pub gamma: C64,
    pub delta: C64,
    pub epsilon: C64,
    pub alpha: C64,
    pub beta: C64,
    pub q: C64,
    pub t: C64,
}

impl HeunRationalParams {
    /// Checks `gamma + delta + epsilon = alpha + beta + 1` and `t` away from `0, 1`.
    pub fn new(
        gamma: C64,
        delta: C64,
        epsilon: C64,
        alpha: C64,
        beta: C64,
        q: C64,
        t: C64,
    ) -> Result<Self> {
        let p = HeunRationalParams {
            gamma,
            delta,
            epsilon,
            alpha,
            beta,
            q,
            t,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn fuchs_defect(&self) -> f64 {
        (self.gamma + self.delta + self.epsilon - self.alpha - self.beta - 1.0).norm()
    }

    pub fn validate(&self) -> Result<()> {
        let scale = 1.0
            + self.gamma.norm()
            + self.delta.norm()
            + self.epsilon.norm()
            + self.alpha.norm()
            + self.beta.norm();
        if self.fuchs_defect() > COUPLING_TOL * scale {
            return Err(Error::InvalidParams(format!(
                "Fuchs relation violated by {:e}",
                self.fuchs_defect()
            )));
        }
        if self.t.norm() < 1e-12 || (self.t - 1.0).norm() < 1e-12 {
            return Err(Error::InvalidParams("t must differ from 0 and 1".into()));
        }
        Ok(())
    }

    /// Coefficients `p(z)`, `r(z)` of `y'' + p y' + r y = 0`.
    pub fn coefficients(&self, z: C64) -> (C64, C64) {
        let p = self.gamma / z + self.delta / (z - 1.0) + self.epsilon / (z - self.t);
        let r = (self.alpha * self.beta * z - self.q) / (z * (z - 1.0) * (z - self.t));
        (p, r)
    }

    /// Finite singular points `0, 1, t`.
    pub fn singular_points(&self) -> [C64; 3] {
        [C64::new(0.0, 0.0), C64::new(1.0, 0.0), self.t]
    }
}

/// Modulus `t = (e3 - e1)/(e2 - e1)` of a lattice.
pub fn lattice_modulus(lat: &Lattice) -> C64 {
    let [e1, e2, e3] = lat.e();
    (e3 - e1) / (e2 - e1)
}

/// Couplings `(beta - alpha - 1/2, 1/2 - gamma, 1/2 - delta, 1/2 - epsilon)` and the
/// modulus `t` the lattice must reproduce.
pub fn couplings_from_rational(p: &HeunRationalParams) -> Result<(CouplingVector, C64)> {
    p.validate()?;
    let raw = [
        p.beta - p.alpha - 0.5,
        0.5 - p.gamma,
        0.5 - p.delta,
        0.5 - p.epsilon,
    ];
    if raw.iter().any(|c| c.im.abs() > COUPLING_TOL * (1.0 + c.re.abs())) {
        return Err(Error::InvalidParams(
            "exponent differences are not real; couplings would be complex".into(),
        ));
    }
    Ok((CouplingVector(raw.map(|c| c.re)), p.t))
}

/// Inverse of [`couplings_from_rational`] for a given accessory parameter and modulus.
pub fn rational_from_couplings(l: &CouplingVector, q: C64, t: C64) -> Result<HeunRationalParams> {
    let [l0, l1, l2, l3] = l.0;
    let gamma = C64::new(0.5 - l1, 0.0);
    let delta = C64::new(0.5 - l2, 0.0);
    let epsilon = C64::new(0.5 - l3, 0.0);
    let sum = gamma + delta + epsilon - 1.0;
    let diff = l0 + 0.5;
    let alpha = (sum - diff) / 2.0;
    let beta = (sum + diff) / 2.0;
    HeunRationalParams::new(gamma, delta, epsilon, alpha, beta, q, t)
}

fn check_modulus(p: &HeunRationalParams, lat: &Lattice) -> Result<()> {
    let t = lattice_modulus(lat);
    if (t - p.t).norm() > 1e-9 * (1.0 + t.norm()) {
        return Err(Error::InvalidParams(format!(
            "lattice modulus {t} does not match t = {}",
            p.t
        )));
    }
    Ok(())
}

/// `(a, b)` with `E = a q + b` for the substitution `z = (wp - e1)/(e2 - e1)`,
/// `f = y * z^(-l1/2) (z-1)^(-l2/2) (z-t)^(-l3/2)`.
pub fn energy_map(p: &HeunRationalParams, lat: &Lattice) -> Result<(C64, C64)> {
    check_modulus(p, lat)?;
    let (l, t) = couplings_from_rational(p)?;
    let [e1, e2, e3] = lat.e();
    let kappa = e2 - e1;
    let [_, l1, l2, l3] = l.0;
    let (h1, h2, h3) = (l1 / 2.0, l2 / 2.0, l3 / 2.0);
    let st = l.strengths();
    let a_const = -(t + 1.0) * h1 * h1 + (t * h2 + h3) * (0.5 - 2.0 * h1)
        - (e1 * (st[0] + st[1]) + e3 * st[2] + e2 * st[3]) / (kappa * 4.0);
    let slope = -kappa * 4.0;
    Ok((slope, slope * a_const))
}

pub fn energy_from_accessory(p: &HeunRationalParams, lat: &Lattice) -> Result<C64> {
    let (a, b) = energy_map(p, lat)?;
    Ok(a * p.q + b)
}

/// Accessory parameter producing energy `energy`; `p.q` is ignored.
pub fn accessory_from_energy(p: &HeunRationalParams, energy: C64, lat: &Lattice) -> Result<C64> {
    let (a, b) = energy_map(p, lat)?;
    Ok((energy - b) / a)
}

/// `sum_k c_k (d/dx)^(n-k)`; the empty list is the zero operator.
#[derive(Debug, Clone)]
pub struct DiffOperator {
    coeffs: Vec<FieldExpr>,
    lat: LatticeRef,
}

impl DiffOperator {
    /// Leading zero coefficients are dropped.
    pub fn new(lat: &LatticeRef, coeffs: Vec<FieldExpr>) -> Result<Self> {
        for c in &coeffs {
            if !c.lattice().same_as(lat) {
                return Err(Error::LatticeMismatch);
            }
        }
        let first = coeffs.iter().position(|c| !c.is_zero()).unwrap_or(coeffs.len());
        Ok(DiffOperator {
            coeffs: coeffs[first..].to_vec(),
            lat: lat.clone(),
        })
    }

    pub fn zero(lat: &LatticeRef) -> Self {
        DiffOperator {
            coeffs: Vec::new(),
            lat: lat.clone(),
        }
    }

    pub fn identity(lat: &LatticeRef) -> Self {
        Self::multiplication(&FieldExpr::one(lat))
    }

    /// `d/dx`.
    pub fn derivative(lat: &LatticeRef) -> Self {
        DiffOperator {
            coeffs: vec![FieldExpr::one(lat), FieldExpr::zero(lat)],
            lat: lat.clone(),
        }
    }

    /// Multiplication by `f`.
    pub fn multiplication(f: &FieldExpr) -> Self {
        DiffOperator::new(f.lattice(), vec![f.clone()]).expect("single lattice")
    }

    pub fn lattice(&self) -> &LatticeRef {
        &self.lat
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.is_empty()
    }

    /// Order `n`; zero for the zero operator.
    pub fn order(&self) -> usize {
        self.coeffs.len().saturating_sub(1)
    }

    /// Coefficients `c_0..c_n` of `(d/dx)^n .. (d/dx)^0`.
    pub fn coeffs(&self) -> &[FieldExpr] {
        &self.coeffs
    }

    /// Coefficient of `(d/dx)^k`.
    pub fn coeff_of_power(&self, k: usize) -> FieldExpr {
        let n = self.order();
        if self.is_zero() || k > n {
            FieldExpr::zero(&self.lat)
        } else {
            self.coeffs[n - k].clone()
        }
    }

    pub fn is_monic(&self) -> bool {
        !self.is_zero() && self.coeffs[0].canonical_eq(&FieldExpr::one(&self.lat)).unwrap_or(false)
    }

    fn check(&self, other: &DiffOperator) -> Result<()> {
        if self.lat.same_as(&other.lat) {
            Ok(())
        } else {
            Err(Error::LatticeMismatch)
        }
    }

    pub fn add(&self, other: &DiffOperator) -> Result<DiffOperator> {
        self.check(other)?;
        let n = self.order().max(other.order());
        let coeffs = (0..=n)
            .rev()
            .map(|k| self.coeff_of_power(k) + other.coeff_of_power(k))
            .collect();
        DiffOperator::new(&self.lat, coeffs)
    }

    pub fn sub(&self, other: &DiffOperator) -> Result<DiffOperator> {
        self.add(&other.scale(C64::new(-1.0, 0.0)))
    }

    pub fn scale(&self, s: C64) -> DiffOperator {
        DiffOperator::new(&self.lat, self.coeffs.iter().map(|c| c.scale(s)).collect())
            .expect("single lattice")
    }

    /// Left multiplication by a function.
    pub fn left_mul(&self, f: &FieldExpr) -> Result<DiffOperator> {
        let coeffs = self
            .coeffs
            .iter()
            .map(|c| f.checked_mul(c))
            .collect::<Result<Vec<_>>>()?;
        DiffOperator::new(&self.lat, coeffs)
    }

    /// `self o other`, expanded by Leibniz: `D^p o b = sum_j C(p, j) b^(j) D^(p-j)`.
    pub fn compose(&self, other: &DiffOperator) -> Result<DiffOperator> {
        self.check(other)?;
        if self.is_zero() || other.is_zero() {
            return Ok(DiffOperator::zero(&self.lat));
        }
        let (na, nb) = (self.order(), other.order());
        let mut out: Vec<FieldExpr> = vec![FieldExpr::zero(&self.lat); na + nb + 1];
        // out[k] is the coefficient of D^k
        for (q, b) in (0..=nb).rev().zip(other.coeffs.iter()) {
            let mut deriv = b.clone();
            let mut derivs = Vec::with_capacity(na + 1);
            for j in 0..=na {
                if j > 0 {
                    deriv = deriv.differentiate();
                }
                derivs.push(deriv.clone());
            }
            for (p, a) in (0..=na).rev().zip(self.coeffs.iter()) {
                if a.is_zero() {
                    continue;
                }
                let mut binom = 1.0;
                for (j, bj) in derivs.iter().enumerate().take(p + 1) {
                    if j > 0 {
                        binom = binom * (p + 1 - j) as f64 / j as f64;
                    }
                    if bj.is_zero() {
                        continue;
                    }
                    let term = a.checked_mul(bj)?.scale_real(binom);
                    let k = p - j + q;
                    out[k] = out[k].checked_add(&term)?;
                }
            }
        }
        out.reverse();
        DiffOperator::new(&self.lat, out)
    }

    /// `[A, B] = A B - B A`.
    pub fn commutator(&self, other: &DiffOperator) -> Result<DiffOperator> {
        self.compose(other)?.sub(&other.compose(self)?)
    }

    /// Coefficient-wise canonical equality.
    pub fn canonical_eq(&self, other: &DiffOperator) -> Result<bool> {
        Ok(self.sub(other)?.is_zero())
    }

    /// Canonical equality with the randomized-evaluation fallback per coefficient.
    pub fn equals(&self, other: &DiffOperator) -> Result<bool> {
        self.check(other)?;
        let n = self.order().max(other.order());
        for k in 0..=n {
            if !self.coeff_of_power(k).equals(&other.coeff_of_power(k))? {
                return Ok(false);
            }
        }
        Ok(true)
    }

    /// Applies the operator to a field element.
    pub fn apply(&self, f: &FieldExpr) -> Result<FieldExpr> {
        let mut acc = FieldExpr::zero(&self.lat);
        let mut d = f.clone();
        for k in 0..=self.order() {
            if self.is_zero() {
                break;
            }
            if k > 0 {
                d = d.differentiate();
            }
            let c = self.coeff_of_power(k);
            if !c.is_zero() {
                acc = acc.checked_add(&c.checked_mul(&d)?)?;
            }
        }
        Ok(acc)
    }

    /// Applies the operator to an eigenfunction of `-D^2 + potential` with energy `energy`,
    /// returning `(A, B)` with `L f = A f + B f'`.
    pub fn apply_reduced(&self, potential: &FieldExpr, energy: C64) -> Result<(FieldExpr, FieldExpr)> {
        let red = reduce_derivatives(self.order(), potential, energy)?;
        let mut a = FieldExpr::zero(&self.lat);
        let mut b = FieldExpr::zero(&self.lat);
        if self.is_zero() {
            return Ok((a, b));
        }
        for (k, (ak, bk)) in red.iter().enumerate() {
            let c = self.coeff_of_power(k);
            if c.is_zero() {
                continue;
            }
            a = a.checked_add(&c.checked_mul(ak)?)?;
            b = b.checked_add(&c.checked_mul(bk)?)?;
        }
        Ok((a, b))
    }

    /// Value at `x` on a function with derivatives `derivs[k] = f^(k)(x)`, `k = 0..=order`.
    pub fn apply_numeric(&self, x: C64, derivs: &[C64]) -> Result<C64> {
        let v = self.lat.values(x)?;
        let mut acc = C64::new(0.0, 0.0);
        for k in 0..=self.order() {
            if self.is_zero() {
                break;
            }
            let c = self.coeff_of_power(k);
            if !c.is_zero() {
                acc += c.evaluate_at(&v)?.0 * derivs[k];
            }
        }
        Ok(acc)
    }

    /// Largest coefficient size, used to budget symbolic work.
    pub fn size(&self) -> usize {
        self.coeffs.iter().map(FieldExpr::size).sum()
    }
}

impl fmt::Display for DiffOperator {
    /// One block per derivative order, highest first.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_zero() {
            return write!(f, "0");
        }
        let n = self.order();
        for (i, c) in self.coeffs.iter().enumerate() {
            if i > 0 {
                writeln!(f)?;
            }
            writeln!(f, "D^{}:", n - i)?;
            for line in format!("{c}").lines() {
                write!(f, "  {line}")?;
                writeln!(f)?;
            }
        }
        Ok(())
    }
}

/// `wp(x + omega_i)` as a field element (`i` in `0..=3`).
pub fn shifted_wp(lat: &LatticeRef, i: usize) -> Result<FieldExpr> {
    let p = FieldExpr::wp(lat);
    if i == 0 {
        Ok(p)
    } else {
        p.shift_half_period(i)
    }
}

/// `V = sum_i l_i (l_i + 1) wp(x + omega_i)`.
pub fn potential(l: &CouplingVector, lat: &LatticeRef) -> Result<FieldExpr> {
    let mut v = FieldExpr::zero(lat);
    for (i, s) in l.strengths().iter().enumerate() {
        if *s != 0.0 {
            v = v.checked_add(&shifted_wp(lat, i)?.scale_real(*s))?;
        }
    }
    Ok(v)
}

/// Potential value at `x` from the shifted rational forms, well conditioned near every pole.
pub fn potential_value(l: &CouplingVector, lat: &Lattice, x: C64) -> Result<C64> {
    let p = lat.wp(x)?;
    Ok(potential_from_wp(l, lat, p))
}

pub fn potential_from_wp(l: &CouplingVector, lat: &Lattice, p: C64) -> C64 {
    let e = lat.e();
    let s = l.strengths();
    let mut v = C64::new(s[0], 0.0) * p;
    for i in 0..3 {
        if s[i + 1] != 0.0 {
            let (j, k) = crate::difffield::others(i);
            v += (e[i] + (e[i] - e[j]) * (e[i] - e[k]) / (p - e[i])) * s[i + 1];
        }
    }
    v
}

/// `H = -D^2 + V`.
pub fn hamiltonian(l: &CouplingVector, lat: &LatticeRef) -> Result<DiffOperator> {
    DiffOperator::new(
        lat,
        vec![FieldExpr::real(lat, -1.0), FieldExpr::zero(lat), potential(l, lat)?],
    )
}

/// Pairs `(a_k, b_k)` for `k = 0..=n` with `f^(k) = a_k f + b_k f'` on solutions of `f'' = (V - E) f`.
pub fn reduce_derivatives(n: usize, potential: &FieldExpr, energy: C64) -> Result<Vec<(FieldExpr, FieldExpr)>> {
    let lat = potential.lattice();
    let shifted = potential.checked_sub(&FieldExpr::constant(lat, energy))?;
    let mut out = vec![(FieldExpr::one(lat), FieldExpr::zero(lat))];
    for k in 0..n {
        let (a, b) = &out[k];
        let next_a = a.differentiate().checked_add(&b.checked_mul(&shifted)?)?;
        let next_b = a.checked_add(&b.differentiate())?;
        out.push((next_a, next_b));
    }
    Ok(out)
}

/// `(a_n, b_n)` for `H^(l)` at energy `energy`.
pub fn reduce_derivative(n: usize, l: &CouplingVector, energy: C64, lat: &LatticeRef) -> Result<(FieldExpr, FieldExpr)> {
    let v = potential(l, lat)?;
    Ok(reduce_derivatives(n, &v, energy)?.pop().expect("n+1 entries"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::sync::Arc;

    fn lat() -> LatticeRef {
        Arc::new(Lattice::from_half_periods(C64::new(0.5, 0.0), C64::new(0.2, 0.35)).unwrap())
    }

    fn c(re: f64) -> C64 {
        C64::new(re, 0.0)
    }

    #[test]
    fn free_and_lame_hamiltonians() {
        let l = lat();
        let h0 = hamiltonian(&CouplingVector([0.0; 4]), &l).unwrap();
        assert_eq!(h0.order(), 2);
        assert!(h0.coeff_of_power(0).is_zero());
        let h1 = hamiltonian(&CouplingVector([1.0, 0.0, 0.0, 0.0]), &l).unwrap();
        assert!(h1.coeff_of_power(0).canonical_eq(&FieldExpr::wp(&l).scale_real(2.0)).unwrap());
        assert!(h1.coeff_of_power(1).is_zero());
        assert!(h1.coeff_of_power(2).canonical_eq(&FieldExpr::real(&l, -1.0)).unwrap());
    }

    #[test]
    fn equivalent_couplings_give_identical_operators() {
        let l = lat();
        let a = hamiltonian(&CouplingVector([2.0, 0.5, -0.3, 1.0]), &l).unwrap();
        let b = hamiltonian(&CouplingVector([-3.0, -1.5, -0.7, -2.0]), &l).unwrap();
        assert!(a.canonical_eq(&b).unwrap());
    }

    #[test]
    fn leibniz_commutator_with_wp() {
        let l = lat();
        let d = DiffOperator::derivative(&l);
        let p = DiffOperator::multiplication(&FieldExpr::wp(&l));
        let comm = d.commutator(&p).unwrap();
        assert!(comm.canonical_eq(&DiffOperator::multiplication(&FieldExpr::wp_prime(&l))).unwrap());
    }

    #[test]
    fn commutator_with_itself_vanishes_and_orders_add() {
        let l = lat();
        let h = hamiltonian(&CouplingVector([2.0, 1.0, 0.0, 0.0]), &l).unwrap();
        assert!(h.commutator(&h).unwrap().is_zero());
        let d3 = DiffOperator::derivative(&l)
            .compose(&DiffOperator::derivative(&l))
            .unwrap()
            .compose(&DiffOperator::derivative(&l))
            .unwrap();
        assert_eq!(h.compose(&d3).unwrap().order(), 5);
    }

    #[test]
    fn low_order_reductions() {
        let l = lat();
        let cv = CouplingVector([1.0, 0.0, 2.0, 0.0]);
        let e = C64::new(0.7, 0.2);
        let v = potential(&cv, &l).unwrap();
        let red = reduce_derivatives(2, &v, e).unwrap();
        assert!(red[0].0.canonical_eq(&FieldExpr::one(&l)).unwrap() && red[0].1.is_zero());
        assert!(red[1].0.is_zero() && red[1].1.canonical_eq(&FieldExpr::one(&l)).unwrap());
        let vme = &v - &FieldExpr::constant(&l, e);
        assert!(red[2].0.canonical_eq(&vme).unwrap() && red[2].1.is_zero());
    }

    #[test]
    fn rational_couplings_examples() {
        let half = c(0.5);
        let p = HeunRationalParams::new(half, half, half, c(-0.5), c(1.0), c(0.1), c(2.0)).unwrap();
        let (l, _) = couplings_from_rational(&p).unwrap();
        assert_eq!(l.0, [1.0, 0.0, 0.0, 0.0]);
        let one = c(1.0);
        let p = HeunRationalParams::new(one, one, one, c(0.5), c(1.5), c(0.0), c(2.0)).unwrap();
        let (l, _) = couplings_from_rational(&p).unwrap();
        assert_eq!(l.0, [0.5, -0.5, -0.5, -0.5]);
        let back = rational_from_couplings(&l, p.q, p.t).unwrap();
        assert!((back.alpha - p.alpha).norm() < 1e-15 && (back.beta - p.beta).norm() < 1e-15);
    }

    #[test]
    fn fuchs_relation_enforced() {
        let r = HeunRationalParams::new(c(1.0), c(1.0), c(1.0), c(2.0), c(2.0), c(0.0), c(2.0));
        assert!(matches!(r, Err(Error::InvalidParams(_))));
    }

    #[test]
    fn normalization() {
        let l = CouplingVector([-2.0, 0.3, -0.7, -0.5]);
        assert_eq!(l.normalized().0, [1.0, 0.3, -0.30000000000000004, -0.5]);
        assert!(l.equivalent(&CouplingVector([1.0, 0.3, -0.3, -0.5])));
        assert_eq!("2, 0,0,0".parse::<CouplingVector>().unwrap().0, [2.0, 0.0, 0.0, 0.0]);
        assert!("1,2".parse::<CouplingVector>().is_err());
    }

    #[test]
    fn pretty_printer_lists_orders() {
        let l = lat();
        let h = hamiltonian(&CouplingVector([1.0, 0.0, 0.0, 0.0]), &l).unwrap();
        let text = format!("{h}");
        assert!(text.starts_with("D^2:"));
        assert!(text.contains("D^0:"));
    }
}
