//! Darboux-Crum operators `L` of order `d + 1` with `H^(l~) L = L H^(l)`.
//!
//! `L` is the monic operator whose kernel is the invariant space
//! `span{ Phi wp^n }`; it has the factorized form
//! `wp'^(d+1) Phi ((1/wp') D)^(d+1) Phi^-1`.

use serde::Serialize;

use crate::difffield::{sample_points, FieldExpr};
use crate::elliptic::{LatticeRef, C64};
use crate::error::{Error, Result};
use crate::jet::{
    eval_derivative, potential_jet, series_derivative, series_mul, series_pow, series_recip, solution_jet, wp_jet,
};
use crate::operators::{hamiltonian, potential_value, CouplingVector, DiffOperator};
use crate::quasisolvable::{prefactor, QesSpace, SignChoice};

/// Couplings `l~_i = alpha_i + d`, brought to the normal form `l~_i >= -1/2`.
pub fn darboux_shift_target(l: &CouplingVector, sign: &SignChoice) -> CouplingVector {
    debug_assert!(SignChoice::new(l, sign.alpha).is_ok());
    CouplingVector::new(std::array::from_fn(|i| sign.alpha[i] + sign.d)).normalized()
}

fn order_of(sign: &SignChoice) -> Result<i64> {
    match sign.integer_d() {
        Some(d) if d >= -1 => Ok(d),
        _ => Err(Error::NonIntegerDimension { d: sign.d }),
    }
}

/// The factorized operator; `d = -1` gives the identity.
pub fn closed_form_l(l: &CouplingVector, sign: &SignChoice, lat: &LatticeRef) -> Result<DiffOperator> {
    let sign = SignChoice::new(l, sign.alpha)?;
    let d = order_of(&sign)?;
    if d == -1 {
        return Ok(DiffOperator::identity(lat));
    }
    let n = (d + 1) as usize;
    let phi = prefactor(&sign, lat)?;
    let wpp = FieldExpr::wp_prime(lat);
    let step = DiffOperator::multiplication(&wpp.invert()?).compose(&DiffOperator::derivative(lat))?;
    let mut op = DiffOperator::multiplication(&phi.invert()?);
    for _ in 0..n {
        op = step.compose(&op)?;
    }
    DiffOperator::multiplication(&wpp.pow(n as i64)?.checked_mul(&phi)?).compose(&op)
}

/// Monic annihilator of `span(basis)` by successive first-order factors: with
/// `u = L_m b_m`, the factor `D - u'/u` kills `b_m` and keeps the earlier kernel.
fn sequential_annihilator(lat: &LatticeRef, basis: &[FieldExpr]) -> Result<DiffOperator> {
    let mut op = DiffOperator::identity(lat);
    for (m, b) in basis.iter().enumerate() {
        let u = op.apply(b)?;
        if u.is_zero() {
            return Err(Error::SingularSystem(format!("basis element {m} lies in the span of the previous ones")));
        }
        let log_deriv = u.differentiate().checked_mul(&u.invert()?)?;
        let step = DiffOperator::new(lat, vec![FieldExpr::one(lat), -log_deriv])?;
        op = step.compose(&op)?;
    }
    Ok(op)
}

/// The monic operator annihilating the basis of `space`.
///
/// The common factor `Phi` is split off first, `ann(Phi U) = Phi ann(U) Phi^-1`, so the
/// recursion runs on polynomials in `wp` where every `u` is a monomial and no general
/// inversion is needed.
pub fn annihilator_l(space: &QesSpace) -> Result<DiffOperator> {
    let lat = &space.lat;
    let phi = prefactor(&space.sign, lat)?;
    let phi_inv = phi.invert()?;
    let reduced: Vec<FieldExpr> = space
        .basis
        .iter()
        .map(|b| b.checked_mul(&phi_inv))
        .collect::<Result<_>>()?;
    let inner = sequential_annihilator(lat, &reduced)?;
    DiffOperator::multiplication(&phi)
        .compose(&inner)?
        .compose(&DiffOperator::multiplication(&phi_inv))
}

/// `H~ L - L H` vanishes identically in the field.
pub fn symbolic_intertwining(
    source: &CouplingVector,
    target: &CouplingVector,
    op: &DiffOperator,
) -> Result<bool> {
    let lat = op.lattice();
    let h = hamiltonian(source, lat)?;
    let ht = hamiltonian(target, lat)?;
    let k = ht.compose(op)?.sub(&op.compose(&h)?)?;
    Ok(k.is_zero() || k.coeffs().iter().all(|c| c.is_zero()))
}

const JET_ORDER: usize = 24;

/// `|-(L f)'' + (V~ - E) L f|` over the size of its two terms, `1 + |f|` included so an
/// annihilated `f` gives an absolute residual.
fn relative_residual(second: C64, potential_term: C64, f: C64) -> f64 {
    (potential_term - second).norm() / (1.0 + f.norm() + second.norm() + potential_term.norm())
}

/// Pointwise intertwining check.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct NumericCheck {
    /// Largest [`relative_residual`] of `(H~ - E) L f`.
    pub residual: f64,
    /// Largest ratio of evaluation magnitude to value among the coefficients of `L` and
    /// their derivatives; digits lost to cancellation in the expanded coefficients.
    pub condition: f64,
}

/// Largest relative residual of `(H~ - E) L f` over both solutions of `(H - E) f = 0` at each point.
///
/// The identity is local, so the two solutions are fixed by the initial data `(1, 0)` and
/// `(0, 1)` at each point and expanded in Taylor jets there; `(L f)''` uses the
/// differentiated coefficients of `L`.
pub fn numeric_intertwining(
    source: &CouplingVector,
    target: &CouplingVector,
    op: &DiffOperator,
    energy: C64,
    points: &[C64],
) -> Result<NumericCheck> {
    let lat = op.lattice();
    let n = op.order();
    let coeffs: Vec<[FieldExpr; 3]> = (0..=n)
        .map(|k| {
            let c = op.coeff_of_power(k);
            let d1 = c.differentiate();
            let d2 = d1.differentiate();
            [c, d1, d2]
        })
        .collect();
    let mut worst = 0.0f64;
    let mut condition = 1.0f64;
    for &x in points {
        let mut w = potential_jet(source, lat, x, JET_ORDER.max(n + 3))?;
        w[0] -= energy;
        let vt = potential_value(target, lat, x)?;
        let vals = lat.values(x)?;
        let cv: Vec<[C64; 3]> = coeffs
            .iter()
            .map(|c| -> Result<[C64; 3]> {
                let mut out = [C64::new(0.0, 0.0); 3];
                for (o, e) in out.iter_mut().zip(c) {
                    let (v, m) = e.evaluate_at(&vals)?;
                    if v.norm() > 0.0 {
                        condition = condition.max(m / v.norm());
                    }
                    *o = v;
                }
                Ok(out)
            })
            .collect::<Result<_>>()?;
        let one = C64::new(1.0, 0.0);
        let nil = C64::new(0.0, 0.0);
        for (f0, f1) in [(one, nil), (nil, one)] {
            let f = solution_jet(&w, f0, f1);
            let df = |k: usize| eval_derivative(&f, k, C64::new(0.0, 0.0));
            let mut g = C64::new(0.0, 0.0);
            let mut g2 = C64::new(0.0, 0.0);
            for (k, c) in cv.iter().enumerate() {
                g += c[0] * df(k);
                g2 += c[2] * df(k) + c[1] * df(k + 1) * 2.0 + c[0] * df(k + 2);
            }
            worst = worst.max(relative_residual(g2, (vt - energy) * g, f[0]));
        }
    }
    Ok(NumericCheck {
        residual: worst,
        condition,
    })
}

/// Largest relative residual of `(H~ - E) L f` with `L` applied in its factorized form
/// `wp'^(d+1) Phi ((1/wp') D)^(d+1) Phi^-1` on Taylor jets.
///
/// Unlike [`numeric_intertwining`] no expanded coefficient is evaluated, so the check is
/// free of the cancellation those carry; the points must stay clear of half-periods.
pub fn factorized_intertwining(
    l: &CouplingVector,
    sign: &SignChoice,
    energy: C64,
    lat: &LatticeRef,
    points: &[C64],
) -> Result<f64> {
    let sign = SignChoice::new(l, sign.alpha)?;
    let n = (order_of(&sign)? + 1) as usize;
    let exps = sign.prefactor_exponents()?;
    let target = darboux_shift_target(l, &sign);
    let len = JET_ORDER.max(n + 4);
    let e = lat.e();
    let mut worst = 0.0f64;
    for &x in points {
        let vals = lat.values(x)?;
        let wp = wp_jet(vals.p, vals.dp, lat.g2(), len);
        let dwp = series_derivative(&wp);
        let mut phi = vec![C64::new(0.0, 0.0); len];
        phi[0] = C64::new(1.0, 0.0);
        for i in 0..3 {
            if exps[i] != 0 {
                let mut shifted = wp.clone();
                shifted[0] -= e[i];
                let factor = series_pow(&shifted, exps[i] as f64 / 2.0, vals.s[i].powi(exps[i] as i32));
                phi = series_mul(&phi, &factor);
            }
        }
        let phi_inv = series_recip(&phi);
        let dwp_inv = series_recip(&dwp);
        let mut w = potential_jet(l, lat, x, len)?;
        w[0] -= energy;
        let vt = potential_value(&target, lat, x)?;
        let one = C64::new(1.0, 0.0);
        let nil = C64::new(0.0, 0.0);
        for (f0, f1) in [(one, nil), (nil, one)] {
            let f = solution_jet(&w, f0, f1);
            let mut g = series_mul(&f, &phi_inv);
            for _ in 0..n {
                g = series_mul(&series_derivative(&g), &dwp_inv);
            }
            for _ in 0..n {
                g = series_mul(&g, &dwp);
            }
            g = series_mul(&g, &phi);
            worst = worst.max(relative_residual(g[2] * 2.0, (vt - energy) * g[0], f[0]));
        }
    }
    Ok(worst)
}

#[derive(Debug, Clone, Serialize)]
pub struct IntertwineReport {
    pub source: CouplingVector,
    pub target: CouplingVector,
    pub sign: SignChoice,
    pub order: usize,
    pub energy: C64,
    /// `H~ L = L H` holds as an identity of operators over the field.
    pub symbolic: bool,
    /// Largest pointwise residual on local solutions, `L` in factorized form.
    pub numeric_residual: f64,
    /// The same residual through the expanded coefficients of `L`.
    pub expanded_residual: f64,
    /// Cancellation factor of the expanded coefficients; bounds how far
    /// `expanded_residual` can sit above `numeric_residual`.
    pub evaluation_condition: f64,
    pub sample_points: Vec<C64>,
}

/// Builds `L` for `(l, sign)` and checks the intertwining symbolically and on
/// `sample_count` random points.
pub fn intertwine_residual(
    l: &CouplingVector,
    sign: &SignChoice,
    energy: C64,
    lat: &LatticeRef,
    sample_count: usize,
    seed: u64,
) -> Result<IntertwineReport> {
    let op = closed_form_l(l, sign, lat)?;
    let target = darboux_shift_target(l, sign);
    let symbolic = symbolic_intertwining(l, &target, &op)?;
    let points = sample_points(lat, sample_count, seed);
    let check = numeric_intertwining(l, &target, &op, energy, &points)?;
    let factorized = factorized_intertwining(l, sign, energy, lat, &points)?;
    Ok(IntertwineReport {
        source: *l,
        target,
        sign: *sign,
        order: op.order(),
        energy,
        symbolic,
        numeric_residual: factorized,
        expanded_residual: check.residual,
        evaluation_condition: check.condition,
        sample_points: points,
    })
}
