//! Finite-dimensional spaces `span{ Phi(wp) wp^n : n = 0..=d }` preserved by `H^(l)`,
//! with `Phi = prod_i (wp - e_i)^(alpha_i/2)`, and their exactly computable eigenvalues.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::difffield::{sample_points, FieldExpr};
use crate::elliptic::{LatticeRef, C64};
use crate::error::{Error, Result};
use crate::operators::{hamiltonian, CouplingVector, DiffOperator};

const MATCH_TOL: f64 = 1e-12;

/// Exponents `alpha_i in {-l_i, l_i + 1}` and `d = -sum(alpha)/2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SignChoice {
    pub alpha: [f64; 4],
    pub d: f64,
}

impl SignChoice {
    /// Validates `alpha` against the couplings `l`.
    pub fn new(l: &CouplingVector, alpha: [f64; 4]) -> Result<Self> {
        for i in 0..4 {
            let li = l.0[i];
            let ok = (alpha[i] + li).abs() <= MATCH_TOL * (1.0 + li.abs())
                || (alpha[i] - li - 1.0).abs() <= MATCH_TOL * (1.0 + li.abs());
            if !ok {
                return Err(Error::UnsupportedSign(format!(
                    "alpha_{i} = {} is neither -l_{i} = {} nor l_{i} + 1 = {}",
                    alpha[i],
                    -li,
                    li + 1.0
                )));
            }
        }
        Ok(SignChoice {
            alpha,
            d: -alpha.iter().sum::<f64>() / 2.0,
        })
    }

    /// The 16 choices for `l`, bit `i` selecting `l_i + 1` over `-l_i`.
    pub fn all_for(l: &CouplingVector) -> Vec<SignChoice> {
        (0..16u32)
            .map(|mask| {
                let alpha = std::array::from_fn(|i| {
                    if mask & (1 << i) != 0 {
                        l.0[i] + 1.0
                    } else {
                        -l.0[i] + 0.0
                    }
                });
                SignChoice {
                    alpha,
                    d: -alpha.iter().sum::<f64>() / 2.0,
                }
            })
            .collect()
    }

    /// `d` when it is an integer.
    pub fn integer_d(&self) -> Option<i64> {
        let r = self.d.round();
        ((self.d - r).abs() < 1e-9).then_some(r as i64)
    }

    /// Stored `d` agrees with the exponents.
    pub fn is_consistent(&self) -> bool {
        (self.d + self.alpha.iter().sum::<f64>() / 2.0).abs() < 1e-12
    }

    /// Integer exponents `alpha_1..alpha_3` of the prefactor, if representable.
    pub fn prefactor_exponents(&self) -> Result<[i64; 3]> {
        let mut out = [0i64; 3];
        for i in 0..3 {
            let a = self.alpha[i + 1];
            if (a - a.round()).abs() > 1e-9 {
                return Err(Error::UnsupportedSign(format!(
                    "alpha_{} = {a} is not an integer; the prefactor (wp - e_{})^({a}/2) is outside the field",
                    i + 1,
                    i + 1
                )));
            }
            out[i] = a.round() as i64;
        }
        Ok(out)
    }
}

/// `prod_i (wp - e_i)^(alpha_i/2)` as a field element.
pub fn prefactor(sign: &SignChoice, lat: &LatticeRef) -> Result<FieldExpr> {
    Ok(FieldExpr::s_monomial(lat, sign.prefactor_exponents()?))
}

#[derive(Debug, Clone)]
pub struct QesSpace {
    pub l: CouplingVector,
    pub sign: SignChoice,
    pub d: usize,
    pub lat: LatticeRef,
    pub basis: Vec<FieldExpr>,
    /// Column `n` holds the coordinates of `H b_n`.
    pub h_matrix: DMatrix<C64>,
    pub invariance_residual: f64,
}

fn dimension(sign: &SignChoice) -> Result<usize> {
    match sign.integer_d() {
        Some(d) if d >= 0 => Ok(d as usize),
        _ => Err(Error::NonIntegerDimension { d: sign.d }),
    }
}

/// Builds the invariant space and the exact matrix of `H^(l)` on it.
pub fn build_space(l: &CouplingVector, sign: &SignChoice, lat: &LatticeRef) -> Result<QesSpace> {
    let sign = SignChoice::new(l, sign.alpha)?;
    let d = dimension(&sign)?;
    let phi = prefactor(&sign, lat)?;
    let phi_inv = phi.invert()?;
    let h = hamiltonian(l, lat)?;
    let mut basis = Vec::with_capacity(d + 1);
    let mut pn = FieldExpr::one(lat);
    for n in 0..=d {
        if n > 0 {
            pn = &pn * &FieldExpr::wp(lat);
        }
        basis.push(&phi * &pn);
    }
    let mut m = DMatrix::<C64>::zeros(d + 1, d + 1);
    for (n, b) in basis.iter().enumerate() {
        let hb = h.apply(b)?;
        let quotient = &hb * &phi_inv;
        let poly = if quotient.is_even() {
            quotient.term(0).as_polynomial()
        } else {
            None
        };
        match poly {
            Some(c) if c.len() <= d + 1 => {
                for (k, v) in c.iter().enumerate() {
                    m[(k, n)] = *v;
                }
            }
            _ => {
                return Err(Error::InvarianceViolation {
                    residual: f64::INFINITY,
                })
            }
        }
    }
    let mut space = QesSpace {
        l: *l,
        sign,
        d,
        lat: lat.clone(),
        basis,
        h_matrix: m,
        invariance_residual: 0.0,
    };
    space.invariance_residual = invariance_residual(&space, &h, &sample_points(lat, 12, 11))?;
    if space.invariance_residual > 1e-8 {
        return Err(Error::InvarianceViolation {
            residual: space.invariance_residual,
        });
    }
    Ok(space)
}

/// `max |H b_n - sum_m M_mn b_m| / (|H b_n| + sum |M_mn b_m|)` over sample points.
pub fn invariance_residual(space: &QesSpace, h: &DiffOperator, points: &[C64]) -> Result<f64> {
    let hb: Vec<FieldExpr> = space.basis.iter().map(|b| h.apply(b)).collect::<Result<_>>()?;
    let mut worst: f64 = 0.0;
    for &x in points {
        let v = space.lat.values(x)?;
        let bv: Vec<C64> = space
            .basis
            .iter()
            .map(|b| b.evaluate_at(&v).map(|r| r.0))
            .collect::<Result<_>>()?;
        for (n, hbn) in hb.iter().enumerate() {
            let lhs = hbn.evaluate_at(&v)?.0;
            let mut rhs = C64::new(0.0, 0.0);
            let mut scale = lhs.norm();
            for (mi, b) in bv.iter().enumerate() {
                let t = space.h_matrix[(mi, n)] * b;
                rhs += t;
                scale += t.norm();
            }
            worst = worst.max((lhs - rhs).norm() / scale.max(f64::MIN_POSITIVE));
        }
    }
    Ok(worst)
}

/// Least-squares fit of the matrix of `H` from point values, a cross-check of the exact matrix.
pub fn pointwise_h_matrix(space: &QesSpace, points: &[C64]) -> Result<DMatrix<C64>> {
    let h = hamiltonian(&space.l, &space.lat)?;
    let n = space.basis.len();
    let hb: Vec<FieldExpr> = space.basis.iter().map(|b| h.apply(b)).collect::<Result<_>>()?;
    let mut a = DMatrix::<C64>::zeros(points.len(), n);
    let mut rhs = DMatrix::<C64>::zeros(points.len(), n);
    for (j, &x) in points.iter().enumerate() {
        let v = space.lat.values(x)?;
        for k in 0..n {
            a[(j, k)] = space.basis[k].evaluate_at(&v)?.0;
            rhs[(j, k)] = hb[k].evaluate_at(&v)?.0;
        }
    }
    let svd = a.svd(true, true);
    svd.solve(&rhs, 1e-14)
        .map_err(|e| Error::SingularSystem(e.to_string()))
}

#[derive(Debug, Clone, Serialize)]
pub struct EigenCluster {
    pub value: C64,
    pub algebraic: usize,
    pub geometric: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct QesSpectrum {
    pub eigenvalues: Vec<C64>,
    /// Relative residual of `(H - E) f` for the eigenfunction of each eigenvalue.
    pub residuals: Vec<f64>,
    pub clusters: Vec<EigenCluster>,
}

impl QesSpectrum {
    pub fn is_defective(&self) -> bool {
        self.clusters.iter().any(|c| c.geometric < c.algebraic)
    }
}

fn null_vector(m: &DMatrix<C64>) -> (DVector<C64>, usize) {
    let n = m.nrows();
    let svd = m.clone().svd(true, true);
    let sv = &svd.singular_values;
    let scale = sv.iter().cloned().fold(0.0, f64::max).max(1.0);
    let rank = sv.iter().filter(|s| **s > 1e-9 * scale).count();
    let imin = (0..sv.len())
        .min_by(|a, b| sv[*a].partial_cmp(&sv[*b]).expect("finite"))
        .expect("nonempty");
    let vt = svd.v_t.expect("requested");
    let v = DVector::from_iterator(n, (0..n).map(|j| vt[(imin, j)].conj()));
    (v, n - rank)
}

/// Eigenvalues of the matrix of `H`, each certified by the residual of its eigenfunction.
pub fn qes_eigenvalues(space: &QesSpace) -> Result<QesSpectrum> {
    let m = &space.h_matrix;
    let n = m.nrows();
    let eig = m
        .clone()
        .schur()
        .eigenvalues()
        .ok_or_else(|| Error::SingularSystem("Schur decomposition failed".into()))?;
    let mut eigenvalues: Vec<C64> = eig.iter().cloned().collect();
    eigenvalues.sort_by(|a, b| a.re.partial_cmp(&b.re).unwrap().then(a.im.partial_cmp(&b.im).unwrap()));
    let h = hamiltonian(&space.l, &space.lat)?;
    let points = sample_points(&space.lat, 10, 23);
    let scale = m.iter().map(|v| v.norm()).fold(0.0, f64::max).max(1.0);
    let mut residuals = Vec::with_capacity(n);
    let mut clusters: Vec<EigenCluster> = Vec::new();
    for &ev in &eigenvalues {
        let shifted = m - DMatrix::<C64>::identity(n, n) * ev;
        let (v, nullity) = null_vector(&shifted);
        let mut f = FieldExpr::zero(&space.lat);
        for (k, b) in space.basis.iter().enumerate() {
            f = &f + &b.scale(v[k]);
        }
        let hf = h.apply(&f)?;
        let mut worst: f64 = 0.0;
        for &x in &points {
            let val = space.lat.values(x)?;
            let fv = f.evaluate_at(&val)?.0;
            let hv = hf.evaluate_at(&val)?.0;
            worst = worst.max((hv - ev * fv).norm() / (hv.norm() + (ev * fv).norm()).max(f64::MIN_POSITIVE));
        }
        residuals.push(worst);
        match clusters.iter_mut().find(|c| (c.value - ev).norm() <= 1e-8 * scale) {
            Some(c) => c.algebraic += 1,
            None => clusters.push(EigenCluster {
                value: ev,
                algebraic: 1,
                geometric: nullity.max(1),
            }),
        }
    }
    Ok(QesSpectrum {
        eigenvalues,
        residuals,
        clusters,
    })
}
