//! Odd-order operators commuting with `H^(l)` for integer couplings, built as products of
//! Darboux-Crum operators along a chain of sign choices that returns to `l`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::darboux::{closed_form_l, darboux_shift_target, numeric_intertwining};
use crate::difffield::sample_points;
use crate::elliptic::{LatticeRef, C64};
use crate::error::{Error, Result};
use crate::operators::{hamiltonian, CouplingVector, DiffOperator};
use crate::quasisolvable::SignChoice;

/// Symbolic commutators are attempted only below this operator size.
pub const SYMBOLIC_BUDGET: usize = 4000;
pub const NUMERIC_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ChainStep {
    pub source: CouplingVector,
    pub sign: SignChoice,
    pub target: CouplingVector,
    /// `d + 1`; zero for the identity step `d = -1`.
    pub order: usize,
}

fn check_integer(l: &CouplingVector) -> Result<()> {
    if !l.is_integer() {
        return Err(Error::InvalidCoupling(format!("couplings {:?} are not all integers", l.0)));
    }
    Ok(())
}

fn step(current: &CouplingVector, alpha: [f64; 4]) -> Result<ChainStep> {
    let sign = SignChoice::new(current, alpha).map_err(|e| Error::InadmissibleChain(e.to_string()))?;
    let d = match sign.integer_d() {
        Some(d) if d >= -1 => d,
        _ => {
            return Err(Error::InadmissibleChain(format!(
                "alpha = {alpha:?} gives d = {}, need an integer >= -1",
                sign.d
            )))
        }
    };
    Ok(ChainStep {
        source: *current,
        sign,
        target: darboux_shift_target(current, &sign),
        order: (d + 1) as usize,
    })
}

/// Validates a chain of exponent vectors starting at `l` and returning to it.
pub fn chain_steps(l: &CouplingVector, chain: &[[f64; 4]]) -> Result<Vec<ChainStep>> {
    check_integer(l)?;
    let mut current = l.normalized();
    let mut out = Vec::with_capacity(chain.len());
    for (j, alpha) in chain.iter().enumerate() {
        let s = step(&current, *alpha).map_err(|e| Error::InadmissibleChain(format!("step {}: {e}", j + 1)))?;
        current = s.target;
        out.push(s);
    }
    if !current.equivalent(l) {
        return Err(Error::InadmissibleChain(format!(
            "chain ends at {:?}, not at {:?}",
            current.0,
            l.normalized().0
        )));
    }
    Ok(out)
}

/// `A = L_n ... L_1` for the chain `alpha_1, ..., alpha_n` (applied first to last).
pub fn commuting_operator_chain(l: &CouplingVector, chain: &[[f64; 4]], lat: &LatticeRef) -> Result<DiffOperator> {
    let steps = chain_steps(l, chain)?;
    let mut op = DiffOperator::identity(lat);
    for s in &steps {
        op = closed_form_l(&s.source, &s.sign, lat)?.compose(&op)?;
    }
    debug_assert_eq!(op.order(), steps.iter().map(|s| s.order).sum::<usize>());
    Ok(op)
}

#[derive(Debug, Clone, Serialize)]
pub struct CommutationCertificate {
    pub order: usize,
    /// `Some(true)` when `[A, H]` is the zero operator in canonical form; `None` when skipped.
    pub symbolic: Option<bool>,
    pub energies: Vec<C64>,
    /// Largest relative residual of `(H - E) A f` over solutions of `(H - E) f = 0`.
    pub numeric_residual: f64,
    pub passed: bool,
}

/// Random energies in `[-5, 5] x [-2, 2] i`.
pub fn random_energies(n: usize, seed: u64) -> Vec<C64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| C64::new(rng.gen_range(-5.0..5.0), rng.gen_range(-2.0..2.0)))
        .collect()
}

/// Checks `[A, H^(l)] = 0`, symbolically when `A` is small enough and numerically at
/// five random energies. On a solution `f` of `(H - E) f = 0`, `[A, H] f = -(H - E) A f`.
pub fn certify_commutation(l: &CouplingVector, op: &DiffOperator, seed: u64) -> Result<CommutationCertificate> {
    let lat = op.lattice();
    let symbolic = if op.size() <= SYMBOLIC_BUDGET {
        let h = hamiltonian(l, lat)?;
        let k = op.commutator(&h)?;
        Some(k.is_zero() || k.coeffs().iter().all(|c| c.is_zero()))
    } else {
        None
    };
    let energies = random_energies(5, seed);
    let points = sample_points(lat, 4, seed.wrapping_add(1));
    let mut worst = 0.0f64;
    for &e in &energies {
        worst = worst.max(numeric_intertwining(l, l, op, e, &points)?.residual);
    }
    Ok(CommutationCertificate {
        order: op.order(),
        symbolic,
        energies,
        numeric_residual: worst,
        passed: symbolic == Some(true) || worst <= NUMERIC_TOL,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FoundChain {
    pub alphas: Vec<[f64; 4]>,
    pub orders: Vec<usize>,
    pub total_order: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct ChainSearch {
    pub l: CouplingVector,
    pub steps: usize,
    /// Closing chains of odd total order, in lexicographic order of sign masks.
    pub chains: Vec<FoundChain>,
    /// Closing chains of even total order, which are left out.
    pub even_closures: usize,
}

fn extend(current: &CouplingVector, prefix: Vec<ChainStep>, left: usize, l: &CouplingVector, out: &mut Vec<Vec<ChainStep>>) {
    if left == 0 {
        if current.equivalent(l) {
            out.push(prefix);
        }
        return;
    }
    for sign in SignChoice::all_for(current) {
        if let Ok(s) = step(current, sign.alpha) {
            let mut next = prefix.clone();
            next.push(s);
            extend(&s.target, next, left - 1, l, out);
        }
    }
}

/// All chains of exactly `steps` sign choices (identity steps `d = -1` included) from `l`
/// back to `l`. The first step is searched in parallel; order is deterministic.
pub fn chain_search(l: &CouplingVector, steps: usize) -> Result<ChainSearch> {
    check_integer(l)?;
    let start = l.normalized();
    let found: Vec<Vec<ChainStep>> = if steps == 0 {
        Vec::new()
    } else {
        SignChoice::all_for(&start)
            .par_iter()
            .map(|sign| {
                let mut out = Vec::new();
                if let Ok(s) = step(&start, sign.alpha) {
                    extend(&s.target, vec![s], steps - 1, l, &mut out);
                }
                out
            })
            .collect::<Vec<_>>()
            .into_iter()
            .flatten()
            .collect()
    };
    let mut chains = Vec::new();
    let mut even = 0;
    for c in found {
        let orders: Vec<usize> = c.iter().map(|s| s.order).collect();
        let total: usize = orders.iter().sum();
        if total % 2 == 1 {
            chains.push(FoundChain {
                alphas: c.iter().map(|s| s.sign.alpha).collect(),
                orders,
                total_order: total,
            });
        } else {
            even += 1;
        }
    }
    Ok(ChainSearch {
        l: start,
        steps,
        chains,
        even_closures: even,
    })
}
