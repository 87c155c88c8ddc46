//! Marginal value process `Ẑ` of the optimal holdings.
//!
//! At a leaf, one more unit of asset `i` is sold at the bid, so
//! `Ẑ^i = U'(f̂) / π^{i1}`. Going backwards, the marginal value at a node is
//! the smallest vector that dominates the children's average, makes no
//! exchange at the node profitable, and prices every asset bought there at
//! its ask (one unit less needs to be bought). This is the right derivative
//! of the conditional value function in the holdings entering the node,
//! and it is checked against finite differences of re-solved sub-problems.

use serde::Serialize;

use super::{pin_constraints, PriceKind, PriceSystem, ShadowError};
use crate::optimize::{conditional_value_at, SolveOptions, SolveReport};
use crate::scalar::Real;
use crate::scenario::{MarketScenario, Mode};

/// Finite-difference steps, largest first.
pub const FD_STEPS: [f64; 2] = [1e-4, 1e-5];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum CrossCheck {
    Off,
    Root,
    All,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ExtractOptions {
    pub cross_check: CrossCheck,
    /// Relative agreement required between dual and finite-difference values.
    pub rel_tol: f64,
    /// Trades above this size pin the price to the corresponding ask.
    pub pin_tol: f64,
    pub tol_gap: f64,
}

impl Default for ExtractOptions {
    fn default() -> Self {
        Self { cross_check: CrossCheck::All, rel_tol: 1e-3, pin_tol: super::DEFAULT_PIN_TOL, tol_gap: SolveOptions::default().tol_gap }
    }
}

pub fn extract_shadow<T: Real>(s: &MarketScenario<T>, r: &SolveReport<T>) -> Result<PriceSystem<T>, ShadowError> {
    extract_shadow_with(s, r, &ExtractOptions::default())
}

pub fn extract_shadow_with<T: Real>(
    s: &MarketScenario<T>,
    r: &SolveReport<T>,
    opts: &ExtractOptions,
) -> Result<PriceSystem<T>, ShadowError> {
    if s.mode != Mode::NoShort {
        return Err(ShadowError::UnsupportedMode);
    }
    if !(r.gap <= T::lit(opts.tol_gap) * (T::one() + r.value.abs())) {
        return Err(ShadowError::NotOptimal { gap: r.gap.as_f64() });
    }
    let tree = &s.tree;
    let d = s.dim();
    let mut pinned = vec![vec![vec![false; d]; d]; tree.len()];
    for p in pin_constraints(s, r, T::lit(opts.pin_tol)).pins {
        let k = tree.index_of(p.node).expect("pins name tree nodes");
        pinned[k][p.i][p.j] = true;
    }
    let mut z: Vec<Vec<T>> = vec![Vec::new(); tree.len()];
    for k in (0..tree.len()).rev() {
        let m = s.matrix(k);
        if tree.is_leaf(k) {
            let mu = s.utility.d1(r.strategy.payoff[k]);
            z[k] = (0..d).map(|i| mu / m.get(i, 0)).collect();
            continue;
        }
        let mut zk = tree.conditional_expectation(&z, k).expect("internal node");
        let mut settled = false;
        for _ in 0..64 * d * d {
            let mut raised = false;
            for i in 0..d {
                for j in 0..d {
                    if i == j {
                        continue;
                    }
                    let pij = m.get(i, j);
                    // paying pi[i][j] units of i for one unit of j is never better than holding i
                    let target = zk[j] / pij;
                    raised |= raise(&mut zk[i], target);
                    if pinned[k][i][j] {
                        let target = pij * zk[i];
                        raised |= raise(&mut zk[j], target);
                    }
                }
            }
            if !raised {
                settled = true;
                break;
            }
        }
        if !settled {
            return Err(ShadowError::CrossCheckFailure { node: tree.id(k), asset: 0, dual: f64::NAN, fd: f64::NAN });
        }
        z[k] = zk;
    }

    let nodes: Vec<usize> = match opts.cross_check {
        CrossCheck::Off => vec![],
        CrossCheck::Root => vec![tree.root()],
        CrossCheck::All => (0..tree.len()).collect(),
    };
    for k in nodes {
        cross_check_node(s, r, &z, k, opts.rel_tol)?;
    }
    Ok(PriceSystem { z, kind: PriceKind::Supermartingale, strict_margin: T::zero() })
}

/// Raise `x` to `target` unless it is already there up to rounding.
fn raise<T: Real>(x: &mut T, target: T) -> bool {
    if target > *x * (T::one() + T::lit(1e-14)) {
        *x = target;
        true
    } else {
        false
    }
}

fn cross_check_node<T: Real>(
    s: &MarketScenario<T>,
    r: &SolveReport<T>,
    z: &[Vec<T>],
    k: usize,
    rel_tol: f64,
) -> Result<(), ShadowError> {
    let entering = r.strategy.entering(s, k).to_vec();
    let base = conditional_value_at(s, k, &entering)?;
    let rel = T::lit(rel_tol);
    for (asset, &dual) in z[k].iter().enumerate() {
        let mut quotients = Vec::with_capacity(FD_STEPS.len());
        for eps in FD_STEPS {
            let eps = T::lit(eps);
            let mut v = entering.clone();
            v[asset] = v[asset] + eps;
            quotients.push((conditional_value_at(s, k, &v)? - base) / eps);
        }
        let fd = *quotients.last().expect("nonempty schedule");
        // concavity: quotients grow as the step shrinks (up to solver noise)
        let monotone = quotients.windows(2).all(|w| w[0] <= w[1] + rel * w[1].abs());
        if !monotone || (fd - dual).abs() > rel * dual.abs() {
            return Err(ShadowError::CrossCheckFailure {
                node: s.tree.id(k),
                asset,
                dual: dual.as_f64(),
                fd: fd.as_f64(),
            });
        }
    }
    Ok(())
}
