//! Utility maximization over self-financing strategies on the event tree.

mod brute;
mod ipm;
mod value;

use serde::Serialize;
use thiserror::Error;

use crate::market::{liquidation_value, TradeVector};
use crate::scalar::Real;
use crate::scenario::{MarketScenario, Strategy};

pub use brute::{brute_force_value, BRUTE_FORCE_MAX_NODES};
pub use value::{check_dpp, conditional_value, conditional_value_at, dpp_deviations};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SolveError {
    #[error("no strategy reaches a strictly positive terminal payoff")]
    Infeasible,
    #[error("iterates diverge; the market appears to admit arbitrage")]
    Unbounded,
    #[error("solver stopped after {iterations} iterations with gap {gap:e}")]
    NotConverged { iterations: usize, gap: f64 },
    #[error("brute force limited to d = 2, T <= 2 and at most {max_nodes} nodes")]
    TooLarge { max_nodes: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SolveOptions {
    /// Success requires a gap at most `tol_gap (1 + |J|)`.
    pub tol_gap: f64,
    /// Target of the inner iteration on residuals and gap.
    pub inner_tol: f64,
    pub max_iter: usize,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self { tol_gap: 1e-7, inner_tol: 1e-11, max_iter: 300 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveReport<T> {
    /// `J = E[U(f̂)]`.
    pub value: T,
    pub strategy: Strategy<T>,
    /// Trades performed at each node (leaf trades are the liquidation).
    pub trades: Vec<TradeVector<T>>,
    /// Multipliers on the holdings evolution, divided by node probability.
    pub node_duals: Vec<Vec<T>>,
    /// Marginal value of the endowment, an element of `∂J(x)`.
    pub superdifferential: Vec<T>,
    /// Complementarity gap `Σ w·z` of the final iterate.
    pub gap: T,
    /// `E[U*(Z¹_T)] + Z_0·x - J` evaluated at the node duals.
    pub polar_gap: T,
    pub iterations: usize,
}

pub fn solve<T: Real>(s: &MarketScenario<T>) -> Result<SolveReport<T>, SolveError> {
    solve_with(s, &SolveOptions::default())
}

pub fn solve_with<T: Real>(s: &MarketScenario<T>, opts: &SolveOptions) -> Result<SolveReport<T>, SolveError> {
    let scale = liquidation_value(s.matrix(s.tree.root()), &s.endowment);
    if !(scale > T::zero()) {
        return Err(SolveError::Infeasible);
    }
    let problem = ipm::Problem::new(s, scale);
    let inner = T::lit(opts.inner_tol).max(T::epsilon() * T::lit(100.0));
    let (it, iterations, m) = match problem.run(problem.initial(), opts.max_iter, inner) {
        ipm::Outcome::Converged { it, iterations, measures } => (it, iterations, measures),
        ipm::Outcome::Stalled { it, iterations, measures } => (it, iterations, measures),
        ipm::Outcome::Unbounded => return Err(SolveError::Unbounded),
    };
    let tol = T::lit(opts.tol_gap);
    let accepted = m.gap <= tol * (T::one() + m.objective.abs()) && m.primal <= tol && m.dual <= tol;
    if !accepted {
        return Err(SolveError::NotConverged { iterations, gap: m.gap.as_f64() });
    }
    Ok(report(s, &problem, it, iterations, m.gap))
}

fn report<T: Real>(
    s: &MarketScenario<T>,
    problem: &ipm::Problem<'_, T>,
    it: ipm::Iterate<T>,
    iterations: usize,
    gap: T,
) -> SolveReport<T> {
    let tree = &s.tree;
    let d = s.dim();
    let payoff: Vec<T> = (0..tree.len())
        .map(|k| if tree.is_leaf(k) { it.v[k][0] } else { T::zero() })
        .collect();
    let node_duals: Vec<Vec<T>> =
        (0..tree.len()).map(|k| it.y[k].iter().map(|y| *y / tree.prob(k)).collect()).collect();
    let trades = (0..tree.len())
        .map(|k| {
            let mut t = TradeVector::zero(d);
            for (p, &(i, j)) in problem.pairs.iter().enumerate() {
                t.buys[i][j] = it.u[k][p];
            }
            t
        })
        .collect();
    let value: T = tree.leaves().map(|k| tree.prob(k) * s.utility.value(payoff[k])).sum();
    let root = tree.root();
    let expected_conjugate: T = tree
        .leaves()
        .map(|k| tree.prob(k) * s.utility.conjugate(node_duals[k][0]).unwrap_or(T::infinity()))
        .sum();
    let budget: T = node_duals[root].iter().zip(&s.endowment).map(|(z, x)| *z * *x).sum();
    SolveReport {
        value,
        strategy: Strategy { holdings: it.v, payoff },
        trades,
        superdifferential: node_duals[root].clone(),
        node_duals,
        gap,
        polar_gap: expected_conjugate + budget - value,
        iterations,
    }
}
