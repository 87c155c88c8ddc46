//! Utility maximization in the frictionless market quoted by a price system.

use super::{detect_arbitrage, ArbitrageOutcome, PriceSystem};
use crate::market::BidAskMatrix;
use crate::optimize::{solve_with, SolveError, SolveOptions, SolveReport};
use crate::scalar::Real;
use crate::scenario::{MarketScenario, Mode};

/// `S^z = z / z¹` at every node.
pub fn shadow_prices<T: Real>(z: &PriceSystem<T>) -> Vec<Vec<T>> {
    z.prices()
}

/// Bid-ask matrices without spread, `π^{ij} = S^j / S^i`.
pub fn frictionless_matrices<T: Real>(z: &PriceSystem<T>) -> Result<Vec<BidAskMatrix<T>>, SolveError> {
    z.prices()
        .iter()
        .map(|p| BidAskMatrix::frictionless(p).map_err(|_| SolveError::Infeasible))
        .collect()
}

/// With short sales allowed, an arbitrage in `S^z` is reported as `Unbounded`
/// before any solve. Without them every position, cash included, stays
/// nonnegative and the problem is bounded.
pub fn frictionless_solve<T: Real>(s: &MarketScenario<T>, z: &PriceSystem<T>) -> Result<SolveReport<T>, SolveError> {
    frictionless_solve_with(s, z, &SolveOptions::default())
}

pub fn frictionless_solve_with<T: Real>(
    s: &MarketScenario<T>,
    z: &PriceSystem<T>,
    opts: &SolveOptions,
) -> Result<SolveReport<T>, SolveError> {
    let prices = z.prices();
    if s.mode == Mode::Unconstrained {
        if let ArbitrageOutcome::Arbitrage(_) = detect_arbitrage(s, &prices, s.mode) {
            return Err(SolveError::Unbounded);
        }
    }
    let m = frictionless_matrices(z)?;
    let fs = s.with_matrices(m).map_err(|_| SolveError::Infeasible)?;
    solve_with(&fs, opts)
}
