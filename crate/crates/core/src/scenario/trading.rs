use serde::Serialize;

use super::{MarketScenario, Mode, Strategy};
use crate::market::{cone_decompose, liquidation_value, TradeVector};
use crate::scalar::Real;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NodeTrade<T> {
    pub node: u64,
    /// Witness of the holdings change at this node, when one exists.
    pub trade: Option<TradeVector<T>>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TradeViolation {
    /// The holdings change is not reachable at the node's prices.
    NotSelfFinancing { node: u64 },
    /// A position went negative in `no_short` mode.
    ShortPosition { node: u64, asset: usize, amount: f64 },
    /// The claimed payoff exceeds what the leaf holdings liquidate to.
    PayoffTooLarge { node: u64, payoff: f64, liquidation: f64 },
    NonPositivePayoff { node: u64, payoff: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TradeReport<T> {
    pub trades: Vec<NodeTrade<T>>,
    pub violations: Vec<TradeViolation>,
}

impl<T> TradeReport<T> {
    pub fn ok(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Checks `V_n - V_{n-} ∈ -K_n` at every node, the short-sale constraint,
/// and that leaf payoffs are covered by liquidating the final holdings.
pub fn check_self_financing<T: Real>(s: &MarketScenario<T>, strategy: &Strategy<T>, tol: T) -> TradeReport<T> {
    let tree = &s.tree;
    let mut trades = Vec::with_capacity(tree.len());
    let mut violations = Vec::new();
    for k in 0..tree.len() {
        let id = tree.id(k);
        let before = strategy.entering(s, k);
        let after = &strategy.holdings[k];
        let spent: Vec<T> = before.iter().zip(after).map(|(b, a)| *b - *a).collect();
        let trade = cone_decompose(s.matrix(k), &spent, tol);
        if trade.is_none() {
            violations.push(TradeViolation::NotSelfFinancing { node: id });
        }
        trades.push(NodeTrade { node: id, trade });
        if s.mode == Mode::NoShort {
            for (asset, v) in after.iter().enumerate() {
                if *v < -tol {
                    violations.push(TradeViolation::ShortPosition { node: id, asset, amount: v.as_f64() });
                }
            }
        }
        if tree.is_leaf(k) {
            let f = strategy.payoff[k];
            let lv = liquidation_value(s.matrix(k), after);
            if !(f > T::zero()) {
                violations.push(TradeViolation::NonPositivePayoff { node: id, payoff: f.as_f64() });
            }
            if f > lv + tol * (T::one() + lv.abs()) {
                violations.push(TradeViolation::PayoffTooLarge {
                    node: id,
                    payoff: f.as_f64(),
                    liquidation: lv.as_f64(),
                });
            }
        }
    }
    TradeReport { trades, violations }
}
