//! Holdings deflated by a price system lose value in expectation.

use serde::Serialize;

use super::PriceSystem;
use crate::scalar::{dot, Real};
use crate::scenario::{MarketScenario, Strategy};

/// Absolute slack (scaled by `1 + |value|`) on the inequalities.
pub const DEFLATION_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DeflationReport {
    /// Nodes where the inequality fails beyond tolerance, with the excess.
    pub violations: Vec<(u64, f64)>,
    /// Largest signed excess; nonpositive when the inequality holds.
    pub max_excess: f64,
    /// Largest absolute deviation from equality, relative to `1 + |value|`.
    pub max_gap: f64,
}

impl DeflationReport {
    pub fn ok(&self) -> bool {
        self.violations.is_empty()
    }

    fn record(&mut self, node: u64, lhs: f64, rhs: f64) {
        let excess = (lhs - rhs) / (1.0 + rhs.abs());
        self.max_excess = self.max_excess.max(excess);
        self.max_gap = self.max_gap.max(excess.abs());
        if excess > DEFLATION_TOL {
            self.violations.push((node, excess));
        }
    }

    fn new() -> Self {
        Self { violations: Vec::new(), max_excess: f64::NEG_INFINITY, max_gap: 0.0 }
    }
}

/// `E[z_c·V_c | n] ≤ z_n·V_n` at every internal node, and `z_0·V_0 ≤ z_0·x`
/// at the root (recorded under the root id before the node rows).
pub fn check_supermartingale_deflation<T: Real>(s: &MarketScenario<T>, z: &PriceSystem<T>, v: &Strategy<T>) -> DeflationReport {
    let tree = &s.tree;
    let root = tree.root();
    let mut rep = DeflationReport::new();
    rep.record(tree.id(root), dot(&z.z[root], &v.holdings[root]).as_f64(), dot(&z.z[root], &s.endowment).as_f64());
    for k in tree.internal() {
        let here = dot(&z.z[k], &v.holdings[k]);
        let next: T = tree.children(k).iter().map(|&c| tree.cond_prob(c) * dot(&z.z[c], &v.holdings[c])).sum();
        rep.record(tree.id(k), next.as_f64(), here.as_f64());
    }
    rep
}

/// Frictionless wealth `W` in the prices `z/z¹`, started at `x·S_0` and
/// holding the risky positions of `v`, against the value `V_n·S_n`.
pub fn check_domination<T: Real>(s: &MarketScenario<T>, z: &PriceSystem<T>, v: &Strategy<T>) -> DeflationReport {
    let tree = &s.tree;
    let prices = z.prices();
    let mut wealth = vec![T::zero(); tree.len()];
    let mut rep = DeflationReport::new();
    for k in 0..tree.len() {
        wealth[k] = match tree.parent(k) {
            None => dot(&s.endowment, &prices[k]),
            Some(p) => {
                let gain: T = (1..s.dim()).map(|a| v.holdings[p][a] * (prices[k][a] - prices[p][a])).sum();
                wealth[p] + gain
            }
        };
        rep.record(tree.id(k), dot(&v.holdings[k], &prices[k]).as_f64(), wealth[k].as_f64());
    }
    rep
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::{build_counterexample, Mode};
    use crate::shadow::PriceKind;
    use crate::utility::UtilitySpec;

    fn remark() -> (MarketScenario<f64>, PriceSystem<f64>) {
        let s = build_counterexample(10, 4, &[4.0, 0.0], Mode::NoShort, UtilitySpec::log()).unwrap();
        let z = (0..s.tree.len()).map(|k| vec![1.0, [3.0, 2.0, 1.0][s.tree.time(k)]]).collect();
        (s, PriceSystem { z, kind: PriceKind::Supermartingale, strict_margin: 0.0 })
    }

    #[test]
    fn do_nothing_is_a_martingale_in_cash() {
        let (s, z) = remark();
        let rep = check_supermartingale_deflation(&s, &z, &Strategy::do_nothing(&s));
        assert!(rep.ok() && rep.max_gap < 1e-15, "{rep:?}");
    }

    #[test]
    fn holding_a_falling_asset_loses() {
        let (s, z) = remark();
        let mut v = Strategy::do_nothing(&s);
        // buy one unit at the ask 3, hold until the end, sell at the bid 1
        for k in 0..s.tree.len() {
            v.holdings[k] = if s.tree.is_leaf(k) { vec![2.0, 0.0] } else { vec![1.0, 1.0] };
        }
        v.payoff = (0..s.tree.len()).map(|k| if s.tree.is_leaf(k) { 2.0 } else { 0.0 }).collect();
        let rep = check_supermartingale_deflation(&s, &z, &v);
        assert!(rep.ok(), "{rep:?}");
        assert!(rep.max_gap > 0.2);
        assert!(check_domination(&s, &z, &v).ok());
    }
}
