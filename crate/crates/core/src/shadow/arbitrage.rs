//! Arbitrage in a frictionless market on the tree, decided by linear programs.

use serde::Serialize;

use super::MARGIN_TOL;
use crate::lp::{LinearProgram, LpStatus, Relation};
use crate::scalar::Real;
use crate::scenario::{MarketScenario, Mode};

/// Self-financing strategy started from zero wealth.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ArbitrageStrategy<T> {
    /// Holdings after trading at each node, asset 1 as cash.
    pub holdings: Vec<Vec<T>>,
    /// Wealth `W_n` at each node in units of asset 1.
    pub wealth: Vec<T>,
    /// `E[W_T]`.
    pub expected_gain: T,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "outcome", rename_all = "snake_case")]
pub enum ArbitrageOutcome<T> {
    /// Density `Q(n)/P(n)` per node, with minimal leaf density `delta`.
    NoArbitrage { density: Vec<T>, delta: T },
    Arbitrage(ArbitrageStrategy<T>),
    /// No density is bounded away from zero, yet no strategy gains.
    Boundary { delta: T },
}

/// `price[k]` is the price vector at storage index `k` with `price[k][0] = 1`;
/// the first component is not read.
pub fn detect_arbitrage<T: Real>(s: &MarketScenario<T>, price: &[Vec<T>], mode: Mode) -> ArbitrageOutcome<T> {
    let tree = &s.tree;
    let leaves: Vec<usize> = tree.leaves().collect();
    let mut leaf_col = vec![usize::MAX; tree.len()];
    for (c, &l) in leaves.iter().enumerate() {
        leaf_col[l] = c;
    }
    let below: Vec<Vec<usize>> = (0..tree.len())
        .map(|k| tree.subtree(k).into_iter().filter(|&n| tree.is_leaf(n)).map(|n| leaf_col[n]).collect())
        .collect();

    let delta = match max_min_density(s, price, mode, &leaves, &below) {
        Some((density, delta)) if delta > T::lit(MARGIN_TOL) => {
            return ArbitrageOutcome::NoArbitrage { density, delta };
        }
        Some((_, delta)) => delta,
        None => T::zero(),
    };
    match best_gain(s, price, mode, &leaves) {
        Some(strategy) => ArbitrageOutcome::Arbitrage(strategy),
        None => ArbitrageOutcome::Boundary { delta },
    }
}

fn max_min_density<T: Real>(
    s: &MarketScenario<T>,
    price: &[Vec<T>],
    mode: Mode,
    leaves: &[usize],
    below: &[Vec<usize>],
) -> Option<(Vec<T>, T)> {
    let tree = &s.tree;
    let delta = leaves.len();
    let mut lp = LinearProgram::new(delta + 1);
    lp.set_objective(delta, T::one());
    lp.add((0..delta).map(|c| (c, T::one())).collect(), Relation::Eq, T::one());
    for (c, &l) in leaves.iter().enumerate() {
        lp.add(vec![(c, T::one()), (delta, -tree.prob(l))], Relation::Ge, T::zero());
    }
    let rel = match mode {
        Mode::Unconstrained => Relation::Eq,
        Mode::NoShort => Relation::Ge,
    };
    for k in tree.internal() {
        for a in 1..s.dim() {
            // S_n Q(n) - sum_c S_c Q(c), written over the leaves
            let mut coeffs: Vec<(usize, T)> = below[k].iter().map(|&c| (c, price[k][a])).collect();
            for &ch in tree.children(k) {
                coeffs.extend(below[ch].iter().map(|&c| (c, -price[ch][a])));
            }
            lp.add(coeffs, rel, T::zero());
        }
    }
    let sol = lp.solve();
    if sol.status != LpStatus::Optimal {
        return None;
    }
    let density = (0..tree.len())
        .map(|k| below[k].iter().map(|&c| sol.x[c]).sum::<T>() / tree.prob(k))
        .collect();
    Some((density, sol.objective))
}

/// Maximize `E[G]` over leaf gains `0 ≤ G ≤ W_T` with `E[G] ≤ 1`.
fn best_gain<T: Real>(s: &MarketScenario<T>, price: &[Vec<T>], mode: Mode, leaves: &[usize]) -> Option<ArbitrageStrategy<T>> {
    let tree = &s.tree;
    let r = s.dim() - 1;
    let mut hcol = vec![usize::MAX; tree.len()];
    let mut n_vars = 0;
    for k in tree.internal() {
        hcol[k] = n_vars;
        n_vars += r;
    }
    let gcol = n_vars;
    let mut lp = LinearProgram::new(gcol + leaves.len());
    for k in tree.internal() {
        for a in 0..r {
            if mode == Mode::Unconstrained {
                lp.set_free(hcol[k] + a);
            }
        }
    }
    let mut budget = Vec::new();
    for (c, &l) in leaves.iter().enumerate() {
        lp.set_objective(gcol + c, tree.prob(l));
        budget.push((gcol + c, tree.prob(l)));
        let mut coeffs = vec![(gcol + c, -T::one())];
        let mut n = l;
        while let Some(p) = tree.parent(n) {
            for a in 0..r {
                coeffs.push((hcol[p] + a, price[n][a + 1] - price[p][a + 1]));
            }
            n = p;
        }
        lp.add(coeffs, Relation::Ge, T::zero());
    }
    lp.add(budget, Relation::Le, T::one());
    let sol = lp.solve();
    if sol.status != LpStatus::Optimal || sol.objective <= T::lit(MARGIN_TOL) {
        return None;
    }

    let mut wealth = vec![T::zero(); tree.len()];
    let mut holdings = vec![vec![T::zero(); s.dim()]; tree.len()];
    for k in 0..tree.len() {
        if let Some(p) = tree.parent(k) {
            let gain: T = (0..r).map(|a| sol.x[hcol[p] + a] * (price[k][a + 1] - price[p][a + 1])).sum();
            wealth[k] = wealth[p] + gain;
        }
        if tree.is_leaf(k) {
            holdings[k][0] = wealth[k];
            continue;
        }
        let mut cash = wealth[k];
        for a in 0..r {
            let h = sol.x[hcol[k] + a];
            holdings[k][a + 1] = h;
            cash = cash - h * price[k][a + 1];
        }
        holdings[k][0] = cash;
    }
    let expected_gain = leaves.iter().map(|&l| tree.prob(l) * wealth[l]).sum();
    Some(ArbitrageStrategy { holdings, wealth, expected_gain })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::market::BidAskMatrix;
    use crate::scenario::{EventTree, TreeNode};
    use crate::utility::UtilitySpec;

    fn scenario(nodes: Vec<TreeNode<f64>>, mode: Mode) -> MarketScenario<f64> {
        let n = nodes.len();
        let tree = EventTree::new(nodes).unwrap();
        let m = BidAskMatrix::frictionless(&[1.0, 1.0]).unwrap();
        MarketScenario::new(tree, vec![m; n], vec![1.0, 0.0], UtilitySpec::log(), mode).unwrap()
    }

    fn falling(mode: Mode) -> (MarketScenario<f64>, Vec<Vec<f64>>) {
        let s = scenario(
            vec![
                TreeNode { id: 0, time: 0, parent: None, prob: 1.0 },
                TreeNode { id: 1, time: 1, parent: Some(0), prob: 1.0 },
            ],
            mode,
        );
        (s, vec![vec![1.0, 3.0], vec![1.0, 2.0]])
    }

    #[test]
    fn falling_price_is_an_arbitrage_when_shorting() {
        let (s, price) = falling(Mode::Unconstrained);
        match detect_arbitrage(&s, &price, Mode::Unconstrained) {
            ArbitrageOutcome::Arbitrage(a) => {
                assert!(a.holdings[0][1] < 0.0);
                assert!(a.wealth[1] > 0.0 && a.wealth[0] == 0.0);
                // shorting one unit earns exactly one
                let per_unit = a.wealth[1] / -a.holdings[0][1];
                assert!((per_unit - 1.0).abs() < 1e-12);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn falling_price_is_fine_without_shorting() {
        let (s, price) = falling(Mode::NoShort);
        assert!(matches!(detect_arbitrage(&s, &price, Mode::NoShort), ArbitrageOutcome::NoArbitrage { .. }));
    }

    #[test]
    fn symmetric_binomial_has_uniform_density() {
        let s = scenario(
            vec![
                TreeNode { id: 0, time: 0, parent: None, prob: 1.0 },
                TreeNode { id: 1, time: 1, parent: Some(0), prob: 0.5 },
                TreeNode { id: 2, time: 1, parent: Some(0), prob: 0.5 },
            ],
            Mode::Unconstrained,
        );
        let price = vec![vec![1.0, 2.0], vec![1.0, 3.0], vec![1.0, 1.0]];
        match detect_arbitrage(&s, &price, Mode::Unconstrained) {
            ArbitrageOutcome::NoArbitrage { density, delta } => {
                assert!((delta - 1.0).abs() < 1e-12);
                assert!(density.iter().all(|q| (q - 1.0).abs() < 1e-12), "{density:?}");
            }
            other => panic!("{other:?}"),
        }
    }
}
