//! Exhaustive grid search over risky positions for tiny two-asset trees.
//! Used as an oracle for the interior point solver, so it shares none of
//! its machinery.

use super::SolveError;
use crate::market::BidAskMatrix;
use crate::scalar::Real;
use crate::scenario::MarketScenario;

pub const BRUTE_FORCE_MAX_NODES: usize = 16;

struct Search<'a, T> {
    s: &'a MarketScenario<T>,
    lattice: Vec<T>,
    no_short: bool,
}

/// Cash left after moving the risky position from `b` to `h` at `m`'s prices.
fn rebalance<T: Real>(m: &BidAskMatrix<T>, a: T, b: T, h: T) -> T {
    if h >= b {
        a - m.get(0, 1) * (h - b)
    } else {
        a + (b - h) / m.get(1, 0)
    }
}

fn liquidate<T: Real>(m: &BidAskMatrix<T>, a: T, b: T) -> T {
    rebalance(m, a, b, T::zero())
}

impl<'a, T: Real> Search<'a, T> {
    fn value(&self, k: usize, a: T, b: T) -> T {
        let tree = &self.s.tree;
        let m = self.s.matrix(k);
        if tree.is_leaf(k) {
            let f = liquidate(m, a, b);
            return if f > T::zero() { self.s.utility.value(f) } else { T::neg_infinity() };
        }
        let mut best = T::neg_infinity();
        for &h in &self.lattice {
            best = best.max(self.after_trade(k, rebalance(m, a, b, h), h));
        }
        best
    }

    fn after_trade(&self, k: usize, a: T, h: T) -> T {
        if self.no_short && a < T::zero() {
            return T::neg_infinity();
        }
        let tree = &self.s.tree;
        let mut total = T::zero();
        for &c in tree.children(k) {
            let v = self.value(c, a, h);
            if v == T::neg_infinity() {
                return v;
            }
            total = total + tree.cond_prob(c) * v;
        }
        total
    }
}

/// Best expected utility over strategies whose risky position after each
/// trade lies on the lattice `x² + grid·ℤ` inside a box scaled by the
/// endowment's liquidation value. Leaves liquidate. Without short sales cash
/// must stay nonnegative too.
pub fn brute_force_value<T: Real>(s: &MarketScenario<T>, grid: T) -> Result<T, SolveError> {
    let tree = &s.tree;
    if s.dim() != 2 || tree.horizon() > 2 || tree.len() > BRUTE_FORCE_MAX_NODES {
        return Err(SolveError::TooLarge { max_nodes: BRUTE_FORCE_MAX_NODES });
    }
    assert!(grid > T::zero(), "grid step must be positive");
    let root = tree.root();
    let (x1, x2) = (s.endowment[0], s.endowment[1]);
    let w0 = liquidate(s.matrix(root), x1, x2);
    if !(w0 > T::zero()) {
        return Err(SolveError::Infeasible);
    }
    let units = (0..tree.len()).fold(T::zero(), |acc, k| acc.max(s.matrix(k).get(1, 0)));
    let half_width = T::lit(2.0) * w0 * units + x2.abs();
    let lo = ((-half_width - x2) / grid).ceil().to_i64().expect("finite box");
    let hi = ((half_width - x2) / grid).floor().to_i64().expect("finite box");
    let mut lattice: Vec<T> = (lo..=hi).map(|k| x2 + T::lit(k as f64) * grid).collect();
    let no_short = s.mode == crate::scenario::Mode::NoShort;
    if no_short {
        lattice.retain(|h| *h >= T::zero());
    }
    let search = Search { s, lattice, no_short };
    if tree.is_leaf(root) {
        return Ok(search.value(root, x1, x2));
    }

    // split the root decision across threads
    let m = s.matrix(root);
    let workers = std::thread::available_parallelism().map_or(1, |n| n.get()).min(16);
    let chunk = search.lattice.len().div_ceil(workers).max(1);
    let best = std::thread::scope(|scope| {
        let handles: Vec<_> = search
            .lattice
            .chunks(chunk)
            .map(|part| {
                let search = &search;
                scope.spawn(move || {
                    part.iter().fold(T::neg_infinity(), |acc, &h| {
                        acc.max(search.after_trade(root, rebalance(m, x1, x2, h), h))
                    })
                })
            })
            .collect();
        handles.into_iter().map(|h| h.join().expect("worker")).fold(T::neg_infinity(), |a, b| a.max(b))
    });
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::{build_counterexample, EventTree, Mode, TreeNode};
    use crate::utility::UtilitySpec;

    #[test]
    fn frictionless_binomial_matches_merton() {
        // S_0 = 1, S_1 in {1.5, 0.8} with p = 1/2: log-optimal fraction
        // (p u - (1-p) d) / (u d) with u = 0.5, d = 0.2, i.e. 1.5
        let tree = EventTree::new(vec![
            TreeNode { id: 0, time: 0, parent: None, prob: 1.0 },
            TreeNode { id: 1, time: 1, parent: Some(0), prob: 0.5 },
            TreeNode { id: 2, time: 1, parent: Some(0), prob: 0.5 },
        ])
        .unwrap();
        let m = |p: f64| BidAskMatrix::frictionless(&[1.0, p]).unwrap();
        let s = MarketScenario::new(tree, vec![m(1.0), m(1.5), m(0.8)], vec![1.0, 0.0], UtilitySpec::log(), Mode::Unconstrained)
            .unwrap();
        let frac: f64 = (0.5 * 0.5 - 0.5 * 0.2) / (0.5 * 0.2);
        let closed = 0.5 * (1.0 + 0.5 * frac).ln() + 0.5 * (1.0 - 0.2 * frac).ln();
        let b = brute_force_value(&s, 1e-3).unwrap();
        assert!((b - closed).abs() < 1e-5, "{b} vs {closed}");
    }

    #[test]
    fn constrained_counterexample_is_log_four() {
        let s = build_counterexample(10, 3, &[4.0, 0.0], Mode::NoShort, UtilitySpec::log()).unwrap();
        let b = brute_force_value(&s, 1e-3).unwrap();
        assert!((b - 4f64.ln()).abs() < 1e-9, "{b}");
    }

    #[test]
    fn guards_size() {
        let s = build_counterexample(10, 7, &[4.0, 0.0], Mode::NoShort, UtilitySpec::log()).unwrap();
        assert!(matches!(brute_force_value(&s, 1e-3), Err(SolveError::TooLarge { .. })));
    }
}
