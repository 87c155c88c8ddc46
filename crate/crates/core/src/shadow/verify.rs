use serde::Serialize;

use super::{PriceKind, PriceSystem};
use crate::scalar::Real;
use crate::scenario::MarketScenario;

/// Relative slack on polar and (super)martingale inequalities.
pub const VERIFY_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PriceViolation {
    NotPositive { node: u64, asset: usize, value: f64 },
    OutsidePolar { node: u64, i: usize, j: usize, excess: f64 },
    Martingale { node: u64, asset: usize, residual: f64 },
    Supermartingale { node: u64, asset: usize, excess: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerificationReport {
    pub violations: Vec<PriceViolation>,
    pub strict_margin: f64,
    /// Some leg is frictionless, so `int K*` is empty and no margin is possible.
    pub interior_empty: bool,
}

impl VerificationReport {
    pub fn ok(&self) -> bool {
        self.violations.is_empty()
    }
}

pub fn verify_price_system<T: Real>(s: &MarketScenario<T>, z: &PriceSystem<T>) -> VerificationReport {
    let tree = &s.tree;
    let d = s.dim();
    let tol = T::lit(VERIFY_TOL);
    let mut violations = Vec::new();
    let mut margin = T::infinity();
    let mut interior_empty = false;
    for k in 0..tree.len() {
        let id = tree.id(k);
        let zk = &z.z[k];
        let m = s.matrix(k);
        let scale = zk.iter().fold(T::zero(), |a, v| a.max(v.abs()));
        for (asset, v) in zk.iter().enumerate() {
            if !(*v > T::zero()) {
                violations.push(PriceViolation::NotPositive { node: id, asset, value: v.as_f64() });
            }
        }
        for i in 0..d {
            for j in 0..d {
                if i == j {
                    continue;
                }
                let slack = m.get(i, j) * zk[i] - zk[j];
                if slack < -tol * scale {
                    violations.push(PriceViolation::OutsidePolar { node: id, i, j, excess: (-slack).as_f64() });
                }
                if m.frictionless_leg(i, j) {
                    interior_empty = true;
                } else if zk[i] > T::zero() {
                    margin = margin.min(slack / zk[i]);
                }
            }
        }
        if tree.is_leaf(k) {
            continue;
        }
        let expected = tree.conditional_expectation(&z.z, k).expect("internal node");
        for asset in 0..d {
            let diff = expected[asset] - zk[asset];
            let bound = tol * zk[asset].abs().max(expected[asset].abs());
            match z.kind {
                PriceKind::Martingale if diff.abs() > bound => {
                    violations.push(PriceViolation::Martingale { node: id, asset, residual: diff.as_f64() });
                }
                PriceKind::Supermartingale if diff > bound => {
                    violations.push(PriceViolation::Supermartingale { node: id, asset, excess: diff.as_f64() });
                }
                _ => {}
            }
        }
    }
    let strict_margin = if interior_empty || !margin.is_finite() { 0.0 } else { margin.max(T::zero()).as_f64() };
    VerificationReport { violations, strict_margin, interior_empty }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::market::BidAskMatrix;
    use crate::scenario::{build_counterexample, EventTree, Mode, TreeNode};
    use crate::utility::UtilitySpec;

    #[test]
    fn constant_prices_on_frictionless_tree() {
        let tree = EventTree::new(vec![
            TreeNode { id: 0, time: 0, parent: None, prob: 1.0 },
            TreeNode { id: 1, time: 1, parent: Some(0), prob: 0.5 },
            TreeNode { id: 2, time: 1, parent: Some(0), prob: 0.5 },
        ])
        .unwrap();
        let m = BidAskMatrix::frictionless(&[1.0, 1.0]).unwrap();
        let s = MarketScenario::new(tree, vec![m; 3], vec![1.0, 1.0], UtilitySpec::log(), Mode::NoShort).unwrap();
        let z = PriceSystem { z: vec![vec![1.0, 1.0]; 3], kind: PriceKind::Martingale, strict_margin: 0.0 };
        let rep = verify_price_system(&s, &z);
        assert!(rep.ok());
        assert!(rep.interior_empty);
        assert_eq!(rep.strict_margin, 0.0);
    }

    #[test]
    fn remark_process_is_a_supermartingale_cps() {
        let s = build_counterexample(10, 5, &[4.0, 0.0], Mode::NoShort, UtilitySpec::log()).unwrap();
        let z: Vec<Vec<f64>> = (0..s.tree.len()).map(|k| vec![1.0, [3.0, 2.0, 1.0][s.tree.time(k)]]).collect();
        let mut sys = PriceSystem { z, kind: PriceKind::Supermartingale, strict_margin: 0.0 };
        assert!(verify_price_system(&s, &sys).ok());
        sys.kind = PriceKind::Martingale;
        assert!(!verify_price_system(&s, &sys).ok());
        // ask below the bid somewhere
        sys.kind = PriceKind::Supermartingale;
        sys.z[3][1] = 1.5;
        let rep = verify_price_system(&s, &sys);
        assert!(matches!(rep.violations[..], [PriceViolation::OutsidePolar { node: 3, i: 1, j: 0, .. }, ..]), "{rep:?}");
    }
}
