//! Price systems as solutions of a margin-maximizing linear program.
//!
//! The unknowns are the probability-weighted vectors `P(n) z_n`, written as
//! `w_n + δ P(n)·1` with `w ⪰ 0`, so maximizing `δ` pushes every component of
//! `z` away from zero and the martingale rows have unit coefficients. All rows
//! are homogeneous, and the normalization `z¹_root ≤ 1` fixes the scale.

use serde::Serialize;

use super::{verify_price_system, PriceKind, PriceSystem};
use crate::lp::{LinearProgram, LpStatus, Relation};
use crate::optimize::SolveReport;
use crate::scalar::Real;
use crate::scenario::{check_self_financing, MarketScenario, Mode};

/// Default trade size above which a trade pins the price.
pub const DEFAULT_PIN_TOL: f64 = 1e-7;
/// Optimal margins at or below this are treated as zero.
pub const MARGIN_TOL: f64 = 1e-10;

/// `z^j = π^{ij} z^i` at `node`: asset `j` is bought with asset `i` there.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Pin {
    pub node: u64,
    pub i: usize,
    pub j: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct PinSet {
    pub pins: Vec<Pin>,
}

impl PinSet {
    pub fn len(&self) -> usize {
        self.pins.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pins.is_empty()
    }

    pub fn push(&mut self, node: u64, i: usize, j: usize) {
        let pin = Pin { node, i, j };
        if !self.pins.contains(&pin) {
            self.pins.push(pin);
        }
    }

    pub fn extend(&mut self, other: &PinSet) {
        for p in &other.pins {
            self.push(p.node, p.i, p.j);
        }
    }
}

/// Pins of the leanest trades explaining each holdings change of the
/// optimal strategy, so round trips on legs without a spread are ignored.
pub fn pin_constraints<T: Real>(s: &MarketScenario<T>, r: &SolveReport<T>, tol: T) -> PinSet {
    let size = s.endowment.iter().fold(T::one(), |a, v| a.max(v.abs()));
    let report = check_self_financing(s, &r.strategy, T::lit(1e-9) * size);
    let mut set = PinSet::default();
    for (k, nt) in report.trades.iter().enumerate() {
        let t = nt.trade.as_ref().unwrap_or(&r.trades[k]);
        for (i, j) in s.matrix(k).pairs() {
            if t.buys[i][j] > tol {
                set.push(s.tree.id(k), i, j);
            }
        }
    }
    set
}

/// What a row of the margin program encodes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(tag = "row", rename_all = "snake_case")]
pub enum RowLabel {
    Normalization,
    Polar { node: u64, i: usize, j: usize },
    Martingale { node: u64, asset: usize },
    Supermartingale { node: u64, asset: usize },
    Pin { node: u64, i: usize, j: usize },
}

/// Dual solution proving that no admissible margin is positive: a nonnegative
/// combination of the rows whose `δ` coefficient dominates the objective while
/// its right-hand side is zero.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ZeroMarginCertificate {
    pub delta: f64,
    /// Rows with nonzero weight.
    pub weights: Vec<(RowLabel, f64)>,
    /// Largest violation of the dual constraints by `weights`.
    pub dual_violation: f64,
    /// Dual objective; zero for a valid certificate.
    pub bound: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "outcome", rename_all = "snake_case")]
pub enum PinnedOutcome<T> {
    Feasible { system: PriceSystem<T>, delta: T },
    ZeroMargin(ZeroMarginCertificate),
}

impl<T> PinnedOutcome<T> {
    pub fn system(&self) -> Option<&PriceSystem<T>> {
        match self {
            Self::Feasible { system, .. } => Some(system),
            Self::ZeroMargin(_) => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScpsResult<T> {
    pub system: Option<PriceSystem<T>>,
    pub delta: T,
}

struct MarginProgram<T> {
    lp: LinearProgram<T>,
    labels: Vec<RowLabel>,
    d: usize,
    delta: usize,
}

impl<T: Real> MarginProgram<T> {
    fn build(s: &MarketScenario<T>, pins: &PinSet, kind: PriceKind, strict: bool) -> Result<Self, u64> {
        let tree = &s.tree;
        let d = s.dim();
        let delta = tree.len() * d;
        let w = |k: usize, i: usize| k * d + i;
        let mut lp = LinearProgram::new(delta + 1);
        let mut labels = Vec::new();
        lp.set_objective(delta, T::one());

        lp.add(vec![(w(tree.root(), 0), T::one()), (delta, T::one())], Relation::Le, T::one());
        labels.push(RowLabel::Normalization);

        for k in 0..tree.len() {
            let m = s.matrix(k);
            let node = tree.id(k);
            let pk = tree.prob(k);
            for (i, j) in m.pairs() {
                let p = m.get(i, j);
                let shift = if strict && !m.frictionless_leg(i, j) { T::lit(2.0) } else { T::one() };
                lp.add(vec![(w(k, i), p), (w(k, j), -T::one()), (delta, (p - shift) * pk)], Relation::Ge, T::zero());
                labels.push(RowLabel::Polar { node, i, j });
            }
            if tree.is_leaf(k) {
                continue;
            }
            for a in 0..d {
                // the δ parts cancel because the children's probabilities add up
                let mut coeffs = vec![(w(k, a), T::one())];
                coeffs.extend(tree.children(k).iter().map(|&c| (w(c, a), -T::one())));
                let (rel, label) = match kind {
                    PriceKind::Martingale => (Relation::Eq, RowLabel::Martingale { node, asset: a }),
                    PriceKind::Supermartingale => (Relation::Ge, RowLabel::Supermartingale { node, asset: a }),
                };
                lp.add(coeffs, rel, T::zero());
                labels.push(label);
            }
        }
        for p in &pins.pins {
            let k = tree.index_of(p.node).ok_or(p.node)?;
            let pij = s.matrix(k).get(p.i, p.j);
            lp.add(
                vec![(w(k, p.j), T::one()), (w(k, p.i), -pij), (delta, (T::one() - pij) * tree.prob(k))],
                Relation::Eq,
                T::zero(),
            );
            labels.push(RowLabel::Pin { node: p.node, i: p.i, j: p.j });
        }
        Ok(Self { lp, labels, d, delta })
    }

    fn system(&self, s: &MarketScenario<T>, x: &[T], kind: PriceKind) -> PriceSystem<T> {
        let dlt = x[self.delta];
        let z: Vec<Vec<T>> = x[..self.delta]
            .chunks(self.d)
            .enumerate()
            .map(|(k, c)| c.iter().map(|v| *v / s.tree.prob(k) + dlt).collect())
            .collect();
        let scale = z[0][0];
        let sys = PriceSystem { z, kind, strict_margin: T::zero() };
        sys.scaled(T::one() / scale)
    }

    fn certificate(&self, delta: T, duals: &[T]) -> ZeroMarginCertificate {
        let weights = self
            .labels
            .iter()
            .zip(duals)
            .filter(|(_, y)| y.abs() > T::lit(1e-12))
            .map(|(l, y)| (*l, y.as_f64()))
            .collect();
        ZeroMarginCertificate {
            delta: delta.as_f64(),
            weights,
            dual_violation: self.lp.dual_violation(duals, false).as_f64(),
            bound: self.lp.dual_objective(duals).as_f64(),
        }
    }
}

fn with_margin<T: Real>(s: &MarketScenario<T>, mut sys: PriceSystem<T>) -> PriceSystem<T> {
    sys.strict_margin = T::lit(verify_price_system(s, &sys).strict_margin);
    sys
}

/// A pin at an unknown node yields a zero-margin outcome naming that pin.
pub fn find_pinned_price_system<T: Real>(s: &MarketScenario<T>, pins: &PinSet, kind: PriceKind) -> PinnedOutcome<T> {
    let prog = match MarginProgram::build(s, pins, kind, false) {
        Ok(p) => p,
        Err(node) => {
            return PinnedOutcome::ZeroMargin(ZeroMarginCertificate {
                delta: 0.0,
                weights: vec![(RowLabel::Pin { node, i: 0, j: 0 }, f64::NAN)],
                dual_violation: f64::NAN,
                bound: f64::NAN,
            })
        }
    };
    let sol = prog.lp.solve();
    assert_eq!(sol.status, LpStatus::Optimal, "margin program is bounded and contains zero");
    let delta = sol.objective;
    if delta > T::lit(MARGIN_TOL) {
        PinnedOutcome::Feasible { system: with_margin(s, prog.system(s, &sol.x, kind)), delta }
    } else {
        PinnedOutcome::ZeroMargin(prog.certificate(delta, &sol.duals))
    }
}

/// Strictly consistent price system of the kind matching the trading
/// constraints: martingale when short sales are allowed, supermartingale
/// otherwise. Legs without a spread only need weak consistency.
pub fn find_scps<T: Real>(s: &MarketScenario<T>) -> ScpsResult<T> {
    let kind = match s.mode {
        Mode::Unconstrained => PriceKind::Martingale,
        Mode::NoShort => PriceKind::Supermartingale,
    };
    let prog = MarginProgram::build(s, &PinSet::default(), kind, true).expect("no pins");
    let sol = prog.lp.solve();
    assert_eq!(sol.status, LpStatus::Optimal, "margin program is bounded and contains zero");
    let delta = sol.objective;
    let system = (delta > T::lit(MARGIN_TOL)).then(|| with_margin(s, prog.system(s, &sol.x, kind)));
    ScpsResult { system, delta }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::market::BidAskMatrix;
    use crate::scenario::{build_counterexample, CounterexampleNodes, EventTree, TreeNode};
    use crate::utility::UtilitySpec;

    fn chain(prices: &[f64], mode: Mode) -> MarketScenario<f64> {
        let nodes = (0..prices.len())
            .map(|t| TreeNode { id: t as u64, time: t, parent: t.checked_sub(1).map(|p| p as u64), prob: 1.0 })
            .collect();
        let tree = EventTree::new(nodes).unwrap();
        let mats = prices.iter().map(|p| BidAskMatrix::frictionless(&[1.0, *p]).unwrap()).collect();
        MarketScenario::new(tree, mats, vec![1.0, 0.0], UtilitySpec::log(), mode).unwrap()
    }

    #[test]
    fn constant_frictionless_prices_are_found() {
        let s = chain(&[2.0, 2.0], Mode::Unconstrained);
        let out = find_pinned_price_system(&s, &PinSet::default(), PriceKind::Martingale);
        let sys = out.system().expect("feasible");
        for z in &sys.z {
            assert!((z[0] - 1.0).abs() < 1e-12 && (z[1] - 2.0).abs() < 1e-12, "{z:?}");
        }
    }

    #[test]
    fn falling_price_has_no_martingale_system() {
        let s = chain(&[3.0, 2.0], Mode::Unconstrained);
        assert!(find_scps(&s).system.is_none());
        match find_pinned_price_system(&s, &PinSet::default(), PriceKind::Martingale) {
            PinnedOutcome::ZeroMargin(c) => {
                assert!(c.dual_violation < 1e-9 && c.bound.abs() < 1e-9, "{c:?}");
            }
            other => panic!("{other:?}"),
        }
        // a falling price is a supermartingale
        let s = chain(&[3.0, 2.0], Mode::NoShort);
        assert!(find_scps(&s).system.is_some());
    }

    #[test]
    fn single_asset_is_trivial() {
        let tree = EventTree::new(vec![TreeNode { id: 0, time: 0, parent: None, prob: 1.0 }]).unwrap();
        let m = BidAskMatrix::new(vec![vec![1.0]]).unwrap();
        let s = MarketScenario::new(tree, vec![m], vec![1.0], UtilitySpec::log(), Mode::NoShort).unwrap();
        let r = find_scps(&s);
        assert_eq!(r.system.unwrap().z, vec![vec![1.0]]);
    }

    #[test]
    fn remark_pins_are_feasible_in_constrained_counterexample() {
        let s = build_counterexample(10, 5, &[4.0, 0.0], Mode::NoShort, UtilitySpec::log()).unwrap();
        let ids = CounterexampleNodes::new(5);
        let mut pins = PinSet::default();
        pins.push(0, 0, 1);
        for k in ids.low.iter().chain(&ids.high) {
            pins.push(s.tree.id(*k), 1, 0);
        }
        let out = find_pinned_price_system(&s, &pins, PriceKind::Supermartingale);
        let PinnedOutcome::Feasible { system, delta } = out else { panic!("{out:?}") };
        assert!(delta > 0.0);
        let p: Vec<Vec<f64>> = system.prices();
        assert!((p[0][1] - 3.0).abs() < 1e-9);
        for k in ids.low.iter().chain(&ids.high) {
            assert!((p[*k][1] - 1.0).abs() < 1e-9);
        }
        assert!(verify_price_system(&s, &system).ok());
    }

    #[test]
    fn counterexample_has_an_scps() {
        let s = build_counterexample(10, 20, &[4.0, -1.0], Mode::Unconstrained, UtilitySpec::log()).unwrap();
        let r = find_scps(&s);
        assert!(r.delta > 0.0);
        assert!(verify_price_system(&s, r.system.as_ref().unwrap()).ok());
    }
}
