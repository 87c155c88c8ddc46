//! Finite event trees carrying a bid-ask process, an endowment and a utility.

mod counterexample;
mod io;
mod sample;
mod trading;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::market::{liquidation_value, BidAskMatrix, MarketError};
use crate::scalar::Real;
use crate::utility::UtilitySpec;

pub use counterexample::{build_counterexample, CounterexampleNodes};
pub use sample::{random_scenario, random_strategy, SampleConfig};
pub use io::{load_scenario, parse_scenario, save_scenario, scenario_to_string, FORMAT_VERSION};
pub use trading::{check_self_financing, NodeTrade, TradeReport, TradeViolation};

/// Conditional probabilities of siblings must sum to one within this slack.
pub const PROB_SUM_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ScenarioError {
    #[error("parse error: {0}")]
    Parse(String),
    #[error("validation error at node {node:?}: {message}")]
    Validation { node: Option<u64>, message: String },
    #[error("bad parameter: {0}")]
    Parameter(String),
    #[error("node {0} is a leaf")]
    LeafNode(u64),
}

impl ScenarioError {
    fn at(node: u64, message: impl Into<String>) -> Self {
        Self::Validation { node: Some(node), message: message.into() }
    }

    fn global(message: impl Into<String>) -> Self {
        Self::Validation { node: None, message: message.into() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    NoShort,
    Unconstrained,
}

impl Mode {
    pub fn as_str(&self) -> &'static str {
        match self {
            Mode::NoShort => "no_short",
            Mode::Unconstrained => "unconstrained",
        }
    }
}

impl std::str::FromStr for Mode {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "no_short" => Ok(Mode::NoShort),
            "unconstrained" => Ok(Mode::Unconstrained),
            other => Err(format!("unknown mode '{other}'")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TreeNode<T> {
    pub id: u64,
    pub time: usize,
    pub parent: Option<u64>,
    /// Conditional probability given the parent (1 at the root).
    pub prob: T,
}

/// Nodes are stored in (time, id) order, so parents precede children.
/// All per-node data elsewhere in the crate is indexed by this position.
#[derive(Debug, Clone, PartialEq)]
pub struct EventTree<T> {
    nodes: Vec<TreeNode<T>>,
    parent: Vec<Option<usize>>,
    children: Vec<Vec<usize>>,
    uncond: Vec<T>,
    index: BTreeMap<u64, usize>,
    horizon: usize,
}

impl<T: Real> EventTree<T> {
    pub fn new(mut nodes: Vec<TreeNode<T>>) -> Result<Self, ScenarioError> {
        if nodes.is_empty() {
            return Err(ScenarioError::global("tree has no nodes"));
        }
        nodes.sort_by_key(|n| (n.time, n.id));
        let mut index = BTreeMap::new();
        for (k, n) in nodes.iter().enumerate() {
            if index.insert(n.id, k).is_some() {
                return Err(ScenarioError::at(n.id, "duplicate node id"));
            }
        }
        let roots: Vec<_> = nodes.iter().filter(|n| n.parent.is_none()).collect();
        if roots.len() != 1 {
            return Err(ScenarioError::global(format!("expected exactly one root, found {}", roots.len())));
        }
        let root = roots[0];
        if root.id != 0 || root.time != 0 {
            return Err(ScenarioError::at(root.id, "root must have id 0 and time 0"));
        }
        let mut parent = vec![None; nodes.len()];
        let mut children = vec![Vec::new(); nodes.len()];
        for (k, n) in nodes.iter().enumerate() {
            if !(n.prob > T::zero() && n.prob <= T::one()) {
                return Err(ScenarioError::at(n.id, format!("conditional probability {} outside (0, 1]", n.prob)));
            }
            if let Some(pid) = n.parent {
                let Some(&pk) = index.get(&pid) else {
                    return Err(ScenarioError::at(n.id, format!("unknown parent {pid}")));
                };
                if nodes[pk].time + 1 != n.time {
                    return Err(ScenarioError::at(n.id, "parent is not at the previous time"));
                }
                parent[k] = Some(pk);
                children[pk].push(k);
            } else if n.prob != T::one() {
                return Err(ScenarioError::at(n.id, "root probability must be 1"));
            }
        }
        for (k, ch) in children.iter().enumerate() {
            if ch.is_empty() {
                continue;
            }
            let total: T = ch.iter().map(|c| nodes[*c].prob).sum();
            if (total - T::one()).abs() > T::lit(PROB_SUM_TOL) {
                return Err(ScenarioError::at(
                    nodes[k].id,
                    format!("children probabilities sum to {total}, not 1"),
                ));
            }
        }
        let mut uncond = vec![T::one(); nodes.len()];
        for k in 0..nodes.len() {
            if let Some(p) = parent[k] {
                uncond[k] = uncond[p] * nodes[k].prob;
            }
        }
        let horizon = nodes.iter().map(|n| n.time).max().unwrap_or(0);
        Ok(Self { nodes, parent, children, uncond, index, horizon })
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn root(&self) -> usize {
        0
    }

    pub fn node(&self, k: usize) -> &TreeNode<T> {
        &self.nodes[k]
    }

    pub fn nodes(&self) -> &[TreeNode<T>] {
        &self.nodes
    }

    pub fn id(&self, k: usize) -> u64 {
        self.nodes[k].id
    }

    pub fn index_of(&self, id: u64) -> Option<usize> {
        self.index.get(&id).copied()
    }

    pub fn parent(&self, k: usize) -> Option<usize> {
        self.parent[k]
    }

    pub fn children(&self, k: usize) -> &[usize] {
        &self.children[k]
    }

    pub fn is_leaf(&self, k: usize) -> bool {
        self.children[k].is_empty()
    }

    pub fn time(&self, k: usize) -> usize {
        self.nodes[k].time
    }

    pub fn cond_prob(&self, k: usize) -> T {
        self.nodes[k].prob
    }

    /// Unconditional probability: product of conditional ones along the path.
    pub fn prob(&self, k: usize) -> T {
        self.uncond[k]
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn leaves(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.len()).filter(|k| self.is_leaf(*k))
    }

    pub fn internal(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.len()).filter(|k| !self.is_leaf(*k))
    }

    pub fn at_time(&self, t: usize) -> impl Iterator<Item = usize> + '_ {
        (0..self.len()).filter(move |k| self.time(*k) == t)
    }

    /// Nodes of the subtree rooted at `k`, in storage order.
    pub fn subtree(&self, k: usize) -> Vec<usize> {
        let mut out = vec![k];
        let mut i = 0;
        while i < out.len() {
            out.extend_from_slice(&self.children[out[i]]);
            i += 1;
        }
        out.sort_unstable();
        out
    }

    /// Probability-weighted average of the children's vectors.
    pub fn conditional_expectation(&self, values: &[Vec<T>], k: usize) -> Result<Vec<T>, ScenarioError> {
        let ch = self.children(k);
        if ch.is_empty() {
            return Err(ScenarioError::LeafNode(self.id(k)));
        }
        let dim = values[ch[0]].len();
        let mut out = vec![T::zero(); dim];
        for &c in ch {
            let p = self.cond_prob(c);
            for (o, v) in out.iter_mut().zip(&values[c]) {
                *o = *o + p * *v;
            }
        }
        Ok(out)
    }
}

/// A validated market on an event tree.
#[derive(Debug, Clone, PartialEq)]
pub struct MarketScenario<T> {
    pub tree: EventTree<T>,
    /// Bid-ask matrix per node, indexed like the tree.
    pub bid_ask: Vec<BidAskMatrix<T>>,
    pub endowment: Vec<T>,
    pub utility: UtilitySpec<T>,
    pub mode: Mode,
}

impl<T: Real> MarketScenario<T> {
    pub fn new(
        tree: EventTree<T>,
        bid_ask: Vec<BidAskMatrix<T>>,
        endowment: Vec<T>,
        utility: UtilitySpec<T>,
        mode: Mode,
    ) -> Result<Self, ScenarioError> {
        let s = Self::assemble(tree, bid_ask, endowment, utility, mode)?;
        match mode {
            Mode::NoShort => {
                if s.endowment.iter().any(|v| *v < T::zero()) || s.endowment.iter().all(|v| *v == T::zero()) {
                    return Err(ScenarioError::at(0, "no_short endowment must be nonnegative and nonzero"));
                }
            }
            Mode::Unconstrained => {
                let lv = liquidation_value(&s.bid_ask[0], &s.endowment);
                if !(lv > T::zero()) {
                    return Err(ScenarioError::at(0, format!("endowment liquidation value {lv} is not positive")));
                }
            }
        }
        Ok(s)
    }

    /// Structural checks only; used for sub-problems whose endowment may be
    /// degenerate (e.g. exhausted holdings at an interior node).
    pub(crate) fn assemble(
        tree: EventTree<T>,
        bid_ask: Vec<BidAskMatrix<T>>,
        endowment: Vec<T>,
        utility: UtilitySpec<T>,
        mode: Mode,
    ) -> Result<Self, ScenarioError> {
        if bid_ask.len() != tree.len() {
            return Err(ScenarioError::global("one bid-ask matrix per node is required"));
        }
        let d = endowment.len();
        if d == 0 {
            return Err(ScenarioError::global("endowment is empty"));
        }
        for (k, m) in bid_ask.iter().enumerate() {
            if m.dim() != d {
                return Err(ScenarioError::at(tree.id(k), "bid-ask matrix dimension differs from endowment"));
            }
        }
        Ok(Self { tree, bid_ask, endowment, utility, mode })
    }

    pub fn dim(&self) -> usize {
        self.endowment.len()
    }

    pub fn matrix(&self, k: usize) -> &BidAskMatrix<T> {
        &self.bid_ask[k]
    }

    /// Same market with a different endowment (validated).
    pub fn with_endowment(&self, x: Vec<T>) -> Result<Self, ScenarioError> {
        Self::new(self.tree.clone(), self.bid_ask.clone(), x, self.utility, self.mode)
    }

    pub fn with_utility(&self, u: UtilitySpec<T>) -> Self {
        Self { utility: u, ..self.clone() }
    }

    pub fn with_mode(&self, mode: Mode) -> Result<Self, ScenarioError> {
        Self::new(self.tree.clone(), self.bid_ask.clone(), self.endowment.clone(), self.utility, mode)
    }

    pub fn with_matrices(&self, bid_ask: Vec<BidAskMatrix<T>>) -> Result<Self, ScenarioError> {
        Self::new(self.tree.clone(), bid_ask, self.endowment.clone(), self.utility, self.mode)
    }

    /// The market restricted to the subtree at `k`, entered with holdings `x`.
    pub fn subproblem(&self, k: usize, x: Vec<T>) -> Self {
        let keep = self.tree.subtree(k);
        let nodes = keep
            .iter()
            .map(|&j| {
                let n = self.tree.node(j);
                if j == k {
                    TreeNode { id: 0, time: 0, parent: None, prob: T::one() }
                } else {
                    let t0 = self.tree.time(k);
                    let parent = self.tree.parent(j).map(|p| if p == k { 0 } else { self.tree.id(p) + 1 });
                    TreeNode { id: n.id + 1, time: n.time - t0, parent, prob: n.prob }
                }
            })
            .collect();
        let tree = EventTree::new(nodes).expect("subtree of a valid tree is valid");
        // storage order of the subtree matches `keep` because (time, id) order is preserved
        let bid_ask = keep.iter().map(|&j| self.bid_ask[j].clone()).collect();
        Self::assemble(tree, bid_ask, x, self.utility, self.mode).expect("dimensions preserved")
    }
}

/// Holdings after trading at every node, plus the terminal payoff at leaves.
#[derive(Debug, Clone, PartialEq)]
pub struct Strategy<T> {
    pub holdings: Vec<Vec<T>>,
    /// Asset-1 payoff after terminal liquidation; only meaningful at leaves.
    pub payoff: Vec<T>,
}

impl<T: Real> Strategy<T> {
    /// Keep the endowment and liquidate it at every leaf.
    pub fn do_nothing(s: &MarketScenario<T>) -> Self {
        let n = s.tree.len();
        let holdings = vec![s.endowment.clone(); n];
        let payoff = (0..n)
            .map(|k| if s.tree.is_leaf(k) { liquidation_value(s.matrix(k), &s.endowment) } else { T::zero() })
            .collect();
        Self { holdings, payoff }
    }

    /// Holdings entering node `k` (the endowment at the root).
    pub fn entering<'a>(&'a self, s: &'a MarketScenario<T>, k: usize) -> &'a [T] {
        match s.tree.parent(k) {
            Some(p) => &self.holdings[p],
            None => &s.endowment,
        }
    }
}

impl From<MarketError> for ScenarioError {
    fn from(e: MarketError) -> Self {
        ScenarioError::global(e.to_string())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn node(id: u64, time: usize, parent: Option<u64>, prob: f64) -> TreeNode<f64> {
        TreeNode { id, time, parent, prob }
    }

    fn binomial() -> EventTree<f64> {
        EventTree::new(vec![node(0, 0, None, 1.0), node(1, 1, Some(0), 0.5), node(2, 1, Some(0), 0.5)]).unwrap()
    }

    #[test]
    fn rejects_bad_sums_and_structure() {
        let err = EventTree::new(vec![node(0, 0, None, 1.0), node(1, 1, Some(0), 0.5), node(2, 1, Some(0), 0.4)]);
        assert!(matches!(err, Err(ScenarioError::Validation { node: Some(0), .. })));
        let err = EventTree::new(vec![node(0, 0, None, 1.0), node(1, 2, Some(0), 1.0)]);
        assert!(err.is_err());
        let err = EventTree::new(vec![node(0, 0, None, 1.0), node(1, 1, None, 1.0)]);
        assert!(err.is_err());
        let err = EventTree::new(vec![node(0, 0, None, 1.0), node(1, 1, Some(0), 0.0), node(2, 1, Some(0), 1.0)]);
        assert!(err.is_err());
    }

    #[test]
    fn conditional_expectation_examples() {
        let t = binomial();
        let vals = vec![vec![0.0], vec![0.0], vec![2.0]];
        assert_eq!(t.conditional_expectation(&vals, 0).unwrap(), vec![1.0]);
        let c = vec![vec![3.0, 4.0]; 3];
        assert_eq!(t.conditional_expectation(&c, 0).unwrap(), vec![3.0, 4.0]);
        assert_eq!(t.conditional_expectation(&vals, 1), Err(ScenarioError::LeafNode(1)));
    }

    #[test]
    fn indicator_expectation_is_unconditional_probability() {
        let t = EventTree::new(vec![
            node(0, 0, None, 1.0),
            node(1, 1, Some(0), 0.25),
            node(2, 1, Some(0), 0.75),
            node(3, 2, Some(1), 0.5),
            node(4, 2, Some(1), 0.5),
            node(5, 2, Some(2), 1.0 / 3.0),
            node(6, 2, Some(2), 2.0 / 3.0),
        ])
        .unwrap();
        let target = t.index_of(5).unwrap();
        let mut vals: Vec<Vec<f64>> = (0..t.len()).map(|k| vec![if k == target { 1.0 } else { 0.0 }]).collect();
        for k in (0..t.len()).rev() {
            if !t.is_leaf(k) {
                vals[k] = t.conditional_expectation(&vals, k).unwrap();
            }
        }
        assert!((vals[0][0] - t.prob(target)).abs() < 1e-15);
        assert!((t.prob(target) - 0.25).abs() < 1e-15);
    }

    #[test]
    fn endowment_checks_by_mode() {
        let t = binomial();
        let m = vec![BidAskMatrix::new(vec![vec![1.0, 3.0], vec![0.5, 1.0]]).unwrap(); 3];
        let u = UtilitySpec::log();
        assert!(MarketScenario::new(t.clone(), m.clone(), vec![4.0, -1.0], u, Mode::NoShort).is_err());
        assert!(MarketScenario::new(t.clone(), m.clone(), vec![4.0, -1.0], u, Mode::Unconstrained).is_ok());
        assert!(MarketScenario::new(t.clone(), m.clone(), vec![3.0, -1.0], u, Mode::Unconstrained).is_err());
        assert!(MarketScenario::new(t, m, vec![0.0, 0.0], u, Mode::NoShort).is_err());
    }

    #[test]
    fn subproblem_renumbers_from_zero() {
        let t = EventTree::new(vec![
            node(0, 0, None, 1.0),
            node(1, 1, Some(0), 0.5),
            node(2, 1, Some(0), 0.5),
            node(3, 2, Some(1), 0.5),
            node(4, 2, Some(1), 0.5),
        ])
        .unwrap();
        let m = vec![BidAskMatrix::new(vec![vec![1.0]]).unwrap(); 5];
        let s = MarketScenario::new(t, m, vec![1.0], UtilitySpec::log(), Mode::NoShort).unwrap();
        let sub = s.subproblem(1, vec![2.0]);
        assert_eq!(sub.tree.len(), 3);
        assert_eq!(sub.tree.horizon(), 1);
        assert_eq!(sub.tree.id(0), 0);
        assert_eq!(sub.endowment, vec![2.0]);
    }
}
