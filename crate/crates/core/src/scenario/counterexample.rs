//! Two-asset, two-period market in which the optimal dual variable does not
//! produce a shadow price once short positions in the risky asset are allowed.
//!
//! Bid prices are 3, 2, 1 at times 0, 1, 2. At time 1 the ask is `2 + k`
//! with `k = 0` most of the time; at time 2 the ask either collapses to the
//! bid or jumps to `3 + k`. The infinite tail in `k` is truncated at `kmax`,
//! whose node carries the remaining mass.

use super::{EventTree, MarketScenario, Mode, ScenarioError, TreeNode};
use crate::market::BidAskMatrix;
use crate::scalar::Real;
use crate::utility::UtilitySpec;

/// Storage indices of the counterexample nodes.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CounterexampleNodes {
    pub root: usize,
    /// Time-1 node with ask `2 + k`, for `k = 0..=kmax`.
    pub mid: Vec<usize>,
    /// Time-2 child of `mid[k]` where the ask falls to 1.
    pub low: Vec<usize>,
    /// Time-2 child of `mid[k]` where the ask jumps to `3 + k`.
    pub high: Vec<usize>,
}

impl CounterexampleNodes {
    pub fn new(kmax: usize) -> Self {
        let mid = (0..=kmax).map(|k| 1 + k).collect();
        let low = (0..=kmax).map(|k| kmax + 2 + 2 * k).collect();
        let high = (0..=kmax).map(|k| kmax + 3 + 2 * k).collect();
        Self { root: 0, mid, low, high }
    }
}

pub fn build_counterexample<T: Real>(
    n: u32,
    kmax: u32,
    x: &[T],
    mode: Mode,
    utility: UtilitySpec<T>,
) -> Result<MarketScenario<T>, ScenarioError> {
    if n == 0 || kmax == 0 {
        return Err(ScenarioError::Parameter("n and kmax must be at least 1".into()));
    }
    if x.len() != 2 {
        return Err(ScenarioError::Parameter("the counterexample has two assets".into()));
    }
    let two = T::lit(2.0);
    let half_pow = |e: u32| two.powi(-(e as i32));
    let kmax_us = kmax as usize;
    let ids = CounterexampleNodes::new(kmax_us);

    let mut nodes = vec![TreeNode { id: 0, time: 0, parent: None, prob: T::one() }];
    let mut mats = vec![(ids.root, two_asset(T::lit(3.0), T::lit(3.0))?)];
    for k in 0..=kmax {
        let ku = k as usize;
        let p_mid = if k == 0 {
            T::one() - half_pow(n)
        } else if k < kmax {
            half_pow(n + k)
        } else {
            half_pow(n + kmax - 1)
        };
        let mid = ids.mid[ku] as u64;
        nodes.push(TreeNode { id: mid, time: 1, parent: Some(0), prob: p_mid });
        mats.push((ids.mid[ku], two_asset(two, two + T::of_usize(ku))?));

        let p_high = half_pow(n + k);
        if T::one() - p_high == T::one() {
            return Err(ScenarioError::Parameter(format!(
                "n + k = {} makes 1 - 2^-(n+k) round to 1",
                n + k
            )));
        }
        nodes.push(TreeNode { id: ids.low[ku] as u64, time: 2, parent: Some(mid), prob: T::one() - p_high });
        mats.push((ids.low[ku], two_asset(T::one(), T::one())?));
        nodes.push(TreeNode { id: ids.high[ku] as u64, time: 2, parent: Some(mid), prob: p_high });
        mats.push((ids.high[ku], two_asset(T::one(), T::lit(3.0) + T::of_usize(ku))?));
    }
    for node in &nodes {
        if !(node.prob > T::zero() && node.prob <= T::one()) {
            return Err(ScenarioError::Parameter(format!("probability of node {} underflows", node.id)));
        }
    }
    let tree = EventTree::new(nodes)?;
    // ids were chosen so that storage order equals id order
    mats.sort_by_key(|(k, _)| *k);
    let bid_ask = mats.into_iter().map(|(_, m)| m).collect();
    MarketScenario::new(tree, bid_ask, x.to_vec(), utility, mode)
}

fn two_asset<T: Real>(bid: T, ask: T) -> Result<BidAskMatrix<T>, ScenarioError> {
    BidAskMatrix::two_asset(bid, ask).map_err(|e| ScenarioError::Parameter(e.to_string()))
}
