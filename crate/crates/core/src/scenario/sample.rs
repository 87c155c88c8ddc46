//! Random scenarios and random admissible strategies for property tests.

use rand::Rng;

use super::{EventTree, MarketScenario, Mode, ScenarioError, Strategy, TreeNode};
use crate::market::BidAskMatrix;
use crate::scalar::Real;
use crate::utility::UtilitySpec;

#[derive(Debug, Clone, PartialEq)]
pub struct SampleConfig {
    pub dims: Vec<usize>,
    pub horizons: Vec<usize>,
    pub max_branching: usize,
    /// Proportional costs are drawn uniformly from this range.
    pub cost_range: (f64, f64),
    /// Volatility of the log price step.
    pub volatility: f64,
    /// Power exponents; `None` stands for log utility.
    pub utilities: Vec<Option<f64>>,
    pub mode: Mode,
    pub max_nodes: usize,
}

impl Default for SampleConfig {
    fn default() -> Self {
        Self {
            dims: vec![2, 3, 4],
            horizons: vec![1, 2, 3],
            max_branching: 3,
            cost_range: (0.01, 0.02),
            volatility: 0.2,
            utilities: vec![None, Some(0.5), Some(-1.0)],
            mode: Mode::NoShort,
            max_nodes: 64,
        }
    }
}

fn pick<R: Rng, X: Copy>(rng: &mut R, xs: &[X]) -> X {
    xs[rng.gen_range(0..xs.len())]
}

/// Random tree with geometric price steps, costs from the configured range and
/// a strictly positive endowment.
pub fn random_scenario<T: Real, R: Rng>(rng: &mut R, cfg: &SampleConfig) -> Result<MarketScenario<T>, ScenarioError> {
    let d = pick(rng, &cfg.dims);
    let horizon = pick(rng, &cfg.horizons);

    let mut nodes = vec![TreeNode { id: 0, time: 0, parent: None, prob: T::one() }];
    let mut prices: Vec<Vec<f64>> = vec![(0..d).map(|a| if a == 0 { 1.0 } else { rng.gen_range(0.5..2.0) }).collect()];
    let mut frontier = vec![0usize];
    for t in 1..=horizon {
        let mut next = Vec::new();
        for &p in &frontier {
            let room = cfg.max_nodes.saturating_sub(nodes.len()).max(1);
            let b = rng.gen_range(1..=cfg.max_branching.min(room).max(1));
            let weights: Vec<f64> = (0..b).map(|_| rng.gen_range(0.2..1.0)).collect();
            let total: f64 = weights.iter().sum();
            for w in weights {
                let id = nodes.len();
                nodes.push(TreeNode { id: id as u64, time: t, parent: Some(p as u64), prob: T::lit(w / total) });
                let step: Vec<f64> = (0..d)
                    .map(|a| {
                        if a == 0 {
                            1.0
                        } else {
                            let u: f64 = rng.gen_range(-1.0..1.0);
                            prices[p][a] * (cfg.volatility * 3f64.sqrt() * u).exp()
                        }
                    })
                    .collect();
                prices.push(step);
                next.push(id);
            }
        }
        frontier = next;
    }

    let mut mats = Vec::with_capacity(nodes.len());
    for p in &prices {
        let lambda: Vec<Vec<T>> = (0..d)
            .map(|i| (0..d).map(|j| if i == j { T::zero() } else { T::lit(rng.gen_range(cfg.cost_range.0..=cfg.cost_range.1)) }).collect())
            .collect();
        let s: Vec<T> = p.iter().map(|v| T::lit(*v)).collect();
        mats.push(BidAskMatrix::from_price_and_costs(&s, &lambda)?);
    }
    let endowment: Vec<T> = (0..d).map(|_| T::lit(rng.gen_range(0.1..2.0))).collect();
    let utility = match pick(rng, &cfg.utilities) {
        None => UtilitySpec::log(),
        Some(p) => UtilitySpec::power(T::lit(p)).map_err(|e| ScenarioError::Parameter(e.to_string()))?,
    };
    MarketScenario::new(EventTree::new(nodes)?, mats, endowment, utility, cfg.mode)
}

/// Random short-free strategy: at each node a few exchanges of random
/// fractions of current holdings, and a direct sale of everything into asset 1
/// at the leaves.
pub fn random_strategy<T: Real, R: Rng>(s: &MarketScenario<T>, rng: &mut R) -> Strategy<T> {
    let tree = &s.tree;
    let d = s.dim();
    let mut holdings = vec![Vec::new(); tree.len()];
    let mut payoff = vec![T::zero(); tree.len()];
    for k in 0..tree.len() {
        let mut v = match tree.parent(k) {
            Some(p) => holdings[p].clone(),
            None => s.endowment.clone(),
        };
        let m = s.matrix(k);
        if tree.is_leaf(k) {
            let f = (1..d).fold(v[0], |acc, i| acc + v[i] / m.get(i, 0));
            payoff[k] = f;
            v = vec![T::zero(); d];
            v[0] = f;
        } else if d > 1 {
            for _ in 0..rng.gen_range(0..=2) {
                let i = rng.gen_range(0..d);
                let j = (i + rng.gen_range(1..d)) % d;
                let spend = v[i] * T::lit(rng.gen_range(0.0..1.0));
                v[i] = v[i] - spend;
                v[j] = v[j] + spend / m.get(i, j);
            }
        }
        holdings[k] = v;
    }
    Strategy { holdings, payoff }
}
