use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use shadowprice::market::BidAskMatrix;
use shadowprice::optimize::{check_dpp, conditional_value, conditional_value_at, dpp_deviations, solve, solve_with, SolveError, SolveOptions};
use shadowprice::scenario::{
    build_counterexample, random_scenario, CounterexampleNodes, EventTree, MarketScenario, Mode, SampleConfig, TreeNode,
};
use shadowprice::utility::UtilitySpec;
use shadowprice::Scenario;

fn node(id: u64, time: usize, parent: Option<u64>, prob: f64) -> TreeNode<f64> {
    TreeNode { id, time, parent, prob }
}

#[test]
fn utility_closed_forms() {
    let log = UtilitySpec::<f64>::log();
    let sqrt = UtilitySpec::<f64>::power(0.5).unwrap();
    assert_eq!(log.conjugate(1.0).unwrap(), -1.0);
    assert!((sqrt.conjugate(1.0).unwrap() - 1.0).abs() < 1e-15);
    assert_eq!(log.marginal_inverse(0.25).unwrap(), 4.0);
    assert!(log.eval(0.0).is_err());
}

#[test]
fn forced_liquidation_at_a_single_node() {
    let tree = EventTree::new(vec![node(0, 0, None, 1.0)]).unwrap();
    let m = BidAskMatrix::new(vec![vec![1.0, 2.5], vec![0.5, 1.0]]).unwrap();
    let s = MarketScenario::new(tree, vec![m], vec![0.0, 1.0], UtilitySpec::log(), Mode::NoShort).unwrap();
    let r = solve(&s).unwrap();
    assert!((r.strategy.payoff[0] - 2.0).abs() < 1e-8);
    assert!((r.value - 2f64.ln()).abs() < 1e-8);
}

#[test]
fn frictionless_binomial_matches_log_optimal_fraction() {
    // up 50%, down 20%, equal odds: invest 1.5 times wealth
    let tree = EventTree::new(vec![node(0, 0, None, 1.0), node(1, 1, Some(0), 0.5), node(2, 1, Some(0), 0.5)]).unwrap();
    let mats = [1.0, 1.5, 0.8].iter().map(|s| BidAskMatrix::frictionless(&[1.0, *s]).unwrap()).collect();
    let s = MarketScenario::new(tree, mats, vec![1.0, 0.0], UtilitySpec::log(), Mode::Unconstrained).unwrap();
    let r = solve(&s).unwrap();
    let want = 0.5 * 1.75f64.ln() + 0.5 * 0.7f64.ln();
    assert!((r.value - want).abs() < 1e-8, "{} vs {want}", r.value);
    assert!((r.strategy.holdings[0][1] - 1.5).abs() < 1e-5);
}

#[test]
fn conditional_values_in_the_constrained_counterexample() {
    let s = build_counterexample(10, 20, &[4.0, 0.0], Mode::NoShort, UtilitySpec::log()).unwrap();
    let r = solve(&s).unwrap();
    let ids = CounterexampleNodes::new(20);
    for &k in &[ids.mid[0], ids.mid[7], ids.mid[20]] {
        assert!((conditional_value_at(&s, k, &[4.0, 0.0]).unwrap() - 4f64.ln()).abs() < 1e-6);
    }
    let leaf = ids.high[3];
    assert!((conditional_value(&s, &r.strategy, leaf).unwrap() - r.strategy.payoff[leaf].ln()).abs() < 1e-9);
    assert!((conditional_value_at(&s, 0, &s.endowment).unwrap() - r.value).abs() < 1e-9);
    assert!(check_dpp(&s, &r).unwrap() <= 1e-6 * (1.0 + r.value.abs()));
}

#[test]
fn single_branch_tree_has_no_dpp_deviation() {
    let tree = EventTree::new(vec![node(0, 0, None, 1.0), node(1, 1, Some(0), 1.0), node(2, 2, Some(1), 1.0)]).unwrap();
    let mats = [(1.0, 1.1), (1.2, 1.3), (0.9, 1.0)].iter().map(|(b, a)| BidAskMatrix::two_asset(*b, *a).unwrap()).collect();
    let s = MarketScenario::new(tree, mats, vec![1.0, 1.0], UtilitySpec::log(), Mode::NoShort).unwrap();
    let r = solve(&s).unwrap();
    assert!(check_dpp(&s, &r).unwrap() <= 1e-9);
}

#[test]
fn wasteful_strategy_shows_a_dpp_drop() {
    let s = build_counterexample(10, 3, &[4.0, 0.0], Mode::NoShort, UtilitySpec::log()).unwrap();
    let r = solve(&s).unwrap();
    let mut holdings = r.strategy.holdings.clone();
    // throw away one unit of cash at every time-1 node
    for &k in &CounterexampleNodes::new(3).mid {
        holdings[k][0] -= 1.0;
        for &c in s.tree.children(k) {
            holdings[c][0] -= 1.0;
        }
    }
    let dev = dpp_deviations(&s, &holdings).unwrap();
    let root = dev.iter().find(|(k, _)| *k == s.tree.root()).unwrap().1;
    assert!(root > 0.1, "{root}");
    assert!(dev.iter().all(|(_, d)| *d >= -1e-7));
}

#[test]
fn unreachable_payoff_is_infeasible() {
    let s = build_counterexample(10, 3, &[4.0, 0.0], Mode::NoShort, UtilitySpec::log()).unwrap();
    assert_eq!(conditional_value_at(&s, 0, &[0.0, 0.0]).unwrap_err(), SolveError::Infeasible);
}

fn sample(seed: u64) -> Scenario {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let cfg = SampleConfig { max_nodes: 24, ..SampleConfig::default() };
    random_scenario(&mut rng, &cfg).unwrap()
}

fn value(s: &Scenario) -> f64 {
    solve(s).unwrap().value
}

fn scaled_endowment(s: &Scenario, lambda: f64) -> Scenario {
    s.with_endowment(s.endowment.iter().map(|v| lambda * v).collect()).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn log_and_power_scaling(seed in any::<u64>(), lambda in 0.2f64..5.0) {
        let s = sample(seed).with_utility(UtilitySpec::log());
        prop_assert!((value(&scaled_endowment(&s, lambda)) - value(&s) - lambda.ln()).abs() <= 1e-6);
        for p in [0.5, -1.0] {
            let s = s.with_utility(UtilitySpec::power(p).unwrap());
            let (j, jl) = (value(&s), value(&scaled_endowment(&s, lambda)));
            prop_assert!((jl - lambda.powf(p) * j).abs() <= 1e-6 * (1.0 + jl.abs()));
        }
    }

    #[test]
    fn more_endowment_never_hurts(seed in any::<u64>(), eps in 0.01f64..1.0, asset in 0usize..4) {
        let s = sample(seed);
        let mut x = s.endowment.clone();
        let i = asset % x.len();
        x[i] += eps;
        prop_assert!(value(&s.with_endowment(x).unwrap()) >= value(&s) - 1e-9);
    }

    #[test]
    fn wider_spreads_never_help(seed in any::<u64>(), widen in 0.0f64..0.1) {
        let s = sample(seed);
        let wider: Vec<BidAskMatrix<f64>> = s
            .bid_ask
            .iter()
            .map(|m| {
                let rows = m.rows().iter().enumerate()
                    .map(|(i, r)| r.iter().enumerate().map(|(j, v)| if i == j { *v } else { v * (1.0 + widen) }).collect())
                    .collect();
                BidAskMatrix::new(rows).unwrap()
            })
            .collect();
        let j = value(&s);
        prop_assert!(value(&s.with_matrices(wider).unwrap()) <= j + 1e-7 * (1.0 + j.abs()));
    }

    #[test]
    fn payoffs_positive_and_dpp_holds(seed in any::<u64>()) {
        let s = sample(seed);
        let r = solve(&s).unwrap();
        prop_assert!(r.gap >= 0.0 && r.gap <= 1e-7 * (1.0 + r.value.abs()));
        prop_assert!(s.tree.leaves().all(|l| r.strategy.payoff[l] > 0.0));
        prop_assert!(check_dpp(&s, &r).unwrap() <= 1e-6 * (1.0 + r.value.abs()));
    }
}

#[test]
fn single_precision_solve_agrees() {
    let s32 = build_counterexample(10, 3, &[4.0f32, 0.5], Mode::NoShort, UtilitySpec::log()).unwrap();
    let s64 = build_counterexample(10, 3, &[4.0f64, 0.5], Mode::NoShort, UtilitySpec::log()).unwrap();
    // single precision cannot reach the default gap
    let opts = SolveOptions { tol_gap: 1e-4, ..SolveOptions::default() };
    let a = solve_with(&s32, &opts).unwrap().value as f64;
    let b = solve(&s64).unwrap().value;
    assert!((a - b).abs() < 1e-3, "{a} vs {b}");
}
