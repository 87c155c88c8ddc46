use super::{solve, SolveError, SolveReport};
use crate::market::liquidation_value;
use crate::scalar::Real;
use crate::scenario::{MarketScenario, Strategy};

/// Optimal conditional expected utility at node `k` for a position `v`
/// held there, with trading at `k` itself still allowed.
pub fn conditional_value_at<T: Real>(s: &MarketScenario<T>, k: usize, v: &[T]) -> Result<T, SolveError> {
    let m = s.matrix(k);
    if s.tree.is_leaf(k) {
        let lv = liquidation_value(m, v);
        if !(lv > T::zero()) {
            return Err(SolveError::Infeasible);
        }
        return Ok(s.utility.value(lv));
    }
    let sub = s.subproblem(k, v.to_vec());
    solve(&sub).map(|r| r.value)
}

/// `J(V, k)` for the holdings `strategy` keeps after trading at `k`.
pub fn conditional_value<T: Real>(s: &MarketScenario<T>, strategy: &Strategy<T>, k: usize) -> Result<T, SolveError> {
    conditional_value_at(s, k, &strategy.holdings[k])
}

/// `J(V_n, n) - Σ_c p_c J(V_c, c)` at every internal node, as (node index, deviation).
///
/// For any admissible strategy the deviations are nonnegative up to solver
/// tolerance; they vanish along an optimal one.
pub fn dpp_deviations<T: Real>(s: &MarketScenario<T>, holdings: &[Vec<T>]) -> Result<Vec<(usize, T)>, SolveError> {
    let tree = &s.tree;
    let mut values = vec![T::zero(); tree.len()];
    for k in 0..tree.len() {
        values[k] = conditional_value_at(s, k, &holdings[k])?;
    }
    Ok(tree
        .internal()
        .map(|k| {
            let expected: T = tree.children(k).iter().map(|c| tree.cond_prob(*c) * values[*c]).sum();
            (k, values[k] - expected)
        })
        .collect())
}

/// Largest absolute deviation from the dynamic programming principle along
/// the optimal holdings of `r`.
pub fn check_dpp<T: Real>(s: &MarketScenario<T>, r: &SolveReport<T>) -> Result<T, SolveError> {
    let dev = dpp_deviations(s, &r.strategy.holdings)?;
    Ok(dev.iter().fold(T::zero(), |a, (_, x)| a.max(x.abs())))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::{build_counterexample, Mode, CounterexampleNodes};
    use crate::utility::UtilitySpec;

    #[test]
    fn constrained_counterexample_values() {
        let s = build_counterexample(10, 4, &[4.0, 0.0], Mode::NoShort, UtilitySpec::log()).unwrap();
        let ids = CounterexampleNodes::new(4);
        for &k in &ids.mid {
            let j = conditional_value_at(&s, k, &[4.0, 0.0]).unwrap();
            assert!((j - 4f64.ln()).abs() < 1e-6, "{k}: {j}");
        }
        let leaf = ids.high[2];
        let j = conditional_value_at(&s, leaf, &[1.0, 1.0]).unwrap();
        assert!((j - 2f64.ln()).abs() < 1e-9);
        let r = solve(&s).unwrap();
        let root = conditional_value_at(&s, 0, &s.endowment).unwrap();
        assert!((root - r.value).abs() < 1e-9);
        assert!(check_dpp(&s, &r).unwrap() < 1e-6);
    }
}
