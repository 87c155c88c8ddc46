//! Sufficient conditions for `z/z¹` to be a shadow price, and the marginal
//! value of the endowment.
//!
//! Both checks depend on the scale of `z`: condition (ii) pins `z¹_T` to
//! `U'(f̂)`, so a price system normalized at the root generally fails it.

use serde::Serialize;

use super::{PriceSystem, ShadowError};
use crate::optimize::{SolveOptions, SolveReport};
use crate::scalar::{dot, Real};
use crate::scenario::{check_self_financing, MarketScenario, TradeViolation};

/// Relative tolerance on every certificate residual.
pub const CERTIFY_TOL: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Condition {
    pub name: String,
    pub residual: f64,
    pub tol: f64,
    pub passed: bool,
}

impl Condition {
    fn new(name: &str, residual: f64, tol: f64) -> Self {
        Self { name: name.into(), residual, tol, passed: residual <= tol }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Certificate {
    pub conditions: Vec<Condition>,
    /// Violations found while re-checking the strategy.
    pub trade_violations: Vec<TradeViolation>,
}

impl Certificate {
    pub fn ok(&self) -> bool {
        self.conditions.iter().all(|c| c.passed)
    }
}

pub fn certify_shadow<T: Real>(s: &MarketScenario<T>, z: &PriceSystem<T>, r: &SolveReport<T>) -> Certificate {
    certify_shadow_with(s, z, r, CERTIFY_TOL)
}

pub fn certify_shadow_with<T: Real>(s: &MarketScenario<T>, z: &PriceSystem<T>, r: &SolveReport<T>, tol: f64) -> Certificate {
    let tree = &s.tree;
    let d = s.dim();
    let f = &r.strategy.payoff;
    let size = s.endowment.iter().fold(T::one(), |a, v| a.max(v.abs()));

    // (i) the payoff is reachable from x
    let trades = check_self_financing(s, &r.strategy, T::lit(tol) * size);
    let excess = tree
        .leaves()
        .map(|l| {
            let lv = crate::market::liquidation_value(s.matrix(l), &r.strategy.holdings[l]);
            ((f[l] - lv) / (T::one() + lv.abs())).max(T::zero())
        })
        .fold(T::zero(), |a, b| a.max(b));
    let mut attainable = Condition::new("attainable", excess.as_f64(), tol);
    attainable.passed &= trades.ok();

    // (ii) z¹_T = U'(f̂)
    let mut marginal = T::zero();
    // (iii) S^i_T = 1/π^{i1}_T
    let mut terminal = T::zero();
    for l in tree.leaves() {
        let mu = s.utility.d1(f[l]);
        marginal = marginal.max((z.z[l][0] - mu).abs() / mu);
        let m = s.matrix(l);
        for i in 1..d {
            let bid = T::one() / m.get(i, 0);
            terminal = terminal.max((z.z[l][i] / z.z[l][0] - bid).abs() / bid);
        }
    }

    // (iv) E[z¹_T f̂] = z_0·x
    let root = tree.root();
    let lhs: T = tree.leaves().map(|l| tree.prob(l) * z.z[l][0] * f[l]).sum();
    let rhs = dot(&z.z[root], &s.endowment);
    let budget = (lhs - rhs).abs() / (T::one() + rhs.abs());

    Certificate {
        conditions: vec![
            attainable,
            Condition::new("terminal_marginal_utility", marginal.as_f64(), tol),
            Condition::new("terminal_bid", terminal.as_f64(), tol),
            Condition::new("budget", budget.as_f64(), tol),
        ],
        trade_violations: trades.violations,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Superdifferential<T> {
    pub h: Vec<T>,
    pub conditions: Vec<Condition>,
}

impl<T> Superdifferential<T> {
    pub fn ok(&self) -> bool {
        self.conditions.iter().all(|c| c.passed)
    }
}

/// Root multipliers of the solve, with the bounds every supergradient obeys.
pub fn value_superdifferential<T: Real>(s: &MarketScenario<T>, r: &SolveReport<T>) -> Result<Superdifferential<T>, ShadowError> {
    if !(r.gap <= T::lit(SolveOptions::default().tol_gap) * (T::one() + r.value.abs())) {
        return Err(ShadowError::NotOptimal { gap: r.gap.as_f64() });
    }
    let tree = &s.tree;
    let d = s.dim();
    let h = r.superdifferential.clone();
    let f = &r.strategy.payoff;
    let tol = CERTIFY_TOL;

    // E[U'(f̂)/π^{i1}_T]: the value of one more unit of i kept to the end and sold
    let mut lower_gap = T::zero();
    for i in 0..d {
        let bound: T = tree.leaves().map(|l| tree.prob(l) * s.utility.d1(f[l]) / s.matrix(l).get(i, 0)).sum();
        lower_gap = lower_gap.max((bound - h[i]) / (T::one() + bound.abs()));
    }
    let m = s.matrix(tree.root());
    let scale = h.iter().fold(T::zero(), |a, v| a.max(v.abs()));
    let mut outside = T::zero();
    for i in 0..d {
        outside = outside.max(-h[i] / scale);
        for j in 0..d {
            outside = outside.max((h[j] - m.get(i, j) * h[i]) / scale);
        }
    }
    let hx = dot(&h, &s.endowment);
    let euf: T = tree.leaves().map(|l| tree.prob(l) * s.utility.d1(f[l]) * f[l]).sum();
    let identity = (hx - euf).abs() / (T::one() + hx.abs());
    Ok(Superdifferential {
        h,
        conditions: vec![
            Condition::new("terminal_value_bound", lower_gap.max(T::zero()).as_f64(), tol),
            Condition::new("polar", outside.as_f64(), tol),
            Condition::new("euler", identity.as_f64(), tol),
        ],
    })
}
