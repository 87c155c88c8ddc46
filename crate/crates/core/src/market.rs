//! Bid-ask matrices, solvency cones and their polars for one trading date.
//!
//! `pi[i][j]` is the number of units of asset `i` paid for one unit of asset
//! `j`. The solvency cone `K` is generated by the unit vectors and the
//! vectors `pi[i][j] e_i - e_j`; `-K` is the set of holdings changes that can
//! be obtained at zero cost.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::lp::{LinearProgram, LpStatus, Relation};
use crate::scalar::{le_rel, Real};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MarketError {
    #[error("bid-ask matrix is empty or not square")]
    NotSquare,
    #[error("entry ({i},{j}) is not a positive finite number")]
    NonPositiveEntry { i: usize, j: usize },
    #[error("diagonal entry ({i},{i}) differs from 1")]
    DiagonalNotOne { i: usize },
    #[error("pi[{i}][{j}] exceeds pi[{i}][{k}] * pi[{k}][{j}]")]
    TriangleViolation { i: usize, j: usize, k: usize },
    #[error("price vector and cost matrix have inconsistent sizes or nonpositive prices")]
    BadPrices,
}

/// Relative slack used when checking `pi[i][j] <= pi[i][k] pi[k][j]`.
pub const TRIANGLE_SLACK: f64 = 1e-12;

/// Default absolute tolerance of the membership program.
pub const MEMBERSHIP_TOL: f64 = 1e-9;

/// A validated bid-ask matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "T: Serialize", deserialize = "T: Deserialize<'de>"))]
pub struct BidAskMatrix<T> {
    d: usize,
    pi: Vec<T>,
}

impl<T: Real> BidAskMatrix<T> {
    /// Checks the three bid-ask axioms and wraps the matrix.
    pub fn new(rows: Vec<Vec<T>>) -> Result<Self, MarketError> {
        let d = rows.len();
        if d == 0 || rows.iter().any(|r| r.len() != d) {
            return Err(MarketError::NotSquare);
        }
        for (i, row) in rows.iter().enumerate() {
            for (j, v) in row.iter().enumerate() {
                if !(*v > T::zero()) || !v.is_finite() {
                    return Err(MarketError::NonPositiveEntry { i, j });
                }
            }
        }
        for (i, row) in rows.iter().enumerate() {
            if row[i] != T::one() {
                return Err(MarketError::DiagonalNotOne { i });
            }
        }
        let slack = T::lit(TRIANGLE_SLACK);
        for i in 0..d {
            for j in 0..d {
                for k in 0..d {
                    if !le_rel(rows[i][j], rows[i][k] * rows[k][j], slack) {
                        return Err(MarketError::TriangleViolation { i, j, k });
                    }
                }
            }
        }
        Ok(Self { d, pi: rows.into_iter().flatten().collect() })
    }

    /// `pi[i][j] = (1 + lambda[i][j]) S[j] / S[i]`.
    pub fn from_price_and_costs(prices: &[T], lambda: &[Vec<T>]) -> Result<Self, MarketError> {
        let d = prices.len();
        if d == 0 || lambda.len() != d || lambda.iter().any(|r| r.len() != d) {
            return Err(MarketError::BadPrices);
        }
        if prices.iter().any(|s| !(*s > T::zero()) || !s.is_finite()) {
            return Err(MarketError::BadPrices);
        }
        let rows = (0..d)
            .map(|i| {
                (0..d)
                    .map(|j| if i == j { T::one() } else { (T::one() + lambda[i][j]) * prices[j] / prices[i] })
                    .collect()
            })
            .collect();
        Self::new(rows)
    }

    /// Frictionless matrix `pi[i][j] = S[j] / S[i]`.
    pub fn frictionless(prices: &[T]) -> Result<Self, MarketError> {
        let d = prices.len();
        Self::from_price_and_costs(prices, &vec![vec![T::zero(); d]; d])
    }

    /// Two-asset matrix from a bid and an ask price of asset 2 in units of asset 1.
    pub fn two_asset(bid: T, ask: T) -> Result<Self, MarketError> {
        Self::new(vec![vec![T::one(), ask], vec![T::one() / bid, T::one()]])
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.d
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> T {
        self.pi[i * self.d + j]
    }

    pub fn rows(&self) -> Vec<Vec<T>> {
        self.pi.chunks(self.d).map(|r| r.to_vec()).collect()
    }

    /// Off-diagonal index pairs in row-major order; the trade variables.
    pub fn pairs(&self) -> Vec<(usize, usize)> {
        trade_pairs(self.d)
    }

    /// Whether the leg `i <-> j` carries no round-trip cost.
    pub fn frictionless_leg(&self, i: usize, j: usize) -> bool {
        self.get(i, j) * self.get(j, i) <= T::one() + T::lit(TRIANGLE_SLACK)
    }

    /// Holdings change of buying one unit of `j` with asset `i`: `e_j - pi[i][j] e_i`.
    pub fn trade_column(&self, i: usize, j: usize) -> Vec<T> {
        let mut col = vec![T::zero(); self.d];
        col[j] = T::one();
        col[i] = -self.get(i, j);
        col
    }
}

pub fn trade_pairs(d: usize) -> Vec<(usize, usize)> {
    (0..d).flat_map(|i| (0..d).filter(move |j| *j != i).map(move |j| (i, j))).collect()
}

/// Nonnegative exchanges plus free disposal.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TradeVector<T> {
    /// `buys[i][j]`: units of `j` bought by paying `pi[i][j]` units of `i` each.
    pub buys: Vec<Vec<T>>,
    pub disposals: Vec<T>,
}

impl<T: Real> TradeVector<T> {
    pub fn zero(d: usize) -> Self {
        Self { buys: vec![vec![T::zero(); d]; d], disposals: vec![T::zero(); d] }
    }

    /// Holdings change induced at the prices of `m`.
    pub fn change(&self, m: &BidAskMatrix<T>) -> Vec<T> {
        let d = m.dim();
        let mut delta = vec![T::zero(); d];
        for i in 0..d {
            for j in 0..d {
                if i == j {
                    continue;
                }
                let b = self.buys[i][j];
                delta[j] = delta[j] + b;
                delta[i] = delta[i] - m.get(i, j) * b;
            }
            delta[i] = delta[i] - self.disposals[i];
        }
        delta
    }

    pub fn volume(&self) -> T {
        self.buys.iter().flatten().copied().sum()
    }
}

/// Membership of `v` in `K(m)`, witnessed by a trade vector whose change is `-v`.
pub fn cone_decompose<T: Real>(m: &BidAskMatrix<T>, v: &[T], tol: T) -> Option<TradeVector<T>> {
    let d = m.dim();
    let pairs = m.pairs();
    let np = pairs.len();
    // variables: buys (np), disposals (d), residual slacks (2d)
    let mut lp = LinearProgram::new(np + 3 * d);
    for k in 0..np {
        lp.set_objective(k, -T::lit(1e-9));
    }
    for r in 0..2 * d {
        lp.set_objective(np + d + r, -T::one());
    }
    for row in 0..d {
        let mut coeffs = Vec::new();
        for (k, &(i, j)) in pairs.iter().enumerate() {
            if i == row {
                coeffs.push((k, m.get(i, j)));
            } else if j == row {
                coeffs.push((k, -T::one()));
            }
        }
        coeffs.push((np + row, T::one()));
        coeffs.push((np + d + 2 * row, T::one()));
        coeffs.push((np + d + 2 * row + 1, -T::one()));
        lp.add(coeffs, Relation::Eq, v[row]);
    }
    let sol = lp.solve();
    if sol.status != LpStatus::Optimal {
        return None;
    }
    let residual: T = sol.x[np + d..].iter().copied().sum();
    if residual > tol {
        return None;
    }
    let mut trade = TradeVector::zero(d);
    for (k, &(i, j)) in pairs.iter().enumerate() {
        trade.buys[i][j] = sol.x[k].max(T::zero());
    }
    for i in 0..d {
        trade.disposals[i] = sol.x[np + i].max(T::zero());
    }
    Some(trade)
}

pub fn cone_contains<T: Real>(m: &BidAskMatrix<T>, v: &[T], tol: T) -> bool {
    cone_decompose(m, v, tol).is_some()
}

/// `z ⪰ 0` and `pi[i][j] z[i] >= z[j]` for every pair, evaluated exactly.
pub fn polar_contains<T: Real>(m: &BidAskMatrix<T>, z: &[T]) -> bool {
    let d = m.dim();
    z.iter().all(|x| *x >= T::zero())
        && (0..d).all(|i| (0..d).all(|j| m.get(i, j) * z[i] >= z[j]))
}

/// Same as [`polar_contains`] with a relative slack on every inequality.
pub fn polar_contains_tol<T: Real>(m: &BidAskMatrix<T>, z: &[T], rel: T) -> bool {
    let d = m.dim();
    let scale = z.iter().fold(T::zero(), |a, x| a.max(x.abs()));
    z.iter().all(|x| *x >= -rel * scale)
        && (0..d).all(|i| (0..d).all(|j| z[j] <= m.get(i, j) * z[i] + rel * scale))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PolarPosition {
    Strict,
    Boundary,
    Outside,
    InteriorEmpty,
}

pub fn polar_strictly_contains<T: Real>(m: &BidAskMatrix<T>, z: &[T]) -> PolarPosition {
    let d = m.dim();
    for i in 0..d {
        for j in i + 1..d {
            if m.frictionless_leg(i, j) {
                return PolarPosition::InteriorEmpty;
            }
        }
    }
    if !polar_contains(m, z) {
        return PolarPosition::Outside;
    }
    let strict = z.iter().all(|x| *x > T::zero())
        && (0..d).all(|i| (0..d).all(|j| i == j || m.get(i, j) * z[i] > z[j]));
    if strict {
        PolarPosition::Strict
    } else {
        PolarPosition::Boundary
    }
}

/// Largest `a` with `v - a e_1` in `K(m)`: the value of `v` liquidated into asset 1.
pub fn liquidation_value<T: Real>(m: &BidAskMatrix<T>, v: &[T]) -> T {
    let d = m.dim();
    if d == 1 {
        return v[0];
    }
    let pairs = m.pairs();
    let np = pairs.len();
    let alpha = np + d;
    let mut lp = LinearProgram::new(np + d + 1);
    lp.set_objective(alpha, T::one());
    lp.set_free(alpha);
    for row in 0..d {
        let mut coeffs = Vec::new();
        for (k, &(i, j)) in pairs.iter().enumerate() {
            if i == row {
                coeffs.push((k, m.get(i, j)));
            } else if j == row {
                coeffs.push((k, -T::one()));
            }
        }
        coeffs.push((np + row, T::one()));
        if row == 0 {
            coeffs.push((alpha, T::one()));
        }
        lp.add(coeffs, Relation::Eq, v[row]);
    }
    let sol = lp.solve();
    match sol.status {
        LpStatus::Optimal => sol.x[alpha],
        _ => T::nan(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn m2() -> BidAskMatrix<f64> {
        BidAskMatrix::new(vec![vec![1.0, 3.0], vec![0.5, 1.0]]).unwrap()
    }

    #[test]
    fn validation_examples() {
        assert!(BidAskMatrix::new(vec![vec![1.0, 3.0], vec![0.5, 1.0]]).is_ok());
        assert_eq!(
            BidAskMatrix::new(vec![vec![1.0, 2.0], vec![1.0, 2.0]]),
            Err(MarketError::DiagonalNotOne { i: 1 })
        );
        let bad = vec![vec![1.0, 2.0, 10.0], vec![0.5, 1.0, 3.0], vec![0.1, 0.34, 1.0]];
        assert_eq!(BidAskMatrix::new(bad), Err(MarketError::TriangleViolation { i: 0, j: 2, k: 1 }));
        assert_eq!(
            BidAskMatrix::new(vec![vec![1.0, -1.0], vec![1.0, 1.0]]),
            Err(MarketError::NonPositiveEntry { i: 0, j: 1 })
        );
        assert_eq!(BidAskMatrix::<f64>::new(vec![vec![1.0, 1.0]]), Err(MarketError::NotSquare));
    }

    #[test]
    fn price_and_cost_construction() {
        let f = BidAskMatrix::<f64>::from_price_and_costs(&[1.0, 3.0], &[vec![0.0, 0.0], vec![0.0, 0.0]]).unwrap();
        assert_eq!(f.get(0, 1), 3.0);
        assert!((f.get(1, 0) - 1.0 / 3.0).abs() < 1e-15);
        let c = BidAskMatrix::<f64>::from_price_and_costs(&[1.0, 3.0], &[vec![0.0, 0.1], vec![0.0, 0.0]]).unwrap();
        assert!((c.get(0, 1) - 3.3).abs() < 1e-12);
        let h = BidAskMatrix::from_price_and_costs(&[1.0, 1.0], &[vec![0.0, 0.5], vec![0.5, 0.0]]).unwrap();
        assert_eq!(h.get(0, 1), 1.5);
        assert_eq!(h.get(1, 0), 1.5);
        // a cheap indirect route breaks axiom (iii)
        let lam = vec![vec![0.0, 0.0, 0.5], vec![0.0, 0.0, 0.0], vec![0.0, 0.0, 0.0]];
        assert!(matches!(
            BidAskMatrix::from_price_and_costs(&[1.0, 1.0, 1.0], &lam),
            Err(MarketError::TriangleViolation { .. })
        ));
    }

    #[test]
    fn cone_membership_examples() {
        let m = m2();
        let tol = MEMBERSHIP_TOL;
        assert!(cone_contains(&m, &[1.0, 0.0], tol));
        assert!(cone_contains(&m, &[3.0, -1.0], tol));
        // paying 2.9 for a unit that costs 3 is not solvent
        assert!(!cone_contains(&m, &[2.9, -1.0], tol));
        assert!(!cone_contains(&m, &[-1.0, 0.0], tol));
        let w = cone_decompose(&m, &[3.0, -1.0], tol).unwrap();
        let ch = w.change(&m);
        assert!((ch[0] + 3.0).abs() < 1e-9 && (ch[1] - 1.0).abs() < 1e-9);
    }

    #[test]
    fn polar_examples() {
        let m = m2();
        assert!(polar_contains(&m, &[1.0, 2.5]));
        assert!(!polar_contains(&m, &[1.0, 3.5]));
        assert!(polar_contains(&m, &[0.0, 0.0]));
        assert_eq!(polar_strictly_contains(&m, &[1.0, 2.5]), PolarPosition::Strict);
        assert_eq!(polar_strictly_contains(&m, &[1.0, 3.0]), PolarPosition::Boundary);
        assert_eq!(polar_strictly_contains(&m, &[1.0, 3.5]), PolarPosition::Outside);
        let f = BidAskMatrix::two_asset(3.0, 3.0).unwrap();
        assert_eq!(polar_strictly_contains(&f, &[1.0, 3.0]), PolarPosition::InteriorEmpty);
        assert_eq!(polar_strictly_contains(&f, &[1.0, 2.0]), PolarPosition::InteriorEmpty);
    }

    #[test]
    fn liquidation_examples() {
        let m = m2();
        assert!((liquidation_value(&m, &[4.0, -1.0]) - 1.0).abs() < 1e-12);
        assert!((liquidation_value(&m, &[1.0, 0.0]) - 1.0).abs() < 1e-12);
        assert!((liquidation_value(&m, &[0.0, 1.0]) - 2.0).abs() < 1e-12);
        assert!((liquidation_value(&m, &[0.0, -1.0]) + 3.0).abs() < 1e-12);
    }

    #[test]
    fn single_precision_matrix() {
        let m = BidAskMatrix::<f32>::new(vec![vec![1.0, 3.0], vec![0.5, 1.0]]).unwrap();
        assert!(polar_contains(&m, &[1.0f32, 2.5]));
        assert!((liquidation_value(&m, &[4.0f32, -1.0]) - 1.0).abs() < 1e-5);
    }
}
