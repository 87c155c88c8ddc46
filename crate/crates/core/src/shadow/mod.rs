//! Consistent price systems, shadow prices and the diagnostics around them.

mod arbitrage;
mod certify;
mod deflation;
mod extract;
mod frictionless;
mod pins;
mod verify;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::optimize::SolveError;
use crate::scalar::Real;

pub use arbitrage::{detect_arbitrage, ArbitrageOutcome, ArbitrageStrategy};
pub use certify::{certify_shadow, certify_shadow_with, value_superdifferential, CERTIFY_TOL, Certificate, Condition, Superdifferential};
pub use deflation::{check_domination, check_supermartingale_deflation, DeflationReport, DEFLATION_TOL};
pub use extract::{extract_shadow, extract_shadow_with, CrossCheck, ExtractOptions, FD_STEPS};
pub use frictionless::{frictionless_matrices, frictionless_solve, frictionless_solve_with, shadow_prices};
pub use pins::{
    find_pinned_price_system, find_scps, pin_constraints, Pin, PinSet, PinnedOutcome, RowLabel, ScpsResult,
    ZeroMarginCertificate, DEFAULT_PIN_TOL, MARGIN_TOL,
};
pub use verify::{verify_price_system, PriceViolation, VerificationReport, VERIFY_TOL};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PriceKind {
    Martingale,
    Supermartingale,
}

/// A positive process `z` on the tree, one vector per node (storage order).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PriceSystem<T> {
    pub z: Vec<Vec<T>>,
    pub kind: PriceKind,
    /// Largest `δ` with `π^{ij} z^i - z^j ≥ δ z^i` for all `i ≠ j`; zero when
    /// some leg is frictionless or the system touches the boundary.
    pub strict_margin: T,
}

impl<T: Real> PriceSystem<T> {
    /// `S^z = z / z¹`, asset 1 as numéraire.
    pub fn prices(&self) -> Vec<Vec<T>> {
        self.z.iter().map(|z| z.iter().map(|v| *v / z[0]).collect()).collect()
    }

    pub fn scaled(&self, a: T) -> Self {
        Self { z: self.z.iter().map(|z| z.iter().map(|v| *v * a).collect()).collect(), ..self.clone() }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ShadowError {
    #[error("dual and finite-difference marginal values disagree at node {node}, asset {asset}: {dual} vs {fd}")]
    CrossCheckFailure { node: u64, asset: usize, dual: f64, fd: f64 },
    #[error("solve report has gap {gap:e}, above tolerance")]
    NotOptimal { gap: f64 },
    #[error("shadow extraction requires the no_short mode")]
    UnsupportedMode,
    #[error(transparent)]
    Solve(#[from] SolveError),
}
