//! Utility maximization under proportional transaction costs on finite
//! event trees, and the shadow prices obtained from its dual.

pub mod cli;
pub mod json;
pub mod linalg;
pub mod lp;
pub mod market;
pub mod optimize;
pub mod scalar;
pub mod scenario;
pub mod shadow;
pub mod utility;

pub use scalar::Real;

pub type BidAskMatrix = market::BidAskMatrix<f64>;
pub type EventTree = scenario::EventTree<f64>;
pub type Scenario = scenario::MarketScenario<f64>;
pub type Strategy = scenario::Strategy<f64>;
pub type Utility = utility::UtilitySpec<f64>;
pub type SolveReport = optimize::SolveReport<f64>;
pub type PriceSystem = shadow::PriceSystem<f64>;
