//! Command-line front end.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::{json, Value};

use crate::json::{render, to_text};
use crate::market::liquidation_value;
use crate::optimize::{brute_force_value, solve_with, SolveError, SolveOptions, SolveReport};
use crate::scenario::{build_counterexample, load_scenario, scenario_to_string, MarketScenario, Mode, ScenarioError};
use crate::shadow::{
    certify_shadow_with, detect_arbitrage, extract_shadow_with, find_pinned_price_system, find_scps,
    frictionless_solve_with, pin_constraints, value_superdifferential, verify_price_system, ExtractOptions,
    PinnedOutcome, PriceKind, PriceSystem, ShadowError, DEFAULT_PIN_TOL, MARGIN_TOL, VERIFY_TOL,
};
use crate::utility::UtilitySpec;

#[derive(Debug, Parser)]
#[command(name = "shadowprice", version, about = "Utility maximization and shadow prices under proportional transaction costs")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    #[command(flatten)]
    pub opts: RunOptions,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// Check a scenario file
    Validate,
    /// Maximize expected utility
    Solve,
    /// Extract, verify and certify the shadow price of the optimum
    Shadow,
    /// Price pins implied by the optimal trades
    Pins,
    /// Decide whether a price system satisfies the optimal pins
    Diagnose,
    /// Search for a strictly consistent price system
    Scps,
    /// Arbitrage test for a frictionless scenario
    Arbitrage,
    /// Write the counterexample market as a scenario file
    Counterexample,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Text,
    Structured,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum UtilityArg {
    Log,
    Power,
}

#[derive(Debug, Clone, Args)]
pub struct RunOptions {
    /// Scenario file; without it the counterexample from --n/--kmax is used
    #[arg(long, global = true)]
    pub input: Option<PathBuf>,
    /// Report destination (standard output when absent)
    #[arg(long, global = true)]
    pub output: Option<PathBuf>,
    #[arg(long, global = true, default_value_t = 10)]
    pub n: u32,
    #[arg(long, global = true, default_value_t = 20)]
    pub kmax: u32,
    /// Comma-separated initial holdings
    #[arg(long, global = true, value_delimiter = ',', allow_hyphen_values = true)]
    pub endowment: Option<Vec<f64>>,
    #[arg(long, global = true, value_parser = parse_mode)]
    pub mode: Option<Mode>,
    #[arg(long, global = true, value_enum)]
    pub utility: Option<UtilityArg>,
    /// Power utility exponent
    #[arg(long, global = true, allow_hyphen_values = true)]
    pub p: Option<f64>,
    /// Lattice step of the brute-force cross-check in `solve`
    #[arg(long, global = true)]
    pub grid: Option<f64>,
    #[arg(long = "tol-gap", global = true, default_value_t = 1e-7)]
    pub tol_gap: f64,
    #[arg(long = "tol-check", global = true, default_value_t = 1e-6)]
    pub tol_check: f64,
    #[arg(long, global = true, value_enum, default_value_t = Format::Structured)]
    pub format: Format,
}

fn parse_mode(s: &str) -> Result<Mode, String> {
    s.parse()
}

/// Failure classes mapped to exit statuses 1 and 2.
#[derive(Debug)]
pub enum CliError {
    Validation(String),
    Solver(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Validation(_) => 1,
            Self::Solver(_) => 2,
        }
    }

    pub fn message(&self) -> &str {
        match self {
            Self::Validation(m) | Self::Solver(m) => m,
        }
    }
}

impl From<ScenarioError> for CliError {
    fn from(e: ScenarioError) -> Self {
        Self::Validation(e.to_string())
    }
}

impl From<SolveError> for CliError {
    fn from(e: SolveError) -> Self {
        Self::Solver(e.to_string())
    }
}

impl From<ShadowError> for CliError {
    fn from(e: ShadowError) -> Self {
        match e {
            ShadowError::UnsupportedMode => Self::Validation(e.to_string()),
            _ => Self::Solver(e.to_string()),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
struct Tolerances {
    tol_gap: f64,
    tol_check: f64,
    pin_tol: f64,
    verify_tol: f64,
    margin_tol: f64,
}

#[derive(Debug, Serialize)]
struct NodeVector {
    node: u64,
    values: Vec<f64>,
}

fn by_node(s: &MarketScenario<f64>, rows: &[Vec<f64>]) -> Vec<NodeVector> {
    rows.iter().enumerate().map(|(k, v)| NodeVector { node: s.tree.id(k), values: v.clone() }).collect()
}

impl RunOptions {
    fn tolerances(&self) -> Tolerances {
        Tolerances {
            tol_gap: self.tol_gap,
            tol_check: self.tol_check,
            pin_tol: DEFAULT_PIN_TOL,
            verify_tol: VERIFY_TOL,
            margin_tol: MARGIN_TOL,
        }
    }

    fn solve_options(&self) -> SolveOptions {
        SolveOptions { tol_gap: self.tol_gap, ..SolveOptions::default() }
    }

    fn utility_spec(&self) -> Result<Option<UtilitySpec<f64>>, CliError> {
        match (self.utility, self.p) {
            (None, None) => Ok(None),
            (Some(UtilityArg::Log), _) => Ok(Some(UtilitySpec::log())),
            (Some(UtilityArg::Power), None) => Err(CliError::Validation("--utility power needs --p".into())),
            (_, Some(p)) => UtilitySpec::power(p).map(Some).map_err(|e| CliError::Validation(e.to_string())),
        }
    }

    fn check(&self) -> Result<(), CliError> {
        for (name, v) in [("--tol-gap", self.tol_gap), ("--tol-check", self.tol_check)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(CliError::Validation(format!("{name} must be strictly positive")));
            }
        }
        if let Some(g) = self.grid {
            if !(g > 0.0 && g.is_finite()) {
                return Err(CliError::Validation("--grid must be strictly positive".into()));
            }
        }
        Ok(())
    }

    /// The input scenario with command-line overrides, or the counterexample.
    fn scenario(&self) -> Result<MarketScenario<f64>, CliError> {
        let utility = self.utility_spec()?;
        let Some(path) = &self.input else {
            let x = self.endowment.clone().unwrap_or_else(|| vec![4.0, -1.0]);
            let mode = self.mode.unwrap_or(Mode::Unconstrained);
            return Ok(build_counterexample(self.n, self.kmax, &x, mode, utility.unwrap_or_else(UtilitySpec::log))?);
        };
        let mut s = load_scenario(path)?;
        if let Some(u) = utility {
            s = s.with_utility(u);
        }
        if let Some(x) = &self.endowment {
            if x.len() != s.dim() {
                return Err(CliError::Validation(format!("--endowment has {} entries, scenario has {} assets", x.len(), s.dim())));
            }
            s = s.with_endowment(x.clone())?;
        }
        if let Some(m) = self.mode {
            s = s.with_mode(m)?;
        }
        Ok(s)
    }
}

fn solve_report(s: &MarketScenario<f64>, r: &SolveReport<f64>) -> Value {
    let leaves: Vec<Value> = s.tree.leaves().map(|l| json!({"node": s.tree.id(l), "payoff": r.strategy.payoff[l]})).collect();
    json!({
        "value": r.value,
        "gap": r.gap,
        "polar_gap": r.polar_gap,
        "iterations": r.iterations,
        "holdings": by_node(s, &r.strategy.holdings),
        "payoff": leaves,
        "node_duals": by_node(s, &r.node_duals),
        "superdifferential": r.superdifferential,
    })
}

fn price_system(s: &MarketScenario<f64>, z: &PriceSystem<f64>) -> Value {
    json!({
        "kind": z.kind,
        "strict_margin": z.strict_margin,
        "z": by_node(s, &z.z),
        "prices": by_node(s, &z.prices()),
    })
}

fn kind_for(mode: Mode) -> PriceKind {
    match mode {
        Mode::Unconstrained => PriceKind::Martingale,
        Mode::NoShort => PriceKind::Supermartingale,
    }
}

fn kind_name(kind: PriceKind) -> &'static str {
    match kind {
        PriceKind::Martingale => "martingale",
        PriceKind::Supermartingale => "supermartingale",
    }
}

/// Builds the report body of a command; the caller adds the header.
fn dispatch(command: Command, o: &RunOptions) -> Result<Value, CliError> {
    o.check()?;
    if command == Command::Counterexample {
        let s = o.scenario()?;
        return Ok(serde_json::from_str(&scenario_to_string(&s)).expect("scenario serializes to JSON"));
    }
    let s = o.scenario()?;
    let opts = o.solve_options();
    match command {
        Command::Validate => Ok(json!({
            "valid": true,
            "nodes": s.tree.len(),
            "assets": s.dim(),
            "horizon": s.tree.horizon(),
            "mode": s.mode.as_str(),
            "liquidation_value": liquidation_value(s.matrix(s.tree.root()), &s.endowment),
        })),
        Command::Solve => {
            let r = solve_with(&s, &opts)?;
            let mut out = solve_report(&s, &r);
            if let Some(grid) = o.grid {
                let b = brute_force_value(&s, grid)?;
                out["brute_force"] = json!({"grid": grid, "value": b, "difference": r.value - b});
            }
            Ok(out)
        }
        Command::Shadow => {
            let r = solve_with(&s, &opts)?;
            let eopts = ExtractOptions { tol_gap: o.tol_gap, ..ExtractOptions::default() };
            let z = extract_shadow_with(&s, &r, &eopts)?;
            let verification = verify_price_system(&s, &z);
            let certificate = certify_shadow_with(&s, &z, &r, o.tol_check);
            let h = value_superdifferential(&s, &r)?;
            let (fvalue, ferror) = match frictionless_solve_with(&s, &z, &opts) {
                Ok(f) => (Some(f.value), None),
                Err(e) => (None, Some(e.to_string())),
            };
            let matches = fvalue.is_some_and(|v| (v - r.value).abs() <= o.tol_check);
            Ok(json!({
                "value": r.value,
                "shadow": price_system(&s, &z),
                "verification": verification,
                "certificate": certificate,
                "superdifferential": h,
                "frictionless": {"value": fvalue, "error": ferror, "matches_value": matches},
                "is_shadow_price": verification.ok() && certificate.ok() && matches,
            }))
        }
        Command::Pins => {
            let r = solve_with(&s, &opts)?;
            Ok(json!({"value": r.value, "pins": pin_constraints(&s, &r, DEFAULT_PIN_TOL).pins}))
        }
        Command::Diagnose => {
            let r = solve_with(&s, &opts)?;
            let pins = pin_constraints(&s, &r, DEFAULT_PIN_TOL);
            let kind = kind_for(s.mode);
            let out = find_pinned_price_system(&s, &pins, kind);
            let (verdict, detail) = match &out {
                PinnedOutcome::Feasible { .. } => (
                    format!("pinned {} system exists", kind_name(kind)),
                    "a price system of the required kind satisfies the pins of the optimal trades",
                ),
                PinnedOutcome::ZeroMargin(_) => (
                    format!("no shadow price: pinned {} system infeasible", kind_name(kind)),
                    "no price system of the required kind satisfies the pins of the unique optimal payoff",
                ),
            };
            let outcome = match &out {
                PinnedOutcome::Feasible { system, delta } => json!({"delta": delta, "system": price_system(&s, system)}),
                PinnedOutcome::ZeroMargin(c) => json!({"certificate": c}),
            };
            Ok(json!({"value": r.value, "pins": pins.pins, "verdict": verdict, "detail": detail, "outcome": outcome}))
        }
        Command::Scps => {
            let r = find_scps(&s);
            Ok(json!({
                "found": r.system.is_some(),
                "delta": r.delta,
                "kind": kind_name(kind_for(s.mode)),
                "system": r.system.as_ref().map(|z| price_system(&s, z)),
            }))
        }
        Command::Arbitrage => {
            let mut prices = Vec::with_capacity(s.tree.len());
            for k in 0..s.tree.len() {
                let m = s.matrix(k);
                if (1..s.dim()).any(|a| !m.frictionless_leg(0, a)) {
                    return Err(CliError::Validation(format!("node {}: arbitrage needs a frictionless scenario", s.tree.id(k))));
                }
                prices.push((0..s.dim()).map(|a| m.get(0, a)).collect::<Vec<f64>>());
            }
            Ok(json!({"prices": by_node(&s, &prices), "result": detect_arbitrage(&s, &prices, s.mode)}))
        }
        Command::Counterexample => unreachable!("handled above"),
    }
}

fn command_name(c: Command) -> &'static str {
    match c {
        Command::Validate => "validate",
        Command::Solve => "solve",
        Command::Shadow => "shadow",
        Command::Pins => "pins",
        Command::Diagnose => "diagnose",
        Command::Scps => "scps",
        Command::Arbitrage => "arbitrage",
        Command::Counterexample => "counterexample",
    }
}

/// Runs one command and returns the exit status with the rendered report.
pub fn run(cli: &Cli) -> (i32, String) {
    let o = &cli.opts;
    let (code, body) = match dispatch(cli.command, o) {
        Ok(body) => (0, body),
        Err(e) => (e.exit_code(), json!({"error": e.message()})),
    };
    // a counterexample is written as a plain scenario file
    let report = if cli.command == Command::Counterexample && code == 0 {
        body
    } else {
        json!({
            "command": command_name(cli.command),
            "status": code,
            "tolerances": o.tolerances(),
            "report": body,
        })
    };
    let text = match o.format {
        Format::Structured => render(&report).expect("reports serialize"),
        Format::Text => to_text(&report),
    };
    (code, text)
}
