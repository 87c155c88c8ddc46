use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{EventTree, MarketScenario, Mode, ScenarioError, TreeNode};
use crate::json::render;
use crate::market::BidAskMatrix;
use crate::scalar::Real;
use crate::utility::{UtilityKind, UtilitySpec};

pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawUtility {
    kind: UtilityKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    p: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    scale: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    shift: Option<f64>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawNode {
    id: u64,
    time: usize,
    parent: Option<u64>,
    prob: f64,
    pi: Vec<Vec<f64>>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawScenario {
    version: u32,
    d: usize,
    mode: Mode,
    utility: RawUtility,
    endowment: Vec<f64>,
    nodes: Vec<RawNode>,
}

pub fn parse_scenario<T: Real>(text: &str) -> Result<MarketScenario<T>, ScenarioError> {
    let raw: RawScenario = serde_json::from_str(text).map_err(|e| ScenarioError::Parse(e.to_string()))?;
    if raw.version != FORMAT_VERSION {
        return Err(ScenarioError::Parse(format!("unsupported version {}", raw.version)));
    }
    if raw.endowment.len() != raw.d {
        return Err(ScenarioError::Validation { node: None, message: "endowment length differs from d".into() });
    }
    let mut utility = match raw.utility.kind {
        UtilityKind::Log => {
            if raw.utility.p.is_some() {
                return Err(ScenarioError::Parse("log utility takes no exponent".into()));
            }
            UtilitySpec::log()
        }
        UtilityKind::Power => {
            let p = raw.utility.p.ok_or_else(|| ScenarioError::Parse("power utility needs p".into()))?;
            UtilitySpec::power(T::lit(p)).map_err(|e| ScenarioError::Parse(e.to_string()))?
        }
    };
    if raw.utility.scale.is_some() || raw.utility.shift.is_some() {
        let a = T::lit(raw.utility.scale.unwrap_or(1.0));
        let b = T::lit(raw.utility.shift.unwrap_or(0.0));
        utility = utility.affine(a, b).map_err(|e| ScenarioError::Parse(e.to_string()))?;
    }

    let mut matrices = Vec::with_capacity(raw.nodes.len());
    let mut nodes = Vec::with_capacity(raw.nodes.len());
    for n in raw.nodes {
        if n.pi.len() != raw.d {
            return Err(ScenarioError::Validation { node: Some(n.id), message: "matrix size differs from d".into() });
        }
        let rows = n.pi.iter().map(|r| r.iter().map(|v| T::lit(*v)).collect()).collect();
        let m = BidAskMatrix::new(rows)
            .map_err(|e| ScenarioError::Validation { node: Some(n.id), message: e.to_string() })?;
        matrices.push((n.id, m));
        nodes.push(TreeNode { id: n.id, time: n.time, parent: n.parent, prob: T::lit(n.prob) });
    }
    let tree = EventTree::new(nodes)?;
    matrices.sort_by_key(|(id, _)| tree.index_of(*id).expect("node indexed"));
    let bid_ask = matrices.into_iter().map(|(_, m)| m).collect();
    let endowment = raw.endowment.iter().map(|v| T::lit(*v)).collect();
    MarketScenario::new(tree, bid_ask, endowment, utility, raw.mode)
}

pub fn scenario_to_string<T: Real>(s: &MarketScenario<T>) -> String {
    let u = &s.utility;
    let raw = RawScenario {
        version: FORMAT_VERSION,
        d: s.dim(),
        mode: s.mode,
        utility: RawUtility {
            kind: u.kind,
            p: u.power_exponent().map(|p| p.as_f64()),
            scale: (u.scale != T::one() || u.shift != T::zero()).then(|| u.scale.as_f64()),
            shift: (u.scale != T::one() || u.shift != T::zero()).then(|| u.shift.as_f64()),
        },
        endowment: s.endowment.iter().map(|v| v.as_f64()).collect(),
        nodes: {
            let mut order: Vec<usize> = (0..s.tree.len()).collect();
            order.sort_by_key(|k| s.tree.id(*k));
            order
                .into_iter()
                .map(|k| {
                    let n = s.tree.node(k);
                    RawNode {
                        id: n.id,
                        time: n.time,
                        parent: n.parent,
                        prob: n.prob.as_f64(),
                        pi: s.matrix(k).rows().iter().map(|r| r.iter().map(|v| v.as_f64()).collect()).collect(),
                    }
                })
                .collect()
        },
    };
    render(&raw).expect("scenario serializes")
}

pub fn load_scenario<T: Real>(path: impl AsRef<Path>) -> Result<MarketScenario<T>, ScenarioError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| ScenarioError::Parse(format!("{}: {e}", path.display())))?;
    parse_scenario(&text)
}

pub fn save_scenario<T: Real>(s: &MarketScenario<T>, path: impl AsRef<Path>) -> std::io::Result<()> {
    std::fs::write(path, scenario_to_string(s))
}

#[cfg(test)]
mod tests {
    use super::*;

    const SAMPLE: &str = r#"{
        "version": 1, "d": 2, "mode": "no_short",
        "utility": {"kind": "power", "p": 0.5},
        "endowment": [1, 0],
        "nodes": [
            {"id": 2, "time": 1, "parent": 0, "prob": 0.7, "pi": [[1, 2.5], [0.5, 1]]},
            {"id": 0, "time": 0, "parent": null, "prob": 1, "pi": [[1, 3], [0.5, 1]]},
            {"id": 1, "time": 1, "parent": 0, "prob": 0.3, "pi": [[1, 4], [0.5, 1]]}
        ]
    }"#;

    #[test]
    fn parses_and_round_trips() {
        let s: MarketScenario<f64> = parse_scenario(SAMPLE).unwrap();
        assert_eq!(s.tree.len(), 3);
        let k = s.tree.index_of(2).unwrap();
        assert_eq!(s.matrix(k).get(0, 1), 2.5);
        let text = scenario_to_string(&s);
        let back: MarketScenario<f64> = parse_scenario(&text).unwrap();
        assert_eq!(back, s);
        assert_eq!(scenario_to_string(&back), text);
    }

    #[test]
    fn reports_offending_node() {
        let bad = SAMPLE.replace("[[1, 2.5], [0.5, 1]]", "[[1, 2.5], [0.5, 2]]");
        let err = parse_scenario::<f64>(&bad).unwrap_err();
        assert!(matches!(err, ScenarioError::Validation { node: Some(2), .. }), "{err}");
        let bad = SAMPLE.replace("0.7", "0.6");
        assert!(matches!(parse_scenario::<f64>(&bad), Err(ScenarioError::Validation { node: Some(0), .. })));
        assert!(matches!(parse_scenario::<f64>("{"), Err(ScenarioError::Parse(_))));
    }
}
