//! JSON circuit files.
//!
//! ```json
//! {
//!   "format": "tbn-circuit",
//!   "version": 1,
//!   "manifest": {
//!     "params": [{"name": "p(A=a)", "value": 0.6, "trainable": true, "role": "probability", "row": 0}, ...],
//!     "evidence": [{"variable": "A", "state": "a"}, ...]
//!   },
//!   "query": {"variable": "B", "states": ["b", "not_b"]},
//!   "nodes": [
//!     [0, "param", 0],
//!     [1, "evidence", 0],
//!     [2, "mul", null, 0, 1],
//!     ...
//!   ],
//!   "outputs": [15, 16]
//! }
//! ```
//!
//! Each node is `[id, kind, payload, child ids...]` with ids equal to the
//! node's position, so children always precede parents. Payloads: the value
//! of a `const`, the parameter index of a `param`, the slot index of an
//! `evidence` leaf, the slope of a `sigsel`, and `null` otherwise. Nodes are
//! written one per line, so output is byte-stable.

use serde::Deserialize;
use serde_json::Value;

use super::{Circuit, EvidenceSlot, NodeId, NodeKind, ParamId, ParamSpec, QueryInfo, SlotId};
use crate::error::{Error, Result};

pub const FORMAT_TAG: &str = "tbn-circuit";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct CircuitFile {
    format: String,
    version: u32,
    manifest: Manifest,
    query: QueryInfo,
    nodes: Vec<Vec<Value>>,
    outputs: Vec<u32>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct Manifest {
    params: Vec<ParamSpec>,
    evidence: Vec<EvidenceSlot>,
}

fn json<T: serde::Serialize + ?Sized>(v: &T) -> String {
    serde_json::to_string(v).expect("serializing plain data cannot fail")
}

pub fn to_json(c: &Circuit) -> String {
    let mut out = String::new();
    out.push_str("{\n");
    out.push_str(&format!("  \"format\": {},\n", json(FORMAT_TAG)));
    out.push_str(&format!("  \"version\": {FORMAT_VERSION},\n"));
    out.push_str("  \"manifest\": {\n    \"params\": [");
    let params: Vec<String> = c.params().iter().map(|p| format!("\n      {}", json(p))).collect();
    out.push_str(&params.join(","));
    out.push_str(if params.is_empty() { "],\n" } else { "\n    ],\n" });
    out.push_str("    \"evidence\": [");
    let slots: Vec<String> = c
        .evidence_slots()
        .iter()
        .map(|s| format!("\n      {}", json(s)))
        .collect();
    out.push_str(&slots.join(","));
    out.push_str(if slots.is_empty() { "]\n  },\n" } else { "\n    ]\n  },\n" });
    out.push_str(&format!("  \"query\": {},\n", json(c.query())));
    out.push_str("  \"nodes\": [");
    let nodes: Vec<String> = c
        .node_ids()
        .map(|n| {
            let payload = match c.kind(n) {
                NodeKind::Const(v) => json(&v),
                NodeKind::Param(p) => p.0.to_string(),
                NodeKind::Evidence(s) => s.0.to_string(),
                NodeKind::SigSel { gamma } => json(&gamma),
                _ => "null".to_string(),
            };
            let mut line = format!("\n    [{}, \"{}\", {payload}", n.0, c.kind(n).name());
            for ch in c.children(n) {
                line.push_str(&format!(", {}", ch.0));
            }
            line.push(']');
            line
        })
        .collect();
    out.push_str(&nodes.join(","));
    out.push_str("\n  ],\n");
    let outputs: Vec<String> = c.outputs().iter().map(|o| o.0.to_string()).collect();
    out.push_str(&format!("  \"outputs\": [{}]\n}}\n", outputs.join(", ")));
    out
}

pub fn from_json(text: &str) -> Result<Circuit> {
    let de = &mut serde_json::Deserializer::from_str(text);
    let file: CircuitFile = serde_path_to_error::deserialize(de).map_err(|e| Error::Parse {
        locus: format!(
            "line {} column {} (field `{}`)",
            e.inner().line(),
            e.inner().column(),
            e.path()
        ),
        message: e.inner().to_string(),
    })?;
    if file.format != FORMAT_TAG {
        return Err(parse_err("format", format!("expected `{FORMAT_TAG}`, got `{}`", file.format)));
    }
    if file.version != FORMAT_VERSION {
        return Err(parse_err(
            "version",
            format!("unsupported version {} (expected {FORMAT_VERSION})", file.version),
        ));
    }
    let count = file.nodes.len();
    let mut kinds = Vec::with_capacity(count);
    let mut child_lists = Vec::with_capacity(count);
    for (i, node) in file.nodes.iter().enumerate() {
        let at = format!("nodes[{i}]");
        let err = |m: String| parse_err(&at, m);
        if node.len() < 3 {
            return Err(err("a node is [id, kind, payload, children...]".into()));
        }
        let id = node[0].as_u64().ok_or_else(|| err("id must be an integer".into()))?;
        if id != i as u64 {
            return Err(err(format!("id {id} does not match position {i}")));
        }
        let kind_name = node[1].as_str().ok_or_else(|| err("kind must be a string".into()))?;
        let payload = &node[2];
        let index = |what: &str| -> Result<u32> {
            payload
                .as_u64()
                .and_then(|v| u32::try_from(v).ok())
                .ok_or_else(|| err(format!("{what} payload must be an index")))
        };
        let number = |what: &str| -> Result<f64> {
            payload
                .as_f64()
                .ok_or_else(|| err(format!("{what} payload must be a number")))
        };
        let kind = match kind_name {
            "const" => NodeKind::Const(number("const")?),
            "param" => NodeKind::Param(ParamId(index("param")?)),
            "evidence" => NodeKind::Evidence(SlotId(index("evidence")?)),
            "add" => NodeKind::Add,
            "mul" => NodeKind::Mul,
            "test" => NodeKind::Test,
            "sigsel" => NodeKind::SigSel {
                gamma: number("sigsel")?,
            },
            "div" => NodeKind::Div,
            other => return Err(err(format!("unknown node kind `{other}`"))),
        };
        if kind.arity() != Some(0) && !matches!(kind, NodeKind::SigSel { .. }) && !payload.is_null() {
            return Err(err(format!("{kind_name} nodes take a null payload")));
        }
        let mut kids = Vec::with_capacity(node.len() - 3);
        for v in &node[3..] {
            let c = v.as_u64().ok_or_else(|| err("child ids must be integers".into()))?;
            if c >= count as u64 {
                return Err(err(format!("child {c} does not exist")));
            }
            if c >= i as u64 {
                return Err(err(format!("child {c} is not defined before node {i}")));
            }
            kids.push(NodeId(c as u32));
        }
        if let Some(a) = kind.arity() {
            if kids.len() != a {
                return Err(err(format!("{kind_name} takes {a} children, got {}", kids.len())));
            }
        }
        kinds.push(kind);
        child_lists.push(kids);
    }
    let outputs = file
        .outputs
        .iter()
        .map(|&o| {
            if (o as usize) < count {
                Ok(NodeId(o))
            } else {
                Err(parse_err("outputs", format!("output {o} does not exist")))
            }
        })
        .collect::<Result<Vec<_>>>()?;
    Circuit::from_parts(
        kinds,
        child_lists,
        file.manifest.params,
        file.manifest.evidence,
        file.query,
        outputs,
    )
}

fn parse_err(locus: &str, message: String) -> Error {
    Error::Parse {
        locus: locus.to_string(),
        message,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuit::{CircuitBuilder, ParamRole};

    fn sample() -> Circuit {
        let mut b = CircuitBuilder::new();
        let p = b.param(ParamSpec {
            name: "p(A=\"a\")".into(),
            value: 0.1 + 0.2,
            trainable: true,
            role: ParamRole::Probability { row: 0 },
        });
        let t = b.param(ParamSpec {
            name: "T".into(),
            value: 0.5,
            trainable: false,
            role: ParamRole::Threshold,
        });
        let e = b.declare_evidence("A", &["a".into(), "not_a".into()]);
        let k = b.constant(-2.5);
        let m = b.mul(&[p, e[0], k]);
        let d = b.div(m, e[1]);
        let s = b.sigsel(d, t, p, k, 16.0);
        let x = b.test(s, t, e[0], e[1]);
        b.finish(
            &[x, s],
            QueryInfo {
                variable: "Q".into(),
                states: vec!["q".into(), "not_q".into()],
            },
        )
        .unwrap()
    }

    #[test]
    fn round_trip_is_exact() {
        let c = sample();
        let text = to_json(&c);
        let back = from_json(&text).unwrap();
        assert_eq!(back, c);
        assert_eq!(to_json(&back), text);
    }

    #[test]
    fn forward_reference_is_rejected() {
        let text = to_json(&sample()).replace("[5, \"mul\", null, 0, 2, 4]", "[5, \"mul\", null, 0, 2, 6]");
        assert!(text.contains("0, 2, 6"), "{text}");
        let msg = from_json(&text).unwrap_err().to_string();
        assert!(msg.contains("not defined before"), "{msg}");
    }

    #[test]
    fn malformed_files() {
        assert!(from_json("{").is_err());
        let c = to_json(&sample());
        assert!(from_json(&c.replace("\"version\": 1", "\"version\": 9")).is_err());
        assert!(from_json(&c.replace("\"outputs\": [", "\"outputs\": [99, ")).is_err());
        assert!(from_json(&c.replace("\"mul\"", "\"pow\"")).is_err());
    }
}
