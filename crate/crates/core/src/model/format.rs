//! JSON model files.
//!
//! ```json
//! {
//!   "variables": [{"name": "A", "states": ["a", "not_a"]}, ...],
//!   "cpts": [
//!     {"child": "A", "parents": [], "kind": "regular",
//!      "rows": [{"given": [], "probs": [0.6, 0.4]}]},
//!     {"child": "B", "parents": ["A"], "kind": "testing",
//!      "rows": [{"given": ["a"], "threshold": 0.5, "pos": [0.9, 0.1], "neg": [0.2, 0.8]}, ...]}
//!   ]
//! }
//! ```
//!
//! `given` lists one state label per parent, in parent order. Every parent
//! instantiation must appear exactly once; row order in the file is free.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::{Cpt, Node, TbnModel, VarId, Variable, NORMALIZATION_TOLERANCE};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, Default)]
pub struct LoadOptions {
    /// Rescale rows whose sum is off by more than the tolerance instead of rejecting them.
    pub renormalize: bool,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelFile {
    variables: Vec<VariableDecl>,
    cpts: Vec<CptBlock>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct VariableDecl {
    name: String,
    states: Vec<String>,
}

#[derive(Debug, Serialize, Deserialize, PartialEq, Eq, Clone, Copy)]
#[serde(rename_all = "lowercase")]
enum Kind {
    Regular,
    Testing,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CptBlock {
    child: String,
    #[serde(default)]
    parents: Vec<String>,
    kind: Kind,
    rows: Vec<Row>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Row {
    #[serde(default)]
    given: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    probs: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    threshold: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pos: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    neg: Option<Vec<f64>>,
}

pub fn load_model(text: &str) -> Result<TbnModel> {
    load_model_with(text, LoadOptions::default())
}

pub fn load_model_with(text: &str, options: LoadOptions) -> Result<TbnModel> {
    let de = &mut serde_json::Deserializer::from_str(text);
    let file: ModelFile = serde_path_to_error::deserialize(de).map_err(|e| {
        let inner = e.inner();
        Error::Parse {
            locus: format!(
                "line {} column {} (field `{}`)",
                inner.line(),
                inner.column(),
                e.path()
            ),
            message: inner.to_string(),
        }
    })?;
    build(file, options)
}

fn build(file: ModelFile, options: LoadOptions) -> Result<TbnModel> {
    let variables: Vec<Variable> = file
        .variables
        .into_iter()
        .map(|d| Variable {
            name: d.name,
            states: d.states,
        })
        .collect();
    let index: HashMap<&str, usize> = variables
        .iter()
        .enumerate()
        .map(|(i, v)| (v.name.as_str(), i))
        .collect();

    let mut cpts: Vec<Option<(Vec<VarId>, Cpt)>> = vec![None; variables.len()];
    for (b, block) in file.cpts.iter().enumerate() {
        let locus = |msg: String| Error::Parse {
            locus: format!("cpts[{b}] (child `{}`)", block.child),
            message: msg,
        };
        let child = *index
            .get(block.child.as_str())
            .ok_or_else(|| Error::UnknownVariable(block.child.clone()))?;
        if cpts[child].is_some() {
            return Err(locus("variable has more than one CPT".into()));
        }
        let parents: Vec<usize> = block
            .parents
            .iter()
            .map(|p| {
                index
                    .get(p.as_str())
                    .copied()
                    .ok_or_else(|| Error::UnknownVariable(p.clone()))
            })
            .collect::<Result<_>>()?;
        let cards: Vec<usize> = parents.iter().map(|&p| variables[p].card()).collect();
        let configs: usize = cards.iter().product();
        let k = variables[child].card();

        let mut seen = vec![false; configs];
        let mut probs = vec![0.0; configs * k];
        let mut pos = vec![0.0; configs * k];
        let mut neg = vec![0.0; configs * k];
        let mut thresholds = vec![0.0; configs];
        for (r, row) in block.rows.iter().enumerate() {
            let row_err = |msg: String| locus(format!("rows[{r}]: {msg}"));
            if row.given.len() != parents.len() {
                return Err(row_err(format!(
                    "`given` has {} states for {} parents",
                    row.given.len(),
                    parents.len()
                )));
            }
            let mut u = 0;
            for ((label, &p), &c) in row.given.iter().zip(&parents).zip(&cards) {
                let s = variables[p]
                    .state_index(label)
                    .ok_or_else(|| row_err(format!("`{label}` is not a state of `{}`", variables[p].name)))?;
                u = u * c + s;
            }
            if std::mem::replace(&mut seen[u], true) {
                return Err(row_err("parent instantiation listed twice".into()));
            }
            let take = |v: &Option<Vec<f64>>, field: &str| -> Result<Vec<f64>> {
                let v = v
                    .as_ref()
                    .ok_or_else(|| row_err(format!("missing `{field}`")))?;
                if v.len() != k {
                    return Err(row_err(format!(
                        "`{field}` has {} entries, child has {k} states",
                        v.len()
                    )));
                }
                Ok(if options.renormalize {
                    renormalize(v)
                } else {
                    v.clone()
                })
            };
            match block.kind {
                Kind::Regular => {
                    if row.threshold.is_some() || row.pos.is_some() || row.neg.is_some() {
                        return Err(row_err("regular rows only take `probs`".into()));
                    }
                    probs[u * k..(u + 1) * k].copy_from_slice(&take(&row.probs, "probs")?);
                }
                Kind::Testing => {
                    if row.probs.is_some() {
                        return Err(row_err("testing rows take `threshold`, `pos` and `neg`".into()));
                    }
                    thresholds[u] = row
                        .threshold
                        .ok_or_else(|| row_err("missing `threshold`".into()))?;
                    pos[u * k..(u + 1) * k].copy_from_slice(&take(&row.pos, "pos")?);
                    neg[u * k..(u + 1) * k].copy_from_slice(&take(&row.neg, "neg")?);
                }
            }
        }
        if let Some(missing) = seen.iter().position(|s| !s) {
            let mut labels = Vec::new();
            let mut rest = missing;
            for (&p, &c) in parents.iter().zip(&cards).rev() {
                labels.push(format!("{}={}", variables[p].name, variables[p].states[rest % c]));
                rest /= c;
            }
            labels.reverse();
            return Err(locus(format!("no row for [{}]", labels.join(", "))));
        }
        let cpt = match block.kind {
            Kind::Regular => Cpt::Regular { probs },
            Kind::Testing => Cpt::Testing {
                thresholds,
                pos,
                neg,
            },
        };
        cpts[child] = Some((parents.into_iter().map(VarId).collect(), cpt));
    }

    let nodes = variables
        .into_iter()
        .zip(cpts)
        .map(|(variable, cpt)| {
            let (parents, cpt) = cpt.ok_or_else(|| {
                Error::invalid("model", format!("`{}` has no CPT", variable.name))
            })?;
            Ok(Node {
                variable,
                parents,
                cpt,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    TbnModel::from_nodes(nodes)
}

fn renormalize(v: &[f64]) -> Vec<f64> {
    let sum: f64 = v.iter().sum();
    if sum > 0.0 && (sum - 1.0).abs() > NORMALIZATION_TOLERANCE {
        v.iter().map(|x| x / sum).collect()
    } else {
        v.to_vec()
    }
}

/// Serializes a model to the JSON file format (pretty-printed, rows in index order).
pub fn to_json(model: &TbnModel) -> String {
    let variables = model
        .nodes()
        .iter()
        .map(|n| VariableDecl {
            name: n.variable.name.clone(),
            states: n.variable.states.clone(),
        })
        .collect();
    let cpts = model
        .ids()
        .map(|id| {
            let node = model.node(id);
            let k = node.variable.card();
            let rows = (0..model.parent_configs(id))
                .map(|u| {
                    let given = model
                        .parent_states(id, u)
                        .into_iter()
                        .zip(&node.parents)
                        .map(|(s, p)| model.variable(*p).states[s].clone())
                        .collect();
                    let slice = |t: &[f64]| Some(t[u * k..(u + 1) * k].to_vec());
                    match &node.cpt {
                        Cpt::Regular { probs } => Row {
                            given,
                            probs: slice(probs),
                            threshold: None,
                            pos: None,
                            neg: None,
                        },
                        Cpt::Testing {
                            thresholds,
                            pos,
                            neg,
                        } => Row {
                            given,
                            probs: None,
                            threshold: Some(thresholds[u]),
                            pos: slice(pos),
                            neg: slice(neg),
                        },
                    }
                })
                .collect();
            CptBlock {
                child: node.variable.name.clone(),
                parents: node
                    .parents
                    .iter()
                    .map(|p| model.name(*p).to_string())
                    .collect(),
                kind: if node.cpt.is_testing() {
                    Kind::Testing
                } else {
                    Kind::Regular
                },
                rows,
            }
        })
        .collect();
    let mut out = serde_json::to_string_pretty(&ModelFile { variables, cpts })
        .expect("model serialization cannot fail");
    out.push('\n');
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    const ONE_NODE: &str = r#"{
        "variables": [{"name": "A", "states": ["a", "not_a"]}],
        "cpts": [{"child": "A", "kind": "regular", "rows": [{"probs": [0.5, 0.5]}]}]
    }"#;

    #[test]
    fn loads_smallest_model() {
        let m = load_model(ONE_NODE).unwrap();
        assert_eq!(m.len(), 1);
        assert!(m.parents(VarId(0)).is_empty());
    }

    #[test]
    fn round_trips() {
        let m = load_model(ONE_NODE).unwrap();
        assert_eq!(load_model(&to_json(&m)).unwrap(), m);
    }

    #[test]
    fn parse_errors_carry_locus() {
        let err = load_model(r#"{"variables": [{"name": 3}], "cpts": []}"#).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("variables[0].name"), "{msg}");
        assert!(err.is_usage());
    }

    #[test]
    fn unnormalized_row_is_named() {
        let text = r#"{
            "variables": [{"name": "A", "states": ["a", "not_a"]},
                          {"name": "B", "states": ["b", "not_b"]}],
            "cpts": [
              {"child": "A", "kind": "regular", "rows": [{"probs": [0.5, 0.5]}]},
              {"child": "B", "parents": ["A"], "kind": "regular", "rows": [
                {"given": ["a"], "probs": [0.5, 0.4]},
                {"given": ["not_a"], "probs": [0.5, 0.5]}]}
            ]}"#;
        let msg = load_model(text).unwrap_err().to_string();
        assert!(msg.contains("[A=a]") && msg.contains("sums to 0.9"), "{msg}");

        let m = load_model_with(text, LoadOptions { renormalize: true }).unwrap();
        match &m.node(VarId(1)).cpt {
            Cpt::Regular { probs } => assert!((probs[0] - 5.0 / 9.0).abs() < 1e-15),
            _ => unreachable!(),
        }
    }

    #[test]
    fn missing_row_is_reported() {
        let text = r#"{
            "variables": [{"name": "A", "states": ["a", "not_a"]},
                          {"name": "B", "states": ["b", "not_b"]}],
            "cpts": [
              {"child": "A", "kind": "regular", "rows": [{"probs": [0.5, 0.5]}]},
              {"child": "B", "parents": ["A"], "kind": "regular", "rows": [
                {"given": ["a"], "probs": [0.5, 0.5]}]}
            ]}"#;
        let msg = load_model(text).unwrap_err().to_string();
        assert!(msg.contains("no row for [A=not_a]"), "{msg}");
    }
}
