//! Bayesian networks and testing Bayesian networks.
//!
//! A [`TbnModel`] is a DAG over discrete [`Variable`]s where every node owns a
//! [`Cpt`]. Regular CPTs hold one distribution per parent instantiation.
//! Testing CPTs hold two distributions per parent instantiation plus a
//! threshold, and which one is used is decided from the posterior on the
//! parents given evidence on the node's ancestors. A model without testing
//! CPTs is an ordinary Bayesian network.
//!
//! CPT tables are dense and row-major: the row index is the mixed-radix
//! index of the parent instantiation (last parent varies fastest) and the
//! child state varies fastest within a row.

pub(crate) mod evidence;
mod format;

use std::collections::{BTreeSet, HashMap, HashSet};

pub use evidence::Evidence;
pub use format::{load_model, load_model_with, to_json, LoadOptions};

use crate::error::{Error, Result};

/// Tolerance used when checking that distributions sum to one.
pub const NORMALIZATION_TOLERANCE: f64 = 1e-9;

/// Index of a variable inside a [`TbnModel`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct VarId(pub usize);

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Variable {
    pub name: String,
    pub states: Vec<String>,
}

impl Variable {
    pub fn new(name: impl Into<String>, states: &[&str]) -> Self {
        Variable {
            name: name.into(),
            states: states.iter().map(|s| s.to_string()).collect(),
        }
    }

    /// A binary variable whose states are `name` and `not_name`, lower-cased.
    pub fn binary(name: impl Into<String>) -> Self {
        let name = name.into();
        let lower = name.to_lowercase();
        Variable {
            states: vec![lower.clone(), format!("not_{lower}")],
            name,
        }
    }

    pub fn card(&self) -> usize {
        self.states.len()
    }

    pub fn state_index(&self, state: &str) -> Option<usize> {
        self.states.iter().position(|s| s == state)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Cpt {
    Regular {
        probs: Vec<f64>,
    },
    Testing {
        /// One threshold per parent instantiation.
        thresholds: Vec<f64>,
        /// Distributions used when the parent posterior passes its threshold.
        pos: Vec<f64>,
        /// Distributions used otherwise.
        neg: Vec<f64>,
    },
}

impl Cpt {
    pub fn is_testing(&self) -> bool {
        matches!(self, Cpt::Testing { .. })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Node {
    pub variable: Variable,
    pub parents: Vec<VarId>,
    pub cpt: Cpt,
}

/// Number of static parameters, dynamic parameters and thresholds of a model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct ParamCounts {
    pub static_params: usize,
    pub dynamic_params: usize,
    pub thresholds: usize,
}

impl ParamCounts {
    /// Static plus dynamic parameters (thresholds are counted separately).
    pub fn parameters(&self) -> usize {
        self.static_params + self.dynamic_params
    }
}

/// A validated (testing) Bayesian network. Immutable once built.
#[derive(Debug, Clone, PartialEq)]
pub struct TbnModel {
    nodes: Vec<Node>,
    by_name: HashMap<String, VarId>,
    topo: Vec<VarId>,
}

impl TbnModel {
    pub fn builder() -> ModelBuilder {
        ModelBuilder::default()
    }

    /// Validates `nodes` and builds a model. Parents refer to positions in `nodes`.
    pub fn from_nodes(nodes: Vec<Node>) -> Result<Self> {
        let mut by_name = HashMap::new();
        for (i, node) in nodes.iter().enumerate() {
            let v = &node.variable;
            if v.states.len() < 2 {
                return Err(Error::invalid(
                    "variable",
                    format!("`{}` needs at least two states", v.name),
                ));
            }
            let mut seen = HashSet::new();
            for s in &v.states {
                if !seen.insert(s.as_str()) {
                    return Err(Error::invalid(
                        "variable",
                        format!("`{}` declares state `{s}` twice", v.name),
                    ));
                }
            }
            if by_name.insert(v.name.clone(), VarId(i)).is_some() {
                return Err(Error::invalid(
                    "model",
                    format!("variable `{}` declared twice", v.name),
                ));
            }
        }

        for node in &nodes {
            let mut seen = HashSet::new();
            for p in &node.parents {
                if p.0 >= nodes.len() {
                    return Err(Error::invalid(
                        "model",
                        format!("`{}` has a dangling parent", node.variable.name),
                    ));
                }
                if !seen.insert(*p) {
                    return Err(Error::invalid(
                        "model",
                        format!(
                            "`{}` lists parent `{}` twice",
                            node.variable.name, nodes[p.0].variable.name
                        ),
                    ));
                }
            }
        }

        let topo = topological_order(&nodes)?;
        let model = TbnModel {
            nodes,
            by_name,
            topo,
        };
        for id in model.ids() {
            model.check_cpt(id)?;
        }
        Ok(model)
    }

    fn check_cpt(&self, id: VarId) -> Result<()> {
        let node = self.node(id);
        let name = &node.variable.name;
        let rows = self.parent_configs(id);
        let card = node.variable.card();
        let check_rows = |label: &str, table: &[f64]| -> Result<()> {
            if table.len() != rows * card {
                return Err(Error::invalid(
                    "cpt",
                    format!(
                        "{label} table of `{name}` has {} entries, expected {}",
                        table.len(),
                        rows * card
                    ),
                ));
            }
            for (r, row) in table.chunks(card).enumerate() {
                if let Some(bad) = row.iter().find(|p| !(0.0..=1.0).contains(*p)) {
                    return Err(Error::invalid(
                        "cpt",
                        format!(
                            "{label} row {} of `{name}` has entry {bad} outside [0,1]",
                            self.describe_row(id, r)
                        ),
                    ));
                }
                let sum: f64 = row.iter().sum();
                if (sum - 1.0).abs() > NORMALIZATION_TOLERANCE {
                    return Err(Error::invalid(
                        "cpt",
                        format!(
                            "{label} row {} of `{name}` sums to {}, not 1",
                            self.describe_row(id, r),
                            (sum * 1e12).round() / 1e12
                        ),
                    ));
                }
            }
            Ok(())
        };
        match &node.cpt {
            Cpt::Regular { probs } => check_rows("regular", probs),
            Cpt::Testing {
                thresholds,
                pos,
                neg,
            } => {
                if node.parents.is_empty() {
                    return Err(Error::invalid(
                        "cpt",
                        format!("root `{name}` cannot be testing"),
                    ));
                }
                if thresholds.len() != rows {
                    return Err(Error::invalid(
                        "cpt",
                        format!(
                            "`{name}` has {} thresholds, expected {rows}",
                            thresholds.len()
                        ),
                    ));
                }
                if let Some(t) = thresholds.iter().find(|t| !(0.0..=1.0).contains(*t)) {
                    return Err(Error::invalid(
                        "cpt",
                        format!("threshold {t} of `{name}` is outside [0,1]"),
                    ));
                }
                check_rows("positive", pos)?;
                check_rows("negative", neg)
            }
        }
    }

    /// Human-readable parent instantiation of a CPT row, e.g. `[A=a, C=c]`.
    pub fn describe_row(&self, id: VarId, row: usize) -> String {
        let states = self.parent_states(id, row);
        let parts: Vec<String> = self
            .node(id)
            .parents
            .iter()
            .zip(states)
            .map(|(p, s)| {
                let v = &self.node(*p).variable;
                format!("{}={}", v.name, v.states[s])
            })
            .collect();
        format!("[{}]", parts.join(", "))
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn ids(&self) -> impl Iterator<Item = VarId> + '_ {
        (0..self.nodes.len()).map(VarId)
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn node(&self, id: VarId) -> &Node {
        &self.nodes[id.0]
    }

    pub fn variable(&self, id: VarId) -> &Variable {
        &self.nodes[id.0].variable
    }

    pub fn name(&self, id: VarId) -> &str {
        &self.nodes[id.0].variable.name
    }

    pub fn card(&self, id: VarId) -> usize {
        self.nodes[id.0].variable.card()
    }

    pub fn var(&self, name: &str) -> Result<VarId> {
        self.by_name
            .get(name)
            .copied()
            .ok_or_else(|| Error::UnknownVariable(name.to_string()))
    }

    pub fn parents(&self, id: VarId) -> &[VarId] {
        &self.nodes[id.0].parents
    }

    pub fn children(&self, id: VarId) -> Vec<VarId> {
        self.ids()
            .filter(|c| self.parents(*c).contains(&id))
            .collect()
    }

    pub fn is_testing(&self, id: VarId) -> bool {
        self.nodes[id.0].cpt.is_testing()
    }

    pub fn testing_nodes(&self) -> Vec<VarId> {
        self.topo
            .iter()
            .copied()
            .filter(|id| self.is_testing(*id))
            .collect()
    }

    /// Parents before children; ties broken by declaration order.
    pub fn topological_order(&self) -> &[VarId] {
        &self.topo
    }

    /// Number of joint parent instantiations of `id`.
    pub fn parent_configs(&self, id: VarId) -> usize {
        self.parents(id).iter().map(|p| self.card(*p)).product()
    }

    /// Decodes a CPT row index into per-parent state indices.
    pub fn parent_states(&self, id: VarId, mut row: usize) -> Vec<usize> {
        let parents = self.parents(id);
        let mut states = vec![0; parents.len()];
        for (slot, p) in states.iter_mut().zip(parents).rev() {
            let c = self.card(*p);
            *slot = row % c;
            row /= c;
        }
        states
    }

    /// All strict ancestors of `id`.
    pub fn ancestors(&self, id: VarId) -> BTreeSet<VarId> {
        let mut out = BTreeSet::new();
        let mut stack: Vec<VarId> = self.parents(id).to_vec();
        while let Some(v) = stack.pop() {
            if out.insert(v) {
                stack.extend_from_slice(self.parents(v));
            }
        }
        out
    }

    pub fn param_counts(&self) -> ParamCounts {
        let mut counts = ParamCounts::default();
        for id in self.ids() {
            let m = self.card(id);
            let n = self.parent_configs(id);
            match self.node(id).cpt {
                Cpt::Regular { .. } => counts.static_params += m * n,
                Cpt::Testing { .. } => {
                    counts.thresholds += n;
                    counts.dynamic_params += 2 * m * n;
                }
            }
        }
        counts
    }

    /// Removes leaves that are neither the query nor evidence, repeatedly,
    /// until none is left. Query answers are unchanged by this.
    pub fn prune_for_query(&self, query: &str, evidence: &[&str]) -> Result<TbnModel> {
        let mut keep: Vec<bool> = vec![true; self.len()];
        let mut protected = vec![false; self.len()];
        protected[self.var(query)?.0] = true;
        for e in evidence {
            protected[self.var(e)?.0] = true;
        }
        loop {
            let mut has_child = vec![false; self.len()];
            for id in self.ids().filter(|id| keep[id.0]) {
                for p in self.parents(id) {
                    has_child[p.0] = true;
                }
            }
            let barren: Vec<usize> = (0..self.len())
                .filter(|&i| keep[i] && !has_child[i] && !protected[i])
                .collect();
            if barren.is_empty() {
                break;
            }
            for i in barren {
                keep[i] = false;
            }
        }
        self.restrict(&keep)
    }

    /// Sub-model over the kept variables. Every kept variable's parents must be kept.
    pub(crate) fn restrict(&self, keep: &[bool]) -> Result<TbnModel> {
        let mut remap = vec![usize::MAX; self.len()];
        let mut next = 0;
        for (i, k) in keep.iter().enumerate() {
            if *k {
                remap[i] = next;
                next += 1;
            }
        }
        let nodes = self
            .nodes
            .iter()
            .zip(keep)
            .filter(|(_, k)| **k)
            .map(|(node, _)| Node {
                variable: node.variable.clone(),
                parents: node.parents.iter().map(|p| VarId(remap[p.0])).collect(),
                cpt: node.cpt.clone(),
            })
            .collect();
        TbnModel::from_nodes(nodes)
    }

    /// Copy of this model with the CPT of `id` replaced. The new CPT is validated.
    pub fn with_cpt(&self, id: VarId, cpt: Cpt) -> Result<TbnModel> {
        let mut nodes = self.nodes.clone();
        nodes[id.0].cpt = cpt;
        TbnModel::from_nodes(nodes)
    }
}

fn topological_order(nodes: &[Node]) -> Result<Vec<VarId>> {
    let mut indegree: Vec<usize> = nodes.iter().map(|n| n.parents.len()).collect();
    let mut children: Vec<Vec<usize>> = vec![Vec::new(); nodes.len()];
    for (i, n) in nodes.iter().enumerate() {
        for p in &n.parents {
            children[p.0].push(i);
        }
    }
    // BTreeSet as a min-queue keeps the order deterministic.
    let mut ready: BTreeSet<usize> = (0..nodes.len()).filter(|&i| indegree[i] == 0).collect();
    let mut order = Vec::with_capacity(nodes.len());
    while let Some(i) = ready.pop_first() {
        order.push(VarId(i));
        for &c in &children[i] {
            indegree[c] -= 1;
            if indegree[c] == 0 {
                ready.insert(c);
            }
        }
    }
    if order.len() != nodes.len() {
        let stuck: Vec<&str> = (0..nodes.len())
            .filter(|&i| indegree[i] > 0)
            .map(|i| nodes[i].variable.name.as_str())
            .collect();
        return Err(Error::invalid(
            "model",
            format!("graph has a cycle through {}", stuck.join(", ")),
        ));
    }
    Ok(order)
}

/// Incremental construction of a [`TbnModel`] by variable name.
#[derive(Debug, Default, Clone)]
pub struct ModelBuilder {
    variables: Vec<Variable>,
    cpts: Vec<Option<(Vec<String>, Cpt)>>,
}

impl ModelBuilder {
    pub fn variable(mut self, name: &str, states: &[&str]) -> Self {
        self.variables.push(Variable::new(name, states));
        self.cpts.push(None);
        self
    }

    pub fn binary(mut self, name: &str) -> Self {
        self.variables.push(Variable::binary(name));
        self.cpts.push(None);
        self
    }

    pub fn add_variable(&mut self, variable: Variable) {
        self.variables.push(variable);
        self.cpts.push(None);
    }

    pub fn set_cpt(&mut self, child: &str, parents: &[&str], cpt: Cpt) -> Result<()> {
        let i = self
            .variables
            .iter()
            .position(|v| v.name == child)
            .ok_or_else(|| Error::UnknownVariable(child.to_string()))?;
        if self.cpts[i].is_some() {
            return Err(Error::invalid(
                "model",
                format!("`{child}` has more than one CPT"),
            ));
        }
        self.cpts[i] = Some((parents.iter().map(|p| p.to_string()).collect(), cpt));
        Ok(())
    }

    /// Regular CPT; `probs` is row-major as described in the module docs.
    pub fn regular(mut self, child: &str, parents: &[&str], probs: &[f64]) -> Self {
        // Errors surface from `build`, which re-checks everything.
        if let Err(e) = self.set_cpt(
            child,
            parents,
            Cpt::Regular {
                probs: probs.to_vec(),
            },
        ) {
            self.poison(e);
        }
        self
    }

    pub fn testing(
        mut self,
        child: &str,
        parents: &[&str],
        thresholds: &[f64],
        pos: &[f64],
        neg: &[f64],
    ) -> Self {
        if let Err(e) = self.set_cpt(
            child,
            parents,
            Cpt::Testing {
                thresholds: thresholds.to_vec(),
                pos: pos.to_vec(),
                neg: neg.to_vec(),
            },
        ) {
            self.poison(e);
        }
        self
    }

    fn poison(&mut self, e: Error) {
        // A variable with a reserved name can't collide with user input; build() reports it.
        self.variables.push(Variable {
            name: format!("\u{0}error: {e}"),
            states: vec![],
        });
        self.cpts.push(None);
    }

    pub fn build(self) -> Result<TbnModel> {
        if let Some(v) = self.variables.iter().find(|v| v.name.starts_with('\u{0}')) {
            return Err(Error::invalid("model", v.name[1..].to_string()));
        }
        let index: HashMap<&str, usize> = self
            .variables
            .iter()
            .enumerate()
            .map(|(i, v)| (v.name.as_str(), i))
            .collect();
        let mut nodes = Vec::with_capacity(self.variables.len());
        for (variable, cpt) in self.variables.iter().zip(self.cpts) {
            let (parents, cpt) = cpt.ok_or_else(|| {
                Error::invalid("model", format!("`{}` has no CPT", variable.name))
            })?;
            let parents = parents
                .iter()
                .map(|p| {
                    index
                        .get(p.as_str())
                        .map(|&i| VarId(i))
                        .ok_or_else(|| Error::UnknownVariable(p.clone()))
                })
                .collect::<Result<Vec<_>>>()?;
            nodes.push(Node {
                variable: variable.clone(),
                parents,
                cpt,
            });
        }
        TbnModel::from_nodes(nodes)
    }
}
