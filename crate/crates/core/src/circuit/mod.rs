//! Arithmetic circuits with testing units.
//!
//! A [`Circuit`] is a DAG stored in topological order (children before
//! parents). Leaves are constants, parameters and evidence indicators; inner
//! nodes are n-ary sums and products, testing units, sigmoid selection units
//! and a guarded division used inside sigmoid selection. Circuits are
//! immutable; all evaluation state lives in an [`EvalContext`].

mod builder;
pub(crate) mod eval;
mod format;

use serde::{Deserialize, Serialize};

pub use builder::CircuitBuilder;
pub use eval::EvalContext;
pub use format::{from_json, to_json, FORMAT_TAG, FORMAT_VERSION};

/// Smallest divisor used by division nodes.
pub const DIV_FLOOR: f64 = 1e-300;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct NodeId(pub u32);

impl NodeId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ParamId(pub u32);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct SlotId(pub u32);

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum NodeKind {
    Const(f64),
    Param(ParamId),
    Evidence(SlotId),
    Add,
    Mul,
    /// Children `[x, t, pos, neg]`: `pos` if `x >= t`, else `neg`.
    Test,
    /// Children `[x, t, pos, neg]`: `s*pos + (1-s)*neg` with `s = sigmoid(gamma*(x - t))`.
    SigSel { gamma: f64 },
    /// Children `[x, y]`: `x / max(y, DIV_FLOOR)`.
    Div,
}

impl NodeKind {
    pub fn name(&self) -> &'static str {
        match self {
            NodeKind::Const(_) => "const",
            NodeKind::Param(_) => "param",
            NodeKind::Evidence(_) => "evidence",
            NodeKind::Add => "add",
            NodeKind::Mul => "mul",
            NodeKind::Test => "test",
            NodeKind::SigSel { .. } => "sigsel",
            NodeKind::Div => "div",
        }
    }

    /// Required number of children, if fixed.
    pub fn arity(&self) -> Option<usize> {
        match self {
            NodeKind::Const(_) | NodeKind::Param(_) | NodeKind::Evidence(_) => Some(0),
            NodeKind::Test | NodeKind::SigSel { .. } => Some(4),
            NodeKind::Div => Some(2),
            NodeKind::Add | NodeKind::Mul => None,
        }
    }
}

/// What a parameter means, which decides how training reparameterizes it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "role", rename_all = "lowercase")]
pub enum ParamRole {
    /// Entry of a distribution; parameters sharing `row` sum to one.
    Probability { row: u32 },
    /// Selection threshold in `[0,1]`.
    Threshold,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamSpec {
    pub name: String,
    pub value: f64,
    pub trainable: bool,
    #[serde(flatten)]
    pub role: ParamRole,
}

/// One state of one evidence variable.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EvidenceSlot {
    pub variable: String,
    pub state: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct QueryInfo {
    pub variable: String,
    pub states: Vec<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Circuit {
    kinds: Vec<NodeKind>,
    offsets: Vec<u32>,
    children: Vec<NodeId>,
    params: Vec<ParamSpec>,
    slots: Vec<EvidenceSlot>,
    query: QueryInfo,
    outputs: Vec<NodeId>,
    param_leaf: Vec<Option<NodeId>>,
    slot_leaf: Vec<Option<NodeId>>,
}

impl Circuit {
    /// Assembles a circuit from parts, checking order, arity and manifest coverage.
    pub(crate) fn from_parts(
        kinds: Vec<NodeKind>,
        child_lists: Vec<Vec<NodeId>>,
        params: Vec<ParamSpec>,
        slots: Vec<EvidenceSlot>,
        query: QueryInfo,
        outputs: Vec<NodeId>,
    ) -> crate::Result<Circuit> {
        use crate::error::Error;
        let bad = |m: String| Error::invalid("circuit", m);
        if outputs.is_empty() {
            return Err(bad("a circuit needs at least one output".into()));
        }
        let mut offsets = Vec::with_capacity(kinds.len() + 1);
        let mut children = Vec::new();
        let mut param_leaf = vec![None; params.len()];
        let mut slot_leaf = vec![None; slots.len()];
        offsets.push(0);
        for (i, (kind, kids)) in kinds.iter().zip(&child_lists).enumerate() {
            if let Some(n) = kind.arity() {
                if kids.len() != n {
                    return Err(bad(format!(
                        "node {i} ({}) has {} children, expected {n}",
                        kind.name(),
                        kids.len()
                    )));
                }
            }
            for c in kids {
                if c.index() >= i {
                    return Err(bad(format!(
                        "node {i} refers to node {} which does not precede it",
                        c.0
                    )));
                }
            }
            match kind {
                NodeKind::Param(p) => {
                    let slot = param_leaf
                        .get_mut(p.0 as usize)
                        .ok_or_else(|| bad(format!("node {i} uses undeclared parameter {}", p.0)))?;
                    if slot.replace(NodeId(i as u32)).is_some() {
                        return Err(bad(format!("parameter {} has two leaves", p.0)));
                    }
                }
                NodeKind::Evidence(s) => {
                    let slot = slot_leaf
                        .get_mut(s.0 as usize)
                        .ok_or_else(|| bad(format!("node {i} uses undeclared evidence slot {}", s.0)))?;
                    if slot.replace(NodeId(i as u32)).is_some() {
                        return Err(bad(format!("evidence slot {} has two leaves", s.0)));
                    }
                }
                _ => {}
            }
            children.extend_from_slice(kids);
            offsets.push(children.len() as u32);
        }
        if kinds.len() != child_lists.len() {
            return Err(bad("child lists do not match nodes".into()));
        }
        if let Some(o) = outputs.iter().find(|o| o.index() >= kinds.len()) {
            return Err(bad(format!("output {} is not a node", o.0)));
        }
        Ok(Circuit {
            kinds,
            offsets,
            children,
            params,
            slots,
            query,
            outputs,
            param_leaf,
            slot_leaf,
        })
    }

    pub fn len(&self) -> usize {
        self.kinds.len()
    }

    pub fn is_empty(&self) -> bool {
        self.kinds.is_empty()
    }

    pub fn kind(&self, n: NodeId) -> NodeKind {
        self.kinds[n.index()]
    }

    pub fn kinds(&self) -> &[NodeKind] {
        &self.kinds
    }

    pub fn children(&self, n: NodeId) -> &[NodeId] {
        let i = n.index();
        &self.children[self.offsets[i] as usize..self.offsets[i + 1] as usize]
    }

    pub fn node_ids(&self) -> impl Iterator<Item = NodeId> {
        (0..self.kinds.len() as u32).map(NodeId)
    }

    pub fn params(&self) -> &[ParamSpec] {
        &self.params
    }

    pub fn param_id(&self, name: &str) -> crate::Result<ParamId> {
        self.params
            .iter()
            .position(|p| p.name == name)
            .map(|i| ParamId(i as u32))
            .ok_or_else(|| crate::Error::UnknownParameter(name.to_string()))
    }

    /// Leaf node of a parameter, if the parameter is still used by the circuit.
    pub fn param_leaf(&self, p: ParamId) -> Option<NodeId> {
        self.param_leaf[p.0 as usize]
    }

    pub fn evidence_slots(&self) -> &[EvidenceSlot] {
        &self.slots
    }

    pub fn slot_leaf(&self, s: SlotId) -> Option<NodeId> {
        self.slot_leaf[s.0 as usize]
    }

    /// Slots of `variable`, in state order.
    pub fn slots_of(&self, variable: &str) -> Vec<SlotId> {
        self.slots
            .iter()
            .enumerate()
            .filter(|(_, s)| s.variable == variable)
            .map(|(i, _)| SlotId(i as u32))
            .collect()
    }

    /// Evidence variables in manifest order.
    pub fn evidence_variables(&self) -> Vec<&str> {
        let mut out: Vec<&str> = Vec::new();
        for s in &self.slots {
            if out.last() != Some(&s.variable.as_str()) {
                out.push(&s.variable);
            }
        }
        out
    }

    pub fn query(&self) -> &QueryInfo {
        &self.query
    }

    pub fn outputs(&self) -> &[NodeId] {
        &self.outputs
    }

    /// Copy of this circuit whose parameter defaults are `values`.
    pub fn with_param_values(&self, values: &[f64]) -> Circuit {
        let mut c = self.clone();
        for (p, v) in c.params.iter_mut().zip(values) {
            p.value = *v;
        }
        c
    }

    pub fn stats(&self) -> CircuitStats {
        let mut s = CircuitStats {
            nodes: self.len(),
            edges: self.children.len(),
            ..CircuitStats::default()
        };
        let mut depth = vec![0usize; self.len()];
        for n in self.node_ids() {
            let d = self
                .children(n)
                .iter()
                .map(|c| depth[c.index()] + 1)
                .max()
                .unwrap_or(0);
            depth[n.index()] = d;
            s.depth = s.depth.max(d);
            match self.kind(n) {
                NodeKind::Const(_) => s.consts += 1,
                NodeKind::Param(p) => match self.params[p.0 as usize].role {
                    ParamRole::Threshold => s.thresholds += 1,
                    ParamRole::Probability { .. } => s.params += 1,
                },
                NodeKind::Evidence(_) => s.evidence += 1,
                NodeKind::Add => s.adds += 1,
                NodeKind::Mul => s.muls += 1,
                NodeKind::Test => s.tests += 1,
                NodeKind::SigSel { .. } => s.sigsels += 1,
                NodeKind::Div => s.divs += 1,
            }
        }
        s
    }
}

/// Node counts by kind plus size measures.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct CircuitStats {
    pub nodes: usize,
    pub edges: usize,
    pub depth: usize,
    pub consts: usize,
    /// Probability parameter leaves.
    pub params: usize,
    pub thresholds: usize,
    pub evidence: usize,
    pub adds: usize,
    pub muls: usize,
    pub tests: usize,
    pub sigsels: usize,
    pub divs: usize,
}

impl std::fmt::Display for CircuitStats {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "nodes {} edges {} depth {} | const {} param {} threshold {} evidence {} add {} mul {} test {} sigsel {} div {}",
            self.nodes,
            self.edges,
            self.depth,
            self.consts,
            self.params,
            self.thresholds,
            self.evidence,
            self.adds,
            self.muls,
            self.tests,
            self.sigsels,
            self.divs
        )
    }
}
