use std::collections::HashMap;

use super::{Circuit, EvidenceSlot, NodeId, NodeKind, ParamId, ParamSpec, QueryInfo, SlotId};
use crate::error::{Error, Result};
use crate::factor::CellOps;

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
struct Key {
    tag: u8,
    payload: u64,
    children: Vec<NodeId>,
}

fn key_of(kind: NodeKind, children: &[NodeId]) -> Key {
    let (tag, payload) = match kind {
        NodeKind::Const(v) => (0, v.to_bits()),
        NodeKind::Param(p) => (1, p.0 as u64),
        NodeKind::Evidence(s) => (2, s.0 as u64),
        NodeKind::Add => (3, 0),
        NodeKind::Mul => (4, 0),
        NodeKind::Test => (5, 0),
        NodeKind::SigSel { gamma } => (6, gamma.to_bits()),
        NodeKind::Div => (7, 0),
    };
    Key {
        tag,
        payload,
        children: children.to_vec(),
    }
}

/// Incremental circuit construction with a unique-node table.
///
/// Structurally identical nodes are created once. Children of sums and
/// products are sorted by handle before lookup, so `add(a, b)` and
/// `add(b, a)` are the same node. Trivial forms are folded: a one-child
/// sum or product is its child, an empty sum is `0`, an empty product is
/// `1`, and constant `1` factors are dropped from products.
#[derive(Debug, Clone)]
pub struct CircuitBuilder {
    kinds: Vec<NodeKind>,
    children: Vec<Vec<NodeId>>,
    table: HashMap<Key, NodeId>,
    dedup: bool,
    params: Vec<ParamSpec>,
    param_nodes: HashMap<String, NodeId>,
    slots: Vec<EvidenceSlot>,
    slot_nodes: HashMap<(String, String), NodeId>,
}

impl Default for CircuitBuilder {
    fn default() -> Self {
        Self::new()
    }
}

impl CircuitBuilder {
    pub fn new() -> Self {
        CircuitBuilder {
            kinds: Vec::new(),
            children: Vec::new(),
            table: HashMap::new(),
            dedup: true,
            params: Vec::new(),
            param_nodes: HashMap::new(),
            slots: Vec::new(),
            slot_nodes: HashMap::new(),
        }
    }

    /// Builder whose unique-node table never matches: every request makes a new node.
    /// Leaves are still shared by name.
    pub fn without_dedup() -> Self {
        CircuitBuilder {
            dedup: false,
            ..Self::new()
        }
    }

    pub fn node_count(&self) -> usize {
        self.kinds.len()
    }

    pub fn kind(&self, n: NodeId) -> NodeKind {
        self.kinds[n.index()]
    }

    pub fn children(&self, n: NodeId) -> &[NodeId] {
        &self.children[n.index()]
    }

    fn intern(&mut self, kind: NodeKind, children: Vec<NodeId>) -> NodeId {
        let key = key_of(kind, &children);
        if self.dedup {
            if let Some(&n) = self.table.get(&key) {
                return n;
            }
        }
        let id = NodeId(self.kinds.len() as u32);
        self.kinds.push(kind);
        self.children.push(children);
        if self.dedup {
            self.table.insert(key, id);
        }
        id
    }

    pub fn constant(&mut self, v: f64) -> NodeId {
        // Constants are always shared so folding can recognize them.
        let key = key_of(NodeKind::Const(v), &[]);
        if let Some(&n) = self.table.get(&key) {
            return n;
        }
        let id = NodeId(self.kinds.len() as u32);
        self.kinds.push(NodeKind::Const(v));
        self.children.push(Vec::new());
        self.table.insert(key, id);
        id
    }

    /// Leaf for a parameter, declared on first use. Later calls with the same
    /// name return the same leaf and ignore the other fields.
    pub fn param(&mut self, spec: ParamSpec) -> NodeId {
        if let Some(&n) = self.param_nodes.get(&spec.name) {
            return n;
        }
        let p = ParamId(self.params.len() as u32);
        self.param_nodes.insert(spec.name.clone(), NodeId(self.kinds.len() as u32));
        self.params.push(spec);
        self.kinds.push(NodeKind::Param(p));
        self.children.push(Vec::new());
        NodeId(self.kinds.len() as u32 - 1)
    }

    /// Leaf for one state of an evidence variable, declared on first use.
    pub fn evidence(&mut self, variable: &str, state: &str) -> NodeId {
        let key = (variable.to_string(), state.to_string());
        if let Some(&n) = self.slot_nodes.get(&key) {
            return n;
        }
        let s = SlotId(self.slots.len() as u32);
        self.slots.push(EvidenceSlot {
            variable: variable.to_string(),
            state: state.to_string(),
        });
        self.kinds.push(NodeKind::Evidence(s));
        self.children.push(Vec::new());
        let id = NodeId(self.kinds.len() as u32 - 1);
        self.slot_nodes.insert(key, id);
        id
    }

    pub fn add(&mut self, children: &[NodeId]) -> NodeId {
        match children {
            [] => self.constant(0.0),
            [one] => *one,
            _ => {
                let mut c = children.to_vec();
                c.sort_unstable();
                self.intern(NodeKind::Add, c)
            }
        }
    }

    pub fn mul(&mut self, children: &[NodeId]) -> NodeId {
        let mut c: Vec<NodeId> = children
            .iter()
            .copied()
            .filter(|n| self.kinds[n.index()] != NodeKind::Const(1.0))
            .collect();
        match c.len() {
            0 => self.constant(1.0),
            1 => c[0],
            _ => {
                c.sort_unstable();
                self.intern(NodeKind::Mul, c)
            }
        }
    }

    pub fn test(&mut self, x: NodeId, t: NodeId, pos: NodeId, neg: NodeId) -> NodeId {
        self.intern(NodeKind::Test, vec![x, t, pos, neg])
    }

    pub fn sigsel(&mut self, x: NodeId, t: NodeId, pos: NodeId, neg: NodeId, gamma: f64) -> NodeId {
        self.intern(NodeKind::SigSel { gamma }, vec![x, t, pos, neg])
    }

    pub fn div(&mut self, x: NodeId, y: NodeId) -> NodeId {
        self.intern(NodeKind::Div, vec![x, y])
    }

    /// Declares every state of `variable` as an evidence slot, in order, even
    /// if some state never gets a leaf.
    pub fn declare_evidence(&mut self, variable: &str, states: &[String]) -> Vec<NodeId> {
        states.iter().map(|s| self.evidence(variable, s)).collect()
    }

    /// Keeps the nodes reachable from `outputs`, renumbered in creation order.
    /// The parameter and evidence manifests are kept whole.
    pub fn finish(self, outputs: &[NodeId], query: QueryInfo) -> Result<Circuit> {
        if outputs.is_empty() {
            return Err(Error::invalid("circuit", "a circuit needs at least one output"));
        }
        let mut reachable = vec![false; self.kinds.len()];
        let mut stack: Vec<NodeId> = outputs.to_vec();
        while let Some(n) = stack.pop() {
            if !std::mem::replace(&mut reachable[n.index()], true) {
                stack.extend_from_slice(&self.children[n.index()]);
            }
        }
        // Leaves stay so every manifest entry keeps its node.
        for (i, k) in self.kinds.iter().enumerate() {
            if matches!(k, NodeKind::Param(_) | NodeKind::Evidence(_)) {
                reachable[i] = true;
            }
        }
        let mut remap = vec![u32::MAX; self.kinds.len()];
        let mut kinds = Vec::new();
        let mut child_lists = Vec::new();
        for i in 0..self.kinds.len() {
            if !reachable[i] {
                continue;
            }
            remap[i] = kinds.len() as u32;
            kinds.push(self.kinds[i]);
            child_lists.push(
                self.children[i]
                    .iter()
                    .map(|c| NodeId(remap[c.index()]))
                    .collect(),
            );
        }
        let outputs = outputs.iter().map(|o| NodeId(remap[o.index()])).collect();
        Circuit::from_parts(kinds, child_lists, self.params, self.slots, query, outputs)
    }
}

impl CellOps for CircuitBuilder {
    type Cell = NodeId;

    fn one(&mut self) -> NodeId {
        self.constant(1.0)
    }

    fn mul(&mut self, a: &NodeId, b: &NodeId) -> NodeId {
        CircuitBuilder::mul(self, &[*a, *b])
    }

    fn sum(&mut self, cells: &[NodeId]) -> NodeId {
        self.add(cells)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuit::ParamRole;

    fn p(b: &mut CircuitBuilder, name: &str) -> NodeId {
        b.param(ParamSpec {
            name: name.into(),
            value: 0.5,
            trainable: true,
            role: ParamRole::Probability { row: 0 },
        })
    }

    #[test]
    fn interning_shares_nodes() {
        let mut b = CircuitBuilder::new();
        let (x, y) = (p(&mut b, "x"), p(&mut b, "y"));
        let s1 = b.add(&[x, y]);
        let s2 = b.add(&[x, y]);
        let s3 = b.add(&[y, x]);
        assert_eq!(s1, s2);
        assert_eq!(s1, s3);
        let n = b.node_count();
        b.mul(&[y, x]);
        b.mul(&[x, y]);
        assert_eq!(b.node_count(), n + 1);
    }

    #[test]
    fn tests_with_different_thresholds_differ() {
        let mut b = CircuitBuilder::new();
        let (x, t1, t2, hi, lo) = (
            p(&mut b, "x"),
            p(&mut b, "t1"),
            p(&mut b, "t2"),
            p(&mut b, "hi"),
            p(&mut b, "lo"),
        );
        assert_ne!(b.test(x, t1, hi, lo), b.test(x, t2, hi, lo));
        assert_eq!(b.test(x, t1, hi, lo), b.test(x, t1, hi, lo));
    }

    #[test]
    fn folding() {
        let mut b = CircuitBuilder::new();
        let x = p(&mut b, "x");
        let one = b.constant(1.0);
        assert_eq!(b.mul(&[one, x]), x);
        assert_eq!(b.add(&[x]), x);
        let empty = b.add(&[]);
        assert_eq!(b.kind(empty), NodeKind::Const(0.0));
        assert_eq!(b.mul(&[one, one]), one);
    }

    #[test]
    fn no_dedup_duplicates_inner_nodes() {
        let mut b = CircuitBuilder::without_dedup();
        let (x, y) = (p(&mut b, "x"), p(&mut b, "y"));
        assert_ne!(b.add(&[x, y]), b.add(&[x, y]));
        assert_eq!(p(&mut b, "x"), x);
    }

    #[test]
    fn finish_drops_unreachable_and_requires_outputs() {
        let mut b = CircuitBuilder::new();
        let (x, y) = (p(&mut b, "x"), p(&mut b, "y"));
        let keep = b.mul(&[x, y]);
        b.add(&[x, y]);
        let c = b.clone().finish(&[keep], QueryInfo::default()).unwrap();
        assert_eq!(c.len(), 3);
        assert!(b.finish(&[], QueryInfo::default()).is_err());
    }
}
