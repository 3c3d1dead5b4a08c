//! Factors over discrete variables and factor elimination.
//!
//! A [`Factor`] maps each instantiation of its scope to a cell. Cells are
//! plain numbers when the factor is driven by [`Numeric`], and circuit node
//! handles when it is driven by a [`crate::circuit::CircuitBuilder`]; the
//! same elimination code then either computes a marginal or records the
//! circuit that computes it.
//!
//! Cells are stored mixed-radix with the last scope variable varying fastest.

use std::collections::{BTreeMap, BTreeSet};

use crate::error::{Error, Result};
use crate::model::VarId;

/// Arithmetic used to combine cells.
pub trait CellOps {
    type Cell: Clone;

    fn one(&mut self) -> Self::Cell;
    fn mul(&mut self, a: &Self::Cell, b: &Self::Cell) -> Self::Cell;
    /// Sum of `cells`, in the given order.
    fn sum(&mut self, cells: &[Self::Cell]) -> Self::Cell;
}

/// Ordinary floating point arithmetic.
#[derive(Debug, Clone, Copy, Default)]
pub struct Numeric;

impl CellOps for Numeric {
    type Cell = f64;

    fn one(&mut self) -> f64 {
        1.0
    }

    fn mul(&mut self, a: &f64, b: &f64) -> f64 {
        a * b
    }

    fn sum(&mut self, cells: &[f64]) -> f64 {
        cells.iter().sum()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Factor<C> {
    scope: Vec<VarId>,
    cards: Vec<usize>,
    cells: Vec<C>,
}

impl<C: Clone> Factor<C> {
    pub fn new(scope: Vec<VarId>, cards: Vec<usize>, cells: Vec<C>) -> Result<Self> {
        if scope.len() != cards.len() {
            return Err(Error::Factor(format!(
                "{} scope variables but {} cardinalities",
                scope.len(),
                cards.len()
            )));
        }
        let distinct: BTreeSet<_> = scope.iter().collect();
        if distinct.len() != scope.len() {
            return Err(Error::Factor("scope variables must be distinct".into()));
        }
        let size: usize = cards.iter().product();
        if size != cells.len() {
            return Err(Error::Factor(format!(
                "scope has {size} instantiations but {} cells were given",
                cells.len()
            )));
        }
        Ok(Factor {
            scope,
            cards,
            cells,
        })
    }

    /// Factor with every cell equal to `ops.one()`.
    pub fn unit<O: CellOps<Cell = C>>(scope: Vec<VarId>, cards: Vec<usize>, ops: &mut O) -> Self {
        let size = cards.iter().product();
        let one = ops.one();
        Factor {
            scope,
            cards,
            cells: vec![one; size],
        }
    }

    pub fn scope(&self) -> &[VarId] {
        &self.scope
    }

    pub fn cards(&self) -> &[usize] {
        &self.cards
    }

    pub fn cells(&self) -> &[C] {
        &self.cells
    }

    pub fn into_cells(self) -> Vec<C> {
        self.cells
    }

    pub fn contains(&self, v: VarId) -> bool {
        self.scope.contains(&v)
    }

    /// Cell for a full assignment given in scope order.
    pub fn get(&self, assignment: &[usize]) -> &C {
        let mut i = 0;
        for (s, c) in assignment.iter().zip(&self.cards) {
            i = i * c + s;
        }
        &self.cells[i]
    }

    /// Replaces every cell through `f`, keeping the scope.
    pub fn map<D>(&self, f: impl FnMut(&C) -> D) -> Factor<D> {
        Factor {
            scope: self.scope.clone(),
            cards: self.cards.clone(),
            cells: self.cells.iter().map(f).collect(),
        }
    }

    /// Pointwise product. The scope is this factor's scope followed by the
    /// variables of `other` it lacks.
    pub fn multiply<O: CellOps<Cell = C>>(&self, other: &Factor<C>, ops: &mut O) -> Result<Factor<C>> {
        let mut scope = self.scope.clone();
        let mut cards = self.cards.clone();
        for (v, c) in other.scope.iter().zip(&other.cards) {
            match self.scope.iter().position(|s| s == v) {
                Some(i) if self.cards[i] != *c => {
                    return Err(Error::Factor(format!(
                        "variable {} has cardinality {} and {c}",
                        v.0, self.cards[i]
                    )))
                }
                Some(_) => {}
                None => {
                    scope.push(*v);
                    cards.push(*c);
                }
            }
        }
        let self_strides = strides_in(&scope, &self.scope, &self.cards);
        let other_strides = strides_in(&scope, &other.scope, &other.cards);
        let size: usize = cards.iter().product();
        let mut cells = Vec::with_capacity(size);
        let mut counter = vec![0usize; scope.len()];
        let (mut i, mut j) = (0usize, 0usize);
        for _ in 0..size {
            cells.push(ops.mul(&self.cells[i], &other.cells[j]));
            // Odometer increment, last position fastest.
            for d in (0..scope.len()).rev() {
                counter[d] += 1;
                i += self_strides[d];
                j += other_strides[d];
                if counter[d] < cards[d] {
                    break;
                }
                i -= self_strides[d] * cards[d];
                j -= other_strides[d] * cards[d];
                counter[d] = 0;
            }
        }
        Ok(Factor {
            scope,
            cards,
            cells,
        })
    }

    /// Sums out `vars`. Each resulting cell is one sum over its compatible
    /// cells, taken in index order.
    pub fn sum_out<O: CellOps<Cell = C>>(&self, vars: &[VarId], ops: &mut O) -> Result<Factor<C>> {
        if let Some(v) = vars.iter().find(|v| !self.scope.contains(v)) {
            return Err(Error::Factor(format!("variable {} is not in scope", v.0)));
        }
        if vars.is_empty() {
            return Ok(self.clone());
        }
        let keep: Vec<usize> = (0..self.scope.len())
            .filter(|i| !vars.contains(&self.scope[*i]))
            .collect();
        let scope: Vec<VarId> = keep.iter().map(|&i| self.scope[i]).collect();
        let cards: Vec<usize> = keep.iter().map(|&i| self.cards[i]).collect();
        let size: usize = cards.iter().product();
        let out_strides = strides_in(&self.scope, &scope, &cards);
        let mut groups: Vec<Vec<C>> = vec![Vec::new(); size];
        let mut counter = vec![0usize; self.scope.len()];
        let mut o = 0usize;
        for cell in &self.cells {
            groups[o].push(cell.clone());
            for d in (0..self.scope.len()).rev() {
                counter[d] += 1;
                o += out_strides[d];
                if counter[d] < self.cards[d] {
                    break;
                }
                o -= out_strides[d] * self.cards[d];
                counter[d] = 0;
            }
        }
        let cells = groups.iter().map(|g| ops.sum(g)).collect();
        Ok(Factor {
            scope,
            cards,
            cells,
        })
    }

    /// Sums out everything except `keep`, then reorders the scope to match `keep`.
    pub fn marginal<O: CellOps<Cell = C>>(&self, keep: &[VarId], ops: &mut O) -> Result<Factor<C>> {
        let drop: Vec<VarId> = self
            .scope
            .iter()
            .copied()
            .filter(|v| !keep.contains(v))
            .collect();
        let f = self.sum_out(&drop, ops)?;
        f.reorder(keep)
    }

    /// Same factor with its scope permuted into `order`.
    pub fn reorder(&self, order: &[VarId]) -> Result<Factor<C>> {
        if order.len() != self.scope.len() || order.iter().any(|v| !self.scope.contains(v)) {
            return Err(Error::Factor("reorder needs a permutation of the scope".into()));
        }
        let cards: Vec<usize> = order
            .iter()
            .map(|v| self.cards[self.scope.iter().position(|s| s == v).unwrap()])
            .collect();
        let src = strides_in(order, &self.scope, &self.cards);
        let size = self.cells.len();
        let mut cells = Vec::with_capacity(size);
        let mut counter = vec![0usize; order.len()];
        let mut i = 0usize;
        for _ in 0..size {
            cells.push(self.cells[i].clone());
            for d in (0..order.len()).rev() {
                counter[d] += 1;
                i += src[d];
                if counter[d] < cards[d] {
                    break;
                }
                i -= src[d] * cards[d];
                counter[d] = 0;
            }
        }
        Ok(Factor {
            scope: order.to_vec(),
            cards,
            cells,
        })
    }
}

/// For each variable of `outer`, its stride inside a factor over `inner` (0 if absent).
fn strides_in(outer: &[VarId], inner: &[VarId], inner_cards: &[usize]) -> Vec<usize> {
    let mut inner_strides = vec![1usize; inner.len()];
    for d in (0..inner.len().saturating_sub(1)).rev() {
        inner_strides[d] = inner_strides[d + 1] * inner_cards[d + 1];
    }
    outer
        .iter()
        .map(|v| {
            inner
                .iter()
                .position(|w| w == v)
                .map_or(0, |p| inner_strides[p])
        })
        .collect()
}

/// Undirected graph linking variables that share a factor.
#[derive(Debug, Clone, Default)]
pub struct InteractionGraph {
    adj: BTreeMap<VarId, BTreeSet<VarId>>,
}

impl InteractionGraph {
    pub fn from_scopes<'a>(scopes: impl IntoIterator<Item = &'a [VarId]>) -> Self {
        let mut g = InteractionGraph::default();
        for scope in scopes {
            for &v in scope {
                g.adj.entry(v).or_default();
                for &w in scope {
                    if v != w {
                        g.adj.get_mut(&v).unwrap().insert(w);
                    }
                }
            }
        }
        g
    }

    pub fn add_edge(&mut self, a: VarId, b: VarId) {
        self.adj.entry(a).or_default();
        self.adj.entry(b).or_default();
        if a != b {
            self.adj.get_mut(&a).unwrap().insert(b);
            self.adj.get_mut(&b).unwrap().insert(a);
        }
    }

    pub fn add_vertex(&mut self, a: VarId) {
        self.adj.entry(a).or_default();
    }

    pub fn vertices(&self) -> impl Iterator<Item = VarId> + '_ {
        self.adj.keys().copied()
    }

    pub fn neighbors(&self, v: VarId) -> Option<&BTreeSet<VarId>> {
        self.adj.get(&v)
    }

    fn fill(&self, v: VarId) -> usize {
        let n: Vec<VarId> = self.adj[&v].iter().copied().collect();
        let mut missing = 0;
        for (i, a) in n.iter().enumerate() {
            for b in &n[i + 1..] {
                if !self.adj[a].contains(b) {
                    missing += 1;
                }
            }
        }
        missing
    }

    fn eliminate(&mut self, v: VarId) -> usize {
        let n: Vec<VarId> = self.adj.remove(&v).unwrap().into_iter().collect();
        for a in &n {
            self.adj.get_mut(a).unwrap().remove(&v);
        }
        for (i, &a) in n.iter().enumerate() {
            for &b in &n[i + 1..] {
                self.add_edge(a, b);
            }
        }
        n.len()
    }
}

/// Min-fill elimination order over every vertex not in `keep`, ties broken
/// by the smallest variable id. Returns the order and its induced width.
pub fn min_fill_order(graph: &InteractionGraph, keep: &BTreeSet<VarId>) -> (Vec<VarId>, usize) {
    let mut g = graph.clone();
    let mut order = Vec::new();
    let mut width = keep.len().saturating_sub(1);
    loop {
        let best = g
            .vertices()
            .filter(|v| !keep.contains(v))
            .map(|v| (g.fill(v), v))
            .min();
        let Some((_, v)) = best else { break };
        width = width.max(g.eliminate(v));
        order.push(v);
    }
    (order, width)
}

/// One elimination step: sum out what only `eliminate` mentions, multiply the result into `target`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Step {
    pub eliminate: usize,
    pub target: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EliminationPlan {
    pub steps: Vec<Step>,
    pub root: usize,
    pub width: usize,
}

impl EliminationPlan {
    /// Plan that eliminates every factor into `root`, guided by a min-fill
    /// order over the variables outside the root's scope.
    pub fn new(scopes: &[Vec<VarId>], root: usize) -> Result<Self> {
        if root >= scopes.len() {
            return Err(Error::Plan(format!("root {root} out of range")));
        }
        let keep: BTreeSet<VarId> = scopes[root].iter().copied().collect();
        let graph = InteractionGraph::from_scopes(scopes.iter().map(|s| s.as_slice()));
        let (order, width) = min_fill_order(&graph, &keep);
        let steps = schedule(scopes, root, &order, &keep);
        Ok(EliminationPlan { steps, root, width })
    }

    /// Checks that every non-root factor is eliminated exactly once, into a live factor.
    pub fn check(&self, factor_count: usize) -> Result<()> {
        if self.root >= factor_count {
            return Err(Error::Plan("root out of range".into()));
        }
        let mut live = vec![true; factor_count];
        for s in &self.steps {
            if s.eliminate >= factor_count || s.target >= factor_count {
                return Err(Error::Plan(format!("step {s:?} refers to a missing factor")));
            }
            if s.eliminate == self.root {
                return Err(Error::Plan("the root cannot be eliminated".into()));
            }
            if !live[s.eliminate] || !live[s.target] || s.eliminate == s.target {
                return Err(Error::Plan(format!("step {s:?} uses an eliminated factor")));
            }
            live[s.eliminate] = false;
        }
        if let Some(f) = (0..factor_count).find(|&f| f != self.root && live[f]) {
            return Err(Error::Plan(format!("factor {f} is never eliminated")));
        }
        Ok(())
    }
}

fn schedule(scopes: &[Vec<VarId>], root: usize, order: &[VarId], keep: &BTreeSet<VarId>) -> Vec<Step> {
    let mut live: Vec<Option<BTreeSet<VarId>>> = scopes
        .iter()
        .map(|s| Some(s.iter().copied().collect()))
        .collect();
    let mut steps = Vec::new();
    let position: BTreeMap<VarId, usize> = order.iter().enumerate().map(|(i, v)| (*v, i)).collect();

    // Shared variables of `f`: those some other live factor also mentions.
    fn shared(live: &[Option<BTreeSet<VarId>>], f: usize) -> BTreeSet<VarId> {
        let mine = live[f].as_ref().unwrap();
        mine.iter()
            .copied()
            .filter(|v| {
                live.iter()
                    .enumerate()
                    .any(|(g, s)| g != f && s.as_ref().is_some_and(|s| s.contains(v)))
            })
            .collect()
    }

    fn eliminate(
        live: &mut [Option<BTreeSet<VarId>>],
        steps: &mut Vec<Step>,
        from: usize,
        into: usize,
    ) {
        let kept = shared(live, from);
        live[from] = None;
        live[into].as_mut().unwrap().extend(kept);
        steps.push(Step {
            eliminate: from,
            target: into,
        });
    }

    for &v in order {
        let holders: Vec<usize> = (0..live.len())
            .filter(|&f| live[f].as_ref().is_some_and(|s| s.contains(&v)))
            .collect();
        if holders.is_empty() {
            continue;
        }
        let target = if holders.contains(&root) { root } else { holders[0] };
        for &f in &holders {
            if f != target {
                eliminate(&mut live, &mut steps, f, target);
            }
        }
        if target == root {
            continue;
        }
        let m = shared(&live, target);
        let superset = (0..live.len()).find(|&g| {
            g != target && g != root && live[g].as_ref().is_some_and(|s| m.is_subset(s))
        });
        let next = match superset {
            Some(g) => g,
            None if m.is_subset(keep) => root,
            None => {
                let earliest = m
                    .iter()
                    .filter(|w| !keep.contains(w))
                    .min_by_key(|w| position.get(w).copied().unwrap_or(usize::MAX))
                    .copied()
                    .unwrap();
                (0..live.len())
                    .find(|&g| g != target && live[g].as_ref().is_some_and(|s| s.contains(&earliest)))
                    .unwrap()
            }
        };
        eliminate(&mut live, &mut steps, target, next);
    }
    for f in 0..live.len() {
        if f != root && live[f].is_some() {
            eliminate(&mut live, &mut steps, f, root);
        }
    }
    steps
}

/// Runs `plan` and returns the surviving root factor.
pub fn eliminate_all_except<O: CellOps>(
    factors: Vec<Factor<O::Cell>>,
    plan: &EliminationPlan,
    ops: &mut O,
) -> Result<Factor<O::Cell>> {
    plan.check(factors.len())?;
    let mut live: Vec<Option<Factor<O::Cell>>> = factors.into_iter().map(Some).collect();
    for step in &plan.steps {
        let from = live[step.eliminate].take().unwrap();
        let exclusive: Vec<VarId> = from
            .scope()
            .iter()
            .copied()
            .filter(|v| {
                !live
                    .iter()
                    .flatten()
                    .any(|g| g.contains(*v))
            })
            .collect();
        let message = from.sum_out(&exclusive, ops)?;
        let target = live[step.target].as_ref().unwrap();
        live[step.target] = Some(target.multiply(&message, ops)?);
    }
    Ok(live[plan.root].take().unwrap())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn v(i: usize) -> VarId {
        VarId(i)
    }

    fn f(scope: &[usize], cards: &[usize], cells: &[f64]) -> Factor<f64> {
        Factor::new(scope.iter().map(|&i| v(i)).collect(), cards.to_vec(), cells.to_vec()).unwrap()
    }

    #[test]
    fn pointwise_product() {
        let p = f(&[0], &[2], &[0.6, 0.4]).multiply(&f(&[0], &[2], &[0.5, 0.5]), &mut Numeric).unwrap();
        assert_eq!(p.cells(), &[0.3, 0.2]);
    }

    #[test]
    fn disjoint_product() {
        let p = f(&[0], &[2], &[0.6, 0.4]).multiply(&f(&[1], &[2], &[1.0, 1.0]), &mut Numeric).unwrap();
        assert_eq!(p.scope(), &[v(0), v(1)]);
        assert_eq!(p.cells(), &[0.6, 0.6, 0.4, 0.4]);
    }

    #[test]
    fn product_with_shared_and_new_variables() {
        // g is over (C, A): the result is over (A, B, C).
        let a = f(&[0, 1], &[2, 3], &[1., 2., 3., 4., 5., 6.]);
        let b = f(&[2, 0], &[2, 2], &[10., 20., 30., 40.]);
        let p = a.multiply(&b, &mut Numeric).unwrap();
        assert_eq!(p.scope(), &[v(0), v(1), v(2)]);
        assert_eq!(*p.get(&[0, 2, 1]), 3. * 30.);
        assert_eq!(*p.get(&[1, 1, 0]), 5. * 20.);
        assert_eq!(*p.get(&[1, 0, 1]), 4. * 40.);
    }

    #[test]
    fn sum_out_cases() {
        let g = f(&[0], &[2], &[0.3, 0.7]);
        let s = g.sum_out(&[v(0)], &mut Numeric).unwrap();
        assert!(s.scope().is_empty());
        assert!((s.cells()[0] - 1.0).abs() < 1e-15);
        assert_eq!(g.sum_out(&[], &mut Numeric).unwrap(), g);
        assert!(g.sum_out(&[v(5)], &mut Numeric).is_err());

        let h = f(&[0, 1], &[2, 2], &[1., 2., 3., 4.]);
        assert_eq!(h.sum_out(&[v(1)], &mut Numeric).unwrap().cells(), &[3., 7.]);
        assert_eq!(h.sum_out(&[v(0)], &mut Numeric).unwrap().cells(), &[4., 6.]);
    }

    #[test]
    fn constructor_checks_size() {
        assert!(Factor::new(vec![v(0)], vec![2], vec![1.0]).is_err());
        assert!(Factor::new(vec![v(0), v(0)], vec![2, 2], vec![1.0; 4]).is_err());
    }

    #[test]
    fn reorder_permutes_cells() {
        let h = f(&[0, 1], &[2, 3], &[1., 2., 3., 4., 5., 6.]);
        let r = h.reorder(&[v(1), v(0)]).unwrap();
        assert_eq!(r.cells(), &[1., 4., 2., 5., 3., 6.]);
    }

    fn graph(edges: &[(usize, usize)], n: usize) -> InteractionGraph {
        let mut g = InteractionGraph::default();
        for i in 0..n {
            g.add_vertex(v(i));
        }
        for &(a, b) in edges {
            g.add_edge(v(a), v(b));
        }
        g
    }

    #[test]
    fn chain_width_one() {
        let g = graph(&[(0, 1), (1, 2)], 3);
        let (order, width) = min_fill_order(&g, &[v(2)].into());
        assert_eq!(order, vec![v(0), v(1)]);
        assert_eq!(width, 1);
    }

    #[test]
    fn four_cycle_width_two() {
        let g = graph(&[(0, 1), (1, 2), (2, 3), (3, 0)], 4);
        assert_eq!(min_fill_order(&g, &BTreeSet::new()).1, 2);
    }

    #[test]
    fn single_variable() {
        let g = graph(&[], 1);
        let (order, width) = min_fill_order(&g, &[v(0)].into());
        assert!(order.is_empty());
        assert_eq!(width, 0);
    }

    #[test]
    fn single_factor_returns_root() {
        let root = f(&[0], &[2], &[0.2, 0.8]);
        let plan = EliminationPlan::new(&[root.scope().to_vec()], 0).unwrap();
        assert!(plan.steps.is_empty());
        let out = eliminate_all_except(vec![root.clone()], &plan, &mut Numeric).unwrap();
        assert_eq!(out, root);
    }

    #[test]
    fn bad_plans_are_rejected() {
        let plan = EliminationPlan {
            steps: vec![Step { eliminate: 1, target: 0 }, Step { eliminate: 1, target: 0 }],
            root: 0,
            width: 0,
        };
        assert!(plan.check(2).is_err());
        let plan = EliminationPlan { steps: vec![], root: 0, width: 0 };
        assert!(plan.check(2).is_err());
    }

    #[test]
    fn chain_query() {
        // A -> B -> C, P(C).
        let fa = f(&[0], &[2], &[0.6, 0.4]);
        let fb = f(&[0, 1], &[2, 2], &[0.9, 0.1, 0.2, 0.8]);
        let fc = f(&[1, 2], &[2, 2], &[0.3, 0.7, 0.5, 0.5]);
        let scopes: Vec<Vec<VarId>> = [&fa, &fb, &fc].iter().map(|x| x.scope().to_vec()).collect();
        let plan = EliminationPlan::new(&scopes, 2).unwrap();
        let root = eliminate_all_except(vec![fa, fb, fc], &plan, &mut Numeric).unwrap();
        let q = root.marginal(&[v(2)], &mut Numeric).unwrap();
        let pb = 0.6 * 0.9 + 0.4 * 0.2;
        let expect = pb * 0.3 + (1.0 - pb) * 0.5;
        assert!((q.cells()[0] - expect).abs() < 1e-12);
    }
}
