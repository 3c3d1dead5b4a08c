use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{Cpt, Evidence, TbnModel, VarId};

/// Largest joint state space the enumerators accept.
pub const ENUMERATION_LIMIT: u128 = 1 << 20;

/// Query answer from enumeration: `P*(q)` for every state and, when the
/// evidence has nonzero probability, the normalized posterior.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Marginal {
    pub joint: Vec<f64>,
    pub posterior: Option<Vec<f64>>,
}

impl Marginal {
    fn new(joint: Vec<f64>) -> Self {
        let total: f64 = joint.iter().sum();
        let posterior = (total > 0.0).then(|| joint.iter().map(|v| v / total).collect());
        Marginal { joint, posterior }
    }
}

/// Regular CPT tables of a model, one per variable (testing nodes resolved).
struct Tables<'m> {
    model: &'m TbnModel,
    probs: Vec<Vec<f64>>,
    lambda: Vec<Option<Vec<f64>>>,
}

impl<'m> Tables<'m> {
    fn new(model: &'m TbnModel, evidence: &Evidence) -> Result<Self> {
        evidence.validate(model)?;
        let mut lambda = vec![None; model.len()];
        for (name, l) in evidence.iter() {
            lambda[model.var(name)?.0] = Some(l.to_vec());
        }
        let probs = model
            .nodes()
            .iter()
            .map(|n| match &n.cpt {
                Cpt::Regular { probs } => probs.clone(),
                Cpt::Testing { .. } => Vec::new(),
            })
            .collect();
        Ok(Tables { model, probs, lambda })
    }

    fn row(&self, x: VarId, assignment: &[usize]) -> usize {
        self.model
            .parents(x)
            .iter()
            .fold(0, |row, p| row * self.model.card(*p) + assignment[p.0])
    }

    /// Sums the weighted network polynomial over all joint states of `vars`
    /// (which must be closed under taking parents). `visit` receives each
    /// assignment (indexed by `VarId`) and its weight.
    fn enumerate(&self, vars: &[VarId], mut visit: impl FnMut(&[usize], f64)) -> Result<()> {
        let states: u128 = vars.iter().map(|v| self.model.card(*v) as u128).product();
        if states > ENUMERATION_LIMIT {
            return Err(Error::TooLarge {
                states,
                limit: ENUMERATION_LIMIT,
            });
        }
        let mut assignment = vec![0usize; self.model.len()];
        loop {
            let mut w = 1.0;
            for &x in vars {
                let card = self.model.card(x);
                let s = assignment[x.0];
                w *= self.probs[x.0][self.row(x, &assignment) * card + s];
                if let Some(l) = &self.lambda[x.0] {
                    w *= l[s];
                }
            }
            visit(&assignment, w);
            // Odometer over `vars`, last variable fastest.
            let mut k = vars.len();
            loop {
                if k == 0 {
                    return Ok(());
                }
                k -= 1;
                let x = vars[k];
                assignment[x.0] += 1;
                if assignment[x.0] < self.model.card(x) {
                    break;
                }
                assignment[x.0] = 0;
            }
        }
    }

    fn query(&self, q: VarId) -> Result<Marginal> {
        let vars: Vec<VarId> = self.model.ids().collect();
        let mut joint = vec![0.0; self.model.card(q)];
        self.enumerate(&vars, |a, w| joint[a[q.0]] += w)?;
        Ok(Marginal::new(joint))
    }
}

/// Exact `P*(query)` of a network without testing nodes, by summing the
/// network polynomial over every joint state.
pub fn brute_force_query(model: &TbnModel, evidence: &Evidence, query: &str) -> Result<Marginal> {
    let q = model.var(query)?;
    if let Some(t) = model.testing_nodes().first() {
        return Err(Error::invalid(
            "enumeration",
            format!("`{}` is a testing node; use select_then_infer", model.name(*t)),
        ));
    }
    Tables::new(model, evidence)?.query(q)
}

/// Resolves every testing CPT of `model` the way the network semantics
/// prescribe: visiting testing nodes parents first, each one's parent
/// marginal given evidence on its ancestors is computed by enumeration, and
/// the positive distribution is kept for row `u` iff `P*(u) ≥ T_u`.
pub fn select_cpts(model: &TbnModel, evidence: &Evidence) -> Result<TbnModel> {
    let mut tables = Tables::new(model, evidence)?;
    let mut selected = model.clone();
    for &x in model.topological_order() {
        let Cpt::Testing { thresholds, pos, neg } = &model.node(x).cpt else {
            continue;
        };
        let ancestors: Vec<VarId> = model.ancestors(x).into_iter().collect();
        let parents = model.parents(x);
        let mut n_u = vec![0.0; model.parent_configs(x)];
        tables.enumerate(&ancestors, |a, w| {
            let row = parents.iter().fold(0, |row, p| row * model.card(*p) + a[p.0]);
            n_u[row] += w;
        })?;
        let n: f64 = n_u.iter().sum();
        let card = model.card(x);
        let mut probs = Vec::with_capacity(pos.len());
        for (u, t) in thresholds.iter().enumerate() {
            // Unnormalized comparison: with zero-probability evidence every row passes.
            let src = if n_u[u] >= n * t { pos } else { neg };
            probs.extend_from_slice(&src[u * card..(u + 1) * card]);
        }
        tables.probs[x.0] = probs.clone();
        selected = selected.with_cpt(x, Cpt::Regular { probs })?;
    }
    Ok(selected)
}

/// Reference semantics of a testing network query: select every testing CPT,
/// then enumerate the resulting network.
pub fn select_then_infer(model: &TbnModel, evidence: &Evidence, query: &str) -> Result<Marginal> {
    let q = model.var(query)?;
    let selected = select_cpts(model, evidence)?;
    Tables::new(&selected, evidence)?.query(q)
}
