//! Compiling TBN queries into circuits by symbolic factor elimination.
//!
//! Compilation runs factor elimination over factors whose cells are circuit
//! nodes, so the elimination itself is recorded as a circuit:
//!
//! 1. the model is pruned of barren leaves;
//! 2. each CPT becomes a factor of parameter leaves;
//! 3. every cell of an evidence variable's CPT for state `x_i` is multiplied by
//!    the evidence leaf `λ_i`;
//! 4. testing nodes are visited parents first. For testing node `X` with
//!    parents `U`, the CPTs of `X`'s ancestors are eliminated into a unit
//!    factor over `U`, which leaves `n_u`, the joint of `u` with the evidence
//!    on `X`'s ancestors. With `n = Σ_u n_u`, each row of `X`'s CPT becomes
//!    `test(n_u, n·T_u, θ⁺, θ⁻)` (threshold mode), or
//!    `sigsel(n_u / n, T_u, θ⁺, θ⁻)` (sigmoid mode). This is *flattening*:
//!    the testing CPT is now a regular CPT of circuit nodes;
//! 5. all CPTs are eliminated into the query's CPT and summed down to the
//!    query variable, whose cells are the circuit outputs.
//!
//! The threshold comparison `n_u >= n·T_u` equals `n_u / n >= T_u` whenever
//! `n > 0`. When the evidence has probability zero the test sees `0 >= 0` and
//! picks `θ⁺`.

use crate::circuit::{Circuit, CircuitBuilder, NodeId, ParamRole, ParamSpec, QueryInfo};
use crate::error::{Error, Result};
use crate::factor::{eliminate_all_except, EliminationPlan, Factor};
use crate::model::{Cpt, TbnModel, VarId};

/// How testing CPTs pick between their two distributions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SelectionMode {
    /// Hard selection: `θ⁺` iff the parent posterior is at least the threshold.
    Threshold,
    /// Soft selection: `τ·θ⁺ + (1−τ)·θ⁻` with `τ = sigmoid(γ·(posterior − threshold))`.
    Sigmoid { gamma: f64 },
}

impl SelectionMode {
    /// Slope used for training unless configured otherwise.
    pub const DEFAULT_GAMMA: f64 = 16.0;
}

#[derive(Debug, Clone)]
pub struct CompileRequest<'a> {
    pub model: &'a TbnModel,
    pub query: String,
    pub evidence: Vec<String>,
    pub mode: SelectionMode,
    /// Share structurally identical nodes. Turning this off is only useful for comparisons.
    pub dedup: bool,
}

impl<'a> CompileRequest<'a> {
    pub fn new(model: &'a TbnModel, query: &str, evidence: &[&str], mode: SelectionMode) -> Self {
        CompileRequest {
            model,
            query: query.to_string(),
            evidence: evidence.iter().map(|e| e.to_string()).collect(),
            mode,
            dedup: true,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.model.var(&self.query)?;
        for (i, e) in self.evidence.iter().enumerate() {
            self.model.var(e)?;
            if *e == self.query {
                return Err(Error::invalid(
                    "request",
                    format!("query `{e}` cannot also be evidence"),
                ));
            }
            if self.evidence[..i].contains(e) {
                return Err(Error::invalid("request", format!("evidence `{e}` listed twice")));
            }
        }
        if let SelectionMode::Sigmoid { gamma } = self.mode {
            if !(gamma > 0.0 && gamma.is_finite()) {
                return Err(Error::invalid(
                    "request",
                    format!("sigmoid slope must be positive, got {gamma}"),
                ));
            }
        }
        Ok(())
    }

    pub fn compile(&self) -> Result<Circuit> {
        self.validate()?;
        let evidence: Vec<&str> = self.evidence.iter().map(|s| s.as_str()).collect();
        let model = self.model.prune_for_query(&self.query, &evidence)?;
        let mut compiler = Compiler::new(&model, &evidence, self.mode, self.dedup)?;
        compiler.compile(&self.query)
    }
}

/// Compiles `P*(query, evidence)` with default settings.
pub fn compile(model: &TbnModel, query: &str, evidence: &[&str], mode: SelectionMode) -> Result<Circuit> {
    CompileRequest::new(model, query, evidence, mode).compile()
}

/// Name of the parameter for `X = x` given parent row `u`, e.g. `p(B=b|A=a)`.
pub fn param_name(model: &TbnModel, x: VarId, u: usize, state: usize, prefix: &str) -> String {
    let child = model.variable(x);
    let given = given_text(model, x, u);
    if given.is_empty() {
        format!("{prefix}({}={})", child.name, child.states[state])
    } else {
        format!("{prefix}({}={}|{given})", child.name, child.states[state])
    }
}

/// Name of the threshold of `X` for parent row `u`, e.g. `T(B|A=a)`.
pub fn threshold_name(model: &TbnModel, x: VarId, u: usize) -> String {
    format!("T({}|{})", model.name(x), given_text(model, x, u))
}

fn given_text(model: &TbnModel, x: VarId, u: usize) -> String {
    model
        .parents(x)
        .iter()
        .zip(model.parent_states(x, u))
        .map(|(p, s)| format!("{}={}", model.name(*p), model.variable(*p).states[s]))
        .collect::<Vec<_>>()
        .join(",")
}

/// Symbolic factor elimination over one (already pruned) model.
#[derive(Debug)]
pub struct Compiler<'m> {
    model: &'m TbnModel,
    builder: CircuitBuilder,
    evidence: Vec<VarId>,
    mode: SelectionMode,
    /// Regular CPT factor of every node; for testing nodes, filled by flattening.
    cpts: Vec<Option<Factor<NodeId>>>,
    next_row: u32,
}

impl<'m> Compiler<'m> {
    pub fn new(model: &'m TbnModel, evidence: &[&str], mode: SelectionMode, dedup: bool) -> Result<Self> {
        let mut builder = if dedup {
            CircuitBuilder::new()
        } else {
            CircuitBuilder::without_dedup()
        };
        let mut ids = Vec::with_capacity(evidence.len());
        for e in evidence {
            let id = model.var(e)?;
            builder.declare_evidence(e, &model.variable(id).states);
            ids.push(id);
        }
        let mut c = Compiler {
            model,
            builder,
            evidence: ids,
            mode,
            cpts: vec![None; model.len()],
            next_row: 0,
        };
        for id in model.topological_order().to_vec() {
            if !model.is_testing(id) {
                let f = c.regular_factor(id);
                c.cpts[id.0] = Some(f);
            }
        }
        Ok(c)
    }

    pub fn builder(&self) -> &CircuitBuilder {
        &self.builder
    }

    fn scope_of(&self, x: VarId) -> (Vec<VarId>, Vec<usize>) {
        let mut scope = self.model.parents(x).to_vec();
        scope.push(x);
        let cards = scope.iter().map(|v| self.model.card(*v)).collect();
        (scope, cards)
    }

    fn row_param(&mut self, x: VarId, u: usize, state: usize, prefix: &str, value: f64, row: u32) -> NodeId {
        self.builder.param(ParamSpec {
            name: param_name(self.model, x, u, state, prefix),
            value,
            trainable: true,
            role: ParamRole::Probability { row },
        })
    }

    fn take_row(&mut self) -> u32 {
        self.next_row += 1;
        self.next_row - 1
    }

    fn regular_factor(&mut self, x: VarId) -> Factor<NodeId> {
        let Cpt::Regular { probs } = &self.model.node(x).cpt else {
            unreachable!("regular_factor on a testing node")
        };
        let probs = probs.clone();
        let k = self.model.card(x);
        let mut cells = Vec::with_capacity(probs.len());
        for u in 0..self.model.parent_configs(x) {
            let row = self.take_row();
            for s in 0..k {
                cells.push(self.row_param(x, u, s, "p", probs[u * k + s], row));
            }
        }
        let (scope, cards) = self.scope_of(x);
        Factor::new(scope, cards, cells).expect("CPT factor shape")
    }

    /// Multiplies each cell for state `x_i` of `x` by the evidence leaf `λ_i`,
    /// if `x` is an evidence variable. Otherwise returns the factor unchanged.
    pub fn enter_evidence(&mut self, x: VarId, factor: &Factor<NodeId>) -> Factor<NodeId> {
        if !self.evidence.contains(&x) {
            return factor.clone();
        }
        let var = self.model.variable(x).clone();
        let pos = factor
            .scope()
            .iter()
            .position(|v| *v == x)
            .expect("evidence variable in its own CPT");
        let stride: usize = factor.cards()[pos + 1..].iter().product();
        let k = var.card();
        let cells: Vec<NodeId> = factor
            .cells()
            .iter()
            .enumerate()
            .map(|(i, cell)| {
                let lambda = self.builder.evidence(&var.name, &var.states[(i / stride) % k]);
                self.builder.mul(&[lambda, *cell])
            })
            .collect();
        Factor::new(factor.scope().to_vec(), factor.cards().to_vec(), cells).expect("same shape")
    }

    /// CPT factor of `x` with evidence entered; testing CPTs must be flattened already.
    fn evidence_factor(&mut self, x: VarId) -> Result<Factor<NodeId>> {
        let f = self.cpts[x.0].clone().ok_or_else(|| {
            Error::Plan(format!(
                "testing node `{}` used before it was flattened",
                self.model.name(x)
            ))
        })?;
        Ok(self.enter_evidence(x, &f))
    }

    /// Turns the testing CPT of `x` into a regular CPT of selection nodes.
    /// All testing ancestors of `x` must be flattened first.
    pub fn flatten_testing_cpt(&mut self, x: VarId) -> Result<Factor<NodeId>> {
        let Cpt::Testing {
            thresholds,
            pos,
            neg,
        } = self.model.node(x).cpt.clone()
        else {
            return Err(Error::invalid(
                "request",
                format!("`{}` is not a testing node", self.model.name(x)),
            ));
        };
        let parents = self.model.parents(x).to_vec();
        if parents.is_empty() {
            return Err(Error::invalid(
                "model",
                format!("testing node `{}` has no parents", self.model.name(x)),
            ));
        }
        let parent_cards: Vec<usize> = parents.iter().map(|p| self.model.card(*p)).collect();

        // Marginal on the parents joint with ancestral evidence.
        let mut factors = vec![Factor::unit(parents.clone(), parent_cards, &mut self.builder)];
        for a in self.model.ancestors(x) {
            factors.push(self.evidence_factor(a)?);
        }
        let scopes: Vec<Vec<VarId>> = factors.iter().map(|f| f.scope().to_vec()).collect();
        let plan = EliminationPlan::new(&scopes, 0)?;
        let joint = eliminate_all_except(factors, &plan, &mut self.builder)?;
        let marginal = joint.marginal(&parents, &mut self.builder)?;
        let n_u = marginal.into_cells();
        let n = self.builder.add(&n_u);

        let k = self.model.card(x);
        let mut cells = Vec::with_capacity(n_u.len() * k);
        for (u, &nu) in n_u.iter().enumerate() {
            let t = self.builder.param(ParamSpec {
                name: threshold_name(self.model, x, u),
                value: thresholds[u],
                trainable: true,
                role: ParamRole::Threshold,
            });
            let pos_row = self.take_row();
            let neg_row = self.take_row();
            let selector = match self.mode {
                SelectionMode::Threshold => self.builder.mul(&[n, t]),
                SelectionMode::Sigmoid { .. } => self.builder.div(nu, n),
            };
            for s in 0..k {
                let hi = self.row_param(x, u, s, "p+", pos[u * k + s], pos_row);
                let lo = self.row_param(x, u, s, "p-", neg[u * k + s], neg_row);
                let cell = match self.mode {
                    SelectionMode::Threshold => self.builder.test(nu, selector, hi, lo),
                    SelectionMode::Sigmoid { gamma } => self.builder.sigsel(selector, t, hi, lo, gamma),
                };
                cells.push(cell);
            }
        }
        let (scope, cards) = self.scope_of(x);
        let f = Factor::new(scope, cards, cells)?;
        self.cpts[x.0] = Some(f.clone());
        Ok(f)
    }

    /// Runs the selection and inference phases and returns the circuit whose
    /// outputs are `P*(q_1), …, P*(q_k)`.
    pub fn compile(&mut self, query: &str) -> Result<Circuit> {
        let q = self.model.var(query)?;
        for x in self.model.testing_nodes() {
            self.flatten_testing_cpt(x)?;
        }
        let mut factors = Vec::with_capacity(self.model.len());
        let mut root = 0;
        for id in self.model.ids() {
            if id == q {
                root = factors.len();
            }
            factors.push(self.evidence_factor(id)?);
        }
        let scopes: Vec<Vec<VarId>> = factors.iter().map(|f| f.scope().to_vec()).collect();
        let plan = EliminationPlan::new(&scopes, root)?;
        let joint = eliminate_all_except(factors, &plan, &mut self.builder)?;
        let outputs = joint.marginal(&[q], &mut self.builder)?.into_cells();
        let info = QueryInfo {
            variable: query.to_string(),
            states: self.model.variable(q).states.clone(),
        };
        let builder = std::mem::take(&mut self.builder);
        builder.finish(&outputs, info)
    }
}
