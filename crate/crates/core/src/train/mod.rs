//! Fitting circuit parameters and thresholds to labeled data.
//!
//! Training minimizes the mean squared error between the circuit's
//! posterior on one query state and the labels. Parameters are not trained
//! directly: each binary distribution row `(θ, 1−θ)` is driven by one
//! meta-parameter `τ` with `θ = logistic(τ)`, rows with more states use a
//! softmax over one meta-parameter per state, and each threshold is
//! `logistic(meta)`. Realized rows therefore always sum to one.
//!
//! Only sigmoid-selection circuits carry useful gradients through their
//! selection units; testing units pass gradient to the selected branch only.

mod dataset;
mod functions;

use std::collections::{BTreeMap, BTreeSet};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub use dataset::{grid_dataset, lattice_dataset, AlignedData, Dataset};
pub use functions::Target;

use crate::circuit::{eval::sigmoid, Circuit, EvalContext, ParamId, ParamRole, SlotId};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Optimizer {
    /// Adaptive moment estimation (β₁ = 0.9, β₂ = 0.999, ε = 1e-8).
    Adam,
    /// Plain gradient descent.
    Gd,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub optimizer: Optimizer,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub seed: u64,
    /// Share of rows held out for picking the best epoch.
    pub validation_fraction: f64,
    /// Query state whose posterior is fitted to the labels.
    pub output_state: usize,
    /// Parameters fixed at a value. Freezing one entry of a row fixes the whole row.
    pub frozen: BTreeMap<String, f64>,
    /// Start from the circuit's own values instead of random meta-parameters.
    pub init_from_circuit: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            optimizer: Optimizer::Adam,
            learning_rate: 0.01,
            batch_size: 64,
            epochs: 2000,
            seed: 0,
            validation_fraction: 0.1,
            output_state: 0,
            frozen: BTreeMap::new(),
            init_from_circuit: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Group {
    /// Binary row: `θ_first = logistic(τ)`, `θ_second = 1 − θ_first`.
    Logistic { meta: usize, first: ParamId, second: ParamId },
    /// Row with more states: softmax, last entry completing the sum.
    Softmax { metas: Vec<usize>, params: Vec<ParamId> },
    Threshold { meta: usize, param: ParamId },
}

/// Map from meta-parameters to circuit parameter values.
#[derive(Debug, Clone, PartialEq)]
pub struct Binding {
    groups: Vec<Group>,
    base: Vec<f64>,
    metas: usize,
}

fn logit(p: f64) -> f64 {
    let p = p.clamp(1e-9, 1.0 - 1e-9);
    (p / (1.0 - p)).ln()
}

impl Binding {
    /// Groups the trainable parameters of `circuit` into rows. Frozen rows keep
    /// their values from `frozen` (or the circuit) and get no meta-parameters.
    pub fn new(circuit: &Circuit, frozen: &BTreeMap<String, f64>) -> Result<Self> {
        let params = circuit.params();
        let mut base: Vec<f64> = params.iter().map(|p| p.value).collect();
        for (name, v) in frozen {
            let id = circuit.param_id(name)?;
            if !(0.0..=1.0).contains(v) {
                return Err(Error::invalid("frozen", format!("`{name}` = {v} is outside [0,1]")));
            }
            base[id.0 as usize] = *v;
        }
        let mut rows: BTreeMap<u32, Vec<ParamId>> = BTreeMap::new();
        let mut thresholds = Vec::new();
        for (i, p) in params.iter().enumerate() {
            let id = ParamId(i as u32);
            match p.role {
                ParamRole::Probability { row } => rows.entry(row).or_default().push(id),
                ParamRole::Threshold => thresholds.push(id),
            }
        }
        let is_frozen = |id: &ParamId| {
            let p = &params[id.0 as usize];
            !p.trainable || frozen.contains_key(&p.name)
        };
        let mut groups = Vec::new();
        let mut metas = 0;
        for members in rows.values() {
            if members.iter().any(is_frozen) {
                fix_row(members, &mut base, |id| frozen.contains_key(&params[id.0 as usize].name));
                continue;
            }
            if members.len() == 2 {
                groups.push(Group::Logistic {
                    meta: metas,
                    first: members[0],
                    second: members[1],
                });
                metas += 1;
            } else {
                groups.push(Group::Softmax {
                    metas: (metas..metas + members.len()).collect(),
                    params: members.clone(),
                });
                metas += members.len();
            }
        }
        for t in thresholds {
            if !is_frozen(&t) {
                groups.push(Group::Threshold { meta: metas, param: t });
                metas += 1;
            }
        }
        Ok(Binding { groups, base, metas })
    }

    pub fn meta_count(&self) -> usize {
        self.metas
    }

    /// Meta-parameters that reproduce the current parameter values (clamped away from 0 and 1).
    pub fn meta_from_values(&self) -> Vec<f64> {
        let mut meta = vec![0.0; self.metas];
        for g in &self.groups {
            match g {
                Group::Logistic { meta: m, first, .. } => meta[*m] = logit(self.base[first.0 as usize]),
                Group::Threshold { meta: m, param } => meta[*m] = logit(self.base[param.0 as usize]),
                Group::Softmax { metas, params } => {
                    for (m, p) in metas.iter().zip(params) {
                        meta[*m] = self.base[p.0 as usize].max(1e-9).ln();
                    }
                }
            }
        }
        meta
    }

    /// Parameter values realized from `meta`.
    pub fn realize(&self, meta: &[f64]) -> Vec<f64> {
        let mut values = self.base.clone();
        for g in &self.groups {
            match g {
                Group::Logistic { meta: m, first, second } => {
                    let t = sigmoid(meta[*m]);
                    values[first.0 as usize] = t;
                    values[second.0 as usize] = 1.0 - t;
                }
                Group::Threshold { meta: m, param } => values[param.0 as usize] = sigmoid(meta[*m]),
                Group::Softmax { metas, params } => {
                    let max = metas.iter().map(|m| meta[*m]).fold(f64::NEG_INFINITY, f64::max);
                    let exps: Vec<f64> = metas.iter().map(|m| (meta[*m] - max).exp()).collect();
                    let total: f64 = exps.iter().sum();
                    let mut acc = 0.0;
                    let last = params.len() - 1;
                    for (k, p) in params.iter().enumerate() {
                        let v = if k == last { 1.0 - acc } else { exps[k] / total };
                        acc += v;
                        values[p.0 as usize] = v;
                    }
                }
            }
        }
        values
    }

    /// Chain rule from parameter gradients to meta-parameter gradients.
    pub fn meta_gradient(&self, meta: &[f64], values: &[f64], grad: &[f64], out: &mut [f64]) {
        for g in &self.groups {
            match g {
                Group::Logistic { meta: m, first, second } => {
                    let t = sigmoid(meta[*m]);
                    out[*m] += (grad[first.0 as usize] - grad[second.0 as usize]) * t * (1.0 - t);
                }
                Group::Threshold { meta: m, param } => {
                    let t = sigmoid(meta[*m]);
                    out[*m] += grad[param.0 as usize] * t * (1.0 - t);
                }
                Group::Softmax { metas, params } => {
                    let mean: f64 = params
                        .iter()
                        .map(|p| values[p.0 as usize] * grad[p.0 as usize])
                        .sum();
                    for (m, p) in metas.iter().zip(params) {
                        out[*m] += values[p.0 as usize] * (grad[p.0 as usize] - mean);
                    }
                }
            }
        }
    }
}

/// Sets the free members of a row so the row sums to one, keeping frozen members.
fn fix_row(members: &[ParamId], base: &mut [f64], frozen: impl Fn(&ParamId) -> bool) {
    let fixed: f64 = members.iter().filter(|m| frozen(m)).map(|m| base[m.0 as usize]).sum();
    let free: Vec<&ParamId> = members.iter().filter(|m| !frozen(m)).collect();
    if free.is_empty() {
        return;
    }
    let free_sum: f64 = free.iter().map(|m| base[m.0 as usize]).sum();
    let rest = (1.0 - fixed).max(0.0);
    for m in &free {
        base[m.0 as usize] = if free_sum > 0.0 {
            base[m.0 as usize] / free_sum * rest
        } else {
            rest / free.len() as f64
        };
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EpochLoss {
    pub epoch: usize,
    pub train: f64,
    pub validation: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrainReport {
    /// Epoch whose parameters were kept (0 means the initial parameters).
    pub best_epoch: usize,
    pub train_mse: f64,
    pub validation_mse: f64,
    pub trace: Vec<EpochLoss>,
}

/// A circuit being trained: its binding, meta-parameters and optimizer state.
#[derive(Debug, Clone)]
pub struct TrainSession<'c> {
    circuit: &'c Circuit,
    binding: Binding,
    meta: Vec<f64>,
    config: TrainConfig,
    ctx: EvalContext,
    adam_m: Vec<f64>,
    adam_v: Vec<f64>,
    steps: u64,
}

impl<'c> TrainSession<'c> {
    pub fn new(circuit: &'c Circuit, config: TrainConfig) -> Result<Self> {
        if config.output_state >= circuit.outputs().len() {
            return Err(Error::invalid(
                "train",
                format!("output state {} does not exist", config.output_state),
            ));
        }
        if circuit.stats().tests > 0 {
            return Err(Error::invalid(
                "train",
                "hard test nodes pass no gradient to their thresholds; compile with sigmoid selection",
            ));
        }
        if config.batch_size == 0 {
            return Err(Error::invalid("train", "batch size must be positive"));
        }
        if !(0.0..1.0).contains(&config.validation_fraction) {
            return Err(Error::invalid("train", "validation fraction must lie in [0,1)"));
        }
        let binding = Binding::new(circuit, &config.frozen)?;
        let meta = if config.init_from_circuit {
            binding.meta_from_values()
        } else {
            let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
            (0..binding.meta_count()).map(|_| rng.gen_range(-0.5..0.5)).collect()
        };
        let n = binding.meta_count();
        Ok(TrainSession {
            circuit,
            binding,
            meta,
            config,
            ctx: EvalContext::new(circuit),
            adam_m: vec![0.0; n],
            adam_v: vec![0.0; n],
            steps: 0,
        })
    }

    pub fn meta(&self) -> &[f64] {
        &self.meta
    }

    pub fn set_meta(&mut self, meta: &[f64]) {
        self.meta.copy_from_slice(meta);
    }

    pub fn binding(&self) -> &Binding {
        &self.binding
    }

    /// Current parameter values.
    pub fn params(&self) -> Vec<f64> {
        self.binding.realize(&self.meta)
    }

    /// The circuit with the current parameter values as its defaults.
    pub fn fitted_circuit(&self) -> Circuit {
        self.circuit.with_param_values(&self.params())
    }

    fn load_row(&mut self, slots: &[f64]) {
        for (i, v) in slots.iter().enumerate() {
            self.ctx.set_slot(SlotId(i as u32), *v);
        }
    }

    /// Posterior of the trained state for one row.
    fn predict_row(&mut self, slots: &[f64]) -> f64 {
        self.load_row(slots);
        self.circuit.forward(&mut self.ctx);
        let outs = self.circuit.outputs();
        let total: f64 = outs.iter().map(|o| self.ctx.value(*o)).sum();
        self.ctx.value(outs[self.config.output_state]) / total
    }

    /// Predictions of the current parameters on `data`.
    pub fn predict(&mut self, data: &AlignedData) -> Vec<f64> {
        let values = self.params();
        self.ctx.set_param_values(&values);
        data.slots.iter().map(|s| self.predict_row(s)).collect()
    }

    /// Mean squared error of the current parameters on `data`.
    pub fn mse_loss(&mut self, data: &AlignedData) -> Result<f64> {
        if data.is_empty() {
            return Err(Error::invalid("train", "loss of an empty batch"));
        }
        let preds = self.predict(data);
        Ok(mse(&preds, &data.labels))
    }

    /// Gradient of the batch loss with respect to the meta-parameters; returns the batch loss.
    pub fn gradient(&mut self, data: &AlignedData, rows: &[usize], out: &mut [f64]) -> f64 {
        out.iter_mut().for_each(|g| *g = 0.0);
        let values = self.params();
        self.ctx.set_param_values(&values);
        let n = rows.len() as f64;
        let mut pgrad = vec![0.0; values.len()];
        let mut seeds = vec![0.0; self.circuit.outputs().len()];
        let mut loss = 0.0;
        let s = self.config.output_state;
        for &r in rows {
            let y_hat = self.predict_row(&data.slots[r]);
            let err = y_hat - data.labels[r];
            loss += err * err;
            let outs = self.circuit.outputs();
            let total: f64 = outs.iter().map(|o| self.ctx.value(*o)).sum();
            let dl = 2.0 * err / n;
            for (j, seed) in seeds.iter_mut().enumerate() {
                let delta = if j == s { 1.0 } else { 0.0 };
                *seed = dl * (delta - y_hat) / total;
            }
            self.circuit.backward(&mut self.ctx, &seeds);
            for (g, v) in pgrad.iter_mut().zip(self.circuit.param_gradient(&self.ctx)) {
                *g += v;
            }
        }
        self.binding.meta_gradient(&self.meta, &values, &pgrad, out);
        loss / n
    }

    /// One optimizer step on `rows`; returns the batch loss before the step.
    pub fn step(&mut self, data: &AlignedData, rows: &[usize]) -> f64 {
        let mut grad = vec![0.0; self.meta.len()];
        let loss = self.gradient(data, rows, &mut grad);
        let lr = self.config.learning_rate;
        self.steps += 1;
        match self.config.optimizer {
            Optimizer::Gd => {
                for (m, g) in self.meta.iter_mut().zip(&grad) {
                    *m -= lr * g;
                }
            }
            Optimizer::Adam => {
                let (b1, b2, eps) = (0.9f64, 0.999f64, 1e-8);
                let c1 = 1.0 - b1.powi(self.steps as i32);
                let c2 = 1.0 - b2.powi(self.steps as i32);
                for i in 0..self.meta.len() {
                    self.adam_m[i] = b1 * self.adam_m[i] + (1.0 - b1) * grad[i];
                    self.adam_v[i] = b2 * self.adam_v[i] + (1.0 - b2) * grad[i] * grad[i];
                    let mh = self.adam_m[i] / c1;
                    let vh = self.adam_v[i] / c2;
                    self.meta[i] -= lr * mh / (vh.sqrt() + eps);
                }
            }
        }
        loss
    }

    /// Trains for the configured number of epochs and keeps the parameters
    /// with the lowest validation loss. Deterministic given the configuration.
    pub fn train(&mut self, data: &Dataset) -> Result<TrainReport> {
        let aligned = data.align(self.circuit)?;
        self.train_aligned(&aligned)
    }

    pub fn train_aligned(&mut self, data: &AlignedData) -> Result<TrainReport> {
        if data.is_empty() {
            return Err(Error::invalid("train", "dataset is empty"));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(self.config.seed ^ 0x5eed_5eed);
        let mut order: Vec<usize> = (0..data.len()).collect();
        order.shuffle(&mut rng);
        let n_val = ((data.len() as f64) * self.config.validation_fraction).round() as usize;
        let n_val = n_val.min(data.len() - 1);
        let validation = data.subset(&order[..n_val]);
        let mut train_rows: Vec<usize> = order[n_val..].to_vec();
        train_rows.sort_unstable();
        let train = data.subset(&train_rows);
        let select_on = if validation.is_empty() { &train } else { &validation };

        let mut best_loss = self.mse_loss(select_on)?;
        let mut best_meta = self.meta.clone();
        let mut best_epoch = 0;
        let mut trace = Vec::with_capacity(self.config.epochs);
        let mut idx: Vec<usize> = (0..train.len()).collect();
        for epoch in 1..=self.config.epochs {
            idx.shuffle(&mut rng);
            let mut total = 0.0;
            for batch in idx.chunks(self.config.batch_size) {
                total += self.step(&train, batch) * batch.len() as f64;
            }
            let train_loss = total / train.len() as f64;
            let val_loss = self.mse_loss(select_on)?;
            if !train_loss.is_finite() || !val_loss.is_finite() || self.meta.iter().any(|m| !m.is_finite()) {
                return Err(Error::Divergence {
                    epoch,
                    loss: if train_loss.is_finite() { val_loss } else { train_loss },
                });
            }
            trace.push(EpochLoss {
                epoch,
                train: train_loss,
                validation: val_loss,
            });
            if val_loss < best_loss {
                best_loss = val_loss;
                best_meta.copy_from_slice(&self.meta);
                best_epoch = epoch;
            }
        }
        self.meta = best_meta;
        let train_mse = self.mse_loss(&train)?;
        Ok(TrainReport {
            best_epoch,
            train_mse,
            validation_mse: best_loss,
            trace,
        })
    }
}

pub fn mse(predictions: &[f64], labels: &[f64]) -> f64 {
    let n = labels.len() as f64;
    predictions
        .iter()
        .zip(labels)
        .map(|(p, y)| (p - y) * (p - y))
        .sum::<f64>()
        / n
}

/// Names of trainable parameters that belong to no row or threshold group.
pub fn untrained_params(circuit: &Circuit, binding: &Binding) -> BTreeSet<String> {
    let mut covered = BTreeSet::new();
    for g in &binding.groups {
        match g {
            Group::Logistic { first, second, .. } => {
                covered.insert(*first);
                covered.insert(*second);
            }
            Group::Softmax { params, .. } => covered.extend(params.iter().copied()),
            Group::Threshold { param, .. } => {
                covered.insert(*param);
            }
        }
    }
    circuit
        .params()
        .iter()
        .enumerate()
        .filter(|(i, p)| p.trainable && !covered.contains(&ParamId(*i as u32)))
        .map(|(_, p)| p.name.clone())
        .collect()
}
