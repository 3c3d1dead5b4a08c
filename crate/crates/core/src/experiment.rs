//! Learning bivariate target functions with a testing network and with a
//! plain network of the same shape.
//!
//! Two evidence roots `E1`, `E2` receive soft evidence `(x, 1−x)` and
//! `(y, 1−y)`. Each of `k` testing nodes `T1..Tk` has both evidence roots
//! as parents. In the layered topology the query `Q` has all of `T1..Tk` as
//! parents; in the chain topology `Q1` has parent `T1`, each `Qi` has parents
//! `Q(i−1)` and `Ti`, and the last link is the query `Q`. The chain keeps
//! CPT sizes linear in `k`. The baseline network is the same graph with
//! regular CPTs at `T1..Tk` and input priors held at 0.5.

use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::circuit::Circuit;
use crate::compile::{compile, SelectionMode};
use crate::error::{Error, Result};
use crate::model::{Cpt, ModelBuilder, TbnModel, Variable};
use crate::train::{grid_dataset, lattice_dataset, mse, Target, TrainConfig, TrainReport, TrainSession};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Topology {
    Layered,
    Chain,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub function: Target,
    /// Number of testing nodes.
    pub k: usize,
    pub topology: Topology,
    /// Sigmoid slope of the testing circuit.
    pub gamma: f64,
    /// Training grid is `resolution × resolution` cell centers; the test
    /// lattice and surface have `(resolution+1)²` points.
    pub resolution: usize,
    pub trainer: TrainConfig,
    /// Also train the baseline network.
    pub baseline: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            function: Target::F5,
            k: 4,
            topology: Topology::Layered,
            gamma: SelectionMode::DEFAULT_GAMMA,
            resolution: 32,
            trainer: TrainConfig::default(),
            baseline: true,
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.k == 0 {
            return Err(Error::invalid("experiment", "k must be at least 1"));
        }
        if self.topology == Topology::Layered && self.k > 12 {
            return Err(Error::invalid(
                "experiment",
                format!("layered topology with k = {} needs a 2^{} row CPT; use the chain topology", self.k, self.k),
            ));
        }
        if !(self.gamma > 0.0 && self.gamma.is_finite()) {
            return Err(Error::invalid("experiment", format!("gamma must be positive, got {}", self.gamma)));
        }
        if self.resolution < 2 {
            return Err(Error::invalid("experiment", "resolution must be at least 2"));
        }
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let cfg: ExperimentConfig = serde_path_to_error::deserialize(de).map_err(|e| Error::Parse {
            locus: e.path().to_string(),
            message: e.inner().to_string(),
        })?;
        cfg.validate()?;
        Ok(cfg)
    }
}

/// Builds the experiment network; `testing` selects testing or regular CPTs at `T1..Tk`.
/// All parameters start at uniform values and thresholds at 0.5.
pub fn experiment_model(k: usize, topology: Topology, testing: bool) -> Result<TbnModel> {
    let mut b: ModelBuilder = TbnModel::builder()
        .binary("E1")
        .binary("E2")
        .regular("E1", &[], &[0.5, 0.5])
        .regular("E2", &[], &[0.5, 0.5]);
    let ts: Vec<String> = (1..=k).map(|i| format!("T{i}")).collect();
    for t in &ts {
        b.add_variable(Variable::binary(t));
        let cpt = if testing {
            Cpt::Testing {
                thresholds: vec![0.5; 4],
                pos: vec![0.5; 8],
                neg: vec![0.5; 8],
            }
        } else {
            Cpt::Regular { probs: vec![0.5; 8] }
        };
        b.set_cpt(t, &["E1", "E2"], cpt)?;
    }
    match topology {
        Topology::Layered => {
            b.add_variable(Variable::binary("Q"));
            let parents: Vec<&str> = ts.iter().map(|s| s.as_str()).collect();
            b.set_cpt("Q", &parents, Cpt::Regular { probs: vec![0.5; 2 << k] })?;
        }
        Topology::Chain => {
            let mut prev: Option<String> = None;
            for (i, t) in ts.iter().enumerate() {
                let name = if i + 1 == k { "Q".to_string() } else { format!("Q{}", i + 1) };
                b.add_variable(Variable::binary(&name));
                match &prev {
                    None => b.set_cpt(&name, &[t], Cpt::Regular { probs: vec![0.5; 4] })?,
                    Some(p) => b.set_cpt(&name, &[p, t], Cpt::Regular { probs: vec![0.5; 8] })?,
                }
                prev = Some(name);
            }
        }
    }
    b.build()
}

/// Prior parameters of the two inputs. The baseline holds them at 0.5, so its
/// posterior is multilinear in `(x, y)`; the testing network learns them.
pub const INPUT_PRIORS: [&str; 2] = ["p(E1=e1)", "p(E2=e2)"];

/// Outcome of training one circuit.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunMetrics {
    pub nodes: usize,
    pub params: usize,
    pub train_mse: Option<f64>,
    pub validation_mse: Option<f64>,
    /// MSE on the `(resolution+1)²` lattice.
    pub test_mse: Option<f64>,
    pub best_epoch: Option<usize>,
    /// Set when training failed (for example by diverging).
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentMetrics {
    pub function: Target,
    pub k: usize,
    pub topology: Topology,
    pub gamma: f64,
    pub resolution: usize,
    pub seed: u64,
    pub baseline_structure: &'static str,
    pub tac: RunMetrics,
    pub ac: Option<RunMetrics>,
}

/// Metrics plus the evaluation surface `(x, y, f, tac, ac)` on the lattice.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentResult {
    pub metrics: ExperimentMetrics,
    pub surface: Vec<[f64; 5]>,
}

struct Fitted {
    metrics: RunMetrics,
    predictions: Vec<f64>,
}

fn train_one(circuit: &Circuit, cfg: &ExperimentConfig, uniform_inputs: bool) -> Result<Fitted> {
    let data = grid_dataset(|x, y| cfg.function.eval(x, y), cfg.resolution, "E1", "E2")?;
    let lattice = lattice_dataset(|x, y| cfg.function.eval(x, y), cfg.resolution, "E1", "E2")?.align(circuit)?;
    let mut trainer = cfg.trainer.clone();
    if uniform_inputs {
        for p in INPUT_PRIORS {
            trainer.frozen.entry(p.to_string()).or_insert(0.5);
        }
    }
    let mut session = TrainSession::new(circuit, trainer)?;
    let stats = circuit.stats();
    let mut metrics = RunMetrics {
        nodes: stats.nodes,
        params: stats.params,
        train_mse: None,
        validation_mse: None,
        test_mse: None,
        best_epoch: None,
        error: None,
    };
    match session.train(&data) {
        Ok(TrainReport {
            best_epoch,
            train_mse,
            validation_mse,
            ..
        }) => {
            metrics.train_mse = Some(train_mse);
            metrics.validation_mse = Some(validation_mse);
            metrics.best_epoch = Some(best_epoch);
        }
        Err(e @ Error::Divergence { .. }) => metrics.error = Some(e.to_string()),
        Err(e) => return Err(e),
    }
    let predictions = session.predict(&lattice);
    if metrics.error.is_none() {
        metrics.test_mse = Some(mse(&predictions, &lattice.labels));
    }
    Ok(Fitted { metrics, predictions })
}

/// Builds, compiles and trains the testing circuit (and the baseline when configured).
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentResult> {
    cfg.validate()?;
    let tbn = experiment_model(cfg.k, cfg.topology, true)?;
    let tac = compile(&tbn, "Q", &["E1", "E2"], SelectionMode::Sigmoid { gamma: cfg.gamma })?;
    let tac_fit = train_one(&tac, cfg, false)?;
    let ac_fit = if cfg.baseline {
        let bn = experiment_model(cfg.k, cfg.topology, false)?;
        let ac = compile(&bn, "Q", &["E1", "E2"], SelectionMode::Threshold)?;
        Some(train_one(&ac, cfg, true)?)
    } else {
        None
    };
    let n = cfg.resolution;
    let mut surface = Vec::with_capacity((n + 1) * (n + 1));
    for i in 0..=n {
        for j in 0..=n {
            let r = i * (n + 1) + j;
            let (x, y) = (i as f64 / n as f64, j as f64 / n as f64);
            let ac = ac_fit.as_ref().map_or(f64::NAN, |f| f.predictions[r]);
            surface.push([x, y, cfg.function.eval(x, y).clamp(0.0, 1.0), tac_fit.predictions[r], ac]);
        }
    }
    Ok(ExperimentResult {
        metrics: ExperimentMetrics {
            function: cfg.function,
            k: cfg.k,
            topology: cfg.topology,
            gamma: cfg.gamma,
            resolution: cfg.resolution,
            seed: cfg.trainer.seed,
            baseline_structure: "same graph, testing CPTs replaced by regular trainable CPTs, input priors held at 0.5",
            tac: tac_fit.metrics,
            ac: ac_fit.map(|f| f.metrics),
        },
        surface,
    })
}

impl ExperimentResult {
    /// Writes `<stem>.metrics.json` and `<stem>.surface.csv` into `dir`.
    pub fn write(&self, dir: &Path, stem: &str) -> Result<()> {
        fs::create_dir_all(dir)?;
        let mut json = serde_json::to_string_pretty(&self.metrics).expect("metrics serialize");
        json.push('\n');
        fs::write(dir.join(format!("{stem}.metrics.json")), json)?;
        let mut w = csv::Writer::from_path(dir.join(format!("{stem}.surface.csv"))).map_err(csv_io)?;
        w.write_record(["x", "y", "f", "tac", "ac"]).map_err(csv_io)?;
        for row in &self.surface {
            w.write_record(row.iter().map(|v| if v.is_nan() { String::new() } else { v.to_string() }))
                .map_err(csv_io)?;
        }
        w.flush()?;
        Ok(())
    }

    /// `f1-k4-layered-s0` style file stem.
    pub fn stem(&self) -> String {
        let m = &self.metrics;
        let topo = match m.topology {
            Topology::Layered => "layered",
            Topology::Chain => "chain",
        };
        format!("{}-k{}-{topo}-s{}", m.function, m.k, m.seed)
    }
}

fn csv_io(e: csv::Error) -> Error {
    Error::Io(std::io::Error::other(e.to_string()))
}

/// Writes a short plain-text table of metrics.
pub fn write_summary(mut out: impl Write, results: &[ExperimentMetrics]) -> Result<()> {
    let fmt = |v: Option<f64>| v.map_or("-".to_string(), |v| format!("{v:.6}"));
    writeln!(out, "function  k  topology  seed  tac_test_mse  ac_test_mse")?;
    for m in results {
        writeln!(
            out,
            "{:<8}  {:<2} {:<8}  {:<4}  {:<12}  {}",
            m.function.name(),
            m.k,
            format!("{:?}", m.topology).to_lowercase(),
            m.seed,
            fmt(m.tac.test_mse),
            fmt(m.ac.as_ref().and_then(|a| a.test_mse))
        )?;
    }
    Ok(())
}
