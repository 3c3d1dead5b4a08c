use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use tbn::analysis::{eval_transpiled, fit_multilinear, relu_to_tac, scan_regions, ReluNet};
use tbn::approx::{build_monotonic, build_piecewise_1d, uniform_grid, verify_bound, Shape};
use tbn::circuit::{self, Circuit, EvalContext};
use tbn::experiment::{run_experiment, write_summary, ExperimentConfig, Topology};
use tbn::train::{grid_dataset, Dataset, Optimizer, Target, TrainConfig, TrainSession};
use tbn::{CompileRequest, Evidence, SelectionMode, TbnModel};

/// Compile, evaluate, train and analyze testing Bayesian network queries.
#[derive(Parser)]
#[command(name = "tbn", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Compile a query on a model file into a circuit file.
    Compile(CompileArgs),
    /// Evaluate a circuit file under soft evidence.
    Query(QueryArgs),
    /// Fit the parameters of a circuit file to labeled data.
    Train(TrainArgs),
    /// Build and check constructive approximators of univariate functions.
    #[command(subcommand)]
    Approx(ApproxCommand),
    /// Check the functional form of queries.
    #[command(subcommand)]
    Analyze(AnalyzeCommand),
    /// Learn a bivariate target with a testing circuit and a plain baseline.
    Experiment(ExperimentArgs),
}

#[derive(Args)]
struct QuerySpec {
    /// Query variable.
    #[arg(long, short)]
    query: String,
    /// Evidence variables, comma separated.
    #[arg(long, short, value_delimiter = ',')]
    evidence: Vec<String>,
}

#[derive(Args)]
struct CompileArgs {
    /// Model file (JSON).
    model: PathBuf,
    #[command(flatten)]
    spec: QuerySpec,
    /// Use sigmoid selection instead of threshold tests.
    #[arg(long)]
    sigmoid: bool,
    /// Sigmoid slope.
    #[arg(long, default_value_t = SelectionMode::DEFAULT_GAMMA)]
    gamma: f64,
    /// Keep structurally identical nodes separate.
    #[arg(long)]
    no_dedup: bool,
    /// Output circuit file.
    #[arg(long, short)]
    output: PathBuf,
}

#[derive(Args)]
struct QueryArgs {
    /// Circuit file.
    circuit: PathBuf,
    /// Soft evidence `VAR=l1,l2,...`; a single value `VAR=x` on a binary variable means `(x, 1-x)`.
    #[arg(long = "evidence", short)]
    evidence: Vec<String>,
    /// Override a parameter, `NAME=value`.
    #[arg(long = "param")]
    params: Vec<String>,
    /// Print the joint values instead of the posterior.
    #[arg(long)]
    joint: bool,
}

#[derive(Args)]
struct TrainArgs {
    /// Circuit file.
    circuit: PathBuf,
    /// Labeled data (CSV with a `label` column).
    #[arg(long, conflicts_with = "function")]
    data: Option<PathBuf>,
    /// Generate grid data from a built-in bivariate target instead.
    #[arg(long)]
    function: Option<Target>,
    /// Grid resolution for `--function`.
    #[arg(long, default_value_t = 32)]
    resolution: usize,
    /// Evidence variables receiving the grid coordinates, comma separated.
    #[arg(long, value_delimiter = ',', default_value = "E1,E2")]
    inputs: Vec<String>,
    /// Trainer configuration file (JSON); flags below override it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long)]
    batch: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    optimizer: Option<OptimizerArg>,
    /// Output circuit file with the fitted parameters.
    #[arg(long, short)]
    output: PathBuf,
    /// Also write the training report (JSON).
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum OptimizerArg {
    Adam,
    Gd,
}

#[derive(Subcommand)]
enum ApproxCommand {
    /// Write the approximator network for a built-in target.
    Build(ApproxBuildArgs),
    /// Measure the maximum error of an approximator network over a grid.
    Verify(ApproxVerifyArgs),
}

#[derive(Args)]
struct ApproxBuildArgs {
    /// Target: identity, square, cube, sqrt, tent or wave.
    #[arg(long)]
    function: Shape,
    /// Granularity (levels per monotone piece).
    #[arg(long, short)]
    n: usize,
    /// Split at slope sign changes and chain the pieces.
    #[arg(long)]
    piecewise: bool,
    /// Explicit breakpoints for `--piecewise`, comma separated.
    #[arg(long, value_delimiter = ',', requires = "piecewise")]
    breakpoints: Option<Vec<f64>>,
    /// Output model file.
    #[arg(long, short)]
    output: PathBuf,
}

#[derive(Args)]
struct ApproxVerifyArgs {
    /// Model file built by `approx build`.
    model: PathBuf,
    #[arg(long)]
    function: Shape,
    /// Number of evenly spaced grid points on [0,1].
    #[arg(long, default_value_t = 1001)]
    points: usize,
    /// Fail (exit 1) when the error exceeds this bound.
    #[arg(long)]
    bound: Option<f64>,
    #[arg(long, default_value = "Y")]
    query: String,
    #[arg(long, default_value = "Z")]
    evidence: String,
}

#[derive(Subcommand)]
enum AnalyzeCommand {
    /// Fit the multilinear form of P*(q) over binary evidence variables.
    Multilinear(AnalyzeArgs),
    /// Partition P*(q) over one or two binary evidence variables into regions.
    Regions(RegionArgs),
    /// Transpile a ReLU/step network file into a circuit.
    Relu2tac(ReluArgs),
}

#[derive(Args)]
struct AnalyzeArgs {
    model: PathBuf,
    #[command(flatten)]
    spec: QuerySpec,
    /// Seed for the interior check points.
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct RegionArgs {
    model: PathBuf,
    #[command(flatten)]
    spec: QuerySpec,
    /// Scan cells per axis.
    #[arg(long, default_value_t = 64)]
    resolution: usize,
    /// Print the full report (including cell lists) as JSON.
    #[arg(long)]
    json: bool,
}

#[derive(Args)]
struct ReluArgs {
    /// Network file (JSON).
    net: PathBuf,
    #[arg(long, short)]
    output: PathBuf,
    /// Evaluate the net and the circuit at these inputs (comma separated) and print both.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    check: Option<Vec<f64>>,
}

#[derive(Args)]
struct ExperimentArgs {
    /// Experiment configuration (JSON); flags below override it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    function: Option<Target>,
    #[arg(long)]
    k: Option<usize>,
    #[arg(long)]
    topology: Option<TopologyArg>,
    #[arg(long)]
    gamma: Option<f64>,
    #[arg(long)]
    resolution: Option<usize>,
    #[arg(long)]
    epochs: Option<usize>,
    /// Seeds to run, comma separated.
    #[arg(long, value_delimiter = ',')]
    seeds: Option<Vec<u64>>,
    /// Skip the baseline network.
    #[arg(long)]
    no_baseline: bool,
    /// Output directory for metrics and surfaces.
    #[arg(long, short)]
    out: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum TopologyArg {
    Layered,
    Chain,
}

/// `println!` that ignores a closed stdout (e.g. output piped into `head`).
macro_rules! say {
    ($($t:tt)*) => {{
        use std::io::Write;
        let _ = writeln!(std::io::stdout().lock(), $($t)*);
    }};
}

/// An error caused by bad input rather than a runtime failure.
#[derive(Debug)]
struct Usage(String);

impl std::fmt::Display for Usage {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for Usage {}

fn usage(msg: impl Into<String>) -> anyhow::Error {
    anyhow!(Usage(msg.into()))
}

fn exit_code(e: &anyhow::Error) -> u8 {
    for cause in e.chain() {
        if cause.is::<Usage>() {
            return 2;
        }
        if let Some(t) = cause.downcast_ref::<tbn::Error>() {
            return if t.is_usage() { 2 } else { 1 };
        }
    }
    1
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Compile(a) => cmd_compile(a),
        Command::Query(a) => cmd_query(a),
        Command::Train(a) => cmd_train(a),
        Command::Approx(ApproxCommand::Build(a)) => cmd_approx_build(a),
        Command::Approx(ApproxCommand::Verify(a)) => cmd_approx_verify(a),
        Command::Analyze(AnalyzeCommand::Multilinear(a)) => cmd_multilinear(a),
        Command::Analyze(AnalyzeCommand::Regions(a)) => cmd_regions(a),
        Command::Analyze(AnalyzeCommand::Relu2tac(a)) => cmd_relu2tac(a),
        Command::Experiment(a) => cmd_experiment(a),
    }
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| usage(format!("cannot read {}: {e}", path.display())))
}

fn write(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).with_context(|| format!("cannot write {}", path.display()))
}

fn load_model(path: &Path) -> Result<TbnModel> {
    tbn::load_model(&read(path)?).with_context(|| format!("in {}", path.display()))
}

fn load_circuit(path: &Path) -> Result<Circuit> {
    circuit::from_json(&read(path)?).with_context(|| format!("in {}", path.display()))
}

fn compile_spec(model: &TbnModel, spec: &QuerySpec, mode: SelectionMode) -> Result<Circuit> {
    let evidence: Vec<&str> = spec.evidence.iter().map(|s| s.as_str()).collect();
    Ok(tbn::compile(model, &spec.query, &evidence, mode)?)
}

fn cmd_compile(a: CompileArgs) -> Result<()> {
    let model = load_model(&a.model)?;
    let mode = if a.sigmoid {
        SelectionMode::Sigmoid { gamma: a.gamma }
    } else {
        SelectionMode::Threshold
    };
    let evidence: Vec<&str> = a.spec.evidence.iter().map(|s| s.as_str()).collect();
    let mut request = CompileRequest::new(&model, &a.spec.query, &evidence, mode);
    request.dedup = !a.no_dedup;
    let c = request.compile()?;
    write(&a.output, &circuit::to_json(&c))?;
    say!("{}", c.stats());
    Ok(())
}

/// Parses `VAR=v1,v2,...` against the circuit's slots for `VAR`.
fn parse_evidence(c: &Circuit, items: &[String]) -> Result<Evidence> {
    let mut ev = Evidence::new();
    for item in items {
        let (var, values) = item
            .split_once('=')
            .ok_or_else(|| usage(format!("evidence `{item}` is not of the form VAR=values")))?;
        let values: Vec<f64> = values
            .split(',')
            .map(|v| v.trim().parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| usage(format!("evidence `{item}` has a value that is not a number")))?;
        let states = c.slots_of(var).len();
        if states == 0 {
            return Err(usage(format!("`{var}` is not an evidence variable of this circuit")));
        }
        let lambda = if values.len() == 1 && states == 2 {
            vec![values[0], 1.0 - values[0]]
        } else {
            values
        };
        ev.set(var, lambda)?;
    }
    Ok(ev)
}

fn cmd_query(a: QueryArgs) -> Result<()> {
    let c = load_circuit(&a.circuit)?;
    let ev = parse_evidence(&c, &a.evidence)?;
    let mut ctx = EvalContext::new(&c);
    for p in &a.params {
        let (name, v) = p
            .rsplit_once('=')
            .ok_or_else(|| usage(format!("parameter `{p}` is not of the form NAME=value")))?;
        let v: f64 = v.parse().map_err(|_| usage(format!("parameter `{p}` has a bad value")))?;
        ctx.set_param(&c, name, v)?;
    }
    ctx.bind(&c, &ev)?;
    let values = if a.joint { c.evaluate(&mut ctx)? } else { c.posterior(&mut ctx)? };
    let q = c.query();
    for (s, v) in q.states.iter().zip(values) {
        say!("{}={}\t{v}", q.variable, s);
    }
    Ok(())
}

fn cmd_train(a: TrainArgs) -> Result<()> {
    let c = load_circuit(&a.circuit)?;
    let mut cfg = match &a.config {
        Some(p) => {
            serde_json::from_str::<TrainConfig>(&read(p)?)
                .map_err(|e| usage(format!("bad trainer config {}: {e}", p.display())))?
        }
        None => TrainConfig::default(),
    };
    if let Some(v) = a.epochs {
        cfg.epochs = v;
    }
    if let Some(v) = a.lr {
        cfg.learning_rate = v;
    }
    if let Some(v) = a.batch {
        cfg.batch_size = v;
    }
    if let Some(v) = a.seed {
        cfg.seed = v;
    }
    if let Some(v) = a.optimizer {
        cfg.optimizer = match v {
            OptimizerArg::Adam => Optimizer::Adam,
            OptimizerArg::Gd => Optimizer::Gd,
        };
    }
    let data = match (&a.data, a.function) {
        (Some(p), _) => Dataset::from_csv(read(p)?.as_bytes()).with_context(|| format!("in {}", p.display()))?,
        (None, Some(f)) => {
            if a.inputs.len() != 2 {
                bail!(usage("--inputs needs exactly two variables"));
            }
            grid_dataset(|x, y| f.eval(x, y), a.resolution, &a.inputs[0], &a.inputs[1])?
        }
        (None, None) => bail!(usage("give either --data or --function")),
    };
    let mut session = TrainSession::new(&c, cfg)?;
    let report = session.train(&data)?;
    write(&a.output, &circuit::to_json(&session.fitted_circuit()))?;
    if let Some(p) = &a.report {
        write(p, &(serde_json::to_string_pretty(&report)? + "\n"))?;
    }
    say!(
        "best epoch {}  train mse {:.6e}  validation mse {:.6e}",
        report.best_epoch, report.train_mse, report.validation_mse
    );
    Ok(())
}

fn cmd_approx_build(a: ApproxBuildArgs) -> Result<()> {
    let f = |x: f64| a.function.eval(x);
    let approx = if a.piecewise {
        build_piecewise_1d(f, a.n, a.breakpoints.as_deref())?
    } else {
        build_monotonic(f, a.n)?
    };
    write(&a.output, &tbn::model::to_json(&approx.model))?;
    say!(
        "{} nodes, {} piece(s); query {} with soft evidence on {}",
        approx.model.len(),
        approx.pieces.len(),
        approx.query,
        approx.evidence
    );
    Ok(())
}

fn cmd_approx_verify(a: ApproxVerifyArgs) -> Result<()> {
    let model = load_model(&a.model)?;
    let c = tbn::compile(&model, &a.query, &[&a.evidence], SelectionMode::Threshold)?;
    let report = verify_bound(&c, &a.evidence, |x| a.function.eval(x), &uniform_grid(a.points))?;
    say!("max error {:.6e} at x = {} over {} points", report.max_error, report.at, report.points);
    if let Some(b) = a.bound {
        if report.max_error > b {
            bail!("error {} exceeds the bound {b}", report.max_error);
        }
    }
    Ok(())
}

/// `P*(first query state)` as a function of the first state likelihoods of binary evidence.
fn joint_fn<'c>(c: &'c Circuit, vars: &'c [String]) -> Result<impl Fn(&[f64]) -> tbn::Result<f64> + 'c> {
    for v in vars {
        if c.slots_of(v).len() != 2 {
            bail!(usage(format!("`{v}` must be a binary evidence variable")));
        }
    }
    Ok(move |x: &[f64]| {
        let mut ev = Evidence::new();
        for (v, xi) in vars.iter().zip(x) {
            ev.set(v, vec![*xi, 1.0 - xi])?;
        }
        Ok(tbn::evaluate(c, &ev)?[0])
    })
}

fn cmd_multilinear(a: AnalyzeArgs) -> Result<()> {
    let model = load_model(&a.model)?;
    let c = compile_spec(&model, &a.spec, SelectionMode::Threshold)?;
    let f = joint_fn(&c, &a.spec.evidence)?;
    let fit = fit_multilinear(f, a.spec.evidence.len(), a.seed)?;
    for (subset, coeff) in fit.poly.terms(0.0) {
        let name = if subset.is_empty() {
            "1".to_string()
        } else {
            subset.iter().map(|i| format!("λ({})", a.spec.evidence[*i])).collect::<Vec<_>>().join("·")
        };
        say!("{coeff:+.12}  {name}");
    }
    say!("residual {:.3e} ({})", fit.residual, if fit.is_multilinear(1e-9) { "multilinear" } else { "not multilinear" });
    Ok(())
}

fn cmd_regions(a: RegionArgs) -> Result<()> {
    let model = load_model(&a.model)?;
    let n = a.spec.evidence.len();
    if !(1..=2).contains(&n) {
        bail!(usage("region scans take one or two evidence variables"));
    }
    let c = compile_spec(&model, &a.spec, SelectionMode::Threshold)?;
    let f = joint_fn(&c, &a.spec.evidence)?;
    let report = scan_regions(f, n, a.resolution)?;
    if a.json {
        say!("{}", serde_json::to_string_pretty(&report)?);
        return Ok(());
    }
    say!("{} region(s) over {} cell(s) per axis", report.granularity(), report.resolution);
    for r in &report.regions {
        let span = match r.interval {
            Some([lo, hi]) => format!("[{lo:.6}, {hi:.6}]"),
            None => format!("{} cell(s)", r.cells.len()),
        };
        let coeffs: Vec<String> = r.poly.coeffs.iter().map(|c| format!("{c:+.9}")).collect();
        say!("region {}  {span}  coeffs {}  residual {:.1e}", r.label, coeffs.join(" "), r.residual);
    }
    if n == 1 {
        let b: Vec<String> = report.boundaries.iter().map(|p| format!("{:.6}", p[0])).collect();
        say!("boundaries {}", b.join(" "));
    } else {
        say!("{} boundary cell(s)", report.boundary_cells.len());
    }
    Ok(())
}

fn cmd_relu2tac(a: ReluArgs) -> Result<()> {
    let net = ReluNet::from_json(&read(&a.net)?).with_context(|| format!("in {}", a.net.display()))?;
    let c = relu_to_tac(&net)?;
    write(&a.output, &circuit::to_json(&c))?;
    say!("{}", c.stats());
    if let Some(x) = a.check {
        if x.len() != net.inputs {
            bail!(usage(format!("--check needs {} inputs", net.inputs)));
        }
        say!("net     {:?}", net.eval(&x));
        say!("circuit {:?}", eval_transpiled(&c, &x)?);
    }
    Ok(())
}

fn cmd_experiment(a: ExperimentArgs) -> Result<()> {
    let mut cfg = match &a.config {
        Some(p) => ExperimentConfig::from_json(&read(p)?).with_context(|| format!("in {}", p.display()))?,
        None => ExperimentConfig::default(),
    };
    if let Some(v) = a.function {
        cfg.function = v;
    }
    if let Some(v) = a.k {
        cfg.k = v;
    }
    if let Some(v) = a.topology {
        cfg.topology = match v {
            TopologyArg::Layered => Topology::Layered,
            TopologyArg::Chain => Topology::Chain,
        };
    }
    if let Some(v) = a.gamma {
        cfg.gamma = v;
    }
    if let Some(v) = a.resolution {
        cfg.resolution = v;
    }
    if let Some(v) = a.epochs {
        cfg.trainer.epochs = v;
    }
    if a.no_baseline {
        cfg.baseline = false;
    }
    cfg.validate()?;
    let seeds = a.seeds.unwrap_or_else(|| vec![cfg.trainer.seed]);
    let mut all = Vec::with_capacity(seeds.len());
    for seed in seeds {
        let mut run = cfg.clone();
        run.trainer.seed = seed;
        let result = run_experiment(&run)?;
        result.write(&a.out, &result.stem())?;
        all.push(result.metrics);
    }
    write_summary(std::io::stdout().lock(), &all)?;
    Ok(())
}
