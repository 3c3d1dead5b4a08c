//! Constructive approximators for univariate functions on `[0,1]`.
//!
//! [`build_monotonic`] builds a network in which soft evidence `x` on a binary
//! root `Z` activates `⌊N·f(x)⌋` of `N` testing nodes, and the query `Y`
//! averages them, so `P*(y) = ⌊N·f(x)⌋ / N` and the error is at most `1/N`.
//! [`build_piecewise_1d`] splits a non-monotone function at the points where
//! its slope changes sign, builds one component per monotone piece, and
//! chains the components with gating testing nodes that pick the component
//! whose piece contains `x`.
//!
//! ```
//! use tbn::approx::{build_monotonic, verify_bound, uniform_grid};
//!
//! let a = build_monotonic(|x| x, 5)?;
//! let c = a.compile()?;
//! assert!((a.posterior(&c, 0.5)? - 0.4).abs() < 1e-12);
//! let report = verify_bound(&c, &a.evidence, |x| x, &uniform_grid(101))?;
//! assert!(report.max_error <= 0.2);
//! # Ok::<(), tbn::Error>(())
//! ```

use serde::{Deserialize, Serialize};

use crate::circuit::Circuit;
use crate::compile::{compile, SelectionMode};
use crate::error::{Error, Result};
use crate::model::{Cpt, ModelBuilder, TbnModel, Variable};
use crate::{posterior, Evidence};

/// Spacing of the samples used to check monotonicity and find breakpoints.
pub const SCAN_STEP: f64 = 1e-3;
/// Width at which threshold bisection stops.
pub const INVERSE_TOLERANCE: f64 = 1e-12;
/// Thresholds are moved this far toward the active side, so a point where
/// `f(x)` equals a level exactly turns the level on despite rounding in the
/// test. The price is an overshoot of at most the slope times the margin.
pub const THRESHOLD_MARGIN: f64 = 1e-9;
/// Slope magnitudes below this count as flat when checking monotonicity.
const FLAT: f64 = 1e-12;
/// Largest `N` for which the literal selector CPT (`N·2^N` rows) is built.
pub const MAX_SELECTOR_N: usize = 12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Increasing,
    Decreasing,
}

/// How the `N` testing nodes of a component are combined into one output.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Combiner {
    /// A chain of binary nodes `M_i` with `P(m_i) = ((i−1)·P(m_{i−1}) + P(y_i)) / i`.
    /// Linear size for any `N`.
    #[default]
    Mixer,
    /// A uniform selector `I` and an output `Y` that copies `Y_i` when `I = i`.
    /// Its CPT has `N·2^N` rows, so it is only built for `N ≤ MAX_SELECTOR_N`.
    Selector,
}

/// Built-in univariate targets on `[0,1]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Shape {
    Identity,
    Square,
    Cube,
    Sqrt,
    /// `1 − |2x − 1|`.
    Tent,
    /// `½ + ½·sin(2πx)`.
    Wave,
}

impl Shape {
    pub const ALL: [Shape; 6] = [
        Shape::Identity,
        Shape::Square,
        Shape::Cube,
        Shape::Sqrt,
        Shape::Tent,
        Shape::Wave,
    ];

    pub fn eval(self, x: f64) -> f64 {
        match self {
            Shape::Identity => x,
            Shape::Square => x * x,
            Shape::Cube => x * x * x,
            Shape::Sqrt => x.sqrt(),
            Shape::Tent => 1.0 - (2.0 * x - 1.0).abs(),
            Shape::Wave => 0.5 + 0.5 * (2.0 * std::f64::consts::PI * x).sin(),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Shape::Identity => "identity",
            Shape::Square => "square",
            Shape::Cube => "cube",
            Shape::Sqrt => "sqrt",
            Shape::Tent => "tent",
            Shape::Wave => "wave",
        }
    }
}

impl std::str::FromStr for Shape {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Shape::ALL.into_iter().find(|t| t.name() == s).ok_or_else(|| {
            let names: Vec<&str> = Shape::ALL.iter().map(|t| t.name()).collect();
            Error::invalid("function", format!("unknown shape `{s}` (expected one of {})", names.join(", ")))
        })
    }
}

/// A monotone piece `[lo, hi]` of the target and the direction on it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Piece {
    pub lo: f64,
    pub hi: f64,
    pub direction: Direction,
}

/// A constructed network together with its query.
#[derive(Debug, Clone)]
pub struct Approximator {
    pub model: TbnModel,
    /// Binary query variable; its first state is the approximated value.
    pub query: String,
    /// Binary root receiving soft evidence `(x, 1−x)`.
    pub evidence: String,
    pub n: usize,
    pub pieces: Vec<Piece>,
}

impl Approximator {
    /// Compiles `P*(query | evidence)` with threshold selection.
    pub fn compile(&self) -> Result<Circuit> {
        compile(&self.model, &self.query, &[&self.evidence], SelectionMode::Threshold)
    }

    /// Posterior of the query's first state under soft evidence `x`.
    pub fn posterior(&self, circuit: &Circuit, x: f64) -> Result<f64> {
        posterior_at(circuit, &self.evidence, x)
    }
}

fn posterior_at(circuit: &Circuit, evidence: &str, x: f64) -> Result<f64> {
    let ev = Evidence::new().binary(evidence, x)?;
    Ok(posterior(circuit, &ev)?[0])
}

/// Maximum error of a compiled approximator over a grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BoundReport {
    pub max_error: f64,
    /// Grid point where the maximum is attained.
    pub at: f64,
    pub points: usize,
}

/// `points` evenly spaced values from 0 to 1 inclusive.
pub fn uniform_grid(points: usize) -> Vec<f64> {
    match points {
        0 => vec![],
        1 => vec![0.0],
        _ => (0..points).map(|i| i as f64 / (points - 1) as f64).collect(),
    }
}

/// Exact maximum of `|posterior − f(x)|` over `grid`.
pub fn verify_bound(circuit: &Circuit, evidence: &str, f: impl Fn(f64) -> f64, grid: &[f64]) -> Result<BoundReport> {
    let mut report = BoundReport {
        max_error: 0.0,
        at: grid.first().copied().unwrap_or(0.0),
        points: grid.len(),
    };
    for &x in grid {
        let err = (posterior_at(circuit, evidence, x)? - f(x)).abs();
        if err > report.max_error {
            report.max_error = err;
            report.at = x;
        }
    }
    Ok(report)
}

fn samples(lo: f64, hi: f64) -> Vec<f64> {
    let steps = (((hi - lo) / SCAN_STEP).ceil() as usize).max(10);
    // `lo + (hi - lo)` can round to either side of `hi`.
    let mut xs: Vec<f64> = (0..=steps).map(|i| (lo + (hi - lo) * i as f64 / steps as f64).min(hi)).collect();
    xs[steps] = hi;
    xs
}

/// Direction of `f` on `[lo, hi]`, checked on a sampled scan. Flat functions count as increasing.
pub fn monotone_direction(f: &impl Fn(f64) -> f64, lo: f64, hi: f64) -> Result<Direction> {
    let xs = samples(lo, hi);
    let ys: Vec<f64> = xs.iter().map(|x| f(*x)).collect();
    if let Some(i) = ys.iter().position(|y| !(0.0..=1.0).contains(y)) {
        return Err(Error::invalid(
            "target",
            format!("f({}) = {} is outside [0,1]", xs[i], ys[i]),
        ));
    }
    let mut rising = None;
    let mut falling = None;
    for i in 1..ys.len() {
        let d = ys[i] - ys[i - 1];
        if d > FLAT && rising.is_none() {
            rising = Some(xs[i]);
        }
        if d < -FLAT && falling.is_none() {
            falling = Some(xs[i]);
        }
    }
    match (rising, falling) {
        (Some(r), Some(d)) => Err(Error::NotMonotone(format!(
            "on [{lo}, {hi}] it rises near x = {r} and falls near x = {d}"
        ))),
        (None, Some(_)) => Ok(Direction::Decreasing),
        _ => Ok(Direction::Increasing),
    }
}

/// Points in `(0,1)` where the sampled slope of `f` changes sign, refined by
/// golden-section search around each sampled extremum.
pub fn detect_breakpoints(f: impl Fn(f64) -> f64) -> Vec<f64> {
    let xs = samples(0.0, 1.0);
    let ys: Vec<f64> = xs.iter().map(|x| f(*x)).collect();
    let mut out = Vec::new();
    // Index of the last sample before the most recent non-flat step, and its sign.
    let mut last: Option<(usize, bool)> = None;
    for i in 1..ys.len() {
        let d = ys[i] - ys[i - 1];
        if d.abs() <= FLAT {
            continue;
        }
        let up = d > 0.0;
        if let Some((j, was_up)) = last {
            if was_up != up {
                // The extremum lies between the start of the previous run's last step and x_i.
                let lo = xs[j];
                let hi = xs[i];
                out.push(golden_extremum(&f, lo, hi, was_up));
            }
        }
        last = Some((i - 1, up));
    }
    out.retain(|b| *b > 0.0 && *b < 1.0);
    out.dedup_by(|a, b| (*a - *b).abs() < SCAN_STEP / 2.0);
    out
}

fn golden_extremum(f: &impl Fn(f64) -> f64, mut a: f64, mut b: f64, maximum: bool) -> f64 {
    let sign = if maximum { -1.0 } else { 1.0 };
    let g = |x: f64| sign * f(x);
    let r = (5f64.sqrt() - 1.0) / 2.0;
    while b - a > INVERSE_TOLERANCE {
        let c = b - r * (b - a);
        let d = a + r * (b - a);
        if g(c) <= g(d) {
            b = d;
        } else {
            a = c;
        }
    }
    (a + b) / 2.0
}

/// Where the level `i/N` is crossed inside a piece.
#[derive(Debug, Clone, Copy, PartialEq)]
enum Level {
    Always,
    Never,
    /// Active iff `x ≥ s` (increasing) or `x ≤ s` (decreasing).
    From(f64),
}

fn level_crossing(f: &impl Fn(f64) -> f64, piece: Piece, level: f64) -> Level {
    let (lo, hi) = (piece.lo, piece.hi);
    match piece.direction {
        Direction::Increasing => {
            if f(hi) < level {
                return Level::Never;
            }
            if f(lo) >= level {
                return Level::Always;
            }
            let (mut a, mut b) = (lo, hi);
            while b - a > INVERSE_TOLERANCE {
                let m = 0.5 * (a + b);
                if f(m) >= level {
                    b = m;
                } else {
                    a = m;
                }
            }
            // A crossing at the very end of the piece is exact already.
            Level::From(if b >= hi { b } else { (b - THRESHOLD_MARGIN).max(lo) })
        }
        Direction::Decreasing => {
            if f(lo) < level {
                return Level::Never;
            }
            if f(hi) >= level {
                return Level::Always;
            }
            let (mut a, mut b) = (lo, hi);
            while b - a > INVERSE_TOLERANCE {
                let m = 0.5 * (a + b);
                if f(m) >= level {
                    a = m;
                } else {
                    b = m;
                }
            }
            Level::From(if a <= lo { a } else { (a + THRESHOLD_MARGIN).min(hi) })
        }
    }
}

const ON: [f64; 2] = [1.0, 0.0];
const OFF: [f64; 2] = [0.0, 1.0];

/// Testing CPT over parent `Z` (rows `z`, `z̄`) that turns the child on as `level` says.
fn gate_cpt(level: Level, direction: Direction) -> Cpt {
    let cat = |a: [f64; 2], b: [f64; 2]| vec![a[0], a[1], b[0], b[1]];
    let (thresholds, pos, neg) = match (level, direction) {
        (Level::Always, _) => (vec![0.0, 0.0], cat(ON, ON), cat(ON, ON)),
        (Level::Never, _) => (vec![0.0, 0.0], cat(OFF, OFF), cat(OFF, OFF)),
        // Row z: on iff P*(z) ≥ s. Row z̄: off iff P*(z̄) ≥ 1 − s.
        (Level::From(s), Direction::Increasing) => (vec![s, 1.0 - s], cat(ON, OFF), cat(OFF, ON)),
        // Row z: off iff P*(z) ≥ s. Row z̄: on iff P*(z̄) ≥ 1 − s.
        (Level::From(s), Direction::Decreasing) => (vec![s, 1.0 - s], cat(OFF, ON), cat(ON, OFF)),
    };
    Cpt::Testing { thresholds, pos, neg }
}

struct Assembly {
    builder: ModelBuilder,
    z: String,
}

impl Assembly {
    fn new() -> Self {
        Assembly {
            builder: TbnModel::builder().binary("Z").regular("Z", &[], &[0.5, 0.5]),
            z: "Z".into(),
        }
    }

    fn binary(&mut self, name: &str, parents: &[&str], cpt: Cpt) -> Result<()> {
        self.builder.add_variable(Variable::binary(name));
        self.builder.set_cpt(name, parents, cpt)
    }

    /// Adds the `N` testing nodes of one component and returns their names.
    fn testing_nodes(&mut self, f: &impl Fn(f64) -> f64, piece: Piece, n: usize, tag: usize) -> Result<Vec<String>> {
        let z = self.z.clone();
        let mut names = Vec::with_capacity(n);
        for i in 1..=n {
            let level = level_crossing(f, piece, i as f64 / n as f64);
            let name = format!("Y{tag}_{i}");
            self.binary(&name, &[&z], gate_cpt(level, piece.direction))?;
            names.push(name);
        }
        Ok(names)
    }

    /// Averages binary nodes through a mixer chain; returns the last mixer.
    fn mixer(&mut self, inputs: &[String], tag: usize, last_name: Option<&str>) -> Result<String> {
        let mut prev: Option<String> = None;
        let n = inputs.len();
        for (k, y) in inputs.iter().enumerate() {
            let i = k + 1;
            let name = match last_name {
                Some(out) if i == n => out.to_string(),
                _ => format!("M{tag}_{i}"),
            };
            match &prev {
                None => self.binary(&name, &[y.as_str()], Cpt::Regular { probs: vec![1.0, 0.0, 0.0, 1.0] })?,
                Some(m) => {
                    let w = (i - 1) as f64 / i as f64;
                    let mut probs = Vec::with_capacity(8);
                    for m_on in [true, false] {
                        for y_on in [true, false] {
                            let p = if m_on { w } else { 0.0 } + if y_on { 1.0 - w } else { 0.0 };
                            probs.extend([p, 1.0 - p]);
                        }
                    }
                    self.binary(&name, &[m.as_str(), y.as_str()], Cpt::Regular { probs })?;
                }
            }
            prev = Some(name);
        }
        Ok(prev.expect("at least one input"))
    }

    /// The literal selector: uniform `I` and `out` copying `Y_i` when `I = i`.
    fn selector(&mut self, inputs: &[String], out: &str) -> Result<()> {
        let n = inputs.len();
        let states: Vec<String> = (1..=n).map(|i| i.to_string()).collect();
        let refs: Vec<&str> = states.iter().map(|s| s.as_str()).collect();
        self.builder.add_variable(Variable::new("I", &refs));
        self.builder.set_cpt("I", &[], Cpt::Regular { probs: vec![1.0 / n as f64; n] })?;
        let mut parents: Vec<&str> = vec!["I"];
        parents.extend(inputs.iter().map(|s| s.as_str()));
        let mut probs = Vec::with_capacity(n << (n + 1));
        for i in 0..n {
            for ys in 0..(1usize << n) {
                // Last parent varies fastest, so Y_j's state is bit n-1-j (0 = on).
                let on = (ys >> (n - 1 - i)) & 1 == 0;
                probs.extend(if on { ON } else { OFF });
            }
        }
        self.binary(out, &parents, Cpt::Regular { probs })
    }

    fn finish(self, n: usize, pieces: Vec<Piece>) -> Result<Approximator> {
        Ok(Approximator {
            model: self.builder.build()?,
            query: "Y".into(),
            evidence: self.z,
            n,
            pieces,
        })
    }
}

/// Builds the approximator for a continuous monotone `f` with granularity `n`
/// and the default mixer combiner.
pub fn build_monotonic(f: impl Fn(f64) -> f64, n: usize) -> Result<Approximator> {
    build_monotonic_with(f, n, Combiner::Mixer)
}

pub fn build_monotonic_with(f: impl Fn(f64) -> f64, n: usize, combiner: Combiner) -> Result<Approximator> {
    check_n(n)?;
    let direction = monotone_direction(&f, 0.0, 1.0)?;
    let piece = Piece {
        lo: 0.0,
        hi: 1.0,
        direction,
    };
    let mut a = Assembly::new();
    let ys = a.testing_nodes(&f, piece, n, 1)?;
    match combiner {
        Combiner::Mixer => {
            a.mixer(&ys, 1, Some("Y"))?;
        }
        Combiner::Selector => {
            if n > MAX_SELECTOR_N {
                return Err(Error::TooLarge {
                    states: (n as u128) << n,
                    limit: (MAX_SELECTOR_N as u128) << MAX_SELECTOR_N,
                });
            }
            a.selector(&ys, "Y")?;
        }
    }
    a.finish(n, vec![piece])
}

fn check_n(n: usize) -> Result<()> {
    if n == 0 {
        return Err(Error::invalid("approximator", "granularity N must be at least 1"));
    }
    Ok(())
}

/// Builds the chained approximator for a continuous `f` that is monotone
/// between consecutive breakpoints. Breakpoints are detected when not given.
pub fn build_piecewise_1d(f: impl Fn(f64) -> f64, n: usize, breakpoints: Option<&[f64]>) -> Result<Approximator> {
    check_n(n)?;
    let borders = match breakpoints {
        Some(b) => {
            if let Some(w) = b.windows(2).find(|w| w[0] >= w[1]) {
                return Err(Error::invalid(
                    "breakpoints",
                    format!("must be strictly increasing, got {} then {}", w[0], w[1]),
                ));
            }
            if let Some(x) = b.iter().find(|x| !(**x > 0.0 && **x < 1.0)) {
                return Err(Error::invalid("breakpoints", format!("{x} is not inside (0,1)")));
            }
            b.to_vec()
        }
        None => detect_breakpoints(&f),
    };
    let mut edges = vec![0.0];
    edges.extend(&borders);
    edges.push(1.0);
    let mut pieces = Vec::with_capacity(edges.len() - 1);
    for w in edges.windows(2) {
        let direction = monotone_direction(&f, w[0], w[1])?;
        pieces.push(Piece {
            lo: w[0],
            hi: w[1],
            direction,
        });
    }
    let mut a = Assembly::new();
    let single = pieces.len() == 1;
    let mut chain = String::new();
    for (k, piece) in pieces.iter().enumerate() {
        let tag = k + 1;
        let last = k + 1 == pieces.len();
        let clamped = |x: f64| f(x.clamp(piece.lo, piece.hi));
        let ys = a.testing_nodes(&clamped, *piece, n, tag)?;
        let out = a.mixer(&ys, tag, if single { Some("Y") } else { None })?;
        if k == 0 {
            chain = out;
            continue;
        }
        let gate = format!("G{tag}");
        let z = a.z.clone();
        a.binary(&gate, &[&z], gate_cpt(Level::From(piece.lo), Direction::Increasing))?;
        let name = if last { "Y".to_string() } else { format!("C{tag}") };
        // Parents (previous link, component output, gate); copy the component when the gate is on.
        let mut probs = Vec::with_capacity(16);
        for prev_on in [true, false] {
            for comp_on in [true, false] {
                for gate_on in [true, false] {
                    let on = if gate_on { comp_on } else { prev_on };
                    probs.extend(if on { ON } else { OFF });
                }
            }
        }
        a.binary(&name, &[chain.as_str(), out.as_str(), gate.as_str()], Cpt::Regular { probs })?;
        chain = name;
    }
    a.finish(n, pieces)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn floor_level(f: f64, n: usize) -> f64 {
        (n as f64 * f).floor() / n as f64
    }

    #[test]
    fn samples_stay_inside_the_interval() {
        let mut misses = 0;
        for k in 1..2000 {
            let lo = k as f64 / 2000.0;
            let steps = (((1.0 - lo) / SCAN_STEP).ceil() as usize).max(10) as f64;
            misses += usize::from(lo + (1.0 - lo) * steps / steps != 1.0);
            let xs = samples(lo, 1.0);
            assert!(xs.iter().all(|x| (lo..=1.0).contains(x)), "lo = {lo}");
            assert_eq!(*xs.last().unwrap(), 1.0);
        }
        assert!(misses > 0);
    }

    #[test]
    fn identity_with_five_levels() {
        let a = build_monotonic(|x| x, 5).unwrap();
        let c = a.compile().unwrap();
        assert!((a.posterior(&c, 0.5).unwrap() - 0.4).abs() < 1e-12);
        assert!(a.posterior(&c, 0.0).unwrap().abs() < 1e-12);
        assert!((a.posterior(&c, 1.0).unwrap() - 1.0).abs() < 1e-12);
        for x in [0.05, 0.33, 0.61, 0.99] {
            assert!((a.posterior(&c, x).unwrap() - floor_level(x, 5)).abs() < 1e-12);
        }
    }

    #[test]
    fn selector_matches_mixer() {
        let f = |x: f64| x.powi(3);
        let m = build_monotonic_with(f, 6, Combiner::Mixer).unwrap();
        let s = build_monotonic_with(f, 6, Combiner::Selector).unwrap();
        assert_eq!(s.model.len(), 6 + 3);
        let (cm, cs) = (m.compile().unwrap(), s.compile().unwrap());
        for x in uniform_grid(37) {
            let d = m.posterior(&cm, x).unwrap() - s.posterior(&cs, x).unwrap();
            assert!(d.abs() < 1e-12, "{x}: {d}");
        }
        assert!(matches!(
            build_monotonic_with(f, 20, Combiner::Selector),
            Err(Error::TooLarge { .. })
        ));
    }

    #[test]
    fn decreasing_targets() {
        let f = |x: f64| 1.0 - x * x;
        let a = build_monotonic(f, 20).unwrap();
        assert_eq!(a.pieces[0].direction, Direction::Decreasing);
        let c = a.compile().unwrap();
        for x in [0.0, 0.13, 0.52, 0.77, 1.0] {
            assert!((a.posterior(&c, x).unwrap() - floor_level(f(x), 20)).abs() < 1e-12, "{x}");
        }
    }

    #[test]
    fn rejects_bad_targets() {
        assert!(matches!(
            build_monotonic(|x| 4.0 * x * (1.0 - x), 5),
            Err(Error::NotMonotone(_))
        ));
        assert!(build_monotonic(|x| 2.0 * x, 5).is_err());
        assert!(build_monotonic(|x| x, 0).is_err());
        assert!(build_piecewise_1d(|x| x, 5, Some(&[0.6, 0.4])).is_err());
        assert!(build_piecewise_1d(|x| x, 5, Some(&[1.0])).is_err());
    }

    #[test]
    fn breakpoints_of_known_functions() {
        let tent = detect_breakpoints(|x| 1.0 - (2.0 * x - 1.0).abs());
        assert_eq!(tent.len(), 1);
        assert!((tent[0] - 0.5).abs() < 1e-9);
        let g1 = detect_breakpoints(|x| 0.5 + 0.5 * (2.0 * std::f64::consts::PI * x).sin());
        assert_eq!(g1.len(), 2);
        assert!((g1[0] - 0.25).abs() < 1e-6 && (g1[1] - 0.75).abs() < 1e-6);
        assert!(detect_breakpoints(|x| x * x).is_empty());
    }

    #[test]
    fn single_piece_chain_is_the_monotone_builder() {
        let f = |x: f64| x.sqrt();
        let m = build_monotonic(f, 10).unwrap();
        let p = build_piecewise_1d(f, 10, None).unwrap();
        let (cm, cp) = (m.compile().unwrap(), p.compile().unwrap());
        for x in uniform_grid(101) {
            assert!((m.posterior(&cm, x).unwrap() - p.posterior(&cp, x).unwrap()).abs() <= 1e-12);
        }
    }

    #[test]
    fn tent_within_two_over_n() {
        let f = |x: f64| 1.0 - (2.0 * x - 1.0).abs();
        let a = build_piecewise_1d(f, 10, None).unwrap();
        assert_eq!(a.pieces.len(), 2);
        let c = a.compile().unwrap();
        let r = verify_bound(&c, &a.evidence, f, &uniform_grid(201)).unwrap();
        assert!(r.max_error <= 0.2, "{r:?}");
    }
}
