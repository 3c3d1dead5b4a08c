//! Testing Bayesian networks and testing arithmetic circuits.
//!
//! The crate compiles queries on Bayesian networks (BNs) and testing
//! Bayesian networks (TBNs) into circuits, evaluates and differentiates
//! those circuits under soft evidence, trains their parameters and
//! thresholds, and checks the functional forms such queries can take.
//!
//! ```
//! use tbn::{compile, Evidence, SelectionMode, TbnModel};
//!
//! let model = TbnModel::builder()
//!     .binary("A")
//!     .binary("B")
//!     .regular("A", &[], &[0.6, 0.4])
//!     .regular("B", &["A"], &[0.9, 0.1, 0.2, 0.8])
//!     .build()?;
//! let circuit = compile(&model, "B", &["A"], SelectionMode::Threshold)?;
//! let evidence = Evidence::new().binary("A", 0.5)?;
//! let joint = tbn::evaluate(&circuit, &evidence)?;
//! assert!((joint[0] - 0.31).abs() < 1e-12);
//! # Ok::<(), tbn::Error>(())
//! ```

pub mod analysis;
pub mod approx;
pub mod circuit;
pub mod compile;
pub mod error;
pub mod experiment;
pub mod factor;
pub mod model;
pub mod train;

pub use circuit::{Circuit, CircuitBuilder, EvalContext};
pub use compile::{compile, CompileRequest, SelectionMode};
pub use error::{Error, Result};
pub use model::{load_model, Evidence, TbnModel, VarId};

/// Evaluates the circuit outputs (joint probabilities with the evidence).
pub fn evaluate(circuit: &Circuit, evidence: &Evidence) -> Result<Vec<f64>> {
    let mut ctx = EvalContext::new(circuit);
    ctx.bind(circuit, evidence)?;
    circuit.evaluate(&mut ctx)
}

/// Evaluates the posterior on the query variable given the evidence.
pub fn posterior(circuit: &Circuit, evidence: &Evidence) -> Result<Vec<f64>> {
    let mut ctx = EvalContext::new(circuit);
    ctx.bind(circuit, evidence)?;
    circuit.posterior(&mut ctx)
}

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../README.md")]
    mod readme {}
    #[doc = include_str!("../../../book/src/intro.md")]
    mod intro {}
    #[doc = include_str!("../../../book/src/networks.md")]
    mod networks {}
    #[doc = include_str!("../../../book/src/factors.md")]
    mod factors {}
    #[doc = include_str!("../../../book/src/compiling.md")]
    mod compiling {}
    #[doc = include_str!("../../../book/src/circuits.md")]
    mod circuits {}
    #[doc = include_str!("../../../book/src/training.md")]
    mod training {}
    #[doc = include_str!("../../../book/src/approximation.md")]
    mod approximation {}
    #[doc = include_str!("../../../book/src/analysis.md")]
    mod analysis {}
    #[doc = include_str!("../../../book/src/experiments.md")]
    mod experiments {}
}
