//! Reference oracles and checks on the functional form of queries.
//!
//! [`brute_force_query`] and [`select_then_infer`] answer queries by
//! enumerating the joint state space and serve as oracles for compiled
//! circuits. [`fit_multilinear`] recovers the multilinear form of a query
//! from its values at the corners of the evidence cube, [`scan_regions`]
//! partitions a query over one or two evidence inputs into multilinear
//! regions, and [`relu_to_tac`] turns a ReLU/step network into a circuit
//! with testing units.
//!
//! ```
//! use tbn::analysis::fit_multilinear;
//! use tbn::{compile, Evidence, SelectionMode, TbnModel};
//!
//! let m = TbnModel::builder()
//!     .binary("E")
//!     .binary("Q")
//!     .regular("E", &[], &[0.5, 0.5])
//!     .regular("Q", &["E"], &[1.0, 0.0, 0.0, 1.0])
//!     .build()?;
//! let c = compile(&m, "Q", &["E"], SelectionMode::Threshold)?;
//! let fit = fit_multilinear(|x| Ok(tbn::evaluate(&c, &Evidence::new().binary("E", x[0])?)?[0]), 1, 0)?;
//! assert!(fit.poly.coeffs[0].abs() < 1e-12);
//! assert!((fit.poly.coeffs[1] - 0.5).abs() < 1e-12);
//! assert!(fit.residual < 1e-12);
//! # Ok::<(), tbn::Error>(())
//! ```

mod enumerate;
mod multilinear;
mod regions;
mod relu;

pub use enumerate::{brute_force_query, select_cpts, select_then_infer, Marginal, ENUMERATION_LIMIT};
pub use multilinear::{fit_multilinear, MultilinearFit, MultilinearPoly, MAX_MULTILINEAR_INPUTS, RESIDUAL_POINTS};
pub use regions::{scan_regions, Region, RegionReport, BOUNDARY_TOLERANCE, COEFF_TOLERANCE, VALUE_TOLERANCE};
pub use relu::{eval_transpiled, input_name, relu_to_tac, Activation, Layer, ReluNet};
