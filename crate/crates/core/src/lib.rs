//! Computable core for reducing n-dimensional Sobolev trace embeddings over
//! lower-dimensional measures to one-dimensional Hardy-type inequalities.
//!
//! Everything works on nonnegative piecewise-constant functions on (0,1)
//! (see [`stepfn::StepFunction`]) and closed-form images of them under the
//! reduction operators (see [`evalfn::EvaluableFunction`]). On top of those
//! sit rearrangement-invariant norms, the Hardy-type operator family,
//! K-functionals, a best-constant search, Frostman measure tooling, and the
//! embedding verification drivers used by the command-line interface.

pub mod best_constant;
pub mod embed_verify;
pub mod error;
pub mod evalfn;
pub mod frostman;
pub mod grids;
pub mod hardy_ops;
pub mod isotonic;
pub mod kfunc;
pub mod norms;
pub mod params;
pub mod quad;
pub mod stepfn;

pub use error::{Error, Result};
pub use evalfn::{EvalPiece, EvaluableFunction, PowerTerm};
pub use params::{unit_ball_volume, Regime, SobolevParams};
pub use stepfn::StepFunction;
