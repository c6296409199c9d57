//! Ground-truth evaluation of feature attribution methods.
//!
//! Synthetic two-class problems contain a *suppressor*: a feature with no
//! statistical association to the label that a Bayes-optimal linear model
//! nonetheless weights heavily to cancel noise. Because the informative
//! features are known by construction, attributions can be scored for
//! correctness, and faithfulness metrics can be checked for whether they
//! reward attribution to the suppressor.
//!
//! Everything is generic over [`Scalar`] (`f32` or `f64`); the `*64` and
//! `*32` aliases below fix the scalar type.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod attrib;
pub mod config;
pub mod datagen;
pub mod error;
pub mod evalmetrics;
pub mod faithfulness;
pub mod linalg;
pub mod models;
pub mod scalar;

pub use attrib::{Attribution, Background, Method, Scope};
pub use datagen::{Dataset, GeneratorSpec, GroundTruthOracle};
pub use error::{Error, Result};
pub use evalmetrics::{BenchmarkConfig, EvalReport, ModelSource};
pub use faithfulness::{DeletionCurve, Replacement};
pub use linalg::Matrix;
pub use models::{LinearModel, LogisticConfig};
pub use scalar::Scalar;

pub type GeneratorSpec64 = GeneratorSpec<f64>;
pub type Dataset64 = Dataset<f64>;
pub type LinearModel64 = LinearModel<f64>;
pub type Attribution64 = Attribution<f64>;
pub type Background64 = Background<f64>;
pub type DeletionCurve64 = DeletionCurve<f64>;
pub type EvalReport64 = EvalReport<f64>;
pub type BenchmarkConfig64 = BenchmarkConfig<f64>;
pub type Matrix64 = Matrix<f64>;

pub type GeneratorSpec32 = GeneratorSpec<f32>;
pub type Dataset32 = Dataset<f32>;
pub type LinearModel32 = LinearModel<f32>;
pub type Attribution32 = Attribution<f32>;
pub type Matrix32 = Matrix<f32>;
