//! Two-way fixed effects estimation for directed dyadic networks.
//!
//! The model scores each ordered pair `(i, j)` with a link-level objective in
//! the index `x_ij'β + α_i + γ_j`. Sender effects `α` and receiver effects `γ`
//! are estimated jointly with `β` by a structured Newton method; the
//! incidental-parameter bias of `β` and of fixed-effect averages is removed by
//! a leave-out jackknife over diagonal slices of the adjacency matrix.
//!
//! Everything numeric is generic over [`Scalar`] (`f32` or `f64`); the
//! aliases at the crate root fix the common double precision case.

pub mod data;
pub mod effects;
pub mod error;
pub mod estimator;
pub mod family;
pub mod hessian;
pub mod inference;
pub mod jackknife;
pub mod linalg;
pub mod params;
pub mod partition;
pub mod rng;
pub mod scalar;
pub mod special;

pub use data::{DegeneracyReport, EdgeSchema, NetworkData};
pub use effects::{EffectOptions, EffectResult, LambdaPattern, Moment, Target};
pub use error::{Error, Result};
pub use estimator::{fit, fit_full, fit_unchecked, penalized_derivatives, penalized_objective, FitConfig, FitResult};
pub use family::ModelFamily;
pub use hessian::{HessianBlocks, StructuredHessian};
pub use inference::{PartialledScore, VarianceEstimate, XiVariant};
pub use jackknife::{JackknifeResult, LeaveOutEstimates, Variant};
pub use linalg::Matrix;
pub use params::ParameterSet;
pub use partition::{build_partition, EdgeMask, LeaveOutPartition};
pub use scalar::Scalar;

pub type Network = NetworkData<f64>;
pub type Params = ParameterSet<f64>;
pub type Fit = FitResult<f64>;
pub type Jackknife = JackknifeResult<f64>;
pub type Variance = VarianceEstimate<f64>;

pub type Network32 = NetworkData<f32>;
pub type Params32 = ParameterSet<f32>;
pub type Fit32 = FitResult<f32>;
