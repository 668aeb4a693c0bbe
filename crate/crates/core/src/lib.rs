//! Low-rank SDP feasibility and optimization from ℓ²-sampling access.
//!
//! The constraint matrices live in [`SampledMatrix`] stores. The solver runs
//! matrix multiplicative weights, approximating each Gibbs iterate through a
//! row/column sketch of the accumulated violations, a small symmetric
//! eigendecomposition and sampled trace estimates. Nothing of size `n × n` is
//! ever formed outside [`dense_oracle`].

pub mod dense_oracle;
pub mod error;
pub mod gibbs;
pub mod io;
pub mod rng;
pub mod sketch;
pub mod smalldense;
pub mod solver;
pub mod store;
pub mod symmetric_approx;
pub mod trace_estimator;

pub use error::{Error, Result};
pub use gibbs::{GibbsDescription, Support};
pub use num_complex::Complex64;
pub use sketch::{MatrixSum, SketchParams, Summand, VDescription};
pub use smalldense::DenseMatrix;
pub use solver::{FeasibilityOutcome, FeasibilityProblem, OptimizationProblem, SolverConfig, Verdict};
pub use store::{SampledMatrix, SamplingAccess, SignedMatrix};
pub use symmetric_approx::SpectralSurrogate;
pub use trace_estimator::{EstimatorConfig, QueryableOperator};
