//! Eigenvalue problems with eigenvector nonlinearities of rational-linear type,
//!
//! ```text
//! (A + λB + Σᵢ fᵢ(x) Cᵢ) x = 0,   fᵢ(x) = rᵢᵀx / sᵢᵀx,
//! ```
//!
//! solved through an exact linearization to a multiparameter eigenvalue
//! problem. The crate offers a dense path that enumerates every solution via
//! operator determinants, and iterative solvers (residual inverse iteration,
//! inverse iteration with a Sylvester fast path, and a hybrid of the two).
//!
//! All bilinear forms written `vᵀx` are unconjugated, also for complex data.

pub mod dense;
pub mod error;
pub mod invit;
pub mod linalg;
pub mod linearize;
pub mod opdet;
pub mod problem;
pub mod problems;
pub mod resinv;
pub mod rng;

pub use error::{NepvError, Result};
pub use linalg::{CMatrix, C64};
pub use linearize::{build_mep, random_g, validate_g, MepProblem};
pub use problem::{count_solutions, f_eval, nepv_residual, Classification, NepvProblem, SolutionRecord};
