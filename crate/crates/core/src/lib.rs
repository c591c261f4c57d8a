//! Typical tables of contingency-table margins.
//!
//! For row sums `R` and column sums `C`, the typical table `Z` is the unique
//! maximizer of `g(X) = sum_ij g(x_ij)` over non-negative real matrices with
//! those margins, where `g(x) = (x+1) ln(x+1) - x ln x`. `e^{g(Z)}` bounds
//! the number of integer tables from above, and a matrix of independent
//! geometric variables with means `Z` is uniform once conditioned on the
//! margins.
//!
//! Modules:
//! - [`model`]: margins, tables, entry sets and the scalar helpers.
//! - [`solver`]: the typical table via its convex dual, plus structural bounds.
//! - [`counting`]: exact counts, enumeration and exact uniform sampling.
//! - [`sampling`]: geometric matrices, the rejection sampler and tail bounds.
//! - [`scaling`]: lattice coordinates and the t-scaling map.

pub mod counting;
pub mod error;
pub mod model;
pub mod rng;
pub mod sampling;
pub mod scaling;
pub mod solver;
pub mod stats;

pub use counting::{count_tables, count_tables_with_budget, enumerate_tables, DpTable};
pub use error::{Error, Result};
pub use model::{
    clone_margins, entropy, g, g_value, independence_table, nu_s, sigma_s, smoothness_delta, ContingencyTable,
    EntrySet, Margins, RealMatrix,
};
pub use sampling::{GeometricMatrixModel, RejectionSampler};
pub use scaling::{t_scale, ScalingContext};
pub use solver::{count_bounds, log_rho, solve_typical, solve_typical_with, SolverOptions, TypicalTable};
