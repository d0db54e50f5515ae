//! Distributed approximate dual subgradient solver for multi-agent
//! optimization with nonconvex objectives, plus the oracles and harness
//! used to check its runs.
//!
//! Agents sit on a cycle, keep a private copy of the decision variable, and
//! are coupled only through band constraints `|x_i − x_{i_D}| ≤ δ`. Each
//! round they mix their multiplier estimates over a time-varying balanced
//! network, recover a primal point from an ε-approximate marginal set, and
//! take a projected supgradient step on their local dual function.

pub mod consensus;
pub mod diagnostics;
pub mod engine;
pub mod error;
pub mod function;
pub mod graph;
pub mod harness;
pub mod linalg;
pub mod local_solver;
pub mod par;
pub mod problem;
pub mod scenario;

pub use error::{Assumption, DadsError, Result};
pub use function::ScalarFunction;
pub use graph::{make_cycle, CyclicGraph, WeightMatrix, WeightSchedule};
pub use local_solver::{DualBlock, SolverResolution};
pub use par::Parallelism;
pub use problem::{BoxSet, ProblemSpec};
