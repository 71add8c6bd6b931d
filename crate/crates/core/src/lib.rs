//! Robust multivariable generalized super-twisting (MGSTA) control design.
//!
//! The crate covers the whole design loop for regular-form plants with
//! polytopic parameter uncertainty:
//!
//! * [`model`]: the uncertain plant, its vertex set and standing assumptions.
//! * [`lmi`]: the synthesis matrix inequalities as affine matrix expressions.
//! * [`sdp`]: translation to a standard-form semidefinite program and a
//!   primal-dual interior-point backend.
//! * [`synthesis`]: the inner convex program, gain recovery and the outer
//!   search over the two fixed scalars.
//! * [`analysis`]: numeric verification of the analysis-side inequalities and
//!   the finite-time constants.
//! * [`sim`]: fixed-step RK4 closed-loop simulation with Lyapunov traces.
//! * [`trailer`]: the fault-tolerant chain-of-trailers benchmark.
//! * [`config`]: JSON configuration files.

pub mod analysis;
pub mod config;
mod error;
pub mod linalg;
pub mod lmi;
pub mod model;
pub mod sdp;
pub mod sim;
pub mod synthesis;
pub mod trailer;

pub use error::{Error, Result};

pub use analysis::{Certificates, StabilityConstants, VerificationReport};
pub use lmi::{AffineMatrixExpr, Sense, VariableLayout};
pub use model::{AssumptionReport, DesignConfig, PolytopicPlant, VertexMatrices};
pub use sdp::{ConicProblem, ConicSolution, SolveStatus, SolverSettings};
pub use sim::{Gains, SimConfig, TrajectoryRecord};
pub use synthesis::{SearchGrid, SynthesisResult};
