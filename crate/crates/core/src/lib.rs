//! Probabilistically-robust secrecy SWIPT beamforming.
//!
//! The crate builds the Bernstein-type, S-procedure and large-deviation
//! convex restrictions of the outage-constrained power minimisation
//! problem, solves them with a dense interior-point method, maximises the
//! secrecy rate by bisection and checks designs by Monte-Carlo simulation.

pub mod conic;
pub mod design;
pub mod error;
pub mod hermitian;
pub mod montecarlo;
pub mod restrictions;
pub mod scenario;
pub mod solver;
pub mod srm;

pub use conic::{ConeSolution, ConeTag, ConicProgram, SolveStatus};
pub use design::{solve_power_min, BeamformingDesign, PowerMinOutcome};
pub use error::{Error, Result};
pub use hermitian::HermitianMatrix;
pub use restrictions::MethodTag;
pub use scenario::{sample_channels, ChannelSet, ScenarioConfig};
pub use montecarlo::{validate_design, OutageReport};
pub use solver::{solve, SolverSettings};
pub use srm::{srm_solve, SrmOutcome, SrmSettings};
