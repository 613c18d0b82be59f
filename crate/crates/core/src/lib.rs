//! Safety-critical guidance for a force-controlled unicycle robot.
//!
//! The stack combines a strict control Lyapunov function built from polar
//! navigation errors (`clf`), a cascade control barrier function over
//! position and velocity (`cbf`), and a relaxed quadratic program mediating
//! between them (`qp`). Closed-loop trajectories are produced by `sim`,
//! configured through TOML files (`scenario`), and batched by `sweep`.

pub mod cbf;
pub mod clf;
pub mod error;
pub mod model;
pub mod qp;
pub mod scenario;
pub mod sim;
pub mod sweep;

pub use cbf::{BarrierSpec, Poly2};
pub use clf::{Gains, LyapunovData};
pub use error::{Error, Result};
pub use model::{CartesianState, ControlInput, PolarErrorState, ScaledInput};
pub use qp::{ActiveSet, ControlConfig, QpProblem, QpSolution};
pub use scenario::ScenarioFile;
pub use sim::{ControllerKind, RunStatus, Scenario, Trajectory};
pub use sweep::{SweepRecord, SweepSummary};
