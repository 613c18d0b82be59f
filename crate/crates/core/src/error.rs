use thiserror::Error;

/// Library-wide error type. Runtime safety outcomes (violation, QP
/// infeasibility) are first-class values, not panics.
#[derive(Debug, Error)]
pub enum Error {
    /// A quantity left its admissible domain (e.g. rho at or below the
    /// configured floor outside the stopping ball).
    #[error("domain error: {0}")]
    Domain(String),

    /// The barrier function is non-positive at the queried position.
    #[error("unsafe state: h = {h}")]
    UnsafeState { h: f64 },

    /// The Lyapunov-equation linear system degenerated (cannot occur for
    /// valid gains; kept as a defensive branch).
    #[error("singular linear system in Lyapunov solve")]
    SingularSystem,

    /// The QP admits no KKT point: the CBF row has no control authority
    /// (a2 = 0) while its bound is violated (b2 < 0).
    #[error("QP infeasible: CBF row degenerate with b2 = {b2}")]
    Infeasible { b2: f64 },

    /// Scenario/configuration rejection with a location-bearing message.
    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
