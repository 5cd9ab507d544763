//! Crate-wide error type.
//!
//! Variants split into two families the CLI maps to distinct exit codes:
//! configuration/input problems (bad config files, malformed measured-data
//! CSVs, inconsistent shapes) and numerical failures (loss of parabolicity,
//! stalled integration, singular algebraic subsystems).

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// Chebyshev evaluation outside the canonical interval.
    #[error("spectral coordinate {x} lies outside [-1, 1]")]
    OutOfDomain { x: f64 },

    /// Integrand returned a non-finite value at a quadrature node.
    #[error("non-finite integrand at quadrature node {node} (x = {x})")]
    QuadratureEvaluation { node: usize, x: f64 },

    /// A coefficient fit produced a non-finite value.
    #[error("coefficient {name} evaluates non-finite at v = {v}")]
    CoefficientRange { name: &'static str, v: f64 },

    /// Saturation pressure queried outside its validity domain.
    #[error("saturation pressure undefined at T = {t_k} K")]
    SaturationDomain { t_k: f64 },

    /// Relative humidity outside (0, 1] where a sorption model needs it.
    #[error("relative humidity {phi} outside (0, 1]")]
    HumidityRange { phi: f64 },

    /// A storage coefficient lost positivity, so the PDE is no longer parabolic.
    #[error("{name} = {value} at quadrature node {node} (v = {v}); parabolicity lost")]
    Parabolicity {
        name: &'static str,
        node: usize,
        v: f64,
        value: f64,
    },

    /// Position query outside the layer that was asked to map it.
    #[error("x* = {x} outside layer extent [{a}, {b}]")]
    OutsideLayer { x: f64, a: f64, b: f64 },

    /// Invalid problem or case configuration.
    #[error("configuration: {0}")]
    Config(String),

    /// Discretization could not be assembled (degenerate layout, singular
    /// algebraic subsystem at the initial state, ...).
    #[error("assembly: {0}")]
    Assembly(String),

    /// Step-size control collapsed; carries the time reached.
    #[error("integration stalled at t* = {t}: {reason}")]
    Stiffness { t: f64, reason: String },

    /// Newton iteration failed to converge.
    #[error("Newton iteration failed at t* = {t}: {reason}")]
    NewtonFailure { t: f64, reason: String },

    /// Initial state violates the algebraic rows beyond the allowed slack.
    #[error("initial state inconsistent: algebraic residual {residual:.3e} exceeds {limit:.3e}")]
    InconsistentInitial { residual: f64, limit: f64 },

    /// Constraint subsystem singular during consistency projection.
    #[error("singular algebraic subsystem at t* = {t}")]
    SingularAlgebraic { t: f64 },

    /// Measured-data file rejected; carries the 1-based source line.
    #[error("measured series, line {line}: {reason}")]
    MeasuredData { line: u64, reason: String },

    /// Array shape mismatch in post-processing.
    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// True for errors caused by user input (config files, measured data,
    /// shape mismatches) rather than by the numerics.
    pub fn is_input_error(&self) -> bool {
        matches!(
            self,
            Error::Config(_)
                | Error::MeasuredData { .. }
                | Error::Shape(_)
                | Error::Io(_)
                | Error::Csv(_)
                | Error::Json(_)
        )
    }
}
