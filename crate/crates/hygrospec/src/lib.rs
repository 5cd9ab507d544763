//! Coupled heat and moisture diffusion through porous walls.
//!
//! Two dimensionless fields are evolved across one or more material layers:
//! the vapour pressure ratio `v = P_v / P_v,ref` and the temperature ratio
//! `u = T / T_ref`, governed by
//!
//! ```text
//! c_M*(v) dv/dt* = d/dx* ( k_M*(v) dv/dx* )
//! c_T*(v) du/dt* = d/dx* ( k_T*(v) du/dx* + k_TM*(v) dv/dx* )
//! ```
//!
//! with Robin (surface film, optionally rain-loaded) or Dirichlet boundary
//! data and flux/field continuity at layer interfaces.
//!
//! Two independent solvers are provided:
//! - [`rom`]: a Chebyshev Tau-Galerkin reduced-order model integrated as an
//!   index-1 DAE by the variable-step BDF scheme in [`dae`];
//! - [`imex`]: a vertex-centered finite-difference scheme, implicit in each
//!   field's own diffusion and explicit in the coupling, used to cross-check
//!   the spectral route.
//!
//! [`postproc`] reconstructs dimensional fields, surface fluxes, error norms
//! and spectral diagnostics; [`cases`] holds the benchmark wall configurations
//! and the config/measurement file formats consumed by the CLI.

pub mod cases;
pub mod cheb;
pub mod dae;
pub mod error;
pub mod imex;
pub mod materials;
pub mod postproc;
pub mod problem;
pub mod rom;

pub use error::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// `f64` aliases for the scalar-generic Chebyshev primitives.
pub type ChebSeries = cheb::ChebyshevSeries<f64>;
pub type ChebQuadrature = cheb::QuadratureRule<f64>;
pub type ChebDerivatives = cheb::DerivativeCoeffs<f64>;
