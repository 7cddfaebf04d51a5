//! Spectral solver for the forced, dissipative barotropic quasigeostrophic
//! vorticity equation in a rectangular basin with free-slip walls, plus
//! periodic-orbit search and the energy-estimate diagnostics that bound it.
//!
//! The prognostic variable is the vorticity `omega = Laplacian(psi)`, expanded
//! in `sin(m pi x / Lx) sin(n pi y / Ly)`:
//!
//! `omega_t + J(psi, omega) + beta psi_x = nu Laplacian(omega) - r omega + f`.

pub mod cli;
pub mod config;
pub mod dynamics;
pub mod error;
pub mod io;
pub mod krylov;
pub mod orbit;
pub mod spectral;
pub mod stepper;
pub mod theory;

pub use config::{parse_config, parse_config_with, ConfigError, InitialCondition, RunConfig};
pub use dynamics::{Dynamics, ForcingSpec, ForcingTerm, ModelParams, StateView};
pub use error::{Error, Result};
pub use orbit::{OrbitMethod, OrbitResult, OrbitSettings, PeriodMap};
pub use spectral::{Basis, Domain, GridField, SpectralField};
pub use stepper::{DiagnosticsRecord, StepConfig, Stepper};
pub use theory::{check_condition, default_estimate, make_estimate, DissipativityEstimate};
