//! Pseudo-spectral simulation of the chemotaxis-Navier-Stokes system on the
//! periodic torus, together with Littlewood-Paley diagnostics: dyadic shell
//! projections, Besov norms, dissipation wavenumbers, the low-mode
//! regularity functional and the shell-energy flux budget.

pub mod config;
pub mod error;
pub mod field;
pub mod grid;
pub mod harness;
pub mod heat;
pub mod initial;
pub mod integrate;
pub mod io;
pub mod lp;
pub mod model;
pub mod monitor;
pub mod quadrature;
pub mod random;
pub mod scaling;
pub mod verify;

pub use error::{CnsError, Result};
pub use field::{RealField, SpectralField};
pub use grid::{make_grid, TorusGrid};
pub use lp::DyadicBank;
pub use model::{ModelParams, State};
