//! Finite volume solvers for a non-local conservation law modelling material
//! flow on a conveyor belt with a diverter.
//!
//! The density `rho` is transported by a static belt field plus a bounded
//! collision velocity that pushes mass away from congested regions. Two
//! dimensionally split schemes are provided, an upwind Roe-type scheme and a
//! Lax-Friedrichs scheme, together with evaluators for the a priori bounds
//! the schemes satisfy.

pub mod congestion;
pub mod diagnostics;
pub mod driver;
pub mod error;
pub mod grid;
pub mod lxf;
pub mod mollifier;
pub mod nonlocal;
pub mod roe;
pub mod scheme;
pub mod velocity;

pub use error::{Error, Result};
