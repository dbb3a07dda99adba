//! Möbius-invariant knot energies on polygonal curves, with the conformal
//! and Minkowski-space geometry that goes with them.

pub mod cli;
pub mod conformal;
pub mod curve;
pub mod energy;
pub mod error;
pub mod flow;
pub mod generators;
pub mod io;
pub mod minkowski;
pub mod moebius;
pub mod quadrature;
pub mod symplectic;

pub use curve::{LinkSet, PolyCurve, Polyline, SphereCurve};
pub use energy::{EnergyReport, Formula};
pub use error::{Error, Result};
