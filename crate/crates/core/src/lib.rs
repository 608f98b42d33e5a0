//! Numerical toolkit for Lagrangian systems with commuting variational
//! symmetries: jets and prolonged derivations, Noether integrals, the
//! Hamiltonian picture on phase space, and multi-time flows.

pub mod cli;
pub mod config;
pub mod diffengine;
pub mod error;
pub mod hamiltonian;
pub mod mechsys;
pub mod multitime;
pub mod noether;
pub mod sampling;
pub mod symalg;
pub mod verify;

pub use error::{Error, Result};
