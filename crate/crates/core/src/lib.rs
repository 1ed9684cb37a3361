//! Models of single-photon detection in a lossless cavity.
//!
//! A detector that registers one photon acts on the field state as a jump
//! `rho -> O rho O^dag / Tr(O rho O^dag)` for some lowering operator `O`.
//! Different microscopic detector models give different `O`, and they are
//! experimentally distinguishable through the photon statistics left
//! behind after a single count. This crate implements:
//!
//! * [`fock`]: truncated Fock-space states (thermal, coherent, number,
//!   squeezed vacuum) with explicit tail-mass accounting,
//! * [`jump`]: the catalog of jump models, their action on states, and
//!   closed-form post-count predictions,
//! * [`sweep`]: prediction curves over state-parameter grids, exportable
//!   as CSV,
//! * [`jc`]: an independent Jaynes-Cummings oracle that rederives the
//!   resonant-probe jump from the full atom-field unitary,
//! * [`experiment`]: seeded Monte Carlo simulation of count experiments
//!   and likelihood-based model discrimination.

pub mod error;
pub mod experiment;
pub mod fock;
pub mod jc;
pub mod jump;
pub mod sweep;

pub use error::{Error, Result};
