//! Pulse-wave hemodynamics workbench.
//!
//! The crate is organised bottom-up:
//!
//! * [`hemonet`]: arterial tree model, patient scaling and the cfPWV relation
//! * [`pulse1d`]: 1-D blood flow solver with three-element Windkessel outlets
//! * [`cohort`]: correlated virtual population sampling and batch simulation
//! * [`neuro`]: fully connected surrogate (batch norm, dropout, AdamW, Huber loss)
//! * [`analysis`]: sensitivity, response grids, agreement and identifiability studies
//!
//! All quantities crossing a public boundary use clinical units (cm, mmHg, mL/s,
//! L/min, m/s). The solver works internally in CGS, see [`units`].

pub mod analysis;
pub mod cohort;
pub mod error;
pub mod hemonet;
pub mod neuro;
pub mod pulse1d;
pub mod stats;
pub mod units;

pub use error::{Error, Result};
