//! Convolution-form cascaded channel model for RIS-assisted links.
//!
//! The crate synthesizes the Tx-RIS and RIS-Rx sub-channels, evaluates the
//! equivalent RIS radiation pattern for a phase codebook, cascades the two
//! hops either path-by-path or as an angular convolution of gridded impulse
//! responses, simulates a PN-correlation sounder with rotating horn scans,
//! and rebuilds per-path power comparisons from measured tables.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod antenna;
pub mod cascade;
pub mod error;
pub mod path;
pub mod ris;
pub mod scenario;
pub mod sounding;
pub mod synth;
pub mod tables;
pub mod units;
pub mod validation;

pub use error::{Error, Result};
