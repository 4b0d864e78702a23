//! Adaptive physical-layer network coding for the two-way relay channel.
//!
//! The crate covers the whole pipeline for PAM, square QAM and PSK end-node
//! signal sets:
//!
//! - [`lattice`]: exact Gaussian-integer arithmetic used to represent
//!   difference constellations and singular fade states.
//! - [`constellation`]: labeled signal sets and their difference
//!   constellations.
//! - [`singular_fade`]: enumeration and closed-form counts of singular fade
//!   states, plus the singularity-removal constraints of a fade state.
//! - [`latin`]: Latin squares as exclusive-law network-coding maps, the
//!   standard constructions, symmetry transforms, constrained completion and
//!   codebook generation.
//! - [`clustering`]: cluster distances and the adaptive map selection rule.
//! - [`sim`]: Monte-Carlo BER simulation of the two-phase relaying protocol.

pub mod clustering;
pub mod constellation;
pub mod error;
pub mod latin;
pub mod lattice;
pub mod sim;
pub mod singular_fade;

pub use error::{Error, Result};
