//! Airborne pathogen transmission analyzed as a communication problem.
//!
//! The crate has two halves that meet in the middle:
//!
//! * an exact information-theoretic core ([`dmc`], [`closed_forms`],
//!   [`dose`]) that evaluates mutual information, per-output-event
//!   contributions, infection rates, and absorbed-dose measures for finite
//!   discrete memoryless channels, plus closed forms for the standard
//!   point-to-point, multi-transmitter, multi-receiver, relay, and
//!   ternary-input scenarios; and
//! * a particle-level Monte Carlo simulator ([`kinematics`], [`emission`],
//!   [`environment`], [`mc`]) that estimates the transition probabilities of
//!   those channels by tracking cough-emitted droplets under gravity and
//!   Stokes drag through indoor scenes with absorbing walls and spherical
//!   receivers.
//!
//! The `aerochannel` binary exposes both halves on the command line; see the
//! [`cli`] module for its file formats and run manifests.

pub mod cli;
pub mod closed_forms;
pub mod dmc;
pub mod dose;
pub mod emission;
pub mod environment;
pub mod error;
pub mod kinematics;
pub mod mc;

pub use error::{Error, Result};
