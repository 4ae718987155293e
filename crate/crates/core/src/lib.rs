//! Penning-trap ion-crystal vibratory gyroscope: trap modes, single-ion
//! dynamics, rotating-wall crystal shapes, Coriolis response and the
//! quantum-limited sensitivity budget.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod commands;
pub mod config;
pub mod constants;
pub mod dynamics;
pub mod equilibrium;
pub mod error;
pub mod modes;
pub mod output;
pub mod response;
pub mod sensing;
pub mod shape;
pub mod trap;

pub use config::RunConfig;
pub use error::{Error, Result};
pub use modes::{compute_modes, ModeFrequencies};
pub use trap::{IonSpecies, RotationInput, TrapConfig};
