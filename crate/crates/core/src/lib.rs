//! Adaptive traffic signal control: a deterministic point-queue traffic
//! simulator and the recurrent multi-agent learners that drive it.
//!
//! The crate is `no_std` (it needs `alloc`) so the numerical core can run
//! anywhere; file formats, the command line and evaluation suites live in
//! the `atsc` companion crate.
//!
//! Module map:
//!
//! - [`netmodel`]: road network, signal phases, agent graph, grid generator.
//! - [`microsim`]: vehicle insertion, movement, queue discharge, sensors.
//! - [`neural`]: dense/LSTM layers, backpropagation through time, RMSprop.
//! - [`agents`]: observations, rewards, returns, losses, action selection.
//! - [`trainer`]: episodes, learning steps and the training protocol.
#![cfg_attr(not(test), no_std)]

extern crate alloc;

pub mod agents;
mod error;
pub mod math;
pub mod microsim;
pub mod netmodel;
pub mod neural;
pub mod rng;
pub mod trainer;

pub use error::{Error, Result};
