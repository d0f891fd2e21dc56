//! Adversarial deep hedging.
//!
//! A hedger network and a path generator network play a min-max game over
//! the utility of the hedger's terminal profit and loss. This crate holds the
//! allocation-only algorithmic core: a scalar reverse-mode tape, option
//! analytics, convex risk measures, classical path simulators, the two
//! networks, the training loops, the one-step toy analysis and the backtest
//! evaluation. File formats, configuration and the command line live in the
//! `advhedge` crate.

#![no_std]

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod autodiff;
pub mod backtest;
pub mod error;
pub mod instruments;
mod math;
pub mod networks;
pub mod risk;
pub mod rng;
pub mod simulators;
pub mod toy_analysis;
pub mod training;

pub use error::{Error, Result};
