//! Slotted multiuser random access over a block-fading uplink.
//!
//! Users contend for a collision channel, pay power for every attempt, and
//! each tunes two coupled iterates from nothing but its own (idle /
//! success / collision) feedback: a waterfilling threshold that enforces
//! its long-term rate target, and a transmission probability driven down
//! the measured gradient of its average power. The crate bundles
//!
//! * [`channel`] — exponential block fading, quantized states,
//!   waterfilling and the capacity relation;
//! * [`ttsga`] — the per-user two-timescale iterates and their update
//!   rules;
//! * [`collision_sim`] — the slotted coordinator, metrics, and the stock
//!   experiment sweeps;
//! * [`protocol`] — the request/grant frame-level variant of the same
//!   control loop;
//! * [`equilibrium`] — a simulation-free analytic toolkit (threshold
//!   solver, power model, second derivatives, best-response fixed point)
//!   used to cross-check simulated runs;
//! * [`config`] / [`cli`] — the text config format, experiment commands
//!   and CSV emission behind the `raccess` binary.

pub mod channel;
pub mod cli;
pub mod collision_sim;
pub mod config;
pub mod equilibrium;
mod error;
pub mod protocol;
pub mod ttsga;

pub use error::{Error, Result};
