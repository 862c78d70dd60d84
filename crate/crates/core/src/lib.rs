//! Long-term, lane-aware joint subcarrier and power allocation for shore-to-ship
//! OFDMA downlinks.
//!
//! Vessels follow timetabled shipping lanes, so the distance from every base
//! station to every ship is known ahead of time for the whole voyage. From those
//! distances the two-ray large-scale gain of every (user, slot, BS, subcarrier)
//! link is predicted, and a Lagrangian dual decomposition picks subcarrier owners
//! and transmit powers for all slots at once, minimizing the average transmit
//! power subject to per-user data volumes and per-BS power caps.
//!
//! Module map:
//! - [`scenario`]: base stations, lanes, users, carrier plan, slot grid, geometry.
//! - [`channel`]: two-ray gains and small-scale fading samples.
//! - [`rate`]: Monte-Carlo ergodic rate, deterministic equivalent, surrogate metrics.
//! - [`solver`]: the iterative dual-decomposition allocator.
//! - [`baselines`]: myopic per-slot and equal-power comparison schemes.
//! - [`sweep`]: parameter sweeps over slot count and subcarrier count.
//! - [`verify`]: oracle-backed verification suites.

pub mod baselines;
pub mod channel;
mod error;
pub mod generate;
pub mod output;
pub mod rate;
pub mod scenario;
pub mod solver;
pub mod sweep;
pub mod verify;

pub use error::{Error, Result};
