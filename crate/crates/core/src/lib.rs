//! Analytical model and slotted-time simulator for a random-access mm-wave
//! network assisted by a full-duplex, network-level cooperative relay.
//!
//! The crate is organised bottom-up:
//!
//! - [`channel`]: geometry, UMi street-canyon propagation, sectored antennas,
//!   SINR evaluation and the [`SuccessTable`] of conditional decoding
//!   probabilities.
//! - [`queueing`]: actual transmit probability under beam alignment, relay
//!   arrival/service rates, stability, the batch-arrival Markov chain and its
//!   stationary moments.
//! - [`metrics`]: aggregate throughput and per-packet delay.
//! - [`sim`]: a slot-level Monte-Carlo simulator used to cross-check the
//!   analysis.
//! - [`oracle`]: brute-force enumeration of per-slot outcomes for small
//!   networks.
//! - [`sweep`]: parameter grids, extremum traces and CSV rows.

pub mod channel;
pub mod config;
pub mod error;
pub mod metrics;
pub mod numeric;
pub mod oracle;
pub mod queueing;
pub mod report;
pub mod sim;
pub mod sweep;
pub mod validation;

pub use channel::{
    build_success_table, InterferenceScenario, Link, Scheme, SuccessTable,
};
pub use config::{CodebookAlignment, SceneConfig, StrategyMix};
pub use error::{Error, Result};
pub use metrics::{analyze, Analysis, DelayBreakdown, PerfReport, Regime};
pub use queueing::{QueueReport, TransitionKernel};
pub use sim::{run_simulation, SimMode, SimOptions, SimResult};
