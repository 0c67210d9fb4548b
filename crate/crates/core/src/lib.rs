//! Headless simulator for a robot swarm that finds and cleans a contamination
//! source.
//!
//! Robots climb the intensity gradient of a [`cue_field::CueField`] with a
//! differential steering law, stop when they meet another robot, and clean
//! the ground beneath them for a time that grows with the local intensity.
//! The [`engine`] advances the world on a fixed timestep and samples the
//! [`metrics`] once per simulated second; [`harness`] runs parameter sweeps
//! and feeds them to the [`stats`] module for medians and ANOVA.
//!
//! ```
//! use swarm_cleanup::engine::{run_simulation, SimConfig};
//!
//! let config = SimConfig { n_robots: 10, duration_s: 5, ..SimConfig::default() };
//! let out = run_simulation(config).unwrap();
//! assert_eq!(out.series.len(), 5);
//! ```

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod controller;
pub mod cue_field;
pub mod engine;
pub mod error;
pub mod geom;
pub mod harness;
pub mod metrics;
pub mod stats;

pub use error::{Error, Result};

// The guide under `book/` is compiled as doctests so its snippets stay in
// sync with the API.
#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/cue-field.md")]
    mod cue_field {}
    #[doc = include_str!("../../../book/src/controller.md")]
    mod controller {}
    #[doc = include_str!("../../../book/src/engine.md")]
    mod engine {}
    #[doc = include_str!("../../../book/src/metrics.md")]
    mod metrics {}
    #[doc = include_str!("../../../book/src/statistics.md")]
    mod statistics {}
    #[doc = include_str!("../../../book/src/harness.md")]
    mod harness {}
}
