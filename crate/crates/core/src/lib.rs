//! Core of an asymmetric co-tracker.
//!
//! A fast, budgeted nearest-neighbour classifier scores candidate patches
//! around the last known target state. The candidates it is least sure about
//! are labelled by a slower long-memory oracle, the target is localized by
//! importance sampling over the positive candidates, and each classifier is
//! then updated from the other's labels.
//!
//! The crate is `no_std` (it needs `alloc`). File formats, the command line
//! and image decoding live in the `ust` companion crate.
//!
//! ```
//! use ust_core::simulator::builtin_scenario;
//! use ust_core::tracker::{Tracker, TrackerConfig, Variant};
//! use ust_core::oracle::ScriptedOracle;
//! use alloc::sync::Arc;
//! # extern crate alloc;
//!
//! let scenario = Arc::new(builtin_scenario("plain", 7).unwrap().with_frame_count(5));
//! let oracle = ScriptedOracle::new(scenario.clone(), 0.0, 0.5, 1);
//! let (truth, _) = scenario.ground_truth(0);
//! let mut tracker = Tracker::init(
//!     &scenario.frame(0),
//!     truth,
//!     TrackerConfig::default(),
//!     Variant::Ust,
//!     oracle,
//!     42,
//! )
//! .unwrap();
//! for t in 1..scenario.frame_count() {
//!     let result = tracker.step(&scenario.frame(t)).unwrap();
//!     assert!(result.estimate.w > 0.0);
//! }
//! ```

#![no_std]
#![warn(missing_debug_implementations)]

extern crate alloc;
#[cfg(test)]
extern crate std;

mod error;
mod kdtree;
mod linalg;
mod math;

pub mod eval;
pub mod features;
pub mod geometry;
pub mod knn;
pub mod oracle;
pub mod sample;
pub mod sampler;
pub mod simulator;
pub mod tracker;

pub use error::{Error, Result};
pub use geometry::{iou, Rect, TargetState};
pub use sample::{Candidate, FeatureVector, Label, LabelSource, LabeledSample, LabeledSet};
