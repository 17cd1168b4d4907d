//! Allocation-only core of the EV fleet energy predictor.
//!
//! Everything in this crate is pure computation over in-memory values:
//! trajectory cleaning, the region grid, hourly feature extraction under a
//! linear state-of-charge model, the per-region neural spatial predictor, the
//! linear-chain CRF temporal predictor, and the NMSE-optimal combiner. File
//! formats, synthetic data, orchestration and the CLI live in the `evstp`
//! crate.
#![cfg_attr(not(test), no_std)]

extern crate alloc;

pub mod combiner;
mod error;
pub mod features;
pub mod grid;
pub mod spatial_nn;
pub mod stats;
pub mod temporal_crf;
pub mod time;
pub mod trajectory;

pub use error::{Error, Result};
pub use grid::{BBox, RegionGrid, RegionId};
pub use time::{Day, Timestamp};
pub use trajectory::{GpsFix, Trajectory};
