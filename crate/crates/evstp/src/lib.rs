//! Trajectory ingest, synthetic fleets, the experiment pipeline, and the
//! file formats around [`evstp_core`].

pub mod dates;
pub mod config;
pub mod error;
pub mod ingest;
pub mod pipeline;
pub mod report;
pub mod synth;
pub mod workflow;

pub use error::{Error, Result};
