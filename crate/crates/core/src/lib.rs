//! Batch multi-object tracking for fixed-camera frame sequences.
//!
//! The crate is organised as a pipeline of small, independently testable
//! stages:
//!
//! * [`frame_io`] — frame decoding, grayscale conversion, CSV box records,
//!   annotated output frames.
//! * [`segmentation`] — temporal Chi-Square motion masks from consecutive
//!   frame pairs.
//! * [`morphology`] — binary mask cleanup (hole filling, erosion) and
//!   connected-component blob extraction.
//! * [`moments`] — per-blob colour moments and Hu shape invariants, combined
//!   into a 16-value feature vector.
//! * [`tracker`] — Chi-Square nearest-neighbour association of blobs to
//!   persistent track identities.
//! * [`evaluation`] — correspondence-based precision/recall against ground
//!   truth.
//! * [`synth`] — deterministic synthetic scene generator for tests and demos.
//! * [`config`] — flat `key = value` pipeline configuration.
//! * [`pipeline`] — end-to-end batch orchestration with per-stage timing.

pub mod config;
pub mod error;
pub mod evaluation;
pub mod frame_io;
pub mod moments;
pub mod morphology;
pub mod pipeline;
pub mod segmentation;
pub mod synth;
pub mod tracker;

pub use error::{Error, Result};
pub use frame_io::BoundingBox;
