//! Forensic handwriting measurement.
//!
//! The pipeline turns a scanned page into a writer signature:
//!
//! 1. [`document`]: decode, convert to luminance, binarize.
//! 2. [`layout`]: text lines with upper/middle/lower zones, words and the gaps between them.
//! 3. [`matcher`]: sliding-window search for operator-chosen characters, gated on embedding distance.
//! 4. [`features`]: per-measure mean and standard deviation, Euclidean comparison, threshold calibration.
//!
//! [`synth`] renders synthetic writers with exact ground truth, and [`eval`]
//! runs the pairwise same/different-writer protocol over a corpus.

pub mod config;
pub mod document;
pub mod error;
pub mod eval;
pub mod features;
pub mod layout;
pub mod matcher;
pub mod pipeline;
pub mod synth;

pub use error::{Error, ErrorKind, Result};
