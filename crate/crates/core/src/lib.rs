//! Video-to-commonsense captioning: model, training, decoding, metrics,
//! question answering and rater statistics.

pub mod config;
pub mod corpus;
pub mod error;
pub mod model;
pub mod qa;
pub mod rater;
pub mod text;
pub mod vocab;

pub use error::{Error, Result};
pub mod checkpoint;
pub mod training;
pub mod generation;
pub mod metrics;
