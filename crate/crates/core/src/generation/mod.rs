//! Beam and greedy decoding, completion and full generation.

mod beam;
mod pipeline;

pub use beam::{beam_search, greedy, rank, Decoded};
pub use pipeline::{
    CommonsenseOutput, DecodeMode, DecodeOptions, GenerationRecord, GenerationResult, Generator,
};
