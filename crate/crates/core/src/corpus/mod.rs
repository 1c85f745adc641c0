//! Data formats, retrieval and the synthetic corpus.

mod features;
mod record;
pub mod retrieval;
pub mod synthetic;

pub use features::{FeatureError, VideoFeatures, FEATURE_MAGIC};
pub use record::{
    load_corpus, parse_jsonl, read_jsonl, write_jsonl, Commonsense, KeyedText, KnowledgeEvent, V2CRecord,
};
pub use retrieval::{
    annotate_caption, rank_candidates, retrieve_events, ActivityFilter, Jaccard, Scorer, TfIdfIndex,
    TokenOverlap,
};
pub use synthetic::{make_synthetic_corpus, SyntheticConfig, SyntheticCorpus};
