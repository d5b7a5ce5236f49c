//! Relevance scoring: local relevance matching over masked-LM attentions and
//! embeddings, global relevance generation from causal-LM confidence gain,
//! their harmonic combination, and context chunking.

pub mod attention;
pub mod chunk;
pub mod combine;
pub mod grg;
pub mod lrm;

pub use attention::{cosine_matrix, cross_attention};
pub use chunk::{chunk_capacity, split_chunks};
pub use combine::{harmonic, ref_qrel};
pub use grg::{
    confidence_pair, gain, grg_score, rescale_gain, ConfidencePair, GainMode, GrgConfig, PromptLayout,
};
pub use lrm::{layer_precision, power_mean, rescale, Aggregation, LrmConfig};
