//! Reference-free relevance scoring for generated questions.
//!
//! A candidate question is scored against its source context by two
//! components. Local relevance matching (LRM) weighs candidate-to-context
//! attention of a masked language model against contextual cosine
//! similarity, layer by layer. Global relevance generation (GRG) measures
//! how much prepending the candidate raises a causal language model's
//! log-likelihood of the context. Both are rescaled against dataset-level
//! baselines and combined by a harmonic mean.
//!
//! Everything numeric is generic over [`Scalar`] (`f32` or `f64`); the
//! `*32` / `*64` aliases below fix the choice.

pub mod adversarial;
pub mod analysis;
pub mod backend;
pub mod baselines;
pub mod dataset;
pub mod error;
pub mod relevance;
pub mod scalar;
pub mod scorer;
pub mod seeding;
pub mod transport;
pub mod variants;

pub use backend::{CausalLm, Fingerprint, LayerActivations, MaskedLm, ModelHandle, TokenizedPair};
pub use baselines::{estimate_baselines, load_baselines, save_baselines, BaselineStats};
pub use dataset::{load_dataset, DatasetFormat, EvalRecord};
pub use error::{Error, Result};
pub use relevance::{Aggregation, GainMode, GrgConfig, LrmConfig};
pub use scalar::Scalar;
pub use scorer::{Evidence, RelevanceScore, Scorer};
pub use variants::{variant_config, VariantSpec, VariantTag};

pub type MaskedLm32 = MaskedLm<f32>;
pub type MaskedLm64 = MaskedLm<f64>;
pub type CausalLm32 = CausalLm<f32>;
pub type CausalLm64 = CausalLm<f64>;
pub type Scorer32 = Scorer<f32>;
pub type Scorer64 = Scorer<f64>;
pub type RelevanceScore32 = RelevanceScore<f32>;
pub type RelevanceScore64 = RelevanceScore<f64>;
pub type BaselineStats32 = BaselineStats<f32>;
pub type BaselineStats64 = BaselineStats<f64>;
pub type VariantSpec32 = VariantSpec<f32>;
pub type VariantSpec64 = VariantSpec<f64>;
