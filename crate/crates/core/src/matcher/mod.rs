//! Template search with learned (or pixel) embeddings.

mod embed;
mod network;
mod search;

pub use embed::{distance, AreaResampler, Embedder, EmbedderKind};
pub use network::{
    EmbeddingNetwork, Layer, EMBEDDING_DIM, INPUT_SIDE, MAGIC as HWNET_MAGIC, NUM_CLASSES,
};
pub use search::{
    ink_extent, occurrence_measures, search_template, search_template_until, BBox, CharMatch,
    MatcherConfig, SearchOutcome, TemplateQuery,
};
