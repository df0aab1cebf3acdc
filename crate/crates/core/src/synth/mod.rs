//! Synthetic manuscripts with exact ground truth.

mod generator;
mod glyphs;
mod profile;

pub use generator::{
    generate, generate_document, GenConfig, GroundTruth, StripePlan, TruthGlyph, TruthLine,
    TruthStripe, TruthWord,
};
pub use glyphs::{draw, GlyphMetrics, GlyphShape, RightStem, StemPos, LABELS};
pub use profile::{Spread, WriterFamily, WriterProfile};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::document::BinaryImage;
use crate::error::Result;

/// One page of a synthetic corpus.
#[derive(Debug, Clone)]
pub struct SyntheticPage {
    pub writer_id: String,
    pub name: String,
    pub image: BinaryImage,
    pub truth: GroundTruth,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusSpec {
    pub family: WriterFamily,
    pub docs_per_writer: usize,
    pub page: GenConfig,
}

/// Per-page seed; distinct for every (family seed, writer, page) triple.
pub fn page_seed(family_seed: u64, writer: usize, page: usize) -> u64 {
    family_seed
        .wrapping_mul(0x9e37_79b9_7f4a_7c15)
        .wrapping_add((writer as u64) << 20)
        .wrapping_add(page as u64)
}

/// Renders `docs_per_writer` pages for every writer of the family.
pub fn generate_corpus(spec: &CorpusSpec) -> Result<Vec<SyntheticPage>> {
    let profiles = spec.family.profiles()?;
    let jobs: Vec<(usize, usize)> = (0..profiles.len())
        .flat_map(|w| (0..spec.docs_per_writer).map(move |d| (w, d)))
        .collect();
    jobs.par_iter()
        .map(|&(w, d)| {
            let p = &profiles[w];
            let (image, truth) = generate(p, page_seed(spec.family.seed, w, d), &spec.page)?;
            Ok(SyntheticPage {
                writer_id: p.name.clone(),
                name: format!("{}_{}", p.name, d + 1),
                image,
                truth,
            })
        })
        .collect()
}
