//! End-to-end document processing: image to layout to feature vector.

use serde::{Deserialize, Serialize};

use crate::document::{binarize, binarize_auto, BinarizeMethod, Binarization, BinaryImage, GrayImage};
use crate::error::Result;
use crate::features::{build_feature_vector, normalize_mode, FeatureVector, MeasureSet, NormalizationMode};
use crate::layout::{analyze, Layout, LayoutConfig};
use crate::matcher::{search_template, CharMatch, Embedder, MatcherConfig, TemplateQuery};

#[derive(Debug, Clone)]
pub struct Analysis {
    pub image: BinaryImage,
    pub binarization: Binarization,
    pub layout: Layout,
}

/// Binarizes (Otsu unless `method` says otherwise) and runs layout analysis.
pub fn analyze_gray(
    gray: &GrayImage,
    method: Option<BinarizeMethod>,
    cfg: &LayoutConfig,
) -> Result<Analysis> {
    let (image, binarization) = match method {
        Some(m) => binarize(gray, m)?,
        None => binarize_auto(gray),
    };
    let layout = analyze(&image, cfg);
    Ok(Analysis {
        image,
        binarization,
        layout,
    })
}

/// Matches found for one template.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TemplateMatches {
    pub label: String,
    pub matches: Vec<CharMatch>,
}

/// Layout measures plus the occurrence sizes of every template.
pub fn measure_document(
    image: &BinaryImage,
    layout: &Layout,
    templates: &[TemplateQuery],
    matcher: &MatcherConfig,
    embedder: &Embedder,
) -> Result<(MeasureSet, Vec<TemplateMatches>)> {
    let mut set = MeasureSet::from_layout(&layout.measures());
    let bands: Vec<_> = layout.lines.iter().map(|l| l.band).collect();
    let mut found = Vec::with_capacity(templates.len());
    for t in templates {
        let matches = search_template(image, &bands, t, matcher, embedder)?;
        set.add_template(t.label.clone(), &matches);
        found.push(TemplateMatches {
            label: t.label.clone(),
            matches,
        });
    }
    Ok((set, found))
}

/// Normalizes a measure set and summarizes it into a feature vector.
pub fn features_from_measures(
    doc_id: &str,
    measures: &MeasureSet,
    mode: NormalizationMode,
) -> Result<FeatureVector> {
    build_feature_vector(doc_id, &normalize_mode(measures, mode)?, mode)
}
