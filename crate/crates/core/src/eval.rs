//! Pairwise same/different-writer evaluation over a labelled corpus.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::document::{binarize_auto, load_gray, BinaryImage};
use crate::error::{Error, Result};
use crate::features::{calibrate_threshold, feature_distance, FeatureVector, NormalizationMode};
use crate::layout::{analyze, LayoutConfig, SoOverrides};
use crate::matcher::{Embedder, EmbedderKind, MatcherConfig, TemplateQuery};
use crate::pipeline::{features_from_measures, measure_document};
use crate::synth::GroundTruth;

/// One manifest row.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorpusEntry {
    pub path: PathBuf,
    pub writer_id: String,
}

/// Reads a `path,writer_id` CSV. Relative paths resolve against the manifest's folder.
pub fn read_manifest(path: impl AsRef<Path>) -> Result<Vec<CorpusEntry>> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let base = path.parent().unwrap_or(Path::new(""));
    let mut out = Vec::new();
    for row in csv::Reader::from_reader(file).deserialize::<CorpusEntry>() {
        let mut e = row.map_err(|e| Error::Format(format!("{}: {e}", path.display())))?;
        if e.path.is_relative() {
            e.path = base.join(&e.path);
        }
        out.push(e);
    }
    Ok(out)
}

pub fn write_manifest(path: impl AsRef<Path>, entries: &[CorpusEntry]) -> Result<()> {
    let path = path.as_ref();
    let mut w = csv::Writer::from_path(path)
        .map_err(|e| Error::io(path, std::io::Error::other(e.to_string())))?;
    for e in entries {
        w.serialize(e)
            .map_err(|e| Error::io(path, std::io::Error::other(e.to_string())))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// `page.png` keeps its ground truth in `page.truth.json`.
pub fn truth_sidecar(image: &Path) -> PathBuf {
    image.with_extension("truth.json")
}

/// A corpus document ready for feature extraction.
#[derive(Debug, Clone)]
pub struct EvalDocument {
    pub id: String,
    pub writer_id: String,
    pub image: BinaryImage,
    /// Needed to locate template crops; documents without it contribute layout measures only.
    pub truth: Option<GroundTruth>,
}

impl EvalDocument {
    pub fn load(entry: &CorpusEntry) -> Result<Self> {
        let gray = load_gray(&entry.path)?;
        let (image, _) = binarize_auto(&gray);
        let side = truth_sidecar(&entry.path);
        let truth = match std::fs::read_to_string(&side) {
            Ok(text) => Some(
                serde_json::from_str(&text)
                    .map_err(|e| Error::Format(format!("{}: {e}", side.display())))?,
            ),
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => None,
            Err(e) => return Err(Error::io(side, e)),
        };
        let id = entry
            .path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| entry.path.display().to_string());
        Ok(Self {
            id,
            writer_id: entry.writer_id.clone(),
            image,
            truth,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalConfig {
    /// Character labels to search in every document.
    pub templates: Vec<String>,
    #[serde(default)]
    pub so: Option<usize>,
    pub t_c: f64,
    pub run_length: usize,
    pub mode: NormalizationMode,
    /// Fraction of same-writer and of different-writer pairs used for calibration.
    pub calib_frac: f64,
    pub seed: u64,
    #[serde(default)]
    pub embedder: EmbedderKind,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            templates: Vec::new(),
            so: None,
            t_c: 0.1,
            run_length: 5,
            mode: NormalizationMode::Raw,
            calib_frac: 0.3,
            seed: 7,
            embedder: EmbedderKind::PixelFallback,
        }
    }
}

impl EvalConfig {
    fn validate(&self) -> Result<()> {
        if !(self.calib_frac > 0.0 && self.calib_frac < 1.0) {
            return Err(Error::Validation(format!(
                "calib_frac must be in (0, 1), got {}",
                self.calib_frac
            )));
        }
        self.matcher().validate()
    }

    fn matcher(&self) -> MatcherConfig {
        MatcherConfig {
            t_c: self.t_c,
            run_length: self.run_length,
            stride: 1,
            embedder: self.embedder.clone(),
        }
    }

    fn layout(&self) -> LayoutConfig {
        LayoutConfig {
            so: SoOverrides {
                so: self.so,
                per_line: BTreeMap::new(),
            },
            ..LayoutConfig::default()
        }
    }
}

/// Runs layout analysis and template search on one document.
pub fn extract_features(
    doc: &EvalDocument,
    cfg: &EvalConfig,
    embedder: &Embedder,
) -> Result<FeatureVector> {
    let layout = analyze(&doc.image, &cfg.layout());
    let mut templates = Vec::new();
    for label in &cfg.templates {
        match doc.truth.as_ref().and_then(|t| t.first_glyph(label)) {
            Some(g) => templates.push(TemplateQuery::from_document(
                doc.id.clone(),
                &doc.image,
                g.bbox,
                label.clone(),
            )?),
            None => log::info!("{}: no '{label}' glyph to use as template", doc.id),
        }
    }
    let (measures, _) = measure_document(&doc.image, &layout, &templates, &cfg.matcher(), embedder)?;
    features_from_measures(&doc.id, &measures, cfg.mode)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Excluded {
    pub doc: String,
    pub error: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairResult {
    pub a: String,
    pub b: String,
    /// `None` when the pair shares no measures; such pairs are called different.
    pub distance: Option<f64>,
    pub same_writer: bool,
    pub predicted_same: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub documents: usize,
    /// Evaluated pairs, excluding the calibration pairs.
    pub pair_count: usize,
    pub calibration_pairs: usize,
    pub threshold: f64,
    pub calibration_accuracy: f64,
    pub accuracy: f64,
    pub true_same: usize,
    pub true_different: usize,
    pub false_same: usize,
    pub false_different: usize,
    pub positive_accuracy: Option<f64>,
    pub negative_accuracy: Option<f64>,
    pub pairs: Vec<PairResult>,
    pub excluded: Vec<Excluded>,
}

/// Loads every manifest entry; failures become exclusions.
pub fn load_corpus(entries: &[CorpusEntry]) -> Vec<std::result::Result<EvalDocument, Excluded>> {
    entries
        .par_iter()
        .map(|e| {
            EvalDocument::load(e).map_err(|err| Excluded {
                doc: e.path.display().to_string(),
                error: err.to_string(),
            })
        })
        .collect()
}

/// Extracts features, calibrates on a stratified sample of pairs and scores the rest.
pub fn evaluate_pairwise(
    docs: Vec<std::result::Result<EvalDocument, Excluded>>,
    cfg: &EvalConfig,
) -> Result<EvalReport> {
    evaluate_with_vectors(docs, cfg).map(|(r, _)| r)
}

/// As [`evaluate_pairwise`], also returning the feature vector of every included document.
pub fn evaluate_with_vectors(
    docs: Vec<std::result::Result<EvalDocument, Excluded>>,
    cfg: &EvalConfig,
) -> Result<(EvalReport, Vec<FeatureVector>)> {
    cfg.validate()?;
    let mut per_writer: BTreeMap<&str, usize> = BTreeMap::new();
    for d in docs.iter().flatten() {
        *per_writer.entry(d.writer_id.as_str()).or_insert(0) += 1;
    }
    if per_writer.len() < 2 || per_writer.values().any(|&n| n < 2) {
        return Err(Error::Validation(
            "evaluation needs at least 2 writers with at least 2 documents each".into(),
        ));
    }
    let embedder = Embedder::from_kind(&cfg.embedder)?;

    let extracted: Vec<std::result::Result<(String, FeatureVector), Excluded>> = docs
        .into_par_iter()
        .map(|d| {
            let d = d?;
            extract_features(&d, cfg, &embedder)
                .map(|fv| (d.writer_id.clone(), fv))
                .map_err(|e| Excluded {
                    doc: d.id.clone(),
                    error: e.to_string(),
                })
        })
        .collect();
    let mut vectors = Vec::new();
    let mut excluded = Vec::new();
    for r in extracted {
        match r {
            Ok(v) => vectors.push(v),
            Err(x) => {
                log::warn!("excluding {}: {}", x.doc, x.error);
                excluded.push(x);
            }
        }
    }

    let mut pairs = Vec::new();
    for i in 0..vectors.len() {
        for j in i + 1..vectors.len() {
            let (wa, a) = &vectors[i];
            let (wb, b) = &vectors[j];
            pairs.push(PairResult {
                a: a.doc_id.clone(),
                b: b.doc_id.clone(),
                distance: feature_distance(a, b).ok().map(|(d, _)| d),
                same_writer: wa == wb,
                predicted_same: false,
            });
        }
    }

    let (calib, mut test) = split_pairs(pairs, cfg.calib_frac, cfg.seed);
    let labelled: Vec<(f64, bool)> = calib
        .iter()
        .filter_map(|p| p.distance.map(|d| (d, p.same_writer)))
        .collect();
    let calibration = calibrate_threshold(&labelled)?;

    let (mut tp, mut tn, mut fp, mut fneg) = (0, 0, 0, 0);
    for p in &mut test {
        p.predicted_same = p.distance.is_some_and(|d| d < calibration.threshold);
        match (p.same_writer, p.predicted_same) {
            (true, true) => tp += 1,
            (false, false) => tn += 1,
            (false, true) => fp += 1,
            (true, false) => fneg += 1,
        }
    }
    let ratio = |num: usize, den: usize| (den > 0).then(|| num as f64 / den as f64);
    let report = EvalReport {
        documents: vectors.len(),
        pair_count: test.len(),
        calibration_pairs: calib.len(),
        threshold: calibration.threshold,
        calibration_accuracy: calibration.accuracy,
        accuracy: ratio(tp + tn, test.len()).unwrap_or(0.0),
        true_same: tp,
        true_different: tn,
        false_same: fp,
        false_different: fneg,
        positive_accuracy: ratio(tp, tp + fneg),
        negative_accuracy: ratio(tn, tn + fp),
        pairs: test,
        excluded,
    };
    Ok((report, vectors.into_iter().map(|(_, v)| v).collect()))
}

/// Draws `round(frac * n)` pairs from each class (at least one, never all) for calibration.
fn split_pairs(pairs: Vec<PairResult>, frac: f64, seed: u64) -> (Vec<PairResult>, Vec<PairResult>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut calib = Vec::new();
    let mut test = Vec::new();
    for class in [true, false] {
        let mut idx: Vec<&PairResult> = pairs.iter().filter(|p| p.same_writer == class).collect();
        idx.shuffle(&mut rng);
        let n = idx.len();
        let k = ((frac * n as f64).round() as usize).clamp(1.min(n), n.saturating_sub(1).max(1.min(n)));
        calib.extend(idx[..k].iter().map(|p| (*p).clone()));
        test.extend(idx[k..].iter().map(|p| (*p).clone()));
    }
    let key = |p: &PairResult| (p.a.clone(), p.b.clone());
    calib.sort_by_key(key);
    test.sort_by_key(key);
    (calib, test)
}

/// Symmetric distance matrix as CSV; incomparable cells are empty.
pub fn distance_matrix_csv(vectors: &[FeatureVector]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let to_err = |e: csv::Error| Error::Format(e.to_string());
    let mut header = vec!["doc".to_string()];
    header.extend(vectors.iter().map(|v| v.doc_id.clone()));
    w.write_record(&header).map_err(to_err)?;
    for a in vectors {
        let mut row = vec![a.doc_id.clone()];
        for b in vectors {
            row.push(match feature_distance(a, b) {
                Ok((d, _)) => d.to_string(),
                Err(_) => String::new(),
            });
        }
        w.write_record(&row).map_err(to_err)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Format(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| Error::Format(e.to_string()))
}
