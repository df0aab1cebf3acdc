//! Per-document feature vectors and pairwise writer comparison.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::layout::LayoutMeasures;
use crate::matcher::CharMatch;

/// Occurrence sizes of one searched template.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct TemplateMeasures {
    pub heights: Vec<f64>,
    pub widths: Vec<f64>,
}

/// Raw measurements of one document, in pixels unless normalized.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct MeasureSet {
    pub upper_heights: Vec<f64>,
    pub middle_heights: Vec<f64>,
    pub lower_heights: Vec<f64>,
    pub word_gaps: Vec<f64>,
    #[serde(default)]
    pub per_template: BTreeMap<String, TemplateMeasures>,
}

impl MeasureSet {
    pub fn from_layout(m: &LayoutMeasures) -> Self {
        Self {
            upper_heights: m.upper_heights.clone(),
            middle_heights: m.middle_heights.clone(),
            lower_heights: m.lower_heights.clone(),
            word_gaps: m.word_gaps.clone(),
            per_template: BTreeMap::new(),
        }
    }

    pub fn add_template(&mut self, label: impl Into<String>, matches: &[CharMatch]) {
        let entry = self.per_template.entry(label.into()).or_default();
        for m in matches {
            entry.heights.push(m.ink_height as f64);
            entry.widths.push(m.ink_width as f64);
        }
    }

    /// Every measure list keyed by id, in canonical order.
    pub fn lists(&self) -> Vec<(MeasureId, &[f64])> {
        let mut out: Vec<(MeasureId, &[f64])> = vec![
            (MeasureId::Upper, &self.upper_heights),
            (MeasureId::Middle, &self.middle_heights),
            (MeasureId::Lower, &self.lower_heights),
            (MeasureId::WordGap, &self.word_gaps),
        ];
        for (label, t) in &self.per_template {
            out.push((MeasureId::char_height(label), &t.heights));
            out.push((MeasureId::char_width(label), &t.widths));
        }
        out
    }

    fn map_values(&self, f: impl Fn(f64) -> f64) -> Self {
        let map = |v: &Vec<f64>| v.iter().map(|&x| f(x)).collect();
        Self {
            upper_heights: map(&self.upper_heights),
            middle_heights: map(&self.middle_heights),
            lower_heights: map(&self.lower_heights),
            word_gaps: map(&self.word_gaps),
            per_template: self
                .per_template
                .iter()
                .map(|(k, t)| {
                    (
                        k.clone(),
                        TemplateMeasures {
                            heights: map(&t.heights),
                            widths: map(&t.widths),
                        },
                    )
                })
                .collect(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum CharDim {
    Height,
    Width,
}

/// Measure identifier. The derived order is the canonical feature layout:
/// zones, word gap, then per-template height/width with labels ascending.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum MeasureId {
    Upper,
    Middle,
    Lower,
    WordGap,
    Char { label: String, dim: CharDim },
}

impl MeasureId {
    pub fn char_height(label: &str) -> Self {
        MeasureId::Char {
            label: label.to_string(),
            dim: CharDim::Height,
        }
    }

    pub fn char_width(label: &str) -> Self {
        MeasureId::Char {
            label: label.to_string(),
            dim: CharDim::Width,
        }
    }
}

impl fmt::Display for MeasureId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MeasureId::Upper => f.write_str("upper"),
            MeasureId::Middle => f.write_str("middle"),
            MeasureId::Lower => f.write_str("lower"),
            MeasureId::WordGap => f.write_str("word_gap"),
            MeasureId::Char {
                label,
                dim: CharDim::Height,
            } => write!(f, "height_{label}"),
            MeasureId::Char {
                label,
                dim: CharDim::Width,
            } => write!(f, "width_{label}"),
        }
    }
}

impl FromStr for MeasureId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "upper" => MeasureId::Upper,
            "middle" => MeasureId::Middle,
            "lower" => MeasureId::Lower,
            "word_gap" => MeasureId::WordGap,
            _ => {
                if let Some(label) = s.strip_prefix("height_").filter(|l| !l.is_empty()) {
                    MeasureId::char_height(label)
                } else if let Some(label) = s.strip_prefix("width_").filter(|l| !l.is_empty()) {
                    MeasureId::char_width(label)
                } else {
                    return Err(Error::Validation(format!("unknown measure id {s:?}")));
                }
            }
        })
    }
}

impl Serialize for MeasureId {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for MeasureId {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NormalizationMode {
    #[default]
    Raw,
    ScaleInvariant,
}

impl NormalizationMode {
    pub fn as_str(&self) -> &'static str {
        match self {
            NormalizationMode::Raw => "raw",
            NormalizationMode::ScaleInvariant => "scale_invariant",
        }
    }
}

impl fmt::Display for NormalizationMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for NormalizationMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "raw" => Ok(NormalizationMode::Raw),
            "scale_invariant" => Ok(NormalizationMode::ScaleInvariant),
            _ => Err(Error::Validation(format!("unknown normalization mode {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureEntry {
    pub id: MeasureId,
    pub mean: f64,
    pub std: f64,
}

/// The (mean, std) signature of one document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector {
    pub doc_id: String,
    pub mode: NormalizationMode,
    pub entries: Vec<FeatureEntry>,
    /// Measures whose detector ran but found nothing.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub absent: Vec<MeasureId>,
}

impl FeatureVector {
    pub fn get(&self, id: &MeasureId) -> Option<&FeatureEntry> {
        self.entries
            .binary_search_by(|e| e.id.cmp(id))
            .ok()
            .map(|i| &self.entries[i])
    }

    /// Interleaved `[mean, std, mean, std, ...]`.
    pub fn flattened(&self) -> Vec<f64> {
        self.entries.iter().flat_map(|e| [e.mean, e.std]).collect()
    }

    pub fn ids(&self) -> impl Iterator<Item = &MeasureId> {
        self.entries.iter().map(|e| &e.id)
    }
}

/// Mean and population standard deviation, `None` for an empty list.
pub fn summarize(values: &[f64]) -> Option<(f64, f64)> {
    let first = *values.first()?;
    if values.iter().all(|&v| v == first) {
        return Some((first, 0.0));
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|&v| (v - mean) * (v - mean)).sum::<f64>() / n;
    Some((mean, var.sqrt()))
}

pub fn build_feature_vector(
    doc_id: impl Into<String>,
    m: &MeasureSet,
    mode: NormalizationMode,
) -> Result<FeatureVector> {
    let mut entries = Vec::new();
    let mut absent = Vec::new();
    for (id, values) in m.lists() {
        match summarize(values) {
            Some((mean, std)) => entries.push(FeatureEntry { id, mean, std }),
            None => absent.push(id),
        }
    }
    if entries.is_empty() {
        return Err(Error::EmptyDocument);
    }
    Ok(FeatureVector {
        doc_id: doc_id.into(),
        mode,
        entries,
        absent,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonResult {
    pub a: String,
    pub b: String,
    pub distance: f64,
    pub threshold: f64,
    pub same_writer: bool,
    pub shared_ids: Vec<MeasureId>,
}

/// Euclidean distance over the flattened (mean, std) values of the measures
/// both vectors carry.
pub fn feature_distance(a: &FeatureVector, b: &FeatureVector) -> Result<(f64, Vec<MeasureId>)> {
    let mut shared = Vec::new();
    let mut sum = 0.0;
    for ea in &a.entries {
        if let Some(eb) = b.get(&ea.id) {
            sum += (ea.mean - eb.mean).powi(2) + (ea.std - eb.std).powi(2);
            shared.push(ea.id.clone());
        }
    }
    if shared.is_empty() {
        return Err(Error::Incomparable);
    }
    Ok((sum.sqrt(), shared))
}

pub fn compare(a: &FeatureVector, b: &FeatureVector, threshold: f64) -> Result<ComparisonResult> {
    let (distance, shared_ids) = feature_distance(a, b)?;
    Ok(ComparisonResult {
        a: a.doc_id.clone(),
        b: b.doc_id.clone(),
        distance,
        threshold,
        same_writer: distance < threshold,
        shared_ids,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Calibration {
    pub threshold: f64,
    /// Accuracy of the chosen threshold on the calibration pairs.
    pub accuracy: f64,
}

/// Picks the midpoint between adjacent distinct distances that maximizes
/// same/different accuracy under `distance < threshold => same`. Ties go to
/// the smaller threshold.
pub fn calibrate_threshold(labelled: &[(f64, bool)]) -> Result<Calibration> {
    let positives = labelled.iter().filter(|(_, same)| *same).count();
    if positives == 0 || positives == labelled.len() {
        return Err(Error::Calibration(
            "need at least one same-writer and one different-writer pair".into(),
        ));
    }
    if labelled.iter().any(|(d, _)| !d.is_finite()) {
        return Err(Error::Calibration("non-finite distance".into()));
    }
    let mut sorted = labelled.to_vec();
    sorted.sort_by(|x, y| x.0.total_cmp(&y.0));

    let n = sorted.len();
    let negatives = n - positives;
    let mut best: Option<Calibration> = None;
    // Below the cut everything is called "same": correct = positives below + negatives above.
    let (mut pos_below, mut neg_below) = (0usize, 0usize);
    let mut i = 0;
    while i < n {
        let d = sorted[i].0;
        while i < n && sorted[i].0 == d {
            if sorted[i].1 {
                pos_below += 1;
            } else {
                neg_below += 1;
            }
            i += 1;
        }
        if i == n {
            break;
        }
        let threshold = (d + sorted[i].0) / 2.0;
        let correct = pos_below + (negatives - neg_below);
        let accuracy = correct as f64 / n as f64;
        if best.is_none_or(|b| accuracy > b.accuracy) {
            best = Some(Calibration {
                threshold,
                accuracy,
            });
        }
    }
    best.ok_or_else(|| Error::Calibration("all distances are identical".into()))
}

/// Calibrates on feature-vector pairs; see [`calibrate_threshold`].
pub fn calibrate_pairs(pairs: &[(&FeatureVector, &FeatureVector, bool)]) -> Result<Calibration> {
    let labelled = pairs
        .iter()
        .map(|(a, b, same)| feature_distance(a, b).map(|(d, _)| (d, *same)))
        .collect::<Result<Vec<_>>>()?;
    calibrate_threshold(&labelled)
}

/// `ScaleInvariant` divides every measure by the document's mean middle-zone height.
pub fn normalize_mode(m: &MeasureSet, mode: NormalizationMode) -> Result<MeasureSet> {
    match mode {
        NormalizationMode::Raw => Ok(m.clone()),
        NormalizationMode::ScaleInvariant => {
            let (mean, _) = summarize(&m.middle_heights).ok_or_else(|| {
                Error::Normalization("no middle-zone heights to normalize by".into())
            })?;
            if !(mean > 0.0) {
                return Err(Error::Normalization(format!(
                    "mean middle height is {mean}"
                )));
            }
            Ok(m.map_values(|v| v / mean))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn fv(entries: &[(MeasureId, f64, f64)]) -> FeatureVector {
        let mut entries: Vec<FeatureEntry> = entries
            .iter()
            .map(|(id, mean, std)| FeatureEntry {
                id: id.clone(),
                mean: *mean,
                std: *std,
            })
            .collect();
        entries.sort_by(|a, b| a.id.cmp(&b.id));
        FeatureVector {
            doc_id: "x".into(),
            mode: NormalizationMode::Raw,
            entries,
            absent: vec![],
        }
    }

    #[test]
    fn summarize_examples() {
        assert_eq!(summarize(&[5.0]), Some((5.0, 0.0)));
        let (m, s) = summarize(&[2.0, 4.0, 6.0]).unwrap();
        assert!((m - 4.0).abs() < 1e-12);
        assert!((s - (8.0f64 / 3.0).sqrt()).abs() < 1e-12);
        assert_eq!(summarize(&[0.1, 0.1, 0.1]), Some((0.1, 0.0)));
        assert_eq!(summarize(&[]), None);
    }

    #[test]
    fn only_middle_present() {
        let m = MeasureSet {
            middle_heights: vec![10.0, 12.0],
            ..Default::default()
        };
        let v = build_feature_vector("d", &m, NormalizationMode::Raw).unwrap();
        assert_eq!(v.entries.len(), 1);
        assert_eq!(
            v.entries[0],
            FeatureEntry {
                id: MeasureId::Middle,
                mean: 11.0,
                std: 1.0
            }
        );
        assert_eq!(
            v.absent,
            vec![MeasureId::Upper, MeasureId::Lower, MeasureId::WordGap]
        );
    }

    #[test]
    fn canonical_layout_with_templates() {
        let mut m = MeasureSet {
            upper_heights: vec![1.0],
            middle_heights: vec![2.0],
            lower_heights: vec![3.0],
            word_gaps: vec![4.0],
            ..Default::default()
        };
        for label in ["e", "a"] {
            m.per_template.insert(
                label.into(),
                TemplateMeasures {
                    heights: vec![5.0],
                    widths: vec![6.0],
                },
            );
        }
        let v = build_feature_vector("d", &m, NormalizationMode::Raw).unwrap();
        let ids: Vec<String> = v.ids().map(|i| i.to_string()).collect();
        assert_eq!(
            ids,
            [
                "upper", "middle", "lower", "word_gap", "height_a", "width_a", "height_e",
                "width_e"
            ]
        );
        assert_eq!(v.flattened().len(), 16);
    }

    #[test]
    fn empty_document_rejected() {
        assert!(matches!(
            build_feature_vector("d", &MeasureSet::default(), NormalizationMode::Raw),
            Err(Error::EmptyDocument)
        ));
    }

    #[test]
    fn compare_examples() {
        let a = fv(&[(MeasureId::Middle, 10.0, 2.0), (MeasureId::WordGap, 7.0, 1.0)]);
        let r = compare(&a, &a, 0.5).unwrap();
        assert_eq!(r.distance, 0.0);
        assert!(r.same_writer);

        let b = fv(&[(MeasureId::Middle, 13.0, 6.0), (MeasureId::WordGap, 7.0, 1.0)]);
        assert_eq!(compare(&a, &b, 1.0).unwrap().distance, 5.0);
        assert!(!compare(&a, &b, 5.0).unwrap().same_writer);
        assert!(compare(&a, &b, 5.0 + 1e-9).unwrap().same_writer);
    }

    #[test]
    fn compare_uses_shared_ids_only() {
        let a = fv(&[
            (MeasureId::Middle, 10.0, 2.0),
            (MeasureId::char_height("e"), 50.0, 9.0),
        ]);
        let b = fv(&[(MeasureId::Middle, 10.0, 2.0), (MeasureId::Upper, 3.0, 0.0)]);
        let r = compare(&a, &b, 1.0).unwrap();
        assert_eq!(r.shared_ids, vec![MeasureId::Middle]);
        assert_eq!(r.distance, 0.0);
        let c = fv(&[(MeasureId::Lower, 1.0, 0.0)]);
        assert!(matches!(compare(&a, &c, 1.0), Err(Error::Incomparable)));
    }

    #[test]
    fn feature_vector_json_shape() {
        let a = fv(&[(MeasureId::Middle, 10.5, 2.0)]);
        let v = serde_json::to_value(&a).unwrap();
        assert_eq!(
            v,
            serde_json::json!({"doc_id":"x","mode":"raw",
                "entries":[{"id":"middle","mean":10.5,"std":2.0}]})
        );
    }

    #[test]
    fn measure_id_parse() {
        for s in ["upper", "middle", "lower", "word_gap", "height_a", "width_Q"] {
            assert_eq!(s.parse::<MeasureId>().unwrap().to_string(), s);
        }
        assert!("height_".parse::<MeasureId>().is_err());
        assert!("slant".parse::<MeasureId>().is_err());
    }

    /// Every midpoint cut evaluated directly.
    fn oracle_calibration(pairs: &[(f64, bool)]) -> (f64, f64) {
        let mut ds: Vec<f64> = pairs.iter().map(|p| p.0).collect();
        ds.sort_by(f64::total_cmp);
        ds.dedup();
        let mut best = (f64::NAN, -1.0);
        for w in ds.windows(2) {
            let t = (w[0] + w[1]) / 2.0;
            let correct = pairs.iter().filter(|(d, same)| (*d < t) == *same).count();
            let acc = correct as f64 / pairs.len() as f64;
            if acc > best.1 {
                best = (t, acc);
            }
        }
        best
    }

    #[test]
    fn calibration_examples() {
        let pairs = [(1.0, true), (2.0, true), (8.0, false), (9.0, false)];
        let c = calibrate_threshold(&pairs).unwrap();
        assert_eq!((c.threshold, c.accuracy), (5.0, 1.0));
        assert_eq!(oracle_calibration(&pairs), (5.0, 1.0));

        let interleaved = [(1.0, false), (2.0, true), (3.0, false), (4.0, true)];
        let c = calibrate_threshold(&interleaved).unwrap();
        assert_eq!((c.threshold, c.accuracy), oracle_calibration(&interleaved));
        assert_eq!((c.threshold, c.accuracy), (2.5, 0.5));

        let c = calibrate_threshold(&[(0.0, true), (10.0, false)]).unwrap();
        assert_eq!(c.threshold, 5.0);
    }

    #[test]
    fn calibration_degenerate_labels() {
        assert!(matches!(
            calibrate_threshold(&[(1.0, true), (2.0, true)]),
            Err(Error::Calibration(_))
        ));
        assert!(matches!(
            calibrate_threshold(&[(1.0, true), (1.0, false)]),
            Err(Error::Calibration(_))
        ));
    }

    #[test]
    fn normalization() {
        let m = MeasureSet {
            upper_heights: vec![4.0, 6.0],
            middle_heights: vec![10.0, 30.0],
            word_gaps: vec![40.0],
            ..Default::default()
        };
        assert_eq!(normalize_mode(&m, NormalizationMode::Raw).unwrap(), m);
        let n = normalize_mode(&m, NormalizationMode::ScaleInvariant).unwrap();
        assert_eq!(summarize(&n.middle_heights).unwrap().0, 1.0);
        assert_eq!(n.word_gaps, vec![2.0]);
        let bad = MeasureSet {
            middle_heights: vec![0.0],
            ..Default::default()
        };
        assert!(matches!(
            normalize_mode(&bad, NormalizationMode::ScaleInvariant),
            Err(Error::Normalization(_))
        ));
        assert!(normalize_mode(&MeasureSet::default(), NormalizationMode::ScaleInvariant).is_err());
    }

    fn vector_strategy() -> impl Strategy<Value = FeatureVector> {
        proptest::collection::vec((-50.0f64..50.0, 0.0f64..20.0), 6).prop_map(|vals| {
            let ids = [
                MeasureId::Upper,
                MeasureId::Middle,
                MeasureId::Lower,
                MeasureId::WordGap,
                MeasureId::char_height("a"),
                MeasureId::char_width("a"),
            ];
            fv(&ids
                .iter()
                .zip(vals)
                .map(|(id, (m, s))| (id.clone(), m, s))
                .collect::<Vec<_>>())
        })
    }

    proptest! {
        #[test]
        fn pseudometric(a in vector_strategy(), b in vector_strategy(), c in vector_strategy()) {
            let d = |x: &FeatureVector, y: &FeatureVector| feature_distance(x, y).unwrap().0;
            prop_assert_eq!(d(&a, &a), 0.0);
            prop_assert_eq!(d(&a, &b), d(&b, &a));
            prop_assert!(d(&a, &c) <= d(&a, &b) + d(&b, &c) + 1e-9);
        }

        #[test]
        fn calibration_matches_oracle(
            pairs in proptest::collection::vec((0u8..20, any::<bool>()), 2..40)
        ) {
            let pairs: Vec<(f64, bool)> = pairs.into_iter().map(|(d, s)| (d as f64, s)).collect();
            match calibrate_threshold(&pairs) {
                Ok(c) => prop_assert_eq!((c.threshold, c.accuracy), oracle_calibration(&pairs)),
                Err(_) => {
                    let pos = pairs.iter().filter(|p| p.1).count();
                    let distinct = pairs.iter().any(|p| p.0 != pairs[0].0);
                    prop_assert!(pos == 0 || pos == pairs.len() || !distinct);
                }
            }
        }

        #[test]
        fn sigma_zero_iff_constant(values in proptest::collection::vec(0.0f64..100.0, 1..20)) {
            let (_, s) = summarize(&values).unwrap();
            prop_assert!(s >= 0.0);
            let constant = values.iter().all(|&v| v == values[0]);
            prop_assert_eq!(s == 0.0, constant);
        }

        #[test]
        fn json_round_trip_is_exact(v in vector_strategy()) {
            let text = serde_json::to_string(&v).unwrap();
            let back: FeatureVector = serde_json::from_str(&text).unwrap();
            prop_assert_eq!(back.flattened(), v.flattened());
            prop_assert_eq!(back, v);
        }
    }
}
