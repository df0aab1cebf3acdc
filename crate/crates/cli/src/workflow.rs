//! Document operations shared by the CLI and the HTTP service.
//!
//! Both front ends write the same files, so an `analyze --out` folder and a
//! store folder produced over HTTP are interchangeable.

use std::time::Instant;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{AppError, AppResult};
use crate::store::{DocFolder, Store};
use scriptoria::config::Settings;
use scriptoria::document::{
    binarize, binarize_auto, decode_gray, BinarizeMethod, BinaryImage, DocumentRecord, Medium,
};
use scriptoria::features::{compare, ComparisonResult, FeatureVector, MeasureSet, NormalizationMode};
use scriptoria::layout::{analyze, redetect_words, Layout, LayoutConfig, SoOverrides};
use scriptoria::matcher::{search_template_until, BBox, CharMatch, Embedder, TemplateQuery};
use scriptoria::pipeline::features_from_measures;

pub const RECORD: &str = "document.json";
pub const LAYOUT: &str = "layout.json";
pub const SESSION: &str = "session.json";
pub const BINARY: &str = "binary.png";
const MATCHES: &str = "matches";

pub fn features_file(mode: NormalizationMode) -> String {
    format!("features-{mode}.json")
}

/// Operator state for one document.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Session {
    #[serde(default)]
    pub so: SoOverrides,
    #[serde(default)]
    pub templates: Vec<TemplateRecord>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t_c: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mode: Option<NormalizationMode>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TemplateRecord {
    pub id: String,
    pub label: String,
    pub bbox: BBox,
}

/// Stored result of one template search over one document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchRecord {
    pub template_doc: String,
    pub template_id: String,
    pub label: String,
    pub t_c: f64,
    pub run_length: usize,
    pub partial: bool,
    pub matches: Vec<CharMatch>,
}

/// Content hash prefix used as document id.
pub fn content_id(bytes: &[u8]) -> String {
    let digest = Sha256::digest(bytes);
    digest[..8].iter().map(|b| format!("{b:02x}")).collect()
}

fn source_name(bytes: &[u8]) -> &'static str {
    if bytes.starts_with(b"\x89PNG") {
        "source.png"
    } else if bytes.starts_with(b"P") {
        "source.pgm"
    } else {
        "source.img"
    }
}

/// Decodes, binarizes and analyzes an image, writing every artifact into `folder`.
pub fn ingest(
    folder: &DocFolder,
    id: &str,
    bytes: &[u8],
    medium: Medium,
    settings: &Settings,
) -> AppResult<(DocumentRecord, Layout)> {
    let gray = decode_gray(bytes)?;
    let (image, binarization) = binarize_auto(&gray);
    let layout = analyze(&image, &settings.layout);
    let source = source_name(bytes);
    let record = DocumentRecord {
        id: id.to_string(),
        source_path: source.to_string(),
        binarization,
        medium,
    };
    folder.create()?;
    folder.write_bytes(source, bytes)?;
    folder.write_bytes(BINARY, &image.to_gray().to_png_bytes()?)?;
    folder.write_json(LAYOUT, &layout)?;
    folder.write_json(
        SESSION,
        &Session {
            so: settings.layout.so.clone(),
            ..Session::default()
        },
    )?;
    // the record goes last: its presence marks a complete folder
    folder.write_json(RECORD, &record)?;
    Ok((record, layout))
}

/// Adds an uploaded image to the store. Re-uploading identical bytes returns
/// the existing document untouched.
pub fn upload(
    store: &Store,
    bytes: &[u8],
    medium: Medium,
    settings: &Settings,
) -> AppResult<DocumentRecord> {
    let base = content_id(bytes);
    for n in 1.. {
        let id = if n == 1 { base.clone() } else { format!("{base}-{n}") };
        let folder = store.folder(&id);
        if folder.exists(RECORD) {
            let existing: DocumentRecord = folder.read_json(RECORD)?;
            if folder.read_bytes(&existing.source_path)? == bytes {
                return Ok(existing);
            }
            continue;
        }
        return ingest(&folder, &id, bytes, medium, settings).map(|(r, _)| r);
    }
    unreachable!("unbounded id search")
}

pub fn load_binary(folder: &DocFolder) -> AppResult<BinaryImage> {
    let gray = decode_gray(&folder.read_bytes(BINARY)?)?;
    Ok(binarize(&gray, BinarizeMethod::Fixed(128))?.0)
}

pub fn load_session(folder: &DocFolder) -> AppResult<Session> {
    folder.read_json(SESSION)
}

pub fn load_layout(folder: &DocFolder) -> AppResult<Layout> {
    folder.read_json(LAYOUT)
}

/// Replaces the word-gap overrides and re-runs word detection.
pub fn set_so(folder: &DocFolder, so: SoOverrides) -> AppResult<Layout> {
    let layout = load_layout(folder)?;
    let image = load_binary(folder)?;
    let updated = redetect_words(&image, &layout, &so)?;
    let mut session = load_session(folder)?;
    session.so = so;
    folder.write_json(LAYOUT, &updated)?;
    folder.write_json(SESSION, &session)?;
    Ok(updated)
}

pub fn add_template(folder: &DocFolder, bbox: BBox, label: &str) -> AppResult<TemplateRecord> {
    if label.trim().is_empty() {
        return Err(AppError::BadRequest("template label must not be empty".into()));
    }
    let image = load_binary(folder)?;
    let record: DocumentRecord = folder.read_json(RECORD)?;
    let query = TemplateQuery::from_document(record.id, &image, bbox, label)?;
    let mut session = load_session(folder)?;
    let id = format!("t{}", session.templates.len() + 1);
    folder.write_bytes(
        &format!("templates/{id}.png"),
        &query.patch.to_gray().to_png_bytes()?,
    )?;
    let t = TemplateRecord {
        id,
        label: label.to_string(),
        bbox,
    };
    session.templates.push(t.clone());
    folder.write_json(SESSION, &session)?;
    Ok(t)
}

pub fn load_template(folder: &DocFolder, template_id: &str) -> AppResult<TemplateQuery> {
    let session = load_session(folder)?;
    let t = session
        .templates
        .iter()
        .find(|t| t.id == template_id)
        .ok_or_else(|| AppError::NotFound(format!("template {template_id}")))?;
    let record: DocumentRecord = folder.read_json(RECORD)?;
    Ok(TemplateQuery::from_document(
        record.id,
        &load_binary(folder)?,
        t.bbox,
        t.label.clone(),
    )?)
}

/// Searches `folder`'s lines for `template` and stores the result.
pub fn search(
    folder: &DocFolder,
    template: &TemplateQuery,
    template_id: &str,
    t_c: Option<f64>,
    settings: &Settings,
    embedder: &Embedder,
    deadline: Option<Instant>,
) -> AppResult<SearchRecord> {
    let mut cfg = settings.matcher.clone();
    if let Some(t) = t_c {
        cfg.t_c = t;
    }
    cfg.validate()?;
    let layout = load_layout(folder)?;
    let image = load_binary(folder)?;
    let bands: Vec<_> = layout.lines.iter().map(|l| l.band).collect();
    let outcome = search_template_until(&image, &bands, template, &cfg, embedder, deadline)?;
    let record = SearchRecord {
        template_doc: template.doc_id.clone(),
        template_id: template_id.to_string(),
        label: template.label.clone(),
        t_c: cfg.t_c,
        run_length: cfg.run_length,
        partial: outcome.partial,
        matches: outcome.matches,
    };
    folder.write_json(
        &format!("{MATCHES}/{}--{template_id}.json", template.doc_id),
        &record,
    )?;
    if t_c.is_some() {
        let mut session = load_session(folder)?;
        session.t_c = t_c;
        folder.write_json(SESSION, &session)?;
    }
    Ok(record)
}

/// Layout measures plus every stored search, summarized and written to disk.
pub fn features(folder: &DocFolder, mode: NormalizationMode) -> AppResult<FeatureVector> {
    let record: DocumentRecord = folder.read_json(RECORD)?;
    let layout = load_layout(folder)?;
    let mut measures = MeasureSet::from_layout(&layout.measures());
    for name in folder.list(MATCHES)? {
        let s: SearchRecord = folder.read_json(&format!("{MATCHES}/{name}"))?;
        measures.add_template(s.label, &s.matches);
    }
    let fv = features_from_measures(&record.id, &measures, mode)?;
    folder.write_json(&features_file(mode), &fv)?;
    Ok(fv)
}

/// Compares two folders' stored feature vectors for `mode`.
pub fn compare_folders(
    a: &DocFolder,
    b: &DocFolder,
    mode: NormalizationMode,
    threshold: f64,
) -> AppResult<ComparisonResult> {
    let fa: FeatureVector = a.read_json(&features_file(mode))?;
    let fb: FeatureVector = b.read_json(&features_file(mode))?;
    Ok(compare(&fa, &fb, threshold)?)
}

/// Layout config with a global override applied on top of `settings`.
pub fn layout_config(settings: &Settings, so: Option<usize>) -> LayoutConfig {
    let mut cfg = settings.layout.clone();
    if let Some(so) = so {
        cfg.so = SoOverrides::global(so);
    }
    cfg
}

#[cfg(test)]
mod tests {
    use super::*;
    use scriptoria::document::GrayImage;

    #[test]
    fn ids_are_stable_hex() {
        let id = content_id(b"abc");
        assert_eq!(id, "ba7816bf8f01cfea");
        assert_eq!(content_id(b"abc"), id);
    }

    #[test]
    fn reupload_is_idempotent() {
        let dir = tempfile::tempdir().unwrap();
        let store = Store::open(dir.path()).unwrap();
        let png = GrayImage::filled(40, 30, 255).unwrap().to_png_bytes().unwrap();
        let s = Settings::default();
        let a = upload(&store, &png, Medium::PaperScan, &s).unwrap();
        let b = upload(&store, &png, Medium::PaperScan, &s).unwrap();
        assert_eq!(a, b);
        assert_eq!(store.document(&a.id).unwrap().list("").unwrap().len(), 5);
    }
}
