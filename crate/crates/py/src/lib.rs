//! Python bindings.
//!
//! Structured results (layouts, matches, feature vectors, ground truth) cross
//! the boundary as plain dicts and lists with the same shape as the JSON
//! files the CLI writes.

use pyo3::create_exception;
use pyo3::exceptions::{PyException, PyOSError};
use pyo3::prelude::*;
use pyo3::types::PyBytes;
use serde::de::DeserializeOwned;
use serde::Serialize;

use scriptoria::config::DEFAULT_THRESHOLD;
use scriptoria::document::{
    binarize, bt601, decode_gray, load_gray, otsu_threshold, BinarizeMethod, Binarization,
    BinaryImage, GrayImage,
};
use scriptoria::eval::{evaluate_pairwise, load_corpus, read_manifest, EvalConfig};
use scriptoria::features::{calibrate_threshold, compare, feature_distance, NormalizationMode};
use scriptoria::layout::{analyze, Layout, LayoutConfig, SoOverrides};
use scriptoria::matcher::{
    search_template_until, BBox, Embedder, EmbeddingNetwork, MatcherConfig, TemplateQuery,
};
use scriptoria::pipeline::{features_from_measures, measure_document};
use scriptoria::synth::{generate as gen_page, GenConfig, WriterProfile};
use scriptoria::{Error, ErrorKind};

create_exception!(scriptoria_py, ScriptoriaError, PyException);
create_exception!(scriptoria_py, ValidationError, ScriptoriaError);
create_exception!(scriptoria_py, AnalysisError, ScriptoriaError);

fn py_err(e: Error) -> PyErr {
    match e.kind() {
        ErrorKind::Io => PyOSError::new_err(e.to_string()),
        ErrorKind::Validation => ValidationError::new_err(e.to_string()),
        ErrorKind::Analysis => AnalysisError::new_err(e.to_string()),
    }
}

trait OrPy<T> {
    fn py(self) -> PyResult<T>;
}

impl<T> OrPy<T> for scriptoria::Result<T> {
    fn py(self) -> PyResult<T> {
        self.map_err(py_err)
    }
}

fn to_py<'py, T: Serialize>(py: Python<'py>, value: &T) -> PyResult<Bound<'py, PyAny>> {
    let text = serde_json::to_string(value).map_err(|e| ScriptoriaError::new_err(e.to_string()))?;
    py.import("json")?.call_method1("loads", (text,))
}

fn from_py<T: DeserializeOwned>(value: &Bound<'_, PyAny>) -> PyResult<T> {
    let text: String = value
        .py()
        .import("json")?
        .call_method1("dumps", (value,))?
        .extract()?;
    serde_json::from_str(&text).map_err(|e| ValidationError::new_err(e.to_string()))
}

fn parse_mode(mode: &str) -> PyResult<NormalizationMode> {
    mode.parse::<NormalizationMode>().py()
}

fn matcher_config(t_c: f64, run_length: usize) -> PyResult<MatcherConfig> {
    let cfg = MatcherConfig {
        t_c,
        run_length,
        ..MatcherConfig::default()
    };
    cfg.validate().py()?;
    Ok(cfg)
}

fn embedder(network: Option<&Network>) -> Embedder {
    match network {
        Some(n) => Embedder::Network(n.inner.clone()),
        None => Embedder::PixelFallback,
    }
}

/// A binarized page with its layout.
#[pyclass(module = "scriptoria_py")]
struct Page {
    id: String,
    image: BinaryImage,
    binarization: Binarization,
    layout: Layout,
}

impl Page {
    fn build(id: String, gray: &GrayImage, threshold: Option<u8>, so: Option<usize>) -> PyResult<Self> {
        let method = match threshold {
            Some(t) => BinarizeMethod::Fixed(t),
            None => BinarizeMethod::Otsu,
        };
        let (image, binarization) = match binarize(gray, method) {
            Err(Error::Degenerate(_)) if threshold.is_none() => {
                binarize(gray, BinarizeMethod::Fixed(128)).py()?
            }
            other => other.py()?,
        };
        let mut cfg = LayoutConfig::default();
        if let Some(so) = so {
            cfg.so = SoOverrides::global(so);
        }
        let layout = analyze(&image, &cfg);
        Ok(Self {
            id,
            image,
            binarization,
            layout,
        })
    }
}

#[pymethods]
impl Page {
    /// Decodes PNG/PGM bytes. Otsu unless a fixed `threshold` is given.
    #[staticmethod]
    #[pyo3(signature = (data, id = "doc".to_string(), threshold = None, so = None))]
    fn from_bytes(data: &[u8], id: String, threshold: Option<u8>, so: Option<usize>) -> PyResult<Self> {
        Self::build(id, &decode_gray(data).py()?, threshold, so)
    }

    #[staticmethod]
    #[pyo3(signature = (path, threshold = None, so = None))]
    fn open(path: std::path::PathBuf, threshold: Option<u8>, so: Option<usize>) -> PyResult<Self> {
        let id = path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default();
        Self::build(id, &load_gray(&path).py()?, threshold, so)
    }

    /// Row-major 8-bit luminance samples.
    #[staticmethod]
    #[pyo3(signature = (width, height, samples, id = "doc".to_string(), threshold = None, so = None))]
    fn from_pixels(
        width: usize,
        height: usize,
        samples: Vec<u8>,
        id: String,
        threshold: Option<u8>,
        so: Option<usize>,
    ) -> PyResult<Self> {
        Self::build(id, &GrayImage::new(width, height, samples).py()?, threshold, so)
    }

    #[getter]
    fn id(&self) -> &str {
        &self.id
    }

    #[getter]
    fn width(&self) -> usize {
        self.image.width()
    }

    #[getter]
    fn height(&self) -> usize {
        self.image.height()
    }

    #[getter]
    fn threshold(&self) -> u8 {
        self.binarization.threshold
    }

    #[getter]
    fn ink_count(&self) -> usize {
        self.image.ink_count()
    }

    fn layout<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyAny>> {
        to_py(py, &self.layout)
    }

    fn word_count(&self) -> usize {
        self.layout.word_count()
    }

    /// Re-runs word detection with a global or per-line gap threshold.
    /// Accepts an int or the `{"global": .., "per_line": {..}}` form.
    fn set_so(&mut self, so: &Bound<'_, PyAny>) -> PyResult<()> {
        let so: SoOverrides = match so.extract::<usize>() {
            Ok(v) => SoOverrides::global(v),
            Err(_) => from_py(so)?,
        };
        self.layout = scriptoria::layout::redetect_words(&self.image, &self.layout, &so).py()?;
        Ok(())
    }

    /// Binary mask as PNG bytes (ink black).
    fn binary_png<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyBytes>> {
        Ok(PyBytes::new(py, &self.image.to_gray().to_png_bytes().py()?))
    }

    #[pyo3(signature = (template, t_c = 0.1, run_length = 5, network = None))]
    fn search<'py>(
        &self,
        py: Python<'py>,
        template: PyRef<'py, Template>,
        t_c: f64,
        run_length: usize,
        network: Option<PyRef<'py, Network>>,
    ) -> PyResult<Bound<'py, PyAny>> {
        let cfg = matcher_config(t_c, run_length)?;
        let emb = embedder(network.as_deref());
        let query = &template.query;
        let bands: Vec<_> = self.layout.lines.iter().map(|l| l.band).collect();
        let outcome = py
            .detach(|| search_template_until(&self.image, &bands, query, &cfg, &emb, None))
            .py()?;
        to_py(py, &outcome)
    }

    /// Layout measures plus every template's occurrences, summarized.
    #[pyo3(signature = (templates = Vec::new(), mode = "raw", t_c = 0.1, run_length = 5, network = None))]
    fn features(
        &self,
        py: Python<'_>,
        templates: Vec<PyRef<'_, Template>>,
        mode: &str,
        t_c: f64,
        run_length: usize,
        network: Option<PyRef<'_, Network>>,
    ) -> PyResult<FeatureVector> {
        let mode = parse_mode(mode)?;
        let cfg = matcher_config(t_c, run_length)?;
        let emb = embedder(network.as_deref());
        let queries: Vec<TemplateQuery> = templates.iter().map(|t| t.query.clone()).collect();
        let inner = py
            .detach(|| {
                let (set, _) = measure_document(&self.image, &self.layout, &queries, &cfg, &emb)?;
                features_from_measures(&self.id, &set, mode)
            })
            .py()?;
        Ok(FeatureVector { inner })
    }

    fn __repr__(&self) -> String {
        format!(
            "Page(id={:?}, {}x{}, lines={})",
            self.id,
            self.image.width(),
            self.image.height(),
            self.layout.lines.len()
        )
    }
}

/// A labelled character crop.
#[pyclass(module = "scriptoria_py")]
struct Template {
    query: TemplateQuery,
}

#[pymethods]
impl Template {
    /// Crops `bbox = (row, col, h, w)` from a page's binary image.
    #[staticmethod]
    fn crop(page: PyRef<'_, Page>, bbox: (usize, usize, usize, usize), label: String) -> PyResult<Self> {
        let (row, col, h, w) = bbox;
        let query = TemplateQuery::from_document(page.id.clone(), &page.image, BBox::new(row, col, h, w), label).py()?;
        Ok(Self { query })
    }

    /// A standalone crop image; binarized with Otsu.
    #[staticmethod]
    fn from_bytes(data: &[u8], label: String) -> PyResult<Self> {
        let gray = decode_gray(data).py()?;
        let (patch, _) = scriptoria::document::binarize_auto(&gray);
        Ok(Self {
            query: TemplateQuery::from_patch(label, patch).py()?,
        })
    }

    #[getter]
    fn label(&self) -> &str {
        &self.query.label
    }

    #[getter]
    fn bbox(&self) -> (usize, usize, usize, usize) {
        let b = self.query.bbox;
        (b.row, b.col, b.h, b.w)
    }

    fn __repr__(&self) -> String {
        format!("Template({:?}, {:?})", self.query.label, self.bbox())
    }
}

#[pyclass(module = "scriptoria_py")]
struct FeatureVector {
    inner: scriptoria::features::FeatureVector,
}

#[pymethods]
impl FeatureVector {
    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        let inner = serde_json::from_str(text).map_err(|e| ValidationError::new_err(e.to_string()))?;
        Ok(Self { inner })
    }

    fn to_json(&self) -> PyResult<String> {
        serde_json::to_string_pretty(&self.inner).map_err(|e| ScriptoriaError::new_err(e.to_string()))
    }

    fn to_dict<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyAny>> {
        to_py(py, &self.inner)
    }

    #[getter]
    fn doc_id(&self) -> &str {
        &self.inner.doc_id
    }

    #[getter]
    fn mode(&self) -> &'static str {
        self.inner.mode.as_str()
    }

    /// Measure ids in canonical order, as their JSON strings.
    fn ids(&self) -> Vec<String> {
        self.inner
            .entries
            .iter()
            .map(|e| serde_json::to_value(&e.id).map(|v| v.as_str().unwrap_or_default().to_string()))
            .collect::<Result<_, _>>()
            .unwrap_or_default()
    }

    fn flattened(&self) -> Vec<f64> {
        self.inner.flattened()
    }

    fn distance(&self, other: PyRef<'_, FeatureVector>) -> PyResult<f64> {
        Ok(feature_distance(&self.inner, &other.inner).py()?.0)
    }

    #[pyo3(signature = (other, threshold = DEFAULT_THRESHOLD))]
    fn compare<'py>(
        &self,
        py: Python<'py>,
        other: PyRef<'py, FeatureVector>,
        threshold: f64,
    ) -> PyResult<Bound<'py, PyAny>> {
        to_py(py, &compare(&self.inner, &other.inner, threshold).py()?)
    }

    fn __len__(&self) -> usize {
        self.inner.entries.len()
    }

    fn __repr__(&self) -> String {
        format!(
            "FeatureVector(doc_id={:?}, mode={}, entries={})",
            self.inner.doc_id,
            self.inner.mode,
            self.inner.entries.len()
        )
    }
}

/// Embedding network in the HWNET1 weight format.
#[pyclass(module = "scriptoria_py")]
struct Network {
    inner: std::sync::Arc<EmbeddingNetwork>,
}

#[pymethods]
impl Network {
    #[staticmethod]
    fn load(path: std::path::PathBuf) -> PyResult<Self> {
        Ok(Self {
            inner: EmbeddingNetwork::load(path).py()?.into(),
        })
    }

    #[staticmethod]
    fn from_bytes(data: &[u8]) -> PyResult<Self> {
        Ok(Self {
            inner: EmbeddingNetwork::from_bytes(data).py()?.into(),
        })
    }

    /// Deterministic random weights with the given conv widths.
    #[staticmethod]
    #[pyo3(signature = (widths = (4, 8, 16), seed = 0))]
    fn random(widths: (usize, usize, usize), seed: u64) -> Self {
        Self {
            inner: EmbeddingNetwork::random([widths.0, widths.1, widths.2], seed).into(),
        }
    }

    fn to_bytes<'py>(&self, py: Python<'py>) -> Bound<'py, PyBytes> {
        PyBytes::new(py, &self.inner.to_bytes())
    }

    fn save(&self, path: std::path::PathBuf) -> PyResult<()> {
        self.inner.save(path).py()
    }

    fn conv_widths(&self) -> Vec<usize> {
        self.inner.conv_widths()
    }

    /// Embedding of a flattened 28x28 ink-intensity input (1.0 = ink).
    fn embedding(&self, input: Vec<f32>) -> PyResult<Vec<f32>> {
        check_input(&input)?;
        Ok(self.inner.embedding(&input))
    }

    fn classify(&self, input: Vec<f32>) -> PyResult<usize> {
        check_input(&input)?;
        Ok(self.inner.classify(&input))
    }
}

fn check_input(input: &[f32]) -> PyResult<()> {
    let side = scriptoria::matcher::INPUT_SIDE;
    if input.len() != side * side {
        return Err(ValidationError::new_err(format!(
            "expected {} inputs, got {}",
            side * side,
            input.len()
        )));
    }
    Ok(())
}

#[pyfunction]
#[pyo3(name = "otsu_threshold")]
fn py_otsu(width: usize, height: usize, samples: Vec<u8>) -> PyResult<u8> {
    otsu_threshold(&GrayImage::new(width, height, samples).py()?).py()
}

#[pyfunction]
#[pyo3(name = "bt601")]
fn py_bt601(r: u8, g: u8, b: u8) -> u8 {
    bt601(r, g, b)
}

/// Threshold from `(distance, same_writer)` pairs; returns `(threshold, accuracy)`.
#[pyfunction]
#[pyo3(name = "calibrate_threshold")]
fn py_calibrate(pairs: Vec<(f64, bool)>) -> PyResult<(f64, f64)> {
    let c = calibrate_threshold(&pairs).py()?;
    Ok((c.threshold, c.accuracy))
}

/// Renders one synthetic page. Returns `(png_bytes, ground_truth_dict)`.
#[pyfunction]
#[pyo3(signature = (seed, profile = None, lines = 6, words_per_line = 5, width = 1600, height = 1400, scale = 1))]
#[allow(clippy::too_many_arguments)]
fn generate<'py>(
    py: Python<'py>,
    seed: u64,
    profile: Option<&Bound<'py, PyAny>>,
    lines: usize,
    words_per_line: usize,
    width: usize,
    height: usize,
    scale: usize,
) -> PyResult<(Bound<'py, PyBytes>, Bound<'py, PyAny>)> {
    let profile: WriterProfile = match profile {
        Some(p) => from_py(p)?,
        None => WriterProfile::example(),
    };
    let cfg = GenConfig {
        lines,
        words_per_line,
        canvas_width: width,
        canvas_height: height,
        scale,
        ..GenConfig::default()
    };
    let (img, truth) = py.detach(|| gen_page(&profile, seed, &cfg)).py()?;
    let png = img.to_gray().to_png_bytes().py()?;
    Ok((PyBytes::new(py, &png), to_py(py, &truth)?))
}

/// Pairwise same/different-writer evaluation over a `path,writer_id` manifest.
#[pyfunction]
#[pyo3(signature = (manifest, templates, mode = "raw", calib_frac = 0.3, seed = 7))]
fn evaluate<'py>(
    py: Python<'py>,
    manifest: std::path::PathBuf,
    templates: Vec<String>,
    mode: &str,
    calib_frac: f64,
    seed: u64,
) -> PyResult<Bound<'py, PyAny>> {
    let cfg = EvalConfig {
        templates,
        mode: parse_mode(mode)?,
        calib_frac,
        seed,
        ..EvalConfig::default()
    };
    let entries = read_manifest(&manifest).py()?;
    let report = py
        .detach(|| evaluate_pairwise(load_corpus(&entries), &cfg))
        .py()?;
    to_py(py, &report)
}

#[pymodule]
fn scriptoria_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    let py = m.py();
    m.add("DEFAULT_THRESHOLD", DEFAULT_THRESHOLD)?;
    m.add("ScriptoriaError", py.get_type::<ScriptoriaError>())?;
    m.add("ValidationError", py.get_type::<ValidationError>())?;
    m.add("AnalysisError", py.get_type::<AnalysisError>())?;
    m.add_class::<Page>()?;
    m.add_class::<Template>()?;
    m.add_class::<FeatureVector>()?;
    m.add_class::<Network>()?;
    m.add_function(wrap_pyfunction!(py_otsu, m)?)?;
    m.add_function(wrap_pyfunction!(py_bt601, m)?)?;
    m.add_function(wrap_pyfunction!(py_calibrate, m)?)?;
    m.add_function(wrap_pyfunction!(generate, m)?)?;
    m.add_function(wrap_pyfunction!(evaluate, m)?)?;
    Ok(())
}
