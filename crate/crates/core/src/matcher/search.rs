//! Sliding-window template search over detected lines.

use std::cmp::Ordering;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::embed::{distance_unchecked, Embedder, EmbedderKind};
use crate::document::BinaryImage;
use crate::error::{Error, Result};
use crate::layout::LineBand;

/// Rectangle in document pixels.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BBox {
    pub row: usize,
    pub col: usize,
    pub h: usize,
    pub w: usize,
}

impl BBox {
    pub fn new(row: usize, col: usize, h: usize, w: usize) -> Self {
        Self { row, col, h, w }
    }

    pub fn area(&self) -> usize {
        self.h * self.w
    }

    pub fn intersection_area(&self, other: &BBox) -> usize {
        let r0 = self.row.max(other.row);
        let r1 = (self.row + self.h).min(other.row + other.h);
        let c0 = self.col.max(other.col);
        let c1 = (self.col + self.w).min(other.col + other.w);
        r1.saturating_sub(r0) * c1.saturating_sub(c0)
    }
}

/// An operator-selected character crop.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TemplateQuery {
    pub doc_id: String,
    pub bbox: BBox,
    pub label: String,
    pub patch: BinaryImage,
}

impl TemplateQuery {
    pub const MIN_SIDE: usize = 4;

    /// Crops the template from its source document.
    pub fn from_document(
        doc_id: impl Into<String>,
        doc: &BinaryImage,
        bbox: BBox,
        label: impl Into<String>,
    ) -> Result<Self> {
        if bbox.h < Self::MIN_SIDE || bbox.w < Self::MIN_SIDE {
            return Err(Error::Validation(format!(
                "template {}x{} is smaller than {m}x{m}",
                bbox.h,
                bbox.w,
                m = Self::MIN_SIDE
            )));
        }
        let patch = doc.crop(bbox.row, bbox.col, bbox.h, bbox.w)?;
        Ok(Self {
            doc_id: doc_id.into(),
            bbox,
            label: label.into(),
            patch,
        })
    }

    /// A template that does not come from a stored document (e.g. a crop file).
    pub fn from_patch(label: impl Into<String>, patch: BinaryImage) -> Result<Self> {
        let bbox = BBox::new(0, 0, patch.height(), patch.width());
        Self::from_document("", &patch.clone(), bbox, label)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatcherConfig {
    pub t_c: f64,
    pub run_length: usize,
    #[serde(default = "default_stride")]
    pub stride: usize,
    #[serde(default)]
    pub embedder: EmbedderKind,
}

fn default_stride() -> usize {
    1
}

impl Default for MatcherConfig {
    fn default() -> Self {
        Self {
            t_c: 0.1,
            run_length: 5,
            stride: 1,
            embedder: EmbedderKind::PixelFallback,
        }
    }
}

impl MatcherConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.t_c > 0.0) {
            return Err(Error::Validation(format!("t_c must be > 0, got {}", self.t_c)));
        }
        if self.run_length == 0 || self.stride == 0 {
            return Err(Error::Validation(
                "run_length and stride must be at least 1".into(),
            ));
        }
        Ok(())
    }
}

/// One accepted occurrence of a template.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CharMatch {
    pub line_index: usize,
    pub window: BBox,
    pub distance: f64,
    pub ink_height: usize,
    pub ink_width: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchOutcome {
    pub matches: Vec<CharMatch>,
    /// Set when the time budget ran out before every window was visited.
    pub partial: bool,
}

/// Searches every line band for windows whose embedding lies within `t_c`
/// of the template's, keeping runs of at least `run_length` consecutive hits.
pub fn search_template(
    doc: &BinaryImage,
    bands: &[LineBand],
    template: &TemplateQuery,
    cfg: &MatcherConfig,
    embedder: &Embedder,
) -> Result<Vec<CharMatch>> {
    search_template_until(doc, bands, template, cfg, embedder, None).map(|o| o.matches)
}

/// As [`search_template`], abandoning unvisited work after `deadline`.
pub fn search_template_until(
    doc: &BinaryImage,
    bands: &[LineBand],
    template: &TemplateQuery,
    cfg: &MatcherConfig,
    embedder: &Embedder,
    deadline: Option<Instant>,
) -> Result<SearchOutcome> {
    cfg.validate()?;
    let (h, w) = (template.patch.height(), template.patch.width());
    let rs = embedder.resampler(h, w);
    let ink: Vec<f32> = template.patch.mask().iter().map(|&v| v as f32).collect();
    let reference = embedder.embed_ink(&rs, &ink)?;

    if w > doc.width() || !bands.iter().any(|b| fits(b, h, doc)) {
        return Err(Error::NoFit(format!(
            "{h}x{w} template is larger than every line band"
        )));
    }

    let sat = SummedArea::new(doc);
    let units: Vec<(usize, usize)> = bands
        .iter()
        .enumerate()
        .filter(|(_, b)| fits(b, h, doc))
        .flat_map(|(i, b)| {
            let last = b.lower_end.min(doc.height() - 1);
            (b.upper_start..=last + 1 - h).map(move |y| (i, y))
        })
        .collect();

    let results: Vec<Option<Vec<CharMatch>>> = units
        .par_iter()
        .map(|&(line, y)| {
            if deadline.is_some_and(|d| Instant::now() >= d) {
                return None;
            }
            Some(scan_row(doc, &sat, line, y, h, w, cfg, embedder, &rs, &reference))
        })
        .collect();

    let partial = results.iter().any(Option::is_none);
    let mut by_line: Vec<Vec<CharMatch>> = vec![Vec::new(); bands.len()];
    for m in results.into_iter().flatten().flatten() {
        by_line[m.line_index].push(m);
    }

    let mut matches = Vec::new();
    for candidates in by_line {
        for m in suppress(candidates) {
            if let Some((ih, iw)) = ink_extent(doc, &m.window) {
                matches.push(CharMatch {
                    ink_height: ih,
                    ink_width: iw,
                    ..m
                });
            }
        }
    }
    matches.sort_by(|a, b| {
        (a.line_index, a.window.col, a.window.row).cmp(&(b.line_index, b.window.col, b.window.row))
    });
    Ok(SearchOutcome { matches, partial })
}

fn fits(band: &LineBand, h: usize, doc: &BinaryImage) -> bool {
    let last = band.lower_end.min(doc.height() - 1);
    last + 1 >= band.upper_start + h
}

/// Scans one window row and turns runs of hits into candidates.
#[allow(clippy::too_many_arguments)]
fn scan_row(
    doc: &BinaryImage,
    sat: &SummedArea,
    line: usize,
    y: usize,
    h: usize,
    w: usize,
    cfg: &MatcherConfig,
    embedder: &Embedder,
    rs: &super::embed::AreaResampler,
    reference: &[f32],
) -> Vec<CharMatch> {
    let mut out = Vec::new();
    let mut buf = vec![0f32; h * w];
    // (run length, best distance, best col)
    let mut run: Option<(usize, f64, usize)> = None;
    let close = |run: &mut Option<(usize, f64, usize)>, out: &mut Vec<CharMatch>| {
        if let Some((len, d, col)) = run.take() {
            if len >= cfg.run_length {
                out.push(CharMatch {
                    line_index: line,
                    window: BBox::new(y, col, h, w),
                    distance: d,
                    ink_height: 0,
                    ink_width: 0,
                });
            }
        }
    };

    let mut x = 0;
    while x + w <= doc.width() {
        let hit = if sat.sum(y, x, h, w) == 0 {
            None
        } else {
            for r in 0..h {
                let src = &doc.mask()[(y + r) * doc.width() + x..(y + r) * doc.width() + x + w];
                for (d, &s) in buf[r * w..(r + 1) * w].iter_mut().zip(src) {
                    *d = s as f32;
                }
            }
            embedder
                .embed_ink(rs, &buf)
                .ok()
                .map(|e| distance_unchecked(&e, reference))
                .filter(|&d| d < cfg.t_c)
        };
        match hit {
            Some(d) => {
                // ties keep the earlier window
                run = Some(match run {
                    Some((len, best, _)) if d < best => (len + 1, d, x),
                    Some((len, best, col)) => (len + 1, best, col),
                    None => (1, d, x),
                });
            }
            None => close(&mut run, &mut out),
        }
        x += cfg.stride;
    }
    close(&mut run, &mut out);
    out
}

/// Greedy suppression: the lowest-distance candidate wins any pair whose
/// windows overlap by more than half their area.
fn suppress(mut candidates: Vec<CharMatch>) -> Vec<CharMatch> {
    candidates.sort_by(|a, b| {
        a.distance
            .partial_cmp(&b.distance)
            .unwrap_or(Ordering::Equal)
            .then((a.window.row, a.window.col).cmp(&(b.window.row, b.window.col)))
    });
    let mut kept: Vec<CharMatch> = Vec::new();
    for c in candidates {
        let overlaps = kept
            .iter()
            .any(|k| 2 * k.window.intersection_area(&c.window) > c.window.area());
        if !overlaps {
            kept.push(c);
        }
    }
    kept
}

/// Tight ink bounding box inside `window`, as `(height, width)`.
pub fn ink_extent(doc: &BinaryImage, window: &BBox) -> Option<(usize, usize)> {
    let (mut r0, mut r1, mut c0, mut c1) = (usize::MAX, 0, usize::MAX, 0);
    for r in window.row..window.row + window.h {
        for c in window.col..window.col + window.w {
            if doc.get(r, c) == 1 {
                r0 = r0.min(r);
                r1 = r1.max(r);
                c0 = c0.min(c);
                c1 = c1.max(c);
            }
        }
    }
    (r0 != usize::MAX).then(|| (r1 - r0 + 1, c1 - c0 + 1))
}

/// Occurrence heights and widths, in match order.
pub fn occurrence_measures(matches: &[CharMatch]) -> (Vec<usize>, Vec<usize>) {
    matches.iter().map(|m| (m.ink_height, m.ink_width)).unzip()
}

struct SummedArea {
    w: usize,
    table: Vec<u32>,
}

impl SummedArea {
    fn new(img: &BinaryImage) -> Self {
        let w = img.width() + 1;
        let mut table = vec![0u32; w * (img.height() + 1)];
        for r in 0..img.height() {
            let mut acc = 0u32;
            for c in 0..img.width() {
                acc += img.get(r, c) as u32;
                table[(r + 1) * w + c + 1] = table[r * w + c + 1] + acc;
            }
        }
        Self { w, table }
    }

    fn sum(&self, row: usize, col: usize, h: usize, w: usize) -> u32 {
        let t = &self.table;
        let (r1, c1) = (row + h, col + w);
        t[r1 * self.w + c1] + t[row * self.w + col] - t[row * self.w + c1] - t[r1 * self.w + col]
    }
}
