use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::glyphs::{draw, GlyphMetrics, GlyphShape, LABELS};
use super::profile::WriterProfile;
use crate::document::BinaryImage;
use crate::error::{Error, Result};
use crate::features::{MeasureSet, TemplateMeasures};
use crate::matcher::BBox;

/// A horizontally uniform pattern planted after the last word of some lines.
///
/// Every `template_width`-wide window fully inside the planted strip is a
/// pixel-exact copy of the template, so a strip `template_width + hits - 1`
/// columns long yields exactly `hits` consecutive zero-distance windows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StripePlan {
    pub count: usize,
    /// Ink flag per pattern row.
    pub rows: Vec<bool>,
    pub template_width: usize,
    pub hits: usize,
}

impl StripePlan {
    pub fn standard(count: usize, hits: usize) -> Self {
        Self {
            count,
            rows: [1, 0, 0, 1, 1, 0, 0, 0, 1, 0, 0, 1]
                .iter()
                .map(|&v| v == 1)
                .collect(),
            template_width: 20,
            hits,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenConfig {
    pub lines: usize,
    pub words_per_line: usize,
    /// Inclusive range of glyphs per word.
    pub glyphs_per_word: (usize, usize),
    pub canvas_width: usize,
    pub canvas_height: usize,
    pub margin: usize,
    /// Integer upscale applied after rendering.
    pub scale: usize,
    #[serde(default)]
    pub stripes: Option<StripePlan>,
}

impl Default for GenConfig {
    fn default() -> Self {
        Self {
            lines: 6,
            words_per_line: 5,
            glyphs_per_word: (2, 6),
            canvas_width: 1600,
            canvas_height: 1400,
            margin: 24,
            scale: 1,
            stripes: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TruthWord {
    pub col_start: usize,
    pub col_end: usize,
    pub gap_before: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TruthLine {
    /// First and last inked rows of the line.
    pub ink_top: usize,
    pub ink_bottom: usize,
    pub middle_start: usize,
    pub middle_end: usize,
    pub words: Vec<TruthWord>,
    /// Blank columns between consecutive glyphs of the same word.
    pub intra_gaps: Vec<usize>,
}

impl TruthLine {
    /// Zone heights under the detector's convention: the upper zone starts on
    /// the blank row above the ink, the lower zone ends on the blank row below.
    pub fn zone_heights(&self) -> (usize, usize, usize) {
        (
            self.middle_start + 1 - self.ink_top,
            self.middle_end - self.middle_start + 1,
            self.ink_bottom + 1 - self.middle_end,
        )
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TruthGlyph {
    pub label: String,
    pub line: usize,
    /// Tight ink box.
    pub bbox: BBox,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TruthStripe {
    pub line: usize,
    /// Template-sized window at the strip's left end.
    pub template: BBox,
    pub length: usize,
    pub hits: usize,
    pub ink_height: usize,
}

/// Everything planted on a synthetic page.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub width: usize,
    pub height: usize,
    pub writer: String,
    pub seed: u64,
    pub scale: usize,
    pub lines: Vec<TruthLine>,
    pub glyphs: Vec<TruthGlyph>,
    #[serde(default)]
    pub stripes: Vec<TruthStripe>,
}

impl GroundTruth {
    pub fn first_glyph(&self, label: &str) -> Option<&TruthGlyph> {
        self.glyphs.iter().find(|g| g.label == label)
    }

    /// Layout measures a perfect detector would report.
    pub fn expected_measures(&self) -> MeasureSet {
        let mut m = MeasureSet::default();
        for line in &self.lines {
            let (u, mid, l) = line.zone_heights();
            m.upper_heights.push(u as f64);
            m.middle_heights.push(mid as f64);
            m.lower_heights.push(l as f64);
            m.word_gaps
                .extend(line.words.iter().filter_map(|w| w.gap_before.map(|g| g as f64)));
        }
        m
    }

    /// Ink extents of every planted glyph with `label`.
    pub fn glyph_measures(&self, label: &str) -> TemplateMeasures {
        let mut t = TemplateMeasures::default();
        for g in self.glyphs.iter().filter(|g| g.label == label) {
            t.heights.push(g.bbox.h as f64);
            t.widths.push(g.bbox.w as f64);
        }
        t
    }

    pub fn labels(&self) -> BTreeMap<String, usize> {
        let mut out = BTreeMap::new();
        for g in &self.glyphs {
            *out.entry(g.label.clone()).or_insert(0) += 1;
        }
        out
    }
}

/// Renders a page with the default canvas.
pub fn generate_document(
    profile: &WriterProfile,
    seed: u64,
    lines: usize,
    words_per_line: usize,
) -> Result<(BinaryImage, GroundTruth)> {
    let cfg = GenConfig {
        lines,
        words_per_line,
        ..GenConfig::default()
    };
    generate(profile, seed, &cfg)
}

struct PlacedGlyph {
    label: &'static str,
    shape: GlyphShape,
    metrics: GlyphMetrics,
    col: usize,
}

struct PlannedLine {
    x_height: usize,
    ascender: usize,
    descender: usize,
    glyphs: Vec<PlacedGlyph>,
    words: Vec<TruthWord>,
    intra_gaps: Vec<usize>,
    stripe: Option<(usize, usize)>,
}

fn positive_round(v: f64, min: usize) -> usize {
    if v.is_finite() && v > min as f64 {
        v.round() as usize
    } else {
        min
    }
}

/// Renders one synthetic page. Identical `(profile, seed, cfg)` give identical output.
pub fn generate(
    profile: &WriterProfile,
    seed: u64,
    cfg: &GenConfig,
) -> Result<(BinaryImage, GroundTruth)> {
    profile.validate()?;
    if cfg.lines == 0 || cfg.words_per_line == 0 {
        return Err(Error::Validation("lines and words_per_line must be >= 1".into()));
    }
    let (gmin, gmax) = cfg.glyphs_per_word;
    if gmin == 0 || gmin > gmax {
        return Err(Error::Validation(format!(
            "glyphs_per_word range {gmin}..={gmax} is invalid"
        )));
    }
    if let Some(s) = &cfg.stripes {
        if s.count > cfg.lines || s.hits == 0 || s.template_width < 4 || s.rows.len() < 4 {
            return Err(Error::Validation(format!("invalid stripe plan {s:?}")));
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let shapes: BTreeMap<&str, GlyphShape> = LABELS
        .iter()
        .map(|&l| (l, GlyphShape::for_label(l, profile.glyph_seed)))
        .collect();

    let stripe_lines: Vec<usize> = match &cfg.stripes {
        Some(s) if s.count > 0 => (0..s.count).map(|k| k * cfg.lines / s.count).collect(),
        _ => Vec::new(),
    };

    let mut planned = Vec::with_capacity(cfg.lines);
    for line_index in 0..cfg.lines {
        let x_height = positive_round(profile.middle_height.sample(&mut rng), 8);
        let ascender = positive_round(profile.upper_ratio.sample(&mut rng) * x_height as f64, 1);
        let descender = positive_round(profile.lower_ratio.sample(&mut rng) * x_height as f64, 1);
        let density = profile.ink_density.sample(&mut rng).max(0.02);
        // Gap thresholds the detector will derive from this x-height.
        let so = x_height.div_ceil(2).max(1);
        let intra_max = so.saturating_sub(1).max(1);
        let inter_min = so + 2;

        let mut col = cfg.margin;
        let mut glyphs = Vec::new();
        let mut words = Vec::new();
        let mut intra_gaps = Vec::new();
        let mut prev_end: Option<usize> = None;
        for _ in 0..cfg.words_per_line {
            if let Some(end) = prev_end {
                let gap = positive_round(profile.word_gap.sample(&mut rng), inter_min);
                col = end + 1 + gap;
            }
            let start = col;
            let n = rng.random_range(gmin..=gmax);
            for g in 0..n {
                if g > 0 {
                    let gap = positive_round(profile.intra_gap.sample(&mut rng), 1).min(intra_max);
                    intra_gaps.push(gap);
                    col += gap;
                }
                let label = LABELS[rng.random_range(0..26)];
                let shape = shapes[label].clone();
                let width_ratio = profile.glyph_width_ratio.sample(&mut rng).max(0.2);
                let metrics =
                    GlyphMetrics::new(&shape, x_height, width_ratio, density, ascender, descender);
                glyphs.push(PlacedGlyph {
                    label,
                    shape,
                    metrics,
                    col,
                });
                col += metrics.width;
            }
            let end = col - 1;
            words.push(TruthWord {
                col_start: start,
                col_end: end,
                gap_before: prev_end.map(|p| start - p - 1),
            });
            prev_end = Some(end);
        }

        let mut stripe = None;
        if let (Some(plan), true) = (&cfg.stripes, stripe_lines.contains(&line_index)) {
            if plan.rows.len() > x_height {
                return Err(Error::Layout(format!(
                    "stripe pattern of {} rows exceeds x-height {x_height}",
                    plan.rows.len()
                )));
            }
            let end = prev_end.expect("at least one word");
            let gap = positive_round(profile.word_gap.sample(&mut rng), inter_min);
            let start = end + 1 + gap;
            let length = plan.template_width + plan.hits - 1;
            words.push(TruthWord {
                col_start: start,
                col_end: start + length - 1,
                gap_before: Some(gap),
            });
            stripe = Some((start, length));
            col = start + length;
        }

        if col + cfg.margin > cfg.canvas_width {
            return Err(Error::Layout(format!(
                "line {line_index} needs {} columns, canvas has {}",
                col + cfg.margin,
                cfg.canvas_width
            )));
        }
        planned.push(PlannedLine {
            x_height,
            ascender,
            descender,
            glyphs,
            words,
            intra_gaps,
            stripe,
        });
    }

    // Vertical placement: reserve the full ascender/descender space on every line.
    let mut tops = Vec::with_capacity(planned.len());
    let mut y = cfg.margin;
    for (i, p) in planned.iter().enumerate() {
        let middle_top = y + p.ascender;
        tops.push(middle_top);
        y = middle_top + p.x_height + p.descender;
        if i + 1 < planned.len() {
            y += (p.x_height / 2).max(3);
        }
    }
    if y + cfg.margin > cfg.canvas_height {
        return Err(Error::Layout(format!(
            "{} lines need {} rows, canvas has {}",
            planned.len(),
            y + cfg.margin,
            cfg.canvas_height
        )));
    }

    let mut img = BinaryImage::blank(cfg.canvas_width, cfg.canvas_height)?;
    let mut truth = GroundTruth {
        width: cfg.canvas_width,
        height: cfg.canvas_height,
        writer: profile.name.clone(),
        seed,
        scale: 1,
        lines: Vec::new(),
        glyphs: Vec::new(),
        stripes: Vec::new(),
    };
    for (i, (p, &top)) in planned.iter().zip(&tops).enumerate() {
        let mut ink_top = top;
        let mut ink_bottom = top + p.x_height - 1;
        for g in &p.glyphs {
            draw(&mut img, &g.shape, &g.metrics, top, g.col);
            let gt = top - g.metrics.top_extent();
            let gb = top + p.x_height - 1 + g.metrics.bottom_extent();
            ink_top = ink_top.min(gt);
            ink_bottom = ink_bottom.max(gb);
            truth.glyphs.push(TruthGlyph {
                label: g.label.to_string(),
                line: i,
                bbox: BBox::new(gt, g.col, gb - gt + 1, g.metrics.width),
            });
        }
        if let (Some((start, length)), Some(plan)) = (p.stripe, &cfg.stripes) {
            let row0 = top + (p.x_height - plan.rows.len()) / 2;
            for (r, &ink) in plan.rows.iter().enumerate() {
                if ink {
                    img.fill_rect(row0 + r, start, 1, length);
                }
            }
            let first = plan.rows.iter().position(|&v| v).unwrap_or(0);
            let last = plan.rows.iter().rposition(|&v| v).unwrap_or(0);
            truth.stripes.push(TruthStripe {
                line: i,
                template: BBox::new(row0, start, plan.rows.len(), plan.template_width),
                length,
                hits: plan.hits,
                ink_height: last - first + 1,
            });
        }
        truth.lines.push(TruthLine {
            ink_top,
            ink_bottom,
            middle_start: top,
            middle_end: top + p.x_height - 1,
            words: p.words.clone(),
            intra_gaps: p.intra_gaps.clone(),
        });
    }

    if cfg.scale > 1 {
        Ok((img.upscale(cfg.scale), truth.scaled(cfg.scale)))
    } else {
        Ok((img, truth))
    }
}

impl GroundTruth {
    fn scaled(&self, s: usize) -> Self {
        let start = |v: usize| v * s;
        let end = |v: usize| v * s + s - 1;
        let bbox = |b: &BBox| BBox::new(b.row * s, b.col * s, b.h * s, b.w * s);
        Self {
            width: self.width * s,
            height: self.height * s,
            writer: self.writer.clone(),
            seed: self.seed,
            scale: self.scale * s,
            lines: self
                .lines
                .iter()
                .map(|l| TruthLine {
                    ink_top: start(l.ink_top),
                    ink_bottom: end(l.ink_bottom),
                    middle_start: start(l.middle_start),
                    middle_end: end(l.middle_end),
                    words: l
                        .words
                        .iter()
                        .map(|w| TruthWord {
                            col_start: start(w.col_start),
                            col_end: end(w.col_end),
                            gap_before: w.gap_before.map(|g| g * s),
                        })
                        .collect(),
                    intra_gaps: l.intra_gaps.iter().map(|g| g * s).collect(),
                })
                .collect(),
            glyphs: self
                .glyphs
                .iter()
                .map(|g| TruthGlyph {
                    label: g.label.clone(),
                    line: g.line,
                    bbox: bbox(&g.bbox),
                })
                .collect(),
            stripes: self
                .stripes
                .iter()
                .map(|st| TruthStripe {
                    line: st.line,
                    template: bbox(&st.template),
                    length: st.length * s,
                    hits: st.hits,
                    ink_height: st.ink_height * s,
                })
                .collect(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::layout::{analyze, default_so, LayoutConfig};
    use crate::matcher::ink_extent;

    #[test]
    fn minimal_page() {
        let (img, gt) = generate_document(&WriterProfile::example(), 1, 1, 1).unwrap();
        assert_eq!(gt.lines.len(), 1);
        assert_eq!(gt.lines[0].words.len(), 1);
        assert!(gt.expected_measures().word_gaps.is_empty());
        let layout = analyze(&img, &LayoutConfig::default());
        assert_eq!(layout.lines.len(), 1);
        assert_eq!(layout.lines[0].words.len(), 1);
    }

    #[test]
    fn deterministic() {
        let p = WriterProfile::example();
        let (a, ga) = generate_document(&p, 42, 4, 4).unwrap();
        let (b, gb) = generate_document(&p, 42, 4, 4).unwrap();
        assert_eq!(a.mask(), b.mask());
        assert_eq!(ga, gb);
        let (c, _) = generate_document(&p, 43, 4, 4).unwrap();
        assert_ne!(a.mask(), c.mask());
    }

    #[test]
    fn glyph_boxes_are_tight() {
        let (img, gt) = generate_document(&WriterProfile::example(), 5, 3, 4).unwrap();
        for g in &gt.glyphs {
            assert_eq!(ink_extent(&img, &g.bbox), Some((g.bbox.h, g.bbox.w)));
        }
        assert_eq!(gt.glyphs.iter().map(|g| g.bbox.area()).count(), gt.glyphs.len());
    }

    #[test]
    fn layout_recovers_ground_truth() {
        let p = WriterProfile::example();
        for seed in 0..10 {
            let (img, gt) = generate_document(&p, seed, 5, 5).unwrap();
            let layout = analyze(&img, &LayoutConfig::default());
            assert_eq!(layout.lines.len(), gt.lines.len(), "seed {seed}");
            for (det, truth) in layout.lines.iter().zip(&gt.lines) {
                assert_eq!(det.band.middle_start, truth.middle_start);
                assert_eq!(det.band.middle_end, truth.middle_end);
                assert_eq!(det.band.upper_start + 1, truth.ink_top);
                assert_eq!(det.band.lower_end, truth.ink_bottom + 1);
                let so = default_so(&det.band);
                assert!(truth.intra_gaps.iter().all(|&g| g <= so));
                let gaps: Vec<_> = det.words.iter().map(|w| w.gap_before).collect();
                let want: Vec<_> = truth.words.iter().map(|w| w.gap_before).collect();
                assert_eq!(gaps, want);
            }
            let measured = layout.measures();
            let expected = gt.expected_measures();
            assert_eq!(measured.upper_heights, expected.upper_heights);
            assert_eq!(measured.middle_heights, expected.middle_heights);
            assert_eq!(measured.lower_heights, expected.lower_heights);
            assert_eq!(measured.word_gaps, expected.word_gaps);
        }
    }

    #[test]
    fn overflow_is_layout_error() {
        let cfg = GenConfig {
            lines: 2,
            words_per_line: 40,
            canvas_width: 300,
            ..GenConfig::default()
        };
        assert!(matches!(
            generate(&WriterProfile::example(), 1, &cfg),
            Err(Error::Layout(_))
        ));
        let cfg = GenConfig {
            lines: 80,
            words_per_line: 1,
            canvas_height: 300,
            ..GenConfig::default()
        };
        assert!(matches!(
            generate(&WriterProfile::example(), 1, &cfg),
            Err(Error::Layout(_))
        ));
    }

    #[test]
    fn scaled_truth_matches_upscaled_raster() {
        let cfg = GenConfig {
            lines: 2,
            words_per_line: 2,
            canvas_width: 600,
            canvas_height: 300,
            scale: 2,
            ..GenConfig::default()
        };
        let (img, gt) = generate(&WriterProfile::example(), 3, &cfg).unwrap();
        assert_eq!((img.width(), img.height()), (1200, 600));
        for g in &gt.glyphs {
            assert_eq!(ink_extent(&img, &g.bbox), Some((g.bbox.h, g.bbox.w)));
        }
        let layout = analyze(&img, &LayoutConfig::default());
        for (det, truth) in layout.lines.iter().zip(&gt.lines) {
            assert_eq!(det.band.middle_start, truth.middle_start);
            assert_eq!(det.band.middle_end, truth.middle_end);
        }
    }
}
