//! Text-line and word segmentation from projection profiles.
//!
//! Lines come from the row profile: the profile is denoised against its mean,
//! the strongest remaining peak seeds a middle (x-height) zone that extends
//! while rows stay at or above a quarter of the peak, and the zone is then
//! grown outward on the raw profile to the first blank row (or to the lowest
//! valley when two lines touch). Words come from the column profile of each
//! line, split wherever a blank run is longer than the gap threshold.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::document::BinaryImage;
use crate::error::{Error, Result};

/// Ink pixels per image row.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RowHistogram(pub Vec<u32>);

/// Ink pixels per column, restricted to the rows of one line.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ColumnHistogram(pub Vec<u32>);

/// Middle zone of one line before it is extended to upper/lower zones.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MiddleBand {
    pub middle_start: usize,
    pub middle_end: usize,
    pub peak_index: usize,
    pub peak_value: u32,
}

impl MiddleBand {
    pub fn height(&self) -> usize {
        self.middle_end - self.middle_start + 1
    }
}

/// A text line with inclusive zone boundaries.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LineBand {
    pub upper_start: usize,
    pub middle_start: usize,
    pub middle_end: usize,
    pub lower_end: usize,
    pub peak_index: usize,
    pub peak_value: u32,
}

impl LineBand {
    pub fn upper_height(&self) -> usize {
        self.middle_start - self.upper_start
    }

    pub fn middle_height(&self) -> usize {
        self.middle_end - self.middle_start + 1
    }

    pub fn lower_height(&self) -> usize {
        self.lower_end - self.middle_end
    }

    /// Rows spanned by the whole line, `lower_end - upper_start + 1`.
    pub fn height(&self) -> usize {
        self.lower_end - self.upper_start + 1
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct WordBox {
    pub col_start: usize,
    pub col_end: usize,
    /// Width of the blank run separating this word from the previous one.
    pub gap_before: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LineLayout {
    #[serde(flatten)]
    pub band: LineBand,
    /// Gap threshold used for this line.
    pub so: usize,
    pub words: Vec<WordBox>,
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Layout {
    pub lines: Vec<LineLayout>,
}

/// Operator corrections to the word-gap threshold.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct SoOverrides {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub so: Option<usize>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub per_line: BTreeMap<usize, usize>,
}

impl SoOverrides {
    pub fn global(so: usize) -> Self {
        Self {
            so: Some(so),
            per_line: BTreeMap::new(),
        }
    }

    fn resolve(&self, line_index: usize, band: &LineBand) -> usize {
        self.per_line
            .get(&line_index)
            .copied()
            .or(self.so)
            .unwrap_or_else(|| default_so(band))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LayoutConfig {
    pub min_line_height: usize,
    #[serde(default)]
    pub so: SoOverrides,
}

impl Default for LayoutConfig {
    fn default() -> Self {
        Self {
            min_line_height: 3,
            so: SoOverrides::default(),
        }
    }
}

/// Per-document layout measures, in pixels.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct LayoutMeasures {
    pub upper_heights: Vec<f64>,
    pub middle_heights: Vec<f64>,
    pub lower_heights: Vec<f64>,
    pub word_gaps: Vec<f64>,
}

pub fn row_histogram(img: &BinaryImage) -> RowHistogram {
    let w = img.width();
    RowHistogram(
        img.mask()
            .chunks_exact(w)
            .map(|row| row.iter().map(|&v| v as u32).sum())
            .collect(),
    )
}

/// Zeroes every row whose count is strictly below the mean count.
pub fn denoise(h: &RowHistogram) -> RowHistogram {
    if h.0.is_empty() {
        return h.clone();
    }
    let mean = h.0.iter().map(|&c| c as f64).sum::<f64>() / h.0.len() as f64;
    RowHistogram(
        h.0.iter()
            .map(|&c| if (c as f64) < mean { 0 } else { c })
            .collect(),
    )
}

fn argmax_first(values: &[u32]) -> Option<usize> {
    let mut best: Option<(usize, u32)> = None;
    for (i, &v) in values.iter().enumerate() {
        if best.is_none_or(|(_, b)| v > b) {
            best = Some((i, v));
        }
    }
    best.map(|(i, _)| i)
}

/// Extracts middle zones from a denoised row profile, strongest first, and
/// returns them sorted top to bottom. Bands thinner than `min_line_height` are
/// dropped.
pub fn detect_middle_bands(hd: &RowHistogram, min_line_height: usize) -> Vec<MiddleBand> {
    let mut work = hd.0.clone();
    let mut bands = Vec::new();
    while let Some(peak) = argmax_first(&work).filter(|&i| work[i] > 0) {
        let max = work[peak];
        let val = max as f64 / 4.0;

        let mut start = peak;
        while start > 0 && (work[start - 1] as f64) >= val {
            start -= 1;
        }
        let mut end = peak;
        while end + 1 < work.len() && (work[end + 1] as f64) >= val {
            end += 1;
        }

        // Clear the whole nonzero run, shoulders included.
        let mut lo = peak;
        while lo > 0 && work[lo - 1] != 0 {
            lo -= 1;
        }
        let mut hi = peak;
        while hi + 1 < work.len() && work[hi + 1] != 0 {
            hi += 1;
        }
        work[lo..=hi].fill(0);

        let band = MiddleBand {
            middle_start: start,
            middle_end: end,
            peak_index: peak,
            peak_value: max,
        };
        if band.height() >= min_line_height {
            bands.push(band);
        }
    }
    bands.sort_by_key(|b| b.middle_start);
    bands
}

fn argmin_first(h: &[u32], lo: usize, hi: usize) -> usize {
    let mut best = lo;
    for i in lo..=hi {
        if h[i] < h[best] {
            best = i;
        }
    }
    best
}

/// Grows each middle zone on the raw profile `h` into upper and lower zones.
pub fn extend_zones(h: &RowHistogram, bands: &[MiddleBand]) -> Vec<LineBand> {
    let h = &h.0;
    let last = h.len().saturating_sub(1);
    bands
        .iter()
        .enumerate()
        .map(|(i, b)| {
            let prev_end = i.checked_sub(1).map(|p| bands[p].middle_end);
            let next_start = bands.get(i + 1).map(|n| n.middle_start);

            let mut x = b.middle_start;
            let upper_start = loop {
                if h[x] == 0 {
                    break x;
                }
                if x == 0 || Some(x) == prev_end {
                    break argmin_first(h, x, b.middle_start);
                }
                x -= 1;
            };

            let mut x = b.middle_end;
            let lower_end = loop {
                if h[x] == 0 {
                    break x;
                }
                if x == last || Some(x) == next_start {
                    break argmin_first(h, b.middle_end, x);
                }
                x += 1;
            };

            LineBand {
                upper_start,
                middle_start: b.middle_start,
                middle_end: b.middle_end,
                lower_end,
                peak_index: b.peak_index,
                peak_value: b.peak_value,
            }
        })
        .collect()
}

pub fn column_histogram(img: &BinaryImage, band: &LineBand) -> ColumnHistogram {
    let mut counts = vec![0u32; img.width()];
    let last_row = band.lower_end.min(img.height().saturating_sub(1));
    for r in band.upper_start..=last_row {
        let row = &img.mask()[r * img.width()..(r + 1) * img.width()];
        for (c, &v) in counts.iter_mut().zip(row) {
            *c += v as u32;
        }
    }
    ColumnHistogram(counts)
}

/// Splits a line's column profile into words at blank runs longer than `so`.
pub fn detect_words(hc: &ColumnHistogram, so: usize) -> Vec<WordBox> {
    let counts = &hc.0;
    let mut words: Vec<WordBox> = Vec::new();
    let mut current: Option<(usize, usize)> = None;
    let mut pending_gap: Option<usize> = None;
    let mut run = 0usize;

    for (x, &c) in counts.iter().enumerate() {
        if c == 0 {
            run += 1;
            continue;
        }
        match current {
            None => current = Some((x, x)),
            Some((start, _)) if run <= so => current = Some((start, x)),
            Some((start, end)) => {
                words.push(WordBox {
                    col_start: start,
                    col_end: end,
                    gap_before: pending_gap,
                });
                pending_gap = Some(run);
                current = Some((x, x));
            }
        }
        run = 0;
    }
    if let Some((start, end)) = current {
        words.push(WordBox {
            col_start: start,
            col_end: end,
            gap_before: pending_gap,
        });
    }
    words
}

/// Half the middle-zone height, rounded half up, at least 1.
pub fn default_so(band: &LineBand) -> usize {
    ((band.middle_height() + 1) / 2).max(1)
}

/// Detects lines, zones and words on a binarized page.
pub fn analyze(img: &BinaryImage, cfg: &LayoutConfig) -> Layout {
    let h = row_histogram(img);
    let hd = denoise(&h);
    let bands = extend_zones(&h, &detect_middle_bands(&hd, cfg.min_line_height));
    Layout {
        lines: segment_lines(img, &bands, &cfg.so),
    }
}

fn segment_lines(img: &BinaryImage, bands: &[LineBand], so: &SoOverrides) -> Vec<LineLayout> {
    bands
        .par_iter()
        .enumerate()
        .map(|(i, band)| {
            let so = so.resolve(i, band);
            LineLayout {
                band: *band,
                so,
                words: detect_words(&column_histogram(img, band), so),
            }
        })
        .collect()
}

/// Re-runs word detection with new gap thresholds, keeping the detected lines.
pub fn redetect_words(img: &BinaryImage, layout: &Layout, so: &SoOverrides) -> Result<Layout> {
    validate_overrides(layout, so)?;
    let bands: Vec<LineBand> = layout.lines.iter().map(|l| l.band).collect();
    Ok(Layout {
        lines: segment_lines(img, &bands, so),
    })
}

pub fn validate_overrides(layout: &Layout, so: &SoOverrides) -> Result<()> {
    if let Some((&line, _)) = so
        .per_line
        .iter()
        .find(|(&line, _)| line >= layout.lines.len())
    {
        return Err(Error::Validation(format!(
            "line {line} does not exist (document has {} lines)",
            layout.lines.len()
        )));
    }
    Ok(())
}

impl Layout {
    pub fn measures(&self) -> LayoutMeasures {
        let mut m = LayoutMeasures::default();
        for line in &self.lines {
            m.upper_heights.push(line.band.upper_height() as f64);
            m.middle_heights.push(line.band.middle_height() as f64);
            m.lower_heights.push(line.band.lower_height() as f64);
            m.word_gaps
                .extend(line.words.iter().filter_map(|w| w.gap_before.map(|g| g as f64)));
        }
        m
    }

    pub fn word_count(&self) -> usize {
        self.lines.iter().map(|l| l.words.len()).sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn mask_from_rows(rows: &[&str]) -> BinaryImage {
        let w = rows[0].len();
        let mask = rows
            .iter()
            .flat_map(|r| r.bytes().map(|b| (b == b'#') as u8))
            .collect();
        BinaryImage::new(w, rows.len(), mask).unwrap()
    }

    fn mb(s: usize, e: usize, p: usize, v: u32) -> MiddleBand {
        MiddleBand {
            middle_start: s,
            middle_end: e,
            peak_index: p,
            peak_value: v,
        }
    }

    #[test]
    fn row_histogram_counts() {
        let blank = BinaryImage::blank(10, 10).unwrap();
        assert!(row_histogram(&blank).0.iter().all(|&c| c == 0));

        let mut img = BinaryImage::blank(10, 10).unwrap();
        img.fill_rect(3, 0, 1, 10);
        let h = row_histogram(&img);
        assert_eq!(h.0[3], 10);
        assert_eq!(h.0.iter().sum::<u32>(), 10);
    }

    #[test]
    fn denoise_examples() {
        // mean 16/6 = 2.667
        let h = RowHistogram(vec![0, 0, 8, 8, 0, 0]);
        assert_eq!(denoise(&h).0, vec![0, 0, 8, 8, 0, 0]);
        // mean 20/6 = 3.333
        let h = RowHistogram(vec![1, 1, 8, 8, 1, 1]);
        assert_eq!(denoise(&h).0, vec![0, 0, 8, 8, 0, 0]);
        let h = RowHistogram(vec![0; 7]);
        assert_eq!(denoise(&h).0, vec![0; 7]);
    }

    #[test]
    fn denoise_keeps_rows_equal_to_mean() {
        let h = RowHistogram(vec![2, 2, 2]);
        assert_eq!(denoise(&h).0, vec![2, 2, 2]);
    }

    #[test]
    fn middle_bands_two_peaks() {
        let hd = RowHistogram(vec![0, 0, 4, 16, 4, 0, 0, 0, 4, 16, 4, 0]);
        assert_eq!(
            detect_middle_bands(&hd, 3),
            vec![mb(2, 4, 3, 16), mb(8, 10, 9, 16)]
        );
    }

    #[test]
    fn middle_band_plateau() {
        let hd = RowHistogram(vec![0, 8, 8, 8, 0]);
        assert_eq!(detect_middle_bands(&hd, 3), vec![mb(1, 3, 1, 8)]);
        assert!(detect_middle_bands(&RowHistogram(vec![0; 9]), 3).is_empty());
    }

    #[test]
    fn middle_band_excludes_shoulders_but_clears_them() {
        // Shoulder rows 1 and 5 sit below 16/4 and must not seed a second line.
        let hd = RowHistogram(vec![0, 3, 16, 16, 16, 3, 0]);
        assert_eq!(detect_middle_bands(&hd, 3), vec![mb(2, 4, 2, 16)]);
    }

    #[test]
    fn thin_bands_filtered() {
        let hd = RowHistogram(vec![0, 9, 9, 0, 0, 12, 12, 12, 0]);
        assert_eq!(detect_middle_bands(&hd, 3), vec![mb(5, 7, 5, 12)]);
        assert_eq!(detect_middle_bands(&hd, 1).len(), 2);
    }

    #[test]
    fn zones_stop_at_blank_rows() {
        let h = RowHistogram(vec![0, 2, 4, 16, 16, 4, 2, 0, 0]);
        let lines = extend_zones(&h, &[mb(3, 4, 3, 16)]);
        let l = lines[0];
        assert_eq!((l.upper_start, l.lower_end), (0, 7));
        assert_eq!(
            (l.upper_height(), l.middle_height(), l.lower_height()),
            (3, 2, 3)
        );
    }

    #[test]
    fn zones_adjacent_blank() {
        let h = RowHistogram(vec![0, 0, 9, 9, 9, 0, 0]);
        let l = extend_zones(&h, &[mb(2, 4, 2, 9)])[0];
        assert_eq!((l.upper_start, l.lower_end), (1, 5));
        assert_eq!((l.upper_height(), l.lower_height()), (1, 1));
    }

    #[test]
    fn touching_lines_share_valley_minimum() {
        //                       0  1   2   3  4  5   6   7  8
        let h = RowHistogram(vec![0, 16, 16, 4, 2, 4, 16, 16, 0]);
        let lines = extend_zones(&h, &[mb(1, 2, 1, 16), mb(6, 7, 6, 16)]);
        assert_eq!(lines[0].lower_end, 4);
        assert_eq!(lines[1].upper_start, 4);
        assert_eq!(lines[0].upper_start, 0);
        assert_eq!(lines[1].lower_end, 8);
    }

    #[test]
    fn top_row_ink_falls_back_to_minimum() {
        let h = RowHistogram(vec![3, 1, 2, 16, 16, 0]);
        let l = extend_zones(&h, &[mb(3, 4, 3, 16)])[0];
        assert_eq!(l.upper_start, 1);
    }

    #[test]
    fn words_split_on_long_runs() {
        let hc = ColumnHistogram(vec![3, 2, 0, 0, 0, 0, 1, 2]);
        let w = detect_words(&hc, 3);
        assert_eq!(
            w,
            vec![
                WordBox {
                    col_start: 0,
                    col_end: 1,
                    gap_before: None
                },
                WordBox {
                    col_start: 6,
                    col_end: 7,
                    gap_before: Some(4)
                },
            ]
        );
        let w = detect_words(&hc, 4);
        assert_eq!(
            w,
            vec![WordBox {
                col_start: 0,
                col_end: 7,
                gap_before: None
            }]
        );
        assert!(detect_words(&ColumnHistogram(vec![0; 12]), 2).is_empty());
    }

    #[test]
    fn words_trimmed_to_ink() {
        let hc = ColumnHistogram(vec![0, 0, 1, 0, 1, 0, 0, 0, 0, 5, 0, 0]);
        let w = detect_words(&hc, 2);
        assert_eq!(w.len(), 2);
        assert_eq!((w[0].col_start, w[0].col_end), (2, 4));
        assert_eq!((w[1].col_start, w[1].col_end, w[1].gap_before), (9, 9, Some(4)));
    }

    #[test]
    fn default_so_rounding() {
        let band = |mh: usize| LineBand {
            upper_start: 0,
            middle_start: 10,
            middle_end: 10 + mh - 1,
            lower_end: 10 + mh + 2,
            peak_index: 10,
            peak_value: 1,
        };
        assert_eq!(default_so(&band(20)), 10);
        assert_eq!(default_so(&band(1)), 1);
        assert_eq!(default_so(&band(7)), 4);
    }

    #[test]
    fn column_histogram_examples() {
        let img = mask_from_rows(&[
            "#.........", // outside band
            "..#.......",
            "..#......#",
            "..#.......",
            "#.........", // outside band
        ]);
        let band = LineBand {
            upper_start: 1,
            middle_start: 2,
            middle_end: 2,
            lower_end: 3,
            peak_index: 2,
            peak_value: 2,
        };
        let hc = column_histogram(&img, &band);
        assert_eq!(hc.0, vec![0, 0, 3, 0, 0, 0, 0, 0, 0, 1]);
        let blank = BinaryImage::blank(10, 5).unwrap();
        assert!(column_histogram(&blank, &band).0.iter().all(|&c| c == 0));
    }

    #[test]
    fn analyze_small_page() {
        let img = mask_from_rows(&[
            "....................",
            "..#.................",
            "..#.................",
            "..######...###.####.",
            "..#....#...#.#.#..#.",
            "..######...###.####.",
            "...........#........",
            "....................",
        ]);
        let layout = analyze(&img, &LayoutConfig::default());
        assert_eq!(layout.lines.len(), 1);
        let l = &layout.lines[0];
        assert_eq!(
            (l.band.upper_start, l.band.middle_start, l.band.middle_end, l.band.lower_end),
            (0, 3, 5, 7)
        );
        assert_eq!(l.so, 2);
        assert_eq!(l.words.len(), 2);
        assert_eq!(l.words[1].gap_before, Some(3));
    }

    #[test]
    fn per_line_override_must_exist() {
        let layout = Layout::default();
        let mut so = SoOverrides::default();
        so.per_line.insert(2, 5);
        assert!(matches!(
            validate_overrides(&layout, &so),
            Err(Error::Validation(_))
        ));
    }

    fn naive_rows(img: &BinaryImage) -> Vec<u32> {
        let mut out = vec![0; img.height()];
        for (y, slot) in out.iter_mut().enumerate() {
            for x in 0..img.width() {
                if img.get(y, x) == 1 {
                    *slot += 1;
                }
            }
        }
        out
    }

    /// Enumerates, strongest peak first, the maximal `>= max/4` interval
    /// around each peak of the nonzero runs of the profile. Runs are
    /// independent because clearing one never touches another.
    fn oracle_bands(hd: &[u32], min_h: usize) -> Vec<MiddleBand> {
        let mut runs = Vec::new();
        let mut y = 0;
        while y < hd.len() {
            if hd[y] == 0 {
                y += 1;
                continue;
            }
            let s = y;
            while y < hd.len() && hd[y] != 0 {
                y += 1;
            }
            runs.push((s, y - 1));
        }
        let mut out = Vec::new();
        for (s, e) in runs {
            let max = *hd[s..=e].iter().max().unwrap();
            let peak = (s..=e).find(|&i| hd[i] == max).unwrap();
            let ok = |i: usize| 4 * hd[i] >= max;
            let start = (s..=peak).rev().take_while(|&i| ok(i)).last().unwrap();
            let end = (peak..=e).take_while(|&i| ok(i)).last().unwrap();
            if end - start + 1 >= min_h {
                out.push(mb(start, end, peak, max));
            }
        }
        out
    }

    fn random_mask(w: usize, h: usize, bits: &[bool]) -> BinaryImage {
        BinaryImage::new(w, h, bits.iter().map(|&b| b as u8).collect()).unwrap()
    }

    proptest! {
        #[test]
        fn row_histogram_matches_recount(bits in proptest::collection::vec(any::<bool>(), 256)) {
            let img = random_mask(16, 16, &bits);
            prop_assert_eq!(row_histogram(&img).0, naive_rows(&img));
        }

        #[test]
        fn column_histogram_matches_recount(
            bits in proptest::collection::vec(any::<bool>(), 256),
            a in 0usize..16, b in 0usize..16
        ) {
            let img = random_mask(16, 16, &bits);
            let (lo, hi) = (a.min(b), a.max(b));
            let band = LineBand { upper_start: lo, middle_start: lo, middle_end: hi,
                lower_end: hi, peak_index: lo, peak_value: 0 };
            let hc = column_histogram(&img, &band);
            for x in 0..16 {
                let n = (lo..=hi).filter(|&y| img.get(y, x) == 1).count() as u32;
                prop_assert_eq!(hc.0[x], n);
                prop_assert!(hc.0[x] as usize <= band.height());
            }
        }

        #[test]
        fn middle_bands_match_oracle(
            w in 1usize..=32, h in 1usize..=32,
            bits in proptest::collection::vec(proptest::bool::weighted(0.3), 1024),
            min_h in 1usize..4
        ) {
            let img = random_mask(w, h, &bits[..w * h]);
            let hd = denoise(&row_histogram(&img));
            prop_assert_eq!(detect_middle_bands(&hd, min_h), oracle_bands(&hd.0, min_h));
        }

        #[test]
        fn middle_bands_match_oracle_on_profiles(
            hd in proptest::collection::vec(prop_oneof![Just(0u32), 0u32..40], 1..64),
        ) {
            let hd = RowHistogram(hd);
            prop_assert_eq!(detect_middle_bands(&hd, 1), oracle_bands(&hd.0, 1));
        }

        #[test]
        fn zone_heights_sum_and_order(
            w in 4usize..=32, h in 4usize..=32,
            bits in proptest::collection::vec(proptest::bool::weighted(0.3), 1024),
        ) {
            let img = random_mask(w, h, &bits[..w * h]);
            let layout = analyze(&img, &LayoutConfig { min_line_height: 1, ..Default::default() });
            let mut prev_end: Option<usize> = None;
            for line in &layout.lines {
                let b = line.band;
                prop_assert!(b.upper_start <= b.middle_start);
                prop_assert!(b.middle_start <= b.peak_index && b.peak_index <= b.middle_end);
                prop_assert!(b.middle_end <= b.lower_end);
                prop_assert_eq!(b.upper_height() + b.middle_height() + b.lower_height(), b.height());
                if let Some(p) = prev_end {
                    prop_assert!(b.middle_start > p);
                }
                prev_end = Some(b.middle_end);
                let hc = column_histogram(&img, &b);
                for word in &line.words {
                    prop_assert!(hc.0[word.col_start] > 0 && hc.0[word.col_end] > 0);
                }
            }
        }

        #[test]
        fn translation_shifts_bands(
            bits in proptest::collection::vec(proptest::bool::weighted(0.35), 20 * 16),
            k in 0usize..6
        ) {
            // 2 blank rows above and 8 below let the content slide by up to 6.
            let mut base = BinaryImage::blank(20, 26).unwrap();
            let mut shifted = BinaryImage::blank(20, 26).unwrap();
            for y in 0..16 {
                for x in 0..20 {
                    if bits[y * 20 + x] {
                        base.set(y + 2, x, true);
                        shifted.set(y + 2 + k, x, true);
                    }
                }
            }
            let cfg = LayoutConfig { min_line_height: 1, ..Default::default() };
            let a = analyze(&base, &cfg);
            let b = analyze(&shifted, &cfg);
            prop_assert_eq!(a.lines.len(), b.lines.len());
            for (la, lb) in a.lines.iter().zip(&b.lines) {
                prop_assert_eq!(la.band.upper_start + k, lb.band.upper_start);
                prop_assert_eq!(la.band.middle_start + k, lb.band.middle_start);
                prop_assert_eq!(la.band.middle_end + k, lb.band.middle_end);
                prop_assert_eq!(la.band.lower_end + k, lb.band.lower_end);
                prop_assert_eq!(&la.words, &lb.words);
            }
        }

        #[test]
        fn word_count_monotone_in_so(
            hc in proptest::collection::vec(prop_oneof![3 => Just(0u32), 1 => 1u32..5], 0..80),
            a in 0usize..10, b in 0usize..10
        ) {
            let hc = ColumnHistogram(hc);
            let (lo, hi) = (a.min(b), a.max(b));
            prop_assert!(detect_words(&hc, lo).len() >= detect_words(&hc, hi).len());
        }
    }
}
