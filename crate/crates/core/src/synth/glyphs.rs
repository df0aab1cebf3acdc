//! Procedural glyph shapes.
//!
//! Every glyph is built from axis-aligned strokes so its ink extent is known
//! exactly: a full-width top bar, a full-height left stem, a second stem
//! (right or centre) and optional bars, ascender and descender. Body rows
//! always carry two stems, so each x-height row keeps well over a quarter of
//! the ink of the bar rows, while the thin ascenders and descenders stay well
//! under it.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::document::BinaryImage;

pub const LABELS: [&str; 36] = [
    "a", "b", "c", "d", "e", "f", "g", "h", "i", "j", "k", "l", "m", "n", "o", "p", "q", "r", "s",
    "t", "u", "v", "w", "x", "y", "z", "0", "1", "2", "3", "4", "5", "6", "7", "8", "9",
];

const ASCENDING: &str = "bdfhklt0123456789";
const DESCENDING: &str = "gjpqy";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StemPos {
    Left,
    Center,
    Right,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RightStem {
    Full,
    TopHalf,
    BottomHalf,
    None,
}

/// Writer-specific shape of one label.
#[derive(Debug, Clone, PartialEq)]
pub struct GlyphShape {
    pub width_factor: f64,
    pub bottom_bar: bool,
    pub middle_bar: bool,
    pub right: RightStem,
    pub center: bool,
    pub ascender: Option<StemPos>,
    pub descender: Option<StemPos>,
}

fn fnv1a(bytes: &[u8]) -> u64 {
    bytes.iter().fold(0xcbf2_9ce4_8422_2325, |h, &b| {
        (h ^ b as u64).wrapping_mul(0x0100_0000_01b3)
    })
}

impl GlyphShape {
    pub fn for_label(label: &str, glyph_seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(glyph_seed ^ fnv1a(label.as_bytes()));
        let right = match rng.random_range(0..4) {
            0 => RightStem::TopHalf,
            1 => RightStem::BottomHalf,
            2 => RightStem::None,
            _ => RightStem::Full,
        };
        let pos = |rng: &mut ChaCha8Rng| match rng.random_range(0..3) {
            0 => StemPos::Left,
            1 => StemPos::Center,
            _ => StemPos::Right,
        };
        let ascender = ASCENDING.contains(label).then(|| pos(&mut rng));
        let descender = DESCENDING.contains(label).then(|| pos(&mut rng));
        Self {
            width_factor: rng.random_range(0.85..1.2),
            bottom_bar: rng.random_bool(0.6),
            middle_bar: rng.random_bool(0.4),
            right,
            // body rows need a second stem wherever the right one is missing
            center: right != RightStem::Full || rng.random_bool(0.3),
            ascender,
            descender,
        }
    }
}

/// Pixel geometry of one rendered glyph instance.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GlyphMetrics {
    pub x_height: usize,
    pub width: usize,
    pub ascender: usize,
    pub descender: usize,
    pub bar: usize,
    pub stem: usize,
    pub thin: usize,
}

impl GlyphMetrics {
    pub fn new(
        shape: &GlyphShape,
        x_height: usize,
        width_ratio: f64,
        density: f64,
        ascender: usize,
        descender: usize,
    ) -> Self {
        let width = ((x_height as f64 * width_ratio * shape.width_factor).round() as usize).max(4);
        let bar = ((x_height as f64 * density).round() as usize).clamp(1, x_height / 4);
        let stem = ((width as f64 * 0.22).round() as usize).max(1);
        let thin = ((x_height as f64 * 0.08).round() as usize).max(1);
        Self {
            x_height,
            width,
            ascender: if shape.ascender.is_some() { ascender } else { 0 },
            descender: if shape.descender.is_some() { descender } else { 0 },
            bar,
            stem,
            thin,
        }
    }

    /// Rows above the middle zone this glyph inks.
    pub fn top_extent(&self) -> usize {
        self.ascender
    }

    pub fn bottom_extent(&self) -> usize {
        self.descender
    }
}

/// Draws a glyph whose middle zone starts at row `top` and whose left edge is `col`.
pub fn draw(img: &mut BinaryImage, shape: &GlyphShape, m: &GlyphMetrics, top: usize, col: usize) {
    let (xh, w) = (m.x_height, m.width);
    img.fill_rect(top, col, m.bar, w);
    img.fill_rect(top, col, xh, m.stem);
    if shape.bottom_bar {
        img.fill_rect(top + xh - m.bar, col, m.bar, w);
    }
    if shape.middle_bar {
        img.fill_rect(top + (xh - m.bar) / 2, col, m.bar, w);
    }
    let right_col = col + w - m.stem;
    match shape.right {
        RightStem::Full => img.fill_rect(top, right_col, xh, m.stem),
        RightStem::TopHalf => img.fill_rect(top, right_col, xh / 2, m.stem),
        RightStem::BottomHalf => img.fill_rect(top + xh / 2, right_col, xh - xh / 2, m.stem),
        RightStem::None => {}
    }
    if shape.center {
        img.fill_rect(top, col + (w - m.stem) / 2, xh, m.stem);
    }
    let stem_col = |p: StemPos, thick: usize| match p {
        StemPos::Left => col,
        StemPos::Center => col + (w - thick) / 2,
        StemPos::Right => col + w - thick,
    };
    if let Some(p) = shape.ascender {
        if m.ascender > 0 {
            img.fill_rect(top - m.ascender, stem_col(p, m.thin), m.ascender, m.thin);
        }
    }
    if let Some(p) = shape.descender {
        if m.descender > 0 {
            img.fill_rect(top + xh, stem_col(p, m.thin), m.descender, m.thin);
        }
    }
}
