use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A normally distributed quantity: `jitter` is the standard deviation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Spread {
    pub mean: f64,
    pub jitter: f64,
}

impl Spread {
    pub const fn new(mean: f64, jitter: f64) -> Self {
        Self { mean, jitter }
    }

    pub fn sample(&self, rng: &mut impl Rng) -> f64 {
        Normal::new(self.mean, self.jitter)
            .expect("validated spread")
            .sample(rng)
    }
}

/// Parameters of one synthetic writer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WriterProfile {
    pub name: String,
    /// x-height in pixels.
    pub middle_height: Spread,
    /// Ascender length as a fraction of the x-height.
    pub upper_ratio: Spread,
    /// Descender length as a fraction of the x-height.
    pub lower_ratio: Spread,
    pub word_gap: Spread,
    pub intra_gap: Spread,
    /// Horizontal bar thickness as a fraction of the x-height.
    pub ink_density: Spread,
    pub glyph_width_ratio: Spread,
    pub glyph_seed: u64,
}

impl WriterProfile {
    pub fn validate(&self) -> Result<()> {
        let fields = [
            ("middle_height", self.middle_height),
            ("upper_ratio", self.upper_ratio),
            ("lower_ratio", self.lower_ratio),
            ("word_gap", self.word_gap),
            ("intra_gap", self.intra_gap),
            ("ink_density", self.ink_density),
            ("glyph_width_ratio", self.glyph_width_ratio),
        ];
        for (name, s) in fields {
            if !(s.mean > 0.0) || !(s.jitter >= 0.0) || !s.mean.is_finite() || !s.jitter.is_finite()
            {
                return Err(Error::Validation(format!(
                    "profile {}: {name} needs mean > 0 and jitter >= 0, got {s:?}",
                    self.name
                )));
            }
        }
        Ok(())
    }

    pub fn example() -> Self {
        Self {
            name: "example".into(),
            middle_height: Spread::new(20.0, 0.8),
            upper_ratio: Spread::new(0.6, 0.03),
            lower_ratio: Spread::new(0.5, 0.03),
            word_gap: Spread::new(26.0, 2.0),
            intra_gap: Spread::new(2.0, 0.5),
            ink_density: Spread::new(0.12, 0.0),
            glyph_width_ratio: Spread::new(0.7, 0.03),
            glyph_seed: 1,
        }
    }
}

/// Knobs for a family of writers whose means differ by at least
/// `separation` within-writer standard deviations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WriterFamily {
    pub writers: usize,
    pub separation: f64,
    pub seed: u64,
}

impl Default for WriterFamily {
    fn default() -> Self {
        Self {
            writers: 20,
            separation: 3.0,
            seed: 7,
        }
    }
}

const MIDDLE_JITTER: f64 = 0.8;
const RATIO_JITTER: f64 = 0.03;
const GAP_JITTER: f64 = 2.0;
const WIDTH_JITTER: f64 = 0.03;

impl WriterFamily {
    /// Draws writer profiles by rejection sampling: every pair must be at
    /// least `separation` standardized units apart in (x-height, ascender
    /// ratio, descender ratio, word gap, glyph width).
    pub fn profiles(&self) -> Result<Vec<WriterProfile>> {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let mut means: Vec<[f64; 5]> = Vec::new();
        let scale = [MIDDLE_JITTER, RATIO_JITTER, RATIO_JITTER, GAP_JITTER, WIDTH_JITTER];
        let mut attempts = 0;
        while means.len() < self.writers {
            attempts += 1;
            if attempts > 200_000 {
                return Err(Error::Validation(format!(
                    "cannot place {} writers {} sigma apart",
                    self.writers, self.separation
                )));
            }
            let cand = [
                rng.random_range(16.0..30.0),
                rng.random_range(0.45..0.95),
                rng.random_range(0.45..0.95),
                rng.random_range(18.0..48.0),
                rng.random_range(0.55..0.9),
            ];
            let far_enough = means.iter().all(|m| {
                let d2: f64 = m
                    .iter()
                    .zip(&cand)
                    .zip(&scale)
                    .map(|((a, b), s)| ((a - b) / s).powi(2))
                    .sum();
                d2.sqrt() >= self.separation
            });
            if far_enough {
                means.push(cand);
            }
        }
        Ok(means
            .into_iter()
            .enumerate()
            .map(|(i, m)| WriterProfile {
                name: format!("w{:02}", i + 1),
                middle_height: Spread::new(m[0], MIDDLE_JITTER),
                upper_ratio: Spread::new(m[1], RATIO_JITTER),
                lower_ratio: Spread::new(m[2], RATIO_JITTER),
                word_gap: Spread::new(m[3], GAP_JITTER),
                intra_gap: Spread::new(rng.random_range(1.0..3.0), 0.5),
                ink_density: Spread::new(rng.random_range(0.1..0.15), 0.0),
                glyph_width_ratio: Spread::new(m[4], WIDTH_JITTER),
                glyph_seed: rng.random(),
            })
            .collect())
    }
}
