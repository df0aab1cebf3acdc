//! Patch embeddings and the distance gate.

use std::path::PathBuf;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::network::{EmbeddingNetwork, EMBEDDING_DIM, INPUT_SIDE};
use crate::document::GrayImage;
use crate::error::{Error, Result};

const FALLBACK_SIDE: usize = 16;

/// Which embedder a configuration asks for.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum EmbedderKind {
    Network {
        weights_path: PathBuf,
    },
    #[default]
    PixelFallback,
}

/// A loaded embedder. Cheap to clone.
#[derive(Debug, Clone)]
pub enum Embedder {
    Network(Arc<EmbeddingNetwork>),
    PixelFallback,
}

impl Embedder {
    pub fn from_kind(kind: &EmbedderKind) -> Result<Self> {
        Ok(match kind {
            EmbedderKind::Network { weights_path } => {
                Embedder::Network(Arc::new(EmbeddingNetwork::load(weights_path)?))
            }
            EmbedderKind::PixelFallback => Embedder::PixelFallback,
        })
    }

    fn side(&self) -> usize {
        match self {
            Embedder::Network(_) => INPUT_SIDE,
            Embedder::PixelFallback => FALLBACK_SIDE,
        }
    }

    /// Resampler taking `h x w` patches to this embedder's input grid.
    pub fn resampler(&self, h: usize, w: usize) -> AreaResampler {
        let side = self.side();
        AreaResampler::new(h, w, side, side)
    }

    /// Embeds a grayscale patch (dark ink on light background).
    pub fn embed(&self, patch: &GrayImage) -> Result<Vec<f32>> {
        let ink: Vec<f32> = patch
            .samples()
            .iter()
            .map(|&v| (255 - v) as f32 / 255.0)
            .collect();
        let rs = self.resampler(patch.height(), patch.width());
        self.embed_ink(&rs, &ink)
    }

    /// Embeds an ink-intensity patch (1 = ink) already laid out for `rs`.
    pub fn embed_ink(&self, rs: &AreaResampler, ink: &[f32]) -> Result<Vec<f32>> {
        let grid = rs.apply(ink);
        let raw = match self {
            Embedder::Network(net) => net.embedding(&grid),
            Embedder::PixelFallback => grid
                .chunks_exact(2)
                .map(|pair| (pair[0] + pair[1]) / 2.0)
                .collect(),
        };
        debug_assert_eq!(raw.len(), EMBEDDING_DIM);
        l2_normalize(raw)
    }
}

fn l2_normalize(mut v: Vec<f32>) -> Result<Vec<f32>> {
    let norm = v.iter().map(|&x| x as f64 * x as f64).sum::<f64>().sqrt();
    if norm == 0.0 {
        return Err(Error::Degenerate("patch embeds to the zero vector".into()));
    }
    v.iter_mut().for_each(|x| *x = (*x as f64 / norm) as f32);
    Ok(v)
}

/// Euclidean distance between two vectors of equal length.
pub fn distance(a: &[f32], b: &[f32]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::Validation(format!(
            "vector lengths differ: {} vs {}",
            a.len(),
            b.len()
        )));
    }
    Ok(distance_unchecked(a, b))
}

pub(crate) fn distance_unchecked(a: &[f32], b: &[f32]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(&x, &y)| {
            let d = x as f64 - y as f64;
            d * d
        })
        .sum::<f64>()
        .sqrt()
}

/// Area-averaging resize between fixed source and destination sizes.
///
/// Each destination pixel averages the source over its footprint, with
/// partial source pixels weighted by overlap. Works for up- and downscaling.
#[derive(Debug, Clone)]
pub struct AreaResampler {
    src_h: usize,
    src_w: usize,
    dst_h: usize,
    dst_w: usize,
    rows: Vec<Vec<(usize, f32)>>,
    cols: Vec<Vec<(usize, f32)>>,
}

impl AreaResampler {
    pub fn new(src_h: usize, src_w: usize, dst_h: usize, dst_w: usize) -> Self {
        Self {
            src_h,
            src_w,
            dst_h,
            dst_w,
            rows: footprints(src_h, dst_h),
            cols: footprints(src_w, dst_w),
        }
    }

    pub fn src_dims(&self) -> (usize, usize) {
        (self.src_h, self.src_w)
    }

    pub fn apply(&self, src: &[f32]) -> Vec<f32> {
        assert_eq!(src.len(), self.src_h * self.src_w, "source size mismatch");
        // horizontal pass: src_h x dst_w
        let mut tmp = vec![0f32; self.src_h * self.dst_w];
        for r in 0..self.src_h {
            let row = &src[r * self.src_w..(r + 1) * self.src_w];
            for (c, taps) in self.cols.iter().enumerate() {
                tmp[r * self.dst_w + c] = taps.iter().map(|&(k, wt)| row[k] * wt).sum();
            }
        }
        let mut out = vec![0f32; self.dst_h * self.dst_w];
        for (r, taps) in self.rows.iter().enumerate() {
            let dst = &mut out[r * self.dst_w..(r + 1) * self.dst_w];
            for &(k, wt) in taps {
                let srow = &tmp[k * self.dst_w..(k + 1) * self.dst_w];
                for (d, s) in dst.iter_mut().zip(srow) {
                    *d += s * wt;
                }
            }
        }
        out
    }
}

/// Normalized overlap weights of source cells under each destination cell.
fn footprints(src: usize, dst: usize) -> Vec<Vec<(usize, f32)>> {
    let scale = src as f64 / dst as f64;
    (0..dst)
        .map(|i| {
            let lo = i as f64 * scale;
            let hi = (i + 1) as f64 * scale;
            let mut taps = Vec::new();
            let mut k = lo.floor() as usize;
            while (k as f64) < hi && k < src {
                let overlap = (hi.min(k as f64 + 1.0) - lo.max(k as f64)).max(0.0);
                if overlap > 0.0 {
                    taps.push((k, (overlap / scale) as f32));
                }
                k += 1;
            }
            taps
        })
        .collect()
}
