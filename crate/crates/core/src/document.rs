//! Raster types, image ingestion and global binarization.

use std::io::Cursor;
use std::path::Path;

use image::{ColorType, DynamicImage, ImageFormat, ImageReader};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// 8-bit luminance raster, row-major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GrayImage {
    width: usize,
    height: usize,
    samples: Vec<u8>,
}

impl GrayImage {
    pub fn new(width: usize, height: usize, samples: Vec<u8>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::Validation(format!(
                "image dimensions must be positive, got {width}x{height}"
            )));
        }
        if samples.len() != width * height {
            return Err(Error::Validation(format!(
                "expected {} samples for {width}x{height}, got {}",
                width * height,
                samples.len()
            )));
        }
        Ok(Self {
            width,
            height,
            samples,
        })
    }

    pub fn filled(width: usize, height: usize, value: u8) -> Result<Self> {
        Self::new(width, height, vec![value; width * height])
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn samples(&self) -> &[u8] {
        &self.samples
    }

    pub fn get(&self, row: usize, col: usize) -> u8 {
        self.samples[row * self.width + col]
    }

    /// Light-on-dark captures (some tablet exports) must be flipped before binarization.
    pub fn inverted(&self) -> Self {
        Self {
            width: self.width,
            height: self.height,
            samples: self.samples.iter().map(|&v| 255 - v).collect(),
        }
    }

    pub fn to_png_bytes(&self) -> Result<Vec<u8>> {
        let buf = image::GrayImage::from_raw(
            self.width as u32,
            self.height as u32,
            self.samples.clone(),
        )
        .expect("sample count checked at construction");
        let mut out = Cursor::new(Vec::new());
        buf.write_to(&mut out, ImageFormat::Png)
            .map_err(|e| Error::Format(e.to_string()))?;
        Ok(out.into_inner())
    }

    pub fn save_png(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let bytes = self.to_png_bytes()?;
        std::fs::write(path, bytes).map_err(|e| Error::io(path, e))
    }
}

/// Ink mask: 1 = ink (dark), 0 = background.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BinaryImage {
    width: usize,
    height: usize,
    mask: Vec<u8>,
}

impl BinaryImage {
    pub fn new(width: usize, height: usize, mask: Vec<u8>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::Validation(format!(
                "image dimensions must be positive, got {width}x{height}"
            )));
        }
        if mask.len() != width * height {
            return Err(Error::Validation(format!(
                "expected {} mask values for {width}x{height}, got {}",
                width * height,
                mask.len()
            )));
        }
        if let Some(bad) = mask.iter().find(|&&v| v > 1) {
            return Err(Error::Validation(format!("mask value {bad} is not 0 or 1")));
        }
        Ok(Self {
            width,
            height,
            mask,
        })
    }

    pub fn blank(width: usize, height: usize) -> Result<Self> {
        Self::new(width, height, vec![0; width * height])
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn mask(&self) -> &[u8] {
        &self.mask
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> u8 {
        self.mask[row * self.width + col]
    }

    #[inline]
    pub fn set(&mut self, row: usize, col: usize, ink: bool) {
        self.mask[row * self.width + col] = ink as u8;
    }

    /// Fills the rectangle `[row, row + h) x [col, col + w)` with ink, clipped to the raster.
    pub fn fill_rect(&mut self, row: usize, col: usize, h: usize, w: usize) {
        let r1 = (row + h).min(self.height);
        let c1 = (col + w).min(self.width);
        for r in row.min(r1)..r1 {
            let base = r * self.width;
            self.mask[base + col.min(c1)..base + c1].fill(1);
        }
    }

    pub fn ink_count(&self) -> usize {
        self.mask.iter().map(|&v| v as usize).sum()
    }

    pub fn crop(&self, row: usize, col: usize, h: usize, w: usize) -> Result<Self> {
        if h == 0
            || w == 0
            || row.checked_add(h).is_none_or(|e| e > self.height)
            || col.checked_add(w).is_none_or(|e| e > self.width)
        {
            return Err(Error::Validation(format!(
                "crop ({row}, {col}, {h}, {w}) outside {}x{} image",
                self.width, self.height
            )));
        }
        let mut mask = Vec::with_capacity(h * w);
        for r in row..row + h {
            let base = r * self.width + col;
            mask.extend_from_slice(&self.mask[base..base + w]);
        }
        Ok(Self {
            width: w,
            height: h,
            mask,
        })
    }

    /// Copies `src` into this raster with its top-left corner at `(row, col)`.
    pub fn blit(&mut self, src: &BinaryImage, row: usize, col: usize) {
        for r in 0..src.height.min(self.height.saturating_sub(row)) {
            for c in 0..src.width.min(self.width.saturating_sub(col)) {
                self.mask[(row + r) * self.width + col + c] = src.get(r, c);
            }
        }
    }

    /// Nearest-neighbour integer upscale.
    pub fn upscale(&self, factor: usize) -> Self {
        let factor = factor.max(1);
        let (w, h) = (self.width * factor, self.height * factor);
        let mut mask = Vec::with_capacity(w * h);
        for r in 0..h {
            for c in 0..w {
                mask.push(self.get(r / factor, c / factor));
            }
        }
        Self {
            width: w,
            height: h,
            mask,
        }
    }

    /// Renders ink as 0 and background as 255.
    pub fn to_gray(&self) -> GrayImage {
        GrayImage {
            width: self.width,
            height: self.height,
            samples: self.mask.iter().map(|&v| if v == 1 { 0 } else { 255 }).collect(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", tag = "method", content = "threshold")]
pub enum BinarizeMethod {
    Otsu,
    Fixed(u8),
}

/// Method tag plus the threshold actually applied.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Binarization {
    pub method: String,
    pub threshold: u8,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum Medium {
    #[default]
    #[serde(rename = "paper-scan")]
    PaperScan,
    #[serde(rename = "tablet")]
    Tablet,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DocumentRecord {
    pub id: String,
    pub source_path: String,
    pub binarization: Binarization,
    pub medium: Medium,
}

pub fn load_gray(path: impl AsRef<Path>) -> Result<GrayImage> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_gray(&bytes)
}

/// Decodes PNG or binary PGM bytes into luminance.
///
/// Colour inputs use BT.601 weights with round-half-up, computed in integer
/// arithmetic so the result is exact.
pub fn decode_gray(bytes: &[u8]) -> Result<GrayImage> {
    let reader = ImageReader::new(Cursor::new(bytes))
        .with_guessed_format()
        .map_err(|e| Error::Format(e.to_string()))?;
    match reader.format() {
        Some(ImageFormat::Png) | Some(ImageFormat::Pnm) => {}
        Some(other) => return Err(Error::Format(format!("{other:?} is not supported"))),
        None => return Err(Error::Format("unrecognized image data".into())),
    }
    let img = reader.decode().map_err(|e| match e {
        image::ImageError::Unsupported(u) => Error::Format(u.to_string()),
        image::ImageError::Limits(l) => Error::Validation(l.to_string()),
        other => Error::Format(other.to_string()),
    })?;
    from_dynamic(&img)
}

fn from_dynamic(img: &DynamicImage) -> Result<GrayImage> {
    let (w, h) = (img.width() as usize, img.height() as usize);
    if w == 0 || h == 0 {
        return Err(Error::Validation("image has zero dimension".into()));
    }
    let samples = if has_color(img.color()) {
        img.to_rgb8()
            .pixels()
            .map(|p| bt601(p.0[0], p.0[1], p.0[2]))
            .collect()
    } else {
        img.to_luma8().into_raw()
    };
    GrayImage::new(w, h, samples)
}

fn has_color(c: ColorType) -> bool {
    !matches!(
        c,
        ColorType::L8 | ColorType::L16 | ColorType::La8 | ColorType::La16
    )
}

/// `round(0.299 R + 0.587 G + 0.114 B)`, halves rounded up.
pub fn bt601(r: u8, g: u8, b: u8) -> u8 {
    let acc = 299 * r as u32 + 587 * g as u32 + 114 * b as u32;
    ((acc + 500) / 1000) as u8
}

/// Threshold applied by `binarize`: ink iff `sample < threshold`.
pub fn otsu_threshold(img: &GrayImage) -> Result<u8> {
    let mut hist = [0u64; 256];
    for &v in img.samples() {
        hist[v as usize] += 1;
    }
    otsu_from_histogram(&hist)
}

/// Maximizes between-class variance over splits `{v < t}` / `{v >= t}`, `t` in 1..=255.
/// Equal scores keep the lowest `t`.
pub fn otsu_from_histogram(hist: &[u64; 256]) -> Result<u8> {
    let distinct = hist.iter().filter(|&&c| c > 0).count();
    if distinct < 2 {
        return Err(Error::Degenerate(
            "constant image has no two intensity classes".into(),
        ));
    }
    let total: u64 = hist.iter().sum();
    let total_sum: u64 = hist.iter().enumerate().map(|(v, &c)| v as u64 * c).sum();

    let mut best_t = 1u8;
    let mut best_score = f64::NEG_INFINITY;
    let (mut n0, mut s0) = (0u64, 0u64);
    for t in 1..=255usize {
        n0 += hist[t - 1];
        s0 += (t as u64 - 1) * hist[t - 1];
        let n1 = total - n0;
        if n0 == 0 || n1 == 0 {
            continue;
        }
        let s1 = total_sum - s0;
        // n0 n1 (mu0 - mu1)^2 scaled by total^2 is (s0 n1 - s1 n0)^2 / (n0 n1);
        // identical splits yield bit-identical scores.
        let diff = s0 as i128 * n1 as i128 - s1 as i128 * n0 as i128;
        let score = (diff as f64) * (diff as f64) / (n0 as f64 * n1 as f64);
        if score > best_score {
            best_score = score;
            best_t = t as u8;
        }
    }
    Ok(best_t)
}

/// Returns the mask together with the threshold that produced it.
pub fn binarize(img: &GrayImage, method: BinarizeMethod) -> Result<(BinaryImage, Binarization)> {
    let (threshold, tag) = match method {
        BinarizeMethod::Otsu => (otsu_threshold(img)?, "otsu"),
        BinarizeMethod::Fixed(t) => (t, "fixed"),
    };
    let mask = img.samples().iter().map(|&v| (v < threshold) as u8).collect();
    let bin = BinaryImage {
        width: img.width,
        height: img.height,
        mask,
    };
    Ok((
        bin,
        Binarization {
            method: tag.to_string(),
            threshold,
        },
    ))
}

/// Otsu, falling back to `fixed(128)` on constant images.
pub fn binarize_auto(img: &GrayImage) -> (BinaryImage, Binarization) {
    match binarize(img, BinarizeMethod::Otsu) {
        Ok(out) => out,
        Err(_) => binarize(img, BinarizeMethod::Fixed(128)).expect("fixed threshold never fails"),
    }
}
