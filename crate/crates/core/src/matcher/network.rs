//! Character classifier used as a patch embedder, and its `HWNET1` weight file.
//!
//! Layout: conv-relu-pool x3, dense(128)-relu, dense(36). Convolutions are
//! unpadded cross-correlations with stride 1; pooling is 2x2 stride 2 with
//! floor. Conv weights are stored `(out, in, kh, kw)`, dense weights
//! `(out, in)`, and the flatten between the last pool and the first dense
//! layer is channel-major. The dense(128) activation is the embedding.
//!
//! File layout (little-endian):
//!
//! ```text
//! "HWNET1"  u8 version=1  u32 layer_count
//! per layer: u8 kind (1 conv, 2 maxpool, 3 dense)  u32 ndims  u32 dims[ndims]
//!            conv/dense only: f32 weights[prod(dims)]  f32 bias[dims[0]]
//! ```

use std::io::{self, Read};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

pub const MAGIC: &[u8; 6] = b"HWNET1";
pub const VERSION: u8 = 1;
pub const INPUT_SIDE: usize = 28;
pub const EMBEDDING_DIM: usize = 128;
pub const NUM_CLASSES: usize = 36;

const KIND_CONV: u8 = 1;
const KIND_POOL: u8 = 2;
const KIND_DENSE: u8 = 3;

#[derive(Debug, Clone, PartialEq)]
pub enum Layer {
    Conv {
        out_ch: usize,
        in_ch: usize,
        kh: usize,
        kw: usize,
        weights: Vec<f32>,
        bias: Vec<f32>,
    },
    MaxPool {
        ph: usize,
        pw: usize,
    },
    Dense {
        out: usize,
        inp: usize,
        weights: Vec<f32>,
        bias: Vec<f32>,
    },
}

impl Layer {
    fn kind(&self) -> u8 {
        match self {
            Layer::Conv { .. } => KIND_CONV,
            Layer::MaxPool { .. } => KIND_POOL,
            Layer::Dense { .. } => KIND_DENSE,
        }
    }

    fn dims(&self) -> Vec<usize> {
        match *self {
            Layer::Conv {
                out_ch,
                in_ch,
                kh,
                kw,
                ..
            } => vec![out_ch, in_ch, kh, kw],
            Layer::MaxPool { ph, pw } => vec![ph, pw],
            Layer::Dense { out, inp, .. } => vec![out, inp],
        }
    }
}

/// A validated network. Immutable once built.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingNetwork {
    layers: Vec<Layer>,
}

impl EmbeddingNetwork {
    pub fn new(layers: Vec<Layer>) -> Result<Self> {
        validate(&layers)?;
        Ok(Self { layers })
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    /// Conv widths of this instance.
    pub fn conv_widths(&self) -> Vec<usize> {
        self.layers
            .iter()
            .filter_map(|l| match l {
                Layer::Conv { out_ch, .. } => Some(*out_ch),
                _ => None,
            })
            .collect()
    }

    /// Seeded random weights (uniform, fan-in scaled). `widths` are the conv
    /// output channels; the standard model uses `[32, 64, 128]`.
    pub fn random(widths: [usize; 3], seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut layers = Vec::new();
        let mut in_ch = 1;
        let mut side = INPUT_SIDE;
        for &out_ch in &widths {
            let fan_in = in_ch * 9;
            let bound = (6.0 / fan_in as f32).sqrt();
            layers.push(Layer::Conv {
                out_ch,
                in_ch,
                kh: 3,
                kw: 3,
                weights: (0..out_ch * fan_in)
                    .map(|_| rng.random_range(-bound..bound))
                    .collect(),
                bias: (0..out_ch).map(|_| rng.random_range(0.0..0.05)).collect(),
            });
            layers.push(Layer::MaxPool { ph: 2, pw: 2 });
            in_ch = out_ch;
            side = (side - 2) / 2;
        }
        let flat = in_ch * side * side;
        for (out, inp) in [(EMBEDDING_DIM, flat), (NUM_CLASSES, EMBEDDING_DIM)] {
            let bound = (6.0 / inp as f32).sqrt();
            layers.push(Layer::Dense {
                out,
                inp,
                weights: (0..out * inp)
                    .map(|_| rng.random_range(-bound..bound))
                    .collect(),
                bias: (0..out).map(|_| rng.random_range(0.0..0.05)).collect(),
            });
        }
        Self::new(layers).expect("generated shapes are consistent")
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&bytes).map_err(|e| match e {
            Error::Io { source, .. } => Error::io(path, source),
            other => other,
        })
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = bytes;
        let mut magic = [0u8; 6];
        read_exact(&mut r, &mut magic)?;
        if &magic != MAGIC {
            return Err(Error::Format("bad magic, expected HWNET1".into()));
        }
        let version = read_u8(&mut r)?;
        if version != VERSION {
            return Err(Error::Format(format!("unsupported HWNET1 version {version}")));
        }
        let count = read_u32(&mut r)? as usize;
        if count > 64 {
            return Err(Error::Validation(format!("implausible layer count {count}")));
        }
        let mut layers = Vec::with_capacity(count);
        for _ in 0..count {
            let kind = read_u8(&mut r)?;
            let ndims = read_u32(&mut r)? as usize;
            if ndims > 8 {
                return Err(Error::Validation(format!("implausible dim count {ndims}")));
            }
            let dims = (0..ndims)
                .map(|_| read_u32(&mut r).map(|d| d as usize))
                .collect::<Result<Vec<_>>>()?;
            let layer = match (kind, dims.as_slice()) {
                (KIND_CONV, &[out_ch, in_ch, kh, kw]) => {
                    let weights = read_f32s(&mut r, checked_product(&dims)?)?;
                    let bias = read_f32s(&mut r, out_ch)?;
                    Layer::Conv {
                        out_ch,
                        in_ch,
                        kh,
                        kw,
                        weights,
                        bias,
                    }
                }
                (KIND_POOL, &[ph, pw]) => Layer::MaxPool { ph, pw },
                (KIND_DENSE, &[out, inp]) => {
                    let weights = read_f32s(&mut r, checked_product(&dims)?)?;
                    let bias = read_f32s(&mut r, out)?;
                    Layer::Dense {
                        out,
                        inp,
                        weights,
                        bias,
                    }
                }
                (KIND_CONV | KIND_POOL | KIND_DENSE, _) => {
                    return Err(Error::Validation(format!(
                        "layer kind {kind} has wrong dim count {ndims}"
                    )))
                }
                _ => return Err(Error::Format(format!("unknown layer kind {kind}"))),
            };
            layers.push(layer);
        }
        if !r.is_empty() {
            return Err(Error::Format(format!("{} trailing bytes", r.len())));
        }
        Self::new(layers)
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(MAGIC);
        out.push(VERSION);
        out.extend_from_slice(&(self.layers.len() as u32).to_le_bytes());
        for layer in &self.layers {
            out.push(layer.kind());
            let dims = layer.dims();
            out.extend_from_slice(&(dims.len() as u32).to_le_bytes());
            for d in dims {
                out.extend_from_slice(&(d as u32).to_le_bytes());
            }
            if let Layer::Conv { weights, bias, .. } | Layer::Dense { weights, bias, .. } = layer {
                for v in weights.iter().chain(bias) {
                    out.extend_from_slice(&v.to_le_bytes());
                }
            }
        }
        out
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_bytes()).map_err(|e| Error::io(path, e))
    }

    /// Post-ReLU dense(128) activation for a 28x28 input in `[0, 1]`.
    pub fn embedding(&self, input: &[f32]) -> Vec<f32> {
        self.run(input, true)
    }

    /// Class logits (pre-softmax).
    pub fn logits(&self, input: &[f32]) -> Vec<f32> {
        self.run(input, false)
    }

    pub fn classify(&self, input: &[f32]) -> usize {
        let logits = self.logits(input);
        let mut best = 0;
        for (i, &v) in logits.iter().enumerate() {
            if v > logits[best] {
                best = i;
            }
        }
        best
    }

    fn run(&self, input: &[f32], stop_at_embedding: bool) -> Vec<f32> {
        assert_eq!(input.len(), INPUT_SIDE * INPUT_SIDE, "input must be 28x28");
        let mut act = input.to_vec();
        let (mut ch, mut h, mut w) = (1usize, INPUT_SIDE, INPUT_SIDE);
        let mut dense_seen = 0;
        for layer in &self.layers {
            match layer {
                Layer::Conv {
                    out_ch,
                    kh,
                    kw,
                    weights,
                    bias,
                    ..
                } => {
                    act = conv_relu(&act, ch, h, w, *out_ch, *kh, *kw, weights, bias);
                    ch = *out_ch;
                    h = h - kh + 1;
                    w = w - kw + 1;
                }
                Layer::MaxPool { ph, pw } => {
                    act = max_pool(&act, ch, h, w, *ph, *pw);
                    h /= ph;
                    w /= pw;
                }
                Layer::Dense {
                    inp, weights, bias, ..
                } => {
                    let mut y = bias.clone();
                    for (o, yo) in y.iter_mut().enumerate() {
                        let row = &weights[o * inp..(o + 1) * inp];
                        *yo += row.iter().zip(&act).map(|(a, b)| a * b).sum::<f32>();
                    }
                    dense_seen += 1;
                    if dense_seen == 1 {
                        y.iter_mut().for_each(|v| *v = v.max(0.0));
                        if stop_at_embedding {
                            return y;
                        }
                    }
                    act = y;
                }
            }
        }
        act
    }
}

#[allow(clippy::too_many_arguments)]
fn conv_relu(
    input: &[f32],
    in_ch: usize,
    h: usize,
    w: usize,
    out_ch: usize,
    kh: usize,
    kw: usize,
    weights: &[f32],
    bias: &[f32],
) -> Vec<f32> {
    let (oh, ow) = (h - kh + 1, w - kw + 1);
    let mut out = vec![0f32; out_ch * oh * ow];
    for o in 0..out_ch {
        let plane = &mut out[o * oh * ow..(o + 1) * oh * ow];
        plane.fill(bias[o]);
        for i in 0..in_ch {
            let src = &input[i * h * w..(i + 1) * h * w];
            let k = &weights[((o * in_ch + i) * kh) * kw..((o * in_ch + i + 1) * kh) * kw];
            for ky in 0..kh {
                for kx in 0..kw {
                    let wv = k[ky * kw + kx];
                    for y in 0..oh {
                        let srow = &src[(y + ky) * w + kx..(y + ky) * w + kx + ow];
                        let drow = &mut plane[y * ow..(y + 1) * ow];
                        for (d, s) in drow.iter_mut().zip(srow) {
                            *d += wv * s;
                        }
                    }
                }
            }
        }
        plane.iter_mut().for_each(|v| *v = v.max(0.0));
    }
    out
}

fn max_pool(input: &[f32], ch: usize, h: usize, w: usize, ph: usize, pw: usize) -> Vec<f32> {
    let (oh, ow) = (h / ph, w / pw);
    let mut out = Vec::with_capacity(ch * oh * ow);
    for c in 0..ch {
        for y in 0..oh {
            for x in 0..ow {
                let mut m = f32::NEG_INFINITY;
                for dy in 0..ph {
                    for dx in 0..pw {
                        m = m.max(input[c * h * w + (y * ph + dy) * w + x * pw + dx]);
                    }
                }
                out.push(m);
            }
        }
    }
    out
}

fn validate(layers: &[Layer]) -> Result<()> {
    let expected = [
        KIND_CONV, KIND_POOL, KIND_CONV, KIND_POOL, KIND_CONV, KIND_POOL, KIND_DENSE, KIND_DENSE,
    ];
    let kinds: Vec<u8> = layers.iter().map(Layer::kind).collect();
    if kinds != expected {
        return Err(Error::Validation(format!(
            "layer sequence {kinds:?} is not conv/pool x3 + dense x2"
        )));
    }
    let (mut ch, mut h, mut w) = (1usize, INPUT_SIDE, INPUT_SIDE);
    let mut dense_index = 0;
    for (i, layer) in layers.iter().enumerate() {
        match layer {
            Layer::Conv {
                out_ch,
                in_ch,
                kh,
                kw,
                weights,
                bias,
            } => {
                if *in_ch != ch {
                    return Err(Error::Validation(format!(
                        "layer {i}: conv expects {in_ch} input channels, gets {ch}"
                    )));
                }
                if *out_ch == 0 || *kh == 0 || *kw == 0 || *kh > h || *kw > w {
                    return Err(Error::Validation(format!(
                        "layer {i}: conv kernel {kh}x{kw} x{out_ch} invalid for {h}x{w} input"
                    )));
                }
                debug_assert_eq!(weights.len(), out_ch * in_ch * kh * kw);
                debug_assert_eq!(bias.len(), *out_ch);
                ch = *out_ch;
                h = h - kh + 1;
                w = w - kw + 1;
            }
            Layer::MaxPool { ph, pw } => {
                if (*ph, *pw) != (2, 2) {
                    return Err(Error::Validation(format!(
                        "layer {i}: pooling must be 2x2, got {ph}x{pw}"
                    )));
                }
                if h < 2 || w < 2 {
                    return Err(Error::Validation(format!(
                        "layer {i}: cannot pool a {h}x{w} map"
                    )));
                }
                h /= 2;
                w /= 2;
            }
            Layer::Dense { out, inp, .. } => {
                let (want_in, want_out) = if dense_index == 0 {
                    (ch * h * w, EMBEDDING_DIM)
                } else {
                    (EMBEDDING_DIM, NUM_CLASSES)
                };
                if *inp != want_in || *out != want_out {
                    return Err(Error::Validation(format!(
                        "layer {i}: dense is ({out}, {inp}), expected ({want_out}, {want_in})"
                    )));
                }
                dense_index += 1;
            }
        }
    }
    Ok(())
}

fn truncated() -> Error {
    Error::io(
        "<weights>",
        io::Error::new(io::ErrorKind::UnexpectedEof, "truncated HWNET1 data"),
    )
}

fn read_exact(r: &mut &[u8], buf: &mut [u8]) -> Result<()> {
    r.read_exact(buf).map_err(|_| truncated())
}

fn read_u8(r: &mut &[u8]) -> Result<u8> {
    let mut b = [0u8; 1];
    read_exact(r, &mut b)?;
    Ok(b[0])
}

fn read_u32(r: &mut &[u8]) -> Result<u32> {
    let mut b = [0u8; 4];
    read_exact(r, &mut b)?;
    Ok(u32::from_le_bytes(b))
}

fn read_f32s(r: &mut &[u8], n: usize) -> Result<Vec<f32>> {
    let bytes = n.checked_mul(4).ok_or_else(truncated)?;
    if r.len() < bytes {
        return Err(truncated());
    }
    let (head, tail) = r.split_at(bytes);
    *r = tail;
    Ok(head
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
        .collect())
}

fn checked_product(dims: &[usize]) -> Result<usize> {
    dims.iter()
        .try_fold(1usize, |acc, &d| acc.checked_mul(d))
        .filter(|&n| n <= 1 << 28)
        .ok_or_else(|| Error::Validation(format!("weight tensor {dims:?} too large")))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny() -> EmbeddingNetwork {
        EmbeddingNetwork::random([4, 8, 16], 3)
    }

    #[test]
    fn round_trip_is_byte_identical() {
        let net = tiny();
        let bytes = net.to_bytes();
        assert_eq!(&bytes[..6], b"HWNET1");
        assert_eq!(bytes[6], 1);
        assert_eq!(u32::from_le_bytes(bytes[7..11].try_into().unwrap()), 8);
        let back = EmbeddingNetwork::from_bytes(&bytes).unwrap();
        assert_eq!(back, net);
        assert_eq!(back.to_bytes(), bytes);
    }

    #[test]
    fn standard_widths_load() {
        let net = EmbeddingNetwork::random([32, 64, 128], 1);
        assert_eq!(net.conv_widths(), vec![32, 64, 128]);
        let back = EmbeddingNetwork::from_bytes(&net.to_bytes()).unwrap();
        assert_eq!(back.embedding(&[0.5; 784]).len(), EMBEDDING_DIM);
        assert_eq!(back.logits(&[0.5; 784]).len(), NUM_CLASSES);
    }

    #[test]
    fn bad_magic_and_version() {
        let mut bytes = tiny().to_bytes();
        bytes[0] = b'X';
        assert!(matches!(
            EmbeddingNetwork::from_bytes(&bytes),
            Err(Error::Format(_))
        ));
        let mut bytes = tiny().to_bytes();
        bytes[6] = 2;
        assert!(matches!(
            EmbeddingNetwork::from_bytes(&bytes),
            Err(Error::Format(_))
        ));
    }

    #[test]
    fn truncated_is_io_error() {
        let bytes = tiny().to_bytes();
        for cut in [3, 10, 40, bytes.len() - 1] {
            assert!(
                matches!(
                    EmbeddingNetwork::from_bytes(&bytes[..cut]),
                    Err(Error::Io { .. })
                ),
                "cut at {cut}"
            );
        }
    }

    #[test]
    fn wrong_class_count_rejected() {
        let mut layers = tiny().layers().to_vec();
        layers[7] = Layer::Dense {
            out: 40,
            inp: 128,
            weights: vec![0.0; 40 * 128],
            bias: vec![0.0; 40],
        };
        let bytes = EmbeddingNetwork { layers }.to_bytes();
        assert!(matches!(
            EmbeddingNetwork::from_bytes(&bytes),
            Err(Error::Validation(_))
        ));
    }

    #[test]
    fn channel_mismatch_rejected() {
        let mut layers = tiny().layers().to_vec();
        layers[2] = Layer::Conv {
            out_ch: 8,
            in_ch: 5,
            kh: 3,
            kw: 3,
            weights: vec![0.0; 8 * 5 * 9],
            bias: vec![0.0; 8],
        };
        assert!(matches!(
            EmbeddingNetwork::new(layers),
            Err(Error::Validation(_))
        ));
    }

    #[test]
    fn missing_layer_rejected() {
        let mut layers = tiny().layers().to_vec();
        layers.remove(5);
        assert!(matches!(
            EmbeddingNetwork::new(layers),
            Err(Error::Validation(_))
        ));
    }

    #[test]
    fn embedding_is_nonnegative() {
        let net = tiny();
        let input: Vec<f32> = (0..784).map(|i| ((i * 37) % 100) as f32 / 100.0).collect();
        assert!(net.embedding(&input).iter().all(|&v| v >= 0.0));
    }
}
