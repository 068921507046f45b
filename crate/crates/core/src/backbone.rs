//! Frozen feature extractors that feed the trainable head.
//!
//! Samples are `(height, width, channels)` tensors stored row-major with the
//! channel index fastest, with values already scaled to `[0, 1]` for image
//! data. None of these extractors is ever trained.

use std::fmt;
use std::str::FromStr;

use crate::error::{check_dim, Error, Result};
use crate::rng::SeededRng;
use crate::tensor::{matvec_into, DenseMatrix, DenseVector};

const CONV1_FILTERS: usize = 4;
const CONV2_FILTERS: usize = 8;
const KERNEL: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Shape {
    pub height: usize,
    pub width: usize,
    pub channels: usize,
}

impl Shape {
    pub fn new(height: usize, width: usize, channels: usize) -> Self {
        Self {
            height,
            width,
            channels,
        }
    }

    pub fn len(&self) -> usize {
        self.height * self.width * self.channels
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

impl fmt::Display for Shape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}x{}x{}", self.height, self.width, self.channels)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BackboneKind {
    Flatten,
    RandomProjection,
    TinyConv,
}

impl BackboneKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            BackboneKind::Flatten => "flatten",
            BackboneKind::RandomProjection => "randproj",
            BackboneKind::TinyConv => "tinyconv",
        }
    }
}

impl fmt::Display for BackboneKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for BackboneKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "flatten" => Ok(BackboneKind::Flatten),
            "randproj" => Ok(BackboneKind::RandomProjection),
            "tinyconv" => Ok(BackboneKind::TinyConv),
            other => Err(Error::config(
                "backbone",
                format!("unknown backbone `{other}` (expected flatten|randproj|tinyconv)"),
            )),
        }
    }
}

/// Describes a frozen extractor. `seed` drives weight initialization for the
/// random kinds and is ignored by `Flatten`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BackboneSpec {
    pub kind: BackboneKind,
    pub input_shape: Shape,
    pub output_dim: usize,
    pub seed: u64,
}

impl BackboneSpec {
    pub fn flatten(input_shape: Shape) -> Self {
        Self {
            kind: BackboneKind::Flatten,
            input_shape,
            output_dim: input_shape.len(),
            seed: 0,
        }
    }

    pub fn random_projection(input_shape: Shape, output_dim: usize, seed: u64) -> Self {
        Self {
            kind: BackboneKind::RandomProjection,
            input_shape,
            output_dim,
            seed,
        }
    }

    pub fn tiny_conv(input_shape: Shape, seed: u64) -> Self {
        Self {
            kind: BackboneKind::TinyConv,
            input_shape,
            output_dim: tiny_conv_output_dim(input_shape),
            seed,
        }
    }

    /// Builds a spec of the given kind with its natural output size.
    /// `projection_dim` only matters for `RandomProjection`.
    pub fn for_kind(
        kind: BackboneKind,
        input_shape: Shape,
        projection_dim: usize,
        seed: u64,
    ) -> Self {
        match kind {
            BackboneKind::Flatten => Self::flatten(input_shape),
            BackboneKind::RandomProjection => {
                Self::random_projection(input_shape, projection_dim, seed)
            }
            BackboneKind::TinyConv => Self::tiny_conv(input_shape, seed),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let s = self.input_shape;
        if s.is_empty() {
            return Err(Error::invalid(format!("backbone input shape {s} is empty")));
        }
        if self.output_dim == 0 {
            return Err(Error::invalid("backbone output_dim must be positive"));
        }
        match self.kind {
            BackboneKind::Flatten => check_dim("flatten output_dim", s.len(), self.output_dim),
            BackboneKind::RandomProjection => Ok(()),
            BackboneKind::TinyConv => {
                if s.height < 4 || s.width < 4 {
                    return Err(Error::invalid(format!(
                        "tinyconv needs at least 4x4 inputs, got {s}"
                    )));
                }
                check_dim(
                    "tinyconv output_dim",
                    tiny_conv_output_dim(s),
                    self.output_dim,
                )
            }
        }
    }
}

fn tiny_conv_output_dim(s: Shape) -> usize {
    CONV2_FILTERS * (s.height / 4) * (s.width / 4)
}

#[derive(Debug, Clone)]
struct ConvLayer {
    in_channels: usize,
    out_channels: usize,
    /// `[out][in][ky][kx]`, flattened.
    weights: Vec<f64>,
}

impl ConvLayer {
    fn random(in_channels: usize, out_channels: usize, rng: &mut SeededRng) -> Self {
        let fan_in = (KERNEL * KERNEL * in_channels) as f64;
        let fan_out = (KERNEL * KERNEL * out_channels) as f64;
        let s = (6.0 / (fan_in + fan_out)).sqrt();
        let weights = (0..out_channels * in_channels * KERNEL * KERNEL)
            .map(|_| rng.uniform(-s, s))
            .collect();
        Self {
            in_channels,
            out_channels,
            weights,
        }
    }

    /// Zero-padded 3x3 convolution followed by ReLU and 2x2 mean pooling with
    /// stride 2 (trailing odd rows/columns are dropped). HWC layout in and out.
    fn forward(&self, input: &[f64], h: usize, w: usize) -> (Vec<f64>, usize, usize) {
        let (cin, cout) = (self.in_channels, self.out_channels);
        let mut conv = vec![0.0; h * w * cout];
        for y in 0..h {
            for x in 0..w {
                for o in 0..cout {
                    let mut acc = 0.0;
                    for ky in 0..KERNEL {
                        let iy = y as isize + ky as isize - 1;
                        if iy < 0 || iy >= h as isize {
                            continue;
                        }
                        for kx in 0..KERNEL {
                            let ix = x as isize + kx as isize - 1;
                            if ix < 0 || ix >= w as isize {
                                continue;
                            }
                            let base = (iy as usize * w + ix as usize) * cin;
                            for c in 0..cin {
                                let wi = ((o * cin + c) * KERNEL + ky) * KERNEL + kx;
                                acc += self.weights[wi] * input[base + c];
                            }
                        }
                    }
                    conv[(y * w + x) * cout + o] = acc.max(0.0);
                }
            }
        }
        let (ph, pw) = (h / 2, w / 2);
        let mut pooled = vec![0.0; ph * pw * cout];
        for y in 0..ph {
            for x in 0..pw {
                for o in 0..cout {
                    let at = |yy: usize, xx: usize| conv[(yy * w + xx) * cout + o];
                    let sum = at(2 * y, 2 * x)
                        + at(2 * y, 2 * x + 1)
                        + at(2 * y + 1, 2 * x)
                        + at(2 * y + 1, 2 * x + 1);
                    pooled[(y * pw + x) * cout + o] = 0.25 * sum;
                }
            }
        }
        (pooled, ph, pw)
    }
}

#[derive(Debug, Clone)]
enum Params {
    Flatten,
    Projection(DenseMatrix),
    TinyConv(ConvLayer, ConvLayer),
}

/// A materialized extractor with its frozen parameters.
#[derive(Debug, Clone)]
pub struct Backbone {
    spec: BackboneSpec,
    params: Params,
}

impl Backbone {
    pub fn new(spec: BackboneSpec) -> Result<Self> {
        spec.validate()?;
        let mut rng = SeededRng::new(spec.seed);
        let params = match spec.kind {
            BackboneKind::Flatten => Params::Flatten,
            BackboneKind::RandomProjection => Params::Projection(unit_row_gaussian(
                spec.output_dim,
                spec.input_shape.len(),
                &mut rng,
            )),
            BackboneKind::TinyConv => {
                let c1 = ConvLayer::random(spec.input_shape.channels, CONV1_FILTERS, &mut rng);
                let c2 = ConvLayer::random(CONV1_FILTERS, CONV2_FILTERS, &mut rng);
                Params::TinyConv(c1, c2)
            }
        };
        Ok(Self { spec, params })
    }

    pub fn spec(&self) -> &BackboneSpec {
        &self.spec
    }

    pub fn output_dim(&self) -> usize {
        self.spec.output_dim
    }

    /// The projection matrix of a `RandomProjection` backbone.
    pub fn projection(&self) -> Option<&DenseMatrix> {
        match &self.params {
            Params::Projection(p) => Some(p),
            _ => None,
        }
    }

    pub fn extract(&self, sample: &[f64]) -> Result<DenseVector> {
        check_dim("backbone input", self.spec.input_shape.len(), sample.len())?;
        let out = match &self.params {
            Params::Flatten => sample.to_vec(),
            Params::Projection(p) => {
                let mut out = vec![0.0; p.rows()];
                matvec_into(p, sample, &mut out);
                out
            }
            Params::TinyConv(c1, c2) => {
                let s = self.spec.input_shape;
                let (a, h, w) = c1.forward(sample, s.height, s.width);
                c2.forward(&a, h, w).0
            }
        };
        DenseVector::new(out)
    }
}

/// One-shot extraction; prefer building a [`Backbone`] once for many samples.
pub fn extract(spec: &BackboneSpec, sample: &[f64]) -> Result<DenseVector> {
    Backbone::new(*spec)?.extract(sample)
}

fn unit_row_gaussian(rows: usize, cols: usize, rng: &mut SeededRng) -> DenseMatrix {
    let mut m = DenseMatrix::from_fn(rows, cols, |_, _| rng.normal());
    for r in 0..rows {
        let row = m.row_mut(r);
        let norm = row.iter().map(|v| v * v).sum::<f64>().sqrt();
        row.iter_mut().for_each(|v| *v /= norm);
    }
    m
}
