//! Signals, noise, forward models, patches, metrics and image I/O.

mod forward;
mod pgm;
mod rng;
mod shepard;

pub use forward::{apply_forward, ForwardModel};
pub use pgm::{decode_pgm, encode_pgm, quantize, read_pgm, write_pgm, write_pgm_as, PgmFormat};
pub use rng::SeededRng;
pub use shepard::{shepard_fill, SHEPARD_DENSE_LIMIT, SHEPARD_NEIGHBORS, SHEPARD_POWER};

use nalgebra::DVector;

use crate::error::{Error, Result};

/// Layout of a signal's samples. 2D data is row-major.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Shape {
    D1(usize),
    D2 { rows: usize, cols: usize },
}

impl Shape {
    pub fn len(&self) -> usize {
        match *self {
            Shape::D1(n) => n,
            Shape::D2 { rows, cols } => rows * cols,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Grid coordinates of linear index `i` as `(row, col)`; 1D signals
    /// live on row 0.
    pub fn coords(&self, i: usize) -> (usize, usize) {
        match *self {
            Shape::D1(_) => (0, i),
            Shape::D2 { cols, .. } => (i / cols, i % cols),
        }
    }
}

/// Real samples plus shape metadata. Values are nominally in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Signal {
    shape: Shape,
    data: DVector<f64>,
}

impl Signal {
    pub fn new(shape: Shape, data: DVector<f64>) -> Result<Self> {
        if shape.len() != data.len() {
            return Err(Error::DimensionMismatch {
                expected: shape.len(),
                got: data.len(),
            });
        }
        if let Some(i) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(i));
        }
        Ok(Signal { shape, data })
    }

    pub fn from_vec(data: Vec<f64>) -> Result<Self> {
        Signal::new(Shape::D1(data.len()), DVector::from_vec(data))
    }

    pub fn image(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        Signal::new(Shape::D2 { rows, cols }, DVector::from_vec(data))
    }

    pub fn constant(shape: Shape, value: f64) -> Self {
        Signal {
            shape,
            data: DVector::from_element(shape.len(), value),
        }
    }

    /// A signal with this signal's shape and new samples.
    pub fn with_data(&self, data: DVector<f64>) -> Result<Self> {
        Signal::new(self.shape, data)
    }

    pub fn shape(&self) -> Shape {
        self.shape
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &DVector<f64> {
        &self.data
    }

    pub fn as_slice(&self) -> &[f64] {
        self.data.as_slice()
    }

    pub fn into_data(self) -> DVector<f64> {
        self.data
    }

    pub fn min(&self) -> f64 {
        self.data.min()
    }

    pub fn max(&self) -> f64 {
        self.data.max()
    }

    /// Crops a `rows × cols` window with top-left corner `(r0, c0)`.
    pub fn crop(&self, r0: usize, c0: usize, rows: usize, cols: usize) -> Result<Signal> {
        let Shape::D2 { rows: h, cols: w } = self.shape else {
            return Err(Error::InvalidConfig("crop needs a 2D signal".into()));
        };
        if r0 + rows > h || c0 + cols > w {
            return Err(Error::InvalidConfig(format!(
                "crop {rows}x{cols}+{r0}+{c0} exceeds {h}x{w}"
            )));
        }
        let mut out = Vec::with_capacity(rows * cols);
        for r in r0..r0 + rows {
            for c in c0..c0 + cols {
                out.push(self.data[r * w + c]);
            }
        }
        Signal::image(rows, cols, out)
    }
}

/// Additive white Gaussian noise: standard deviation and RNG seed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseModel {
    pub sigma: f64,
    pub seed: u64,
}

impl NoiseModel {
    pub fn new(sigma: f64, seed: u64) -> Result<Self> {
        if !(sigma >= 0.0) || !sigma.is_finite() {
            return Err(Error::InvalidConfig(format!(
                "noise sigma {sigma} must be >= 0"
            )));
        }
        Ok(NoiseModel { sigma, seed })
    }
}

/// Seeded piecewise-smooth test signal with values in `[0, 1]`.
///
/// Two or three low-frequency sinusoids plus two to four step
/// discontinuities, affinely mapped onto `[0.05, 0.95]`.
pub fn make_signal_1d(n: usize, seed: u64) -> Result<Signal> {
    if n < 16 {
        return Err(Error::InvalidConfig(format!("signal length {n} < 16")));
    }
    let mut rng = SeededRng::new(seed);
    let waves: Vec<(f64, f64, f64)> = (0..2 + rng.below(2))
        .map(|_| {
            (
                rng.range(0.05, 0.2),
                rng.range(0.5, 3.0),
                rng.range(0.0, 2.0 * std::f64::consts::PI),
            )
        })
        .collect();
    let steps: Vec<(usize, f64)> = (0..2 + rng.below(3))
        .map(|_| {
            let at = n / 10 + rng.below(n * 8 / 10);
            let sign = if rng.uniform() < 0.5 { -1.0 } else { 1.0 };
            (at, sign * rng.range(0.2, 0.5))
        })
        .collect();

    let raw: Vec<f64> = (0..n)
        .map(|i| {
            let t = i as f64 / n as f64;
            let smooth: f64 = waves
                .iter()
                .map(|&(a, f, p)| a * (2.0 * std::f64::consts::PI * f * t + p).sin())
                .sum();
            let jumps: f64 = steps
                .iter()
                .filter(|&&(at, _)| i >= at)
                .map(|&(_, h)| h)
                .sum();
            smooth + jumps
        })
        .collect();
    let lo = raw.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = raw.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let span = if hi > lo { hi - lo } else { 1.0 };
    Signal::from_vec(raw.iter().map(|v| 0.05 + 0.9 * (v - lo) / span).collect())
}

/// Synthetic grayscale test image: smooth background, a bright disc, a dark
/// rectangle, a diagonal edge and a patch of stripes.
pub fn test_image(rows: usize, cols: usize) -> Result<Signal> {
    if rows < 8 || cols < 8 {
        return Err(Error::InvalidConfig(format!(
            "test image {rows}x{cols} too small"
        )));
    }
    let (h, w) = (rows as f64, cols as f64);
    let mut data = Vec::with_capacity(rows * cols);
    for r in 0..rows {
        for c in 0..cols {
            let (y, x) = (r as f64 / h, c as f64 / w);
            let mut v = 0.35 + 0.2 * x + 0.1 * (3.0 * y).sin();
            if (x - 0.3).powi(2) + (y - 0.35).powi(2) < 0.04 {
                v = 0.85;
            }
            if (0.55..0.85).contains(&x) && (0.15..0.4).contains(&y) {
                v = 0.15;
            }
            if x + y > 1.45 {
                v = 0.7;
            }
            if (0.55..0.85).contains(&x) && (0.6..0.8).contains(&y) && x + y <= 1.45 {
                v = if ((x * w) as usize / 2).is_multiple_of(2) {
                    0.25
                } else {
                    0.6
                };
            }
            data.push(v);
        }
    }
    Signal::image(rows, cols, data)
}

/// `y = x + η` with `η` i.i.d. `N(0, σ²)` drawn from the seeded stream.
pub fn add_noise(x: &Signal, nm: &NoiseModel) -> Signal {
    if nm.sigma == 0.0 {
        return x.clone();
    }
    let mut rng = SeededRng::new(nm.seed);
    let data = x.data.map(|v| v + nm.sigma * rng.normal());
    Signal {
        shape: x.shape,
        data,
    }
}

/// Mirror an out-of-range index back into `0..n` without repeating the edge
/// sample: `-1 -> 1`, `n -> n - 2`.
pub fn reflect_index(k: isize, n: usize) -> usize {
    if n == 1 {
        return 0;
    }
    let period = 2 * (n as isize - 1);
    let mut m = k.rem_euclid(period);
    if m >= n as isize {
        m = period - m;
    }
    m as usize
}

/// Window of odd width `d` centered at linear index `i` (reflect padding).
///
/// 1D signals give `d` samples; images give the `d × d` block flattened
/// row-major.
pub fn extract_patch(x: &Signal, i: usize, d: usize) -> Result<Vec<f64>> {
    if d.is_multiple_of(2) {
        return Err(Error::InvalidConfig(format!("patch size {d} must be odd")));
    }
    if i >= x.len() {
        return Err(Error::InvalidConfig(format!(
            "patch center {i} outside signal of length {}",
            x.len()
        )));
    }
    let half = (d / 2) as isize;
    match x.shape {
        Shape::D1(n) => Ok((-half..=half)
            .map(|o| x.data[reflect_index(i as isize + o, n)])
            .collect()),
        Shape::D2 { rows, cols } => {
            let (r, c) = ((i / cols) as isize, (i % cols) as isize);
            let mut out = Vec::with_capacity(d * d);
            for dr in -half..=half {
                let rr = reflect_index(r + dr, rows);
                for dc in -half..=half {
                    out.push(x.data[rr * cols + reflect_index(c + dc, cols)]);
                }
            }
            Ok(out)
        }
    }
}

/// Mean squared error `‖a − b‖² / n`.
pub fn mse(a: &Signal, b: &Signal) -> Result<f64> {
    if a.shape != b.shape {
        return Err(Error::DimensionMismatch {
            expected: a.len(),
            got: b.len(),
        });
    }
    if a.is_empty() {
        return Ok(0.0);
    }
    Ok((&a.data - &b.data).norm_squared() / a.len() as f64)
}

/// PSNR cap used when the signals coincide.
pub const PSNR_CAP: f64 = 300.0;

/// `10 log10(peak² / mse)`, capped at 300 dB.
pub fn psnr(a: &Signal, b: &Signal, peak: f64) -> Result<f64> {
    let e = mse(a, b)?;
    if e == 0.0 {
        return Ok(PSNR_CAP);
    }
    Ok((10.0 * (peak * peak / e).log10()).min(PSNR_CAP))
}
