use nalgebra::{DMatrix, DVector};

use super::{SeededRng, Shape, Signal};
use crate::error::{Error, Result};
use crate::spectral::{check_dim, SymMatrix};

/// Linear measurement operator `A`.
///
/// Sampling masks are kept square: `A = diag(mask)` with zeros at the
/// unsampled positions, so `AᵀA = A` and every system stays n-dimensional.
#[derive(Debug, Clone, PartialEq)]
pub enum ForwardModel {
    Identity(usize),
    Mask(Vec<bool>),
    Dense(DMatrix<f64>),
}

impl ForwardModel {
    /// Builds a mask from 0/1 values.
    pub fn mask_from_values(values: &[f64]) -> Result<Self> {
        values
            .iter()
            .map(|&v| match v {
                v if v == 0.0 => Ok(false),
                v if v == 1.0 => Ok(true),
                v => Err(Error::InvalidConfig(format!(
                    "mask entry {v} not in {{0, 1}}"
                ))),
            })
            .collect::<Result<Vec<_>>>()
            .map(ForwardModel::Mask)
    }

    /// Uniformly random mask keeping `round(rate · n)` samples (at least one).
    pub fn random_mask(n: usize, rate: f64, seed: u64) -> Result<Self> {
        if !(0.0..=1.0).contains(&rate) || n == 0 {
            return Err(Error::InvalidConfig(format!(
                "sampling rate {rate} on n = {n}"
            )));
        }
        let keep = ((rate * n as f64).round() as usize).clamp(1, n);
        let mut idx: Vec<usize> = (0..n).collect();
        let mut rng = SeededRng::new(seed);
        // partial Fisher-Yates
        for k in 0..keep {
            let j = k + rng.below(n - k);
            idx.swap(k, j);
        }
        let mut mask = vec![false; n];
        for &i in &idx[..keep] {
            mask[i] = true;
        }
        Ok(ForwardModel::Mask(mask))
    }

    pub fn input_dim(&self) -> usize {
        match self {
            ForwardModel::Identity(n) => *n,
            ForwardModel::Mask(m) => m.len(),
            ForwardModel::Dense(a) => a.ncols(),
        }
    }

    pub fn output_dim(&self) -> usize {
        match self {
            ForwardModel::Identity(n) => *n,
            ForwardModel::Mask(m) => m.len(),
            ForwardModel::Dense(a) => a.nrows(),
        }
    }

    pub fn mask(&self) -> Option<&[bool]> {
        match self {
            ForwardModel::Mask(m) => Some(m),
            _ => None,
        }
    }

    /// `A x`.
    pub fn apply(&self, x: &DVector<f64>) -> Result<DVector<f64>> {
        check_dim(self.input_dim(), x.len())?;
        Ok(match self {
            ForwardModel::Identity(_) => x.clone(),
            ForwardModel::Mask(m) => DVector::from_iterator(
                x.len(),
                x.iter().zip(m).map(|(&v, &k)| if k { v } else { 0.0 }),
            ),
            ForwardModel::Dense(a) => a * x,
        })
    }

    /// `Aᵀ y`.
    pub fn adjoint(&self, y: &DVector<f64>) -> Result<DVector<f64>> {
        check_dim(self.output_dim(), y.len())?;
        Ok(match self {
            ForwardModel::Dense(a) => a.tr_mul(y),
            _ => self.apply(y)?,
        })
    }

    /// `AᵀA` as a symmetric matrix.
    pub fn gram(&self) -> SymMatrix {
        match self {
            ForwardModel::Identity(n) => SymMatrix::identity(*n),
            ForwardModel::Mask(m) => {
                let d: Vec<f64> = m.iter().map(|&k| if k { 1.0 } else { 0.0 }).collect();
                SymMatrix::from_diagonal(&d)
            }
            ForwardModel::Dense(a) => {
                SymMatrix::symmetrize_from_lower(a.tr_mul(a)).expect("AᵀA is square")
            }
        }
    }
}

/// `A x` as a signal. Square models keep the input's shape; a rectangular
/// dense model yields a 1D signal of its output length.
pub fn apply_forward(a: &ForwardModel, x: &Signal) -> Result<Signal> {
    let out = a.apply(x.data())?;
    if out.len() == x.len() {
        x.with_data(out)
    } else {
        Signal::new(Shape::D1(out.len()), out)
    }
}
