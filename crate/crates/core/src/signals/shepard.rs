use super::{ForwardModel, Signal};
use crate::error::{Error, Result};
use crate::spectral::check_dim;

/// Inverse-distance power.
pub const SHEPARD_POWER: i32 = 2;
/// Up to this many samples, every sampled pixel contributes.
pub const SHEPARD_DENSE_LIMIT: usize = 4096;
/// Neighborhood size beyond [`SHEPARD_DENSE_LIMIT`].
pub const SHEPARD_NEIGHBORS: usize = 64;

/// Shepard (inverse-distance-weighted) interpolation of the unsampled
/// entries of `y`. Sampled entries pass through unchanged.
///
/// Distances are Euclidean on the sample grid. Each missing value is the
/// `1/d²`-weighted mean of all sampled values when the signal has at most
/// 4096 samples, else of its 64 nearest sampled neighbours (ties broken by
/// index).
pub fn shepard_fill(y: &Signal, mask: &ForwardModel) -> Result<Signal> {
    let keep = mask
        .mask()
        .ok_or_else(|| Error::InvalidConfig("shepard_fill needs a sampling mask".into()))?;
    check_dim(y.len(), keep.len())?;
    let shape = y.shape();
    let known: Vec<(f64, f64, f64)> = keep
        .iter()
        .enumerate()
        .filter(|(_, &k)| k)
        .map(|(i, _)| {
            let (r, c) = shape.coords(i);
            (r as f64, c as f64, y.data()[i])
        })
        .collect();
    if known.is_empty() {
        return Err(Error::EmptyMask);
    }

    let dense = y.len() <= SHEPARD_DENSE_LIMIT;
    let mut out = y.data().clone();
    let mut dist: Vec<(f64, usize)> = Vec::with_capacity(known.len());
    for (i, &k) in keep.iter().enumerate() {
        if k {
            continue;
        }
        let (r, c) = shape.coords(i);
        let (r, c) = (r as f64, c as f64);
        dist.clear();
        dist.extend(
            known
                .iter()
                .enumerate()
                .map(|(j, &(kr, kc, _))| ((kr - r).powi(2) + (kc - c).powi(2), j)),
        );
        if !dense && dist.len() > SHEPARD_NEIGHBORS {
            dist.select_nth_unstable_by(SHEPARD_NEIGHBORS - 1, |a, b| {
                a.0.total_cmp(&b.0).then(a.1.cmp(&b.1))
            });
            dist.truncate(SHEPARD_NEIGHBORS);
            dist.sort_by_key(|&(_, j)| j);
        }
        let (mut num, mut den) = (0.0, 0.0);
        for &(d2, j) in &dist {
            // d² > 0 because i is unsampled; power 2 means weight 1/d².
            let w = 1.0 / d2.powi(SHEPARD_POWER / 2);
            num += w * known[j].2;
            den += w;
        }
        out[i] = num / den;
    }
    y.with_data(out)
}
