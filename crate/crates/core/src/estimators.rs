//! Closed-form graph-Laplacian and PnP denoisers and their per-eigenmode
//! error analysis.
//!
//! With `W = U S Uᵀ`, both estimators act diagonally in the eigenbasis:
//!
//! * Laplacian: `x̂_L = [(1+α)I − αW]⁻¹ y`, gain `1 / (1 + α − αs)`.
//! * PnP: `x̂_P = [(1−α)I + αW⁻¹]⁻¹ y`, gain `s / ((1−α)s + α)`.
//!
//! The PnP gain vanishes as `s → 0` while the Laplacian gain tends to
//! `1/(1+α)`. This is why PnP suppresses noise living in the trailing
//! modes of an oracle filter.

use nalgebra::DVector;

use crate::error::{Error, Result};
use crate::graph_filter::GraphFilter;
use crate::signals::{ForwardModel, Signal};
use crate::spectral::{check_dim, solve_spd, SpectralDecomp, SymMatrix};
use crate::table::{Cell, Table};

/// Kept eigenvalues of the truncated estimator must exceed this.
pub const TRUNCATION_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EstimatorConfig {
    /// Regularization weight (ρ for PnP, λ for the Laplacian).
    pub alpha: f64,
    /// Observation noise standard deviation.
    pub sigma_eta: f64,
}

impl EstimatorConfig {
    pub fn new(alpha: f64, sigma_eta: f64) -> Result<Self> {
        let cfg = EstimatorConfig { alpha, sigma_eta };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0) || !self.alpha.is_finite() {
            return Err(Error::InvalidConfig(format!(
                "alpha = {} must be > 0",
                self.alpha
            )));
        }
        if !(self.sigma_eta >= 0.0) || !self.sigma_eta.is_finite() {
            return Err(Error::InvalidConfig(format!(
                "sigma_eta = {} must be >= 0",
                self.sigma_eta
            )));
        }
        Ok(())
    }

    /// The PnP estimators additionally need `alpha <= 1`.
    pub fn validate_pnp(&self) -> Result<()> {
        self.validate()?;
        if self.alpha > 1.0 {
            return Err(Error::InvalidConfig(format!(
                "alpha = {} must lie in (0, 1] for the PnP estimator",
                self.alpha
            )));
        }
        Ok(())
    }
}

/// Eigenvalue of `A_L⁻¹` for a filter eigenvalue `s`.
pub fn laplacian_gain(s: f64, alpha: f64) -> f64 {
    1.0 / (1.0 + alpha - alpha * s)
}

/// Eigenvalue of `A_P⁻¹` for a filter eigenvalue `s`.
pub fn pnp_gain(s: f64, alpha: f64) -> f64 {
    s / ((1.0 - alpha) * s + alpha)
}

/// Residual of `(I − W)⁻¹ − (W⁻¹ − I)⁻¹ = I` on an eigenvalue `s ∈ (0, 1)`,
/// relative to the largest term `1/(1 − s)`.
///
/// The identity fails on the eigenvalue-1 subspace, where `I − W` is
/// singular; the per-eigenvalue form is the meaningful statement.
pub fn duality_residual(s: f64) -> f64 {
    let lap = 1.0 / (1.0 - s);
    let pnp = s / (1.0 - s);
    (lap - pnp - 1.0).abs() / lap.abs().max(1.0)
}

/// Solves `[(1+α)I − αW] x̂ = y` directly (Cholesky), without the
/// eigendecomposition.
pub fn estimate_laplacian(y: &Signal, w: &GraphFilter, cfg: &EstimatorConfig) -> Result<Signal> {
    cfg.validate()?;
    check_dim(w.dim(), y.len())?;
    let a = w.matrix().affine_identity(-cfg.alpha, 1.0 + cfg.alpha);
    y.with_data(solve_spd(&a, y.data())?)
}

/// Graph-Laplacian reconstruction under a forward model: solves
/// `(AᵀA + λ(I − W)) x̂ = Aᵀy` directly (Cholesky).
pub fn estimate_laplacian_general(
    a: &ForwardModel,
    y: &Signal,
    w: &GraphFilter,
    lambda: f64,
) -> Result<Signal> {
    EstimatorConfig::new(lambda, 0.0)?;
    check_dim(a.output_dim(), y.len())?;
    check_dim(w.dim(), a.input_dim())?;
    let n = a.input_dim();
    let g = a.gram();
    let m = SymMatrix::from_lower_fn(n, |i, j| {
        let id = if i == j { 1.0 } else { 0.0 };
        g.get(i, j) + lambda * (id - w.matrix().get(i, j))
    });
    let x = solve_spd(&m, &a.adjoint(y.data())?)?;
    let template = if y.len() == n {
        y.clone()
    } else {
        Signal::from_vec(vec![0.0; n])?
    };
    template.with_data(x)
}

/// `x̂ = U diag(s/((1−α)s+α)) Uᵀ y`. Fails with
/// [`Error::SingularFilter`] when `W` has a (near-)zero eigenvalue; use
/// [`estimate_pnp_truncated`] there.
pub fn estimate_pnp(y: &Signal, w: &GraphFilter, cfg: &EstimatorConfig) -> Result<Signal> {
    cfg.validate_pnp()?;
    check_dim(w.dim(), y.len())?;
    let d = w.require_invertible()?;
    let alpha = cfg.alpha;
    y.with_data(d.apply_spectral(y.data(), |s| pnp_gain(s, alpha))?)
}

/// PnP restricted to the span of the `r` leading eigenvectors; the
/// remaining coordinates of `x̂` are exactly zero.
pub fn estimate_pnp_truncated(
    y: &Signal,
    decomp: &SpectralDecomp,
    cfg: &EstimatorConfig,
    r: usize,
) -> Result<Signal> {
    cfg.validate_pnp()?;
    check_dim(decomp.dim(), y.len())?;
    if r == 0 || r > decomp.dim() {
        return Err(Error::InvalidConfig(format!(
            "rank {r} outside 1..={}",
            decomp.dim()
        )));
    }
    let s = decomp.values();
    if s[r - 1] <= TRUNCATION_TOL {
        return Err(Error::SmallEigenvalue {
            index: r - 1,
            value: s[r - 1],
        });
    }
    let u1 = decomp.leading_vectors(r);
    let mut c = u1.tr_mul(y.data());
    for (ci, &si) in c.iter_mut().zip(s.iter()) {
        *ci *= pnp_gain(si, cfg.alpha);
    }
    y.with_data(u1 * c)
}

/// Sums of the per-mode arrays of a [`ModeReport`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModeTotals {
    pub mse_l: f64,
    pub mse_p: f64,
    pub bias2_l: f64,
    pub bias2_p: f64,
    pub var_l: f64,
    pub var_p: f64,
}

/// Per-eigenmode bias², variance and MSE of both estimators.
///
/// `mse_*` is evaluated from its own closed form, not as `bias2 + var`,
/// so the decomposition can be checked.
#[derive(Debug, Clone, PartialEq)]
pub struct ModeReport {
    pub s: Vec<f64>,
    pub b: Vec<f64>,
    pub mse_l: Vec<f64>,
    pub mse_p: Vec<f64>,
    pub bias2_l: Vec<f64>,
    pub bias2_p: Vec<f64>,
    pub var_l: Vec<f64>,
    pub var_p: Vec<f64>,
    pub totals: ModeTotals,
}

impl ModeReport {
    /// Builds the report from eigenvalues `s` and clean-signal coordinates
    /// `b = Uᵀx`. Accepts any `alpha > 0`.
    pub fn from_modes(s: &[f64], b: &[f64], cfg: &EstimatorConfig) -> Result<Self> {
        cfg.validate()?;
        check_dim(s.len(), b.len())?;
        let (a, var) = (cfg.alpha, cfg.sigma_eta * cfg.sigma_eta);
        let n = s.len();
        let mut r = ModeReport {
            s: s.to_vec(),
            b: b.to_vec(),
            mse_l: Vec::with_capacity(n),
            mse_p: Vec::with_capacity(n),
            bias2_l: Vec::with_capacity(n),
            bias2_p: Vec::with_capacity(n),
            var_l: Vec::with_capacity(n),
            var_p: Vec::with_capacity(n),
            totals: ModeTotals {
                mse_l: 0.0,
                mse_p: 0.0,
                bias2_l: 0.0,
                bias2_p: 0.0,
                var_l: 0.0,
                var_p: 0.0,
            },
        };
        for (&si, &bi) in s.iter().zip(b) {
            let dl = (1.0 + a - a * si).powi(2);
            let dp = (a + (1.0 - a) * si).powi(2);
            let shrink = (a * (1.0 - si) * bi).powi(2);
            r.mse_l.push((shrink + var) / dl);
            r.mse_p.push((shrink + var * si * si) / dp);
            r.bias2_l.push(shrink / dl);
            r.bias2_p.push(shrink / dp);
            r.var_l.push(var / dl);
            r.var_p.push(var * si * si / dp);
        }
        let sum = |v: &[f64]| v.iter().sum::<f64>();
        r.totals = ModeTotals {
            mse_l: sum(&r.mse_l),
            mse_p: sum(&r.mse_p),
            bias2_l: sum(&r.bias2_l),
            bias2_p: sum(&r.bias2_p),
            var_l: sum(&r.var_l),
            var_p: sum(&r.var_p),
        };
        Ok(r)
    }

    pub fn len(&self) -> usize {
        self.s.len()
    }

    pub fn is_empty(&self) -> bool {
        self.s.is_empty()
    }

    /// Columns `i, s, b, mse_L, mse_P, bias2_L, bias2_P, var_L, var_P`.
    pub fn to_table(&self) -> Table {
        let mut t = Table::new([
            "i", "s", "b", "mse_L", "mse_P", "bias2_L", "bias2_P", "var_L", "var_P",
        ]);
        for i in 0..self.len() {
            let row: Vec<Cell> = vec![
                i.into(),
                self.s[i].into(),
                self.b[i].into(),
                self.mse_l[i].into(),
                self.mse_p[i].into(),
                self.bias2_l[i].into(),
                self.bias2_p[i].into(),
                self.var_l[i].into(),
                self.var_p[i].into(),
            ];
            t.push(row).expect("fixed width");
        }
        t
    }

    pub fn to_csv(&self) -> String {
        self.to_table().to_csv()
    }
}

/// Expected per-mode error of both estimators for ground truth `x`, with
/// `b = Uᵀx` taken from the eigendecomposition of `w`.
pub fn mode_analysis(x: &Signal, w: &GraphFilter, cfg: &EstimatorConfig) -> Result<ModeReport> {
    check_dim(w.dim(), x.len())?;
    let d = w.decomp()?;
    let b = d.project(x.data())?;
    ModeReport::from_modes(d.values().as_slice(), b.as_slice(), cfg)
}

/// Per-eigenvalue gains of `A_L⁻¹` and `A_P⁻¹`.
#[derive(Debug, Clone, PartialEq)]
pub struct GainCurves {
    pub s: Vec<f64>,
    pub gain_l: Vec<f64>,
    pub gain_p: Vec<f64>,
}

pub fn eigen_gain_curves(decomp: &SpectralDecomp, cfg: &EstimatorConfig) -> Result<GainCurves> {
    cfg.validate()?;
    let s: Vec<f64> = decomp.values().iter().copied().collect();
    Ok(GainCurves {
        gain_l: s.iter().map(|&v| laplacian_gain(v, cfg.alpha)).collect(),
        gain_p: s.iter().map(|&v| pnp_gain(v, cfg.alpha)).collect(),
        s,
    })
}

/// Fraction of `‖c‖²` carried by the trailing half of the coordinates.
pub fn trailing_energy_fraction(c: &DVector<f64>) -> f64 {
    let total = c.norm_squared();
    if total == 0.0 {
        return 0.0;
    }
    let half = c.len() / 2;
    c.rows(half, c.len() - half).norm_squared() / total
}
