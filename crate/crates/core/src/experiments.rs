//! Experiment drivers. Each one is a pure function of its [`ExperimentSpec`]
//! (seed included) and returns a [`Table`] whose row order is fixed by the
//! grid order.

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use crate::equilibrium::{
    combine_weighted, optimal_weights, solve_individual, solve_multi_prior, AgentSet, CeSolver,
};
use crate::error::{Error, Result};
use crate::estimators::{eigen_gain_curves, EstimatorConfig, ModeReport};
use crate::graph_filter::{build_filter, KernelConfig, Provenance};
use crate::signals::{
    add_noise, apply_forward, make_signal_1d, psnr, read_pgm, shepard_fill, test_image,
};
use crate::signals::{ForwardModel, NoiseModel, Shape, Signal};
use crate::table::{Cell, Table};

/// Largest image side the drivers accept; larger sources are center-cropped.
pub const MAX_IMAGE_SIDE: usize = 64;

/// Modes with eigenvalue at or below this are dropped from the inpainting
/// equilibrium solve.
pub const INPAINT_TRUNCATION: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ExperimentKind {
    RhoSweep,
    Projection,
    Eigvals,
    BiasVar,
    Prefilter,
    MultiPrior,
    Inpaint,
}

impl ExperimentKind {
    pub const ALL: [ExperimentKind; 7] = [
        ExperimentKind::RhoSweep,
        ExperimentKind::Projection,
        ExperimentKind::Eigvals,
        ExperimentKind::BiasVar,
        ExperimentKind::Prefilter,
        ExperimentKind::MultiPrior,
        ExperimentKind::Inpaint,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::RhoSweep => "rho-sweep",
            ExperimentKind::Projection => "projection",
            ExperimentKind::Eigvals => "eigvals",
            ExperimentKind::BiasVar => "bias-var",
            ExperimentKind::Prefilter => "prefilter",
            ExperimentKind::MultiPrior => "multi-prior",
            ExperimentKind::Inpaint => "inpaint",
        }
    }
}

impl fmt::Display for ExperimentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ExperimentKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ExperimentKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::InvalidConfig(format!("unknown experiment '{s}'")))
    }
}

/// Where the ground-truth signal comes from.
#[derive(Debug, Clone, PartialEq)]
pub enum SignalSource {
    /// [`make_signal_1d`] of length `n`, seeded by the spec seed.
    Synthetic1d { n: usize },
    /// The built-in [`test_image`].
    TestImage { rows: usize, cols: usize },
    /// A PGM file, center-cropped to at most [`MAX_IMAGE_SIDE`] per side.
    Pgm(PathBuf),
}

impl SignalSource {
    pub fn load(&self, seed: u64) -> Result<Signal> {
        match self {
            SignalSource::Synthetic1d { n } => make_signal_1d(*n, seed),
            SignalSource::TestImage { rows, cols } => test_image(*rows, *cols),
            SignalSource::Pgm(path) => {
                let img = read_pgm(path)?;
                match img.shape() {
                    Shape::D2 { rows, cols } => {
                        let (r, c) = (rows.min(MAX_IMAGE_SIDE), cols.min(MAX_IMAGE_SIDE));
                        img.crop((rows - r) / 2, (cols - c) / 2, r, c)
                    }
                    Shape::D1(_) => Ok(img),
                }
            }
        }
    }

    pub fn describe(&self) -> String {
        match self {
            SignalSource::Synthetic1d { n } => format!("synthetic-1d:{n}"),
            SignalSource::TestImage { rows, cols } => format!("test-image:{rows}x{cols}"),
            SignalSource::Pgm(p) => format!("pgm:{}", p.display()),
        }
    }
}

/// Log-spaced grid of `points` values from `lo` to `hi` inclusive.
pub fn log_grid(lo: f64, hi: f64, points: usize) -> Vec<f64> {
    if points == 1 {
        return vec![lo];
    }
    let (a, b) = (lo.ln(), hi.ln());
    (0..points)
        .map(|k| (a + (b - a) * k as f64 / (points - 1) as f64).exp())
        .collect()
}

/// Full description of one experiment run.
///
/// Fields a driver does not use are ignored by it. Derived seeds: noise
/// `seed + 1`, sampling masks `seed + 2 + k`, pre-filter perturbations
/// `seed + 100 + k`, with `k` the grid index.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentSpec {
    pub kind: ExperimentKind,
    pub source: SignalSource,
    pub kernel: KernelConfig,
    pub seed: u64,
    pub sigma_eta: f64,
    /// Fixed weight for eigvals, bias-var, prefilter and multi-prior.
    pub alpha: f64,
    /// Weight grid for rho-sweep and inpaint.
    pub alpha_grid: Vec<f64>,
    /// Pre-filter noise levels.
    pub sigma_eps: Vec<f64>,
    /// Inpainting sampling rates.
    pub rates: Vec<f64>,
    /// Kernel bandwidths of the multi-prior filters.
    pub bandwidths: Vec<f64>,
    pub mu0: f64,
    /// Worker threads for independent grid cells.
    pub threads: usize,
    pub output: Option<PathBuf>,
}

impl ExperimentSpec {
    /// Desk-scale defaults for each experiment.
    pub fn default_for(kind: ExperimentKind) -> Self {
        let mut spec = ExperimentSpec {
            kind,
            source: SignalSource::Synthetic1d { n: 256 },
            kernel: KernelConfig::default_1d(),
            seed: 1,
            sigma_eta: 0.05,
            alpha: 0.2,
            alpha_grid: log_grid(1e-3, 10.0, 41),
            sigma_eps: vec![0.0, 0.01, 0.02, 0.05, 0.1, 0.2, 0.3],
            rates: vec![0.8, 0.6, 0.4, 0.2],
            bandwidths: vec![0.01, 0.02, 0.05, 0.1, 0.2],
            mu0: 1.0,
            threads: 1,
            output: None,
        };
        match kind {
            ExperimentKind::Prefilter => spec.kernel.h = 0.2,
            ExperimentKind::MultiPrior => {
                spec.alpha = 0.005;
                spec.kernel = KernelConfig {
                    h: 0.1,
                    patch_size: 5,
                    search_radius: None,
                    spatial_sigma: Some(1.5),
                };
            }
            ExperimentKind::Inpaint => {
                spec.source = SignalSource::TestImage { rows: 32, cols: 32 };
                spec.kernel = KernelConfig::default_image();
                spec.alpha_grid = log_grid(1e-3, 10.0, 20);
            }
            _ => {}
        }
        spec
    }

    pub fn validate(&self) -> Result<()> {
        self.kernel.validate()?;
        EstimatorConfig::new(self.alpha, self.sigma_eta)?;
        let nonempty = |name: &str, v: &[f64]| {
            if v.is_empty() {
                Err(Error::InvalidConfig(format!("{name} grid is empty")))
            } else {
                Ok(())
            }
        };
        match self.kind {
            ExperimentKind::RhoSweep | ExperimentKind::Inpaint => {
                nonempty("alpha", &self.alpha_grid)?;
                if let Some(a) = self
                    .alpha_grid
                    .iter()
                    .find(|a| !(**a > 0.0) || !a.is_finite())
                {
                    return Err(Error::InvalidConfig(format!(
                        "alpha grid value {a} must be > 0"
                    )));
                }
            }
            ExperimentKind::Prefilter => {
                nonempty("sigma_eps", &self.sigma_eps)?;
                if let Some(s) = self.sigma_eps.iter().find(|s| !(**s >= 0.0)) {
                    return Err(Error::InvalidConfig(format!(
                        "sigma_eps value {s} must be >= 0"
                    )));
                }
            }
            ExperimentKind::MultiPrior => {
                nonempty("bandwidth", &self.bandwidths)?;
                if !(self.mu0 > 0.0) {
                    return Err(Error::InvalidConfig(format!(
                        "mu0 = {} must be > 0",
                        self.mu0
                    )));
                }
            }
            _ => {}
        }
        if self.kind == ExperimentKind::Inpaint {
            nonempty("rate", &self.rates)?;
            if let Some(r) = self.rates.iter().find(|r| !(**r > 0.0 && **r <= 1.0)) {
                return Err(Error::InvalidConfig(format!(
                    "sampling rate {r} outside (0, 1]"
                )));
            }
        }
        if self.threads == 0 {
            return Err(Error::InvalidConfig("threads must be >= 1".into()));
        }
        Ok(())
    }

    fn estimator(&self, alpha: f64) -> Result<EstimatorConfig> {
        EstimatorConfig::new(alpha, self.sigma_eta)
    }

    fn noise(&self) -> Result<NoiseModel> {
        NoiseModel::new(self.sigma_eta, self.seed.wrapping_add(1))
    }
}

/// Dispatches on `spec.kind`.
pub fn run_experiment(spec: &ExperimentSpec) -> Result<Table> {
    match spec.kind {
        ExperimentKind::RhoSweep => run_rho_sweep(spec),
        ExperimentKind::Projection => run_projection(spec),
        ExperimentKind::Eigvals => run_eigvals(spec),
        ExperimentKind::BiasVar => run_bias_var(spec),
        ExperimentKind::Prefilter => run_prefilter_sensitivity(spec),
        ExperimentKind::MultiPrior => run_multi_prior(spec),
        ExperimentKind::Inpaint => run_inpaint(spec),
    }
}

fn oracle(spec: &ExperimentSpec) -> Result<(Signal, crate::graph_filter::GraphFilter)> {
    let x = spec.source.load(spec.seed)?;
    let w = build_filter(&x, &spec.kernel, Provenance::Oracle)?;
    Ok((x, w))
}

fn push(t: &mut Table, row: Vec<Cell>) {
    t.push(row).expect("row width matches header");
}

/// Closed-form MSE totals of both estimators over the α grid, oracle `W`.
/// Columns `alpha, mse_L, mse_P`.
pub fn run_rho_sweep(spec: &ExperimentSpec) -> Result<Table> {
    spec.validate()?;
    let (x, w) = oracle(spec)?;
    let d = w.decomp()?;
    let b = d.project(x.data())?;
    let s = d.values().as_slice();
    let mut t = Table::new(["alpha", "mse_L", "mse_P"]);
    for &alpha in &spec.alpha_grid {
        let r = ModeReport::from_modes(s, b.as_slice(), &spec.estimator(alpha)?)?;
        push(
            &mut t,
            vec![alpha.into(), r.totals.mse_l.into(), r.totals.mse_p.into()],
        );
    }
    Ok(t)
}

/// Magnitudes of the clean and noisy signals in the oracle eigenbasis.
/// Columns `i, s, proj_x, proj_y`.
pub fn run_projection(spec: &ExperimentSpec) -> Result<Table> {
    spec.validate()?;
    let (x, w) = oracle(spec)?;
    let y = add_noise(&x, &spec.noise()?);
    let d = w.decomp()?;
    let (px, py) = (d.project(x.data())?, d.project(y.data())?);
    let mut t = Table::new(["i", "s", "proj_x", "proj_y"]);
    for i in 0..d.dim() {
        push(
            &mut t,
            vec![
                i.into(),
                d.values()[i].into(),
                px[i].abs().into(),
                py[i].abs().into(),
            ],
        );
    }
    Ok(t)
}

/// Per-eigenvalue gains of both estimators for the oracle `W`.
/// Columns `i, s, gain_L, gain_P`.
pub fn run_eigvals(spec: &ExperimentSpec) -> Result<Table> {
    spec.validate()?;
    let (_, w) = oracle(spec)?;
    let g = eigen_gain_curves(w.decomp()?, &spec.estimator(spec.alpha)?)?;
    let mut t = Table::new(["i", "s", "gain_L", "gain_P"]);
    for i in 0..g.s.len() {
        push(
            &mut t,
            vec![
                i.into(),
                g.s[i].into(),
                g.gain_l[i].into(),
                g.gain_p[i].into(),
            ],
        );
    }
    Ok(t)
}

/// Per-mode bias², variance and MSE for the oracle `W`; the
/// [`ModeReport`] table.
pub fn run_bias_var(spec: &ExperimentSpec) -> Result<Table> {
    spec.validate()?;
    let (x, w) = oracle(spec)?;
    Ok(crate::estimators::mode_analysis(&x, &w, &spec.estimator(spec.alpha)?)?.to_table())
}

/// MSE totals when `W` is built from `x + ε`, `ε ~ N(0, σ_ε²)`.
/// Columns `sigma_eps, mse_L, mse_P`.
pub fn run_prefilter_sensitivity(spec: &ExperimentSpec) -> Result<Table> {
    spec.validate()?;
    let x = spec.source.load(spec.seed)?;
    let cfg = spec.estimator(spec.alpha)?;
    let mut t = Table::new(["sigma_eps", "mse_L", "mse_P"]);
    for (k, &se) in spec.sigma_eps.iter().enumerate() {
        let seed = spec.seed.wrapping_add(100 + k as u64);
        let xe = add_noise(&x, &NoiseModel::new(se, seed)?);
        let w = build_filter(&xe, &spec.kernel, Provenance::PreFiltered)?;
        let r = crate::estimators::mode_analysis(&x, &w, &cfg)?;
        push(
            &mut t,
            vec![se.into(), r.totals.mse_l.into(), r.totals.mse_p.into()],
        );
    }
    Ok(t)
}

/// Individual, equilibrium-combined and oracle-weighted reconstructions
/// from oracle filters of graded bandwidths, each prior weighted equally.
///
/// Columns `method, index, h, psnr, residual`. `individual` rows carry the
/// filter index (from 1) and bandwidth; `combined` is the multi-prior
/// equilibrium (its residual column is the largest equilibrium residual);
/// `weighted` combines the individual estimates with the optimal weights.
/// Aggregate rows have `index = 0` and `h = 0`.
pub fn run_multi_prior(spec: &ExperimentSpec) -> Result<Table> {
    spec.validate()?;
    let x = spec.source.load(spec.seed)?;
    let y = add_noise(&x, &spec.noise()?);
    let priors = spec
        .bandwidths
        .iter()
        .map(|&h| build_filter(&x, &KernelConfig { h, ..spec.kernel }, Provenance::Oracle))
        .collect::<Result<Vec<_>>>()?;
    let agents = AgentSet::uniform(spec.alpha, spec.mu0, priors)?;
    let mut t = Table::new(["method", "index", "h", "psnr", "residual"]);
    let mut singles = Vec::with_capacity(agents.len());
    for (i, &h) in spec.bandwidths.iter().enumerate() {
        let xi = solve_individual(&agents, &y, i)?;
        push(
            &mut t,
            vec![
                "individual".into(),
                (i + 1).into(),
                h.into(),
                psnr(&x, &xi, 1.0)?.into(),
                0.0.into(),
            ],
        );
        singles.push(xi);
    }
    let report = solve_multi_prior(&agents, &y)?;
    push(
        &mut t,
        vec![
            "combined".into(),
            0usize.into(),
            0.0.into(),
            psnr(&x, &report.x, 1.0)?.into(),
            report.max_residual().into(),
        ],
    );
    if singles.len() >= 2 {
        let wts = optimal_weights(&x, &singles, None)?;
        let xw = combine_weighted(&singles, &wts.mu)?;
        push(
            &mut t,
            vec![
                "weighted".into(),
                0usize.into(),
                0.0.into(),
                psnr(&x, &xw, 1.0)?.into(),
                0.0.into(),
            ],
        );
    }
    Ok(t)
}

/// One inpainting cell: a sampling rate and a filter provenance.
struct InpaintCell {
    rate: f64,
    filter: &'static str,
    laplacian: (f64, f64),
    pnp: (f64, f64),
}

/// Best PSNR over the weight grid, skipping weights whose system is not
/// numerically positive definite. Fails only if every weight fails.
fn best_over_grid(
    x: &Signal,
    grid: &[f64],
    mut solve: impl FnMut(f64) -> Result<Signal>,
) -> Result<(f64, f64)> {
    let mut best: Option<(f64, f64)> = None;
    let mut last_err = None;
    for &a in grid {
        match solve(a) {
            Ok(xh) => {
                let p = psnr(x, &xh, 1.0)?;
                if best.is_none_or(|(bp, _)| p > bp) {
                    best = Some((p, a));
                }
            }
            Err(e @ Error::NotPositiveDefinite { .. }) => last_err = Some(e),
            Err(e) => return Err(e),
        }
    }
    best.ok_or_else(|| last_err.expect("grid is non-empty"))
}

fn inpaint_cell(spec: &ExperimentSpec, x: &Signal, k: usize, oracle: bool) -> Result<InpaintCell> {
    let rate = spec.rates[k];
    let mask = ForwardModel::random_mask(x.len(), rate, spec.seed.wrapping_add(2 + k as u64))?;
    let y = apply_forward(&mask, &add_noise(x, &spec.noise()?))?;
    let w = if oracle {
        build_filter(x, &spec.kernel, Provenance::Oracle)?
    } else {
        build_filter(
            &shepard_fill(&y, &mask)?,
            &spec.kernel,
            Provenance::PreFiltered,
        )?
    };
    let solver = CeSolver::truncated(&mask, &y, &w, INPAINT_TRUNCATION)?;
    Ok(InpaintCell {
        rate,
        filter: if oracle { "oracle" } else { "estimated" },
        laplacian: best_over_grid(x, &spec.alpha_grid, |a| solver.solve_laplacian(a))?,
        pnp: best_over_grid(x, &spec.alpha_grid, |a| solver.solve(a))?,
    })
}

/// Maps `f` over `0..n` on up to `threads` scoped threads; output in index
/// order.
fn par_map<T: Send>(n: usize, threads: usize, f: impl Fn(usize) -> T + Sync) -> Vec<T> {
    let threads = threads.clamp(1, n.max(1));
    if threads == 1 {
        return (0..n).map(f).collect();
    }
    let f = &f;
    let mut out: Vec<(usize, T)> = std::thread::scope(|s| {
        let handles: Vec<_> = (0..threads)
            .map(|t| {
                s.spawn(move || {
                    (t..n)
                        .step_by(threads)
                        .map(|i| (i, f(i)))
                        .collect::<Vec<_>>()
                })
            })
            .collect();
        handles
            .into_iter()
            .flat_map(|h| h.join().expect("worker panicked"))
            .collect()
    });
    out.sort_by_key(|(i, _)| *i);
    out.into_iter().map(|(_, v)| v).collect()
}

/// Inpainting from random samples with oracle and Shepard-estimated
/// filters; the regularization weight is optimized per cell over the grid.
///
/// Columns `rate, filter, method, psnr, best_alpha`; `method` is
/// `laplacian` or `pnp`.
pub fn run_inpaint(spec: &ExperimentSpec) -> Result<Table> {
    spec.validate()?;
    let x = spec.source.load(spec.seed)?;
    let cells = par_map(2 * spec.rates.len(), spec.threads, |c| {
        inpaint_cell(spec, &x, c / 2, c % 2 == 0)
    });
    let mut t = Table::new(["rate", "filter", "method", "psnr", "best_alpha"]);
    for cell in cells {
        let cell = cell?;
        for (method, (p, a)) in [("laplacian", cell.laplacian), ("pnp", cell.pnp)] {
            push(
                &mut t,
                vec![
                    cell.rate.into(),
                    cell.filter.into(),
                    method.into(),
                    p.into(),
                    a.into(),
                ],
            );
        }
    }
    Ok(t)
}

/// Looks up the row of `t` whose text columns equal the given values and
/// returns its `column` value.
pub fn lookup(t: &Table, keys: &[(&str, Cell)], column: &str) -> Option<f64> {
    let idx: Vec<(usize, &Cell)> = keys
        .iter()
        .map(|(k, v)| t.column_index(k).map(|i| (i, v)))
        .collect::<Option<_>>()?;
    let c = t.column_index(column)?;
    t.rows()
        .iter()
        .find(|row| idx.iter().all(|(i, v)| &row[*i] == *v))
        .and_then(|row| row[c].as_f64())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(kind: ExperimentKind) -> ExperimentSpec {
        let mut s = ExperimentSpec::default_for(kind);
        if kind == ExperimentKind::Inpaint {
            s.source = SignalSource::TestImage { rows: 12, cols: 12 };
            s.kernel = KernelConfig {
                h: 0.3,
                patch_size: 3,
                search_radius: None,
                spatial_sigma: Some(3.0),
            };
            s.rates = vec![0.7];
            s.alpha_grid = log_grid(1e-3, 1.0, 6);
        } else {
            s.source = SignalSource::Synthetic1d { n: 64 };
        }
        s
    }

    fn roundtrips(t: &Table) {
        assert_eq!(&Table::from_csv(&t.to_csv()).unwrap(), t);
    }

    #[test]
    fn kind_names_roundtrip() {
        for k in ExperimentKind::ALL {
            assert_eq!(k.name().parse::<ExperimentKind>().unwrap(), k);
        }
        assert!("rho".parse::<ExperimentKind>().is_err());
    }

    #[test]
    fn log_grid_endpoints() {
        let g = log_grid(1e-3, 10.0, 41);
        assert_eq!(g.len(), 41);
        assert!((g[0] - 1e-3).abs() < 1e-18 && (g[40] - 10.0).abs() < 1e-12);
        assert!((g[10] - 1e-2).abs() < 1e-15);
        assert!(g.windows(2).all(|w| w[1] > w[0]));
    }

    #[test]
    fn validation() {
        let mut s = small(ExperimentKind::RhoSweep);
        s.alpha_grid.clear();
        assert!(s.validate().is_err());
        let mut s = small(ExperimentKind::Prefilter);
        s.sigma_eps = vec![-0.1];
        assert!(s.validate().is_err());
        let mut s = small(ExperimentKind::Inpaint);
        s.rates = vec![1.5];
        assert!(s.validate().is_err());
        let mut s = small(ExperimentKind::MultiPrior);
        s.threads = 0;
        assert!(s.validate().is_err());
    }

    #[test]
    fn every_driver_is_deterministic_and_roundtrips() {
        for k in ExperimentKind::ALL {
            let s = small(k);
            let a = run_experiment(&s).unwrap();
            let b = run_experiment(&s).unwrap();
            assert_eq!(a.to_csv(), b.to_csv(), "{k}");
            assert!(!a.is_empty(), "{k}");
            roundtrips(&a);
        }
    }

    #[test]
    fn rho_sweep_small_alpha_leaves_noise_untouched() {
        // an invertible filter, so both gains tend to one as α → 0
        let mut s = small(ExperimentKind::RhoSweep);
        s.kernel = ExperimentSpec::default_for(ExperimentKind::MultiPrior).kernel;
        s.kernel.h = 0.2;
        s.alpha_grid = vec![1e-9];
        let t = run_rho_sweep(&s).unwrap();
        let expect = 64.0 * 0.05 * 0.05;
        for c in ["mse_L", "mse_P"] {
            let v = t.numbers(c).unwrap()[0];
            assert!((v - expect).abs() < 1e-5 * expect, "{c} {v}");
        }
    }

    #[test]
    fn projection_properties() {
        let s = small(ExperimentKind::Projection);
        let t = run_projection(&s).unwrap();
        let x = s.source.load(s.seed).unwrap();
        let px = t.numbers("proj_x").unwrap();
        let norm = px.iter().map(|v| v * v).sum::<f64>().sqrt();
        assert!((norm - x.data().norm()).abs() < 1e-10);
        let b1 = x.data().sum() / (x.len() as f64).sqrt();
        // near-disconnected clusters leave several eigenvalues ≈ 1, so the
        // leading vector is only close to constant
        assert!((px[0] - b1).abs() < 1e-3 * b1, "{} {b1}", px[0]);
        let s_col = t.numbers("s").unwrap();
        assert!((s_col[0] - 1.0).abs() < 1e-8);
    }

    #[test]
    fn eigvals_gain_limits() {
        let t = run_eigvals(&small(ExperimentKind::Eigvals)).unwrap();
        let (gl, gp) = (t.numbers("gain_L").unwrap(), t.numbers("gain_P").unwrap());
        assert!((gl[0] - 1.0).abs() < 1e-8 && (gp[0] - 1.0).abs() < 1e-8);
        let last = gl.len() - 1;
        let s_min = t.numbers("s").unwrap()[last];
        assert!((gl[last] - 1.0 / (1.0 + 0.2 - 0.2 * s_min)).abs() < 1e-15);
        assert!(gp[last] <= gp[0]);
    }

    #[test]
    fn prefilter_clean_filter_favours_pnp() {
        let t = run_prefilter_sensitivity(&small(ExperimentKind::Prefilter)).unwrap();
        let (l, p) = (t.numbers("mse_L").unwrap(), t.numbers("mse_P").unwrap());
        assert_eq!(t.numbers("sigma_eps").unwrap()[0], 0.0);
        assert!(p[0] < l[0]);
    }

    #[test]
    fn multi_prior_rows() {
        let t = run_multi_prior(&small(ExperimentKind::MultiPrior)).unwrap();
        assert_eq!(t.len(), 7);
        let res = lookup(&t, &[("method", "combined".into())], "residual").unwrap();
        assert!(res < 1e-8);
    }

    #[test]
    fn full_sampling_without_noise_is_exact() {
        let mut s = small(ExperimentKind::Inpaint);
        s.rates = vec![1.0];
        s.sigma_eta = 0.0;
        s.alpha_grid = vec![1e-10];
        let t = run_inpaint(&s).unwrap();
        for (f, m) in [
            ("oracle", "laplacian"),
            ("oracle", "pnp"),
            ("estimated", "laplacian"),
        ] {
            let p = lookup(&t, &[("filter", f.into()), ("method", m.into())], "psnr").unwrap();
            assert!(p > 60.0, "{f} {m} {p}");
        }
    }

    #[test]
    fn thread_count_does_not_change_output() {
        let mut s = small(ExperimentKind::Inpaint);
        s.rates = vec![0.9, 0.5];
        let one = run_inpaint(&s).unwrap();
        s.threads = 3;
        assert_eq!(run_inpaint(&s).unwrap(), one);
    }
}
