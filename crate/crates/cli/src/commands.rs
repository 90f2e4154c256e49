//! Command execution: settings in, artifacts and a summary out.

use std::fmt;
use std::path::{Path, PathBuf};
use std::time::Instant;

use pnpgl::experiments::{log_grid, run_experiment};
use pnpgl::graph_filter::build_filter;
use pnpgl::pnp_admm::run;
use pnpgl::signals::{add_noise, apply_forward, encode_pgm, make_signal_1d, read_pgm, PgmFormat};
use pnpgl::{
    AdmmProblem, CeSolver, Cell, Error, ExperimentKind, ExperimentSpec, ForwardModel, KernelConfig,
    NoiseModel, Provenance, Shape, Signal, SignalSource, Table,
};

use crate::config::{join, Settings};
use crate::manifest::{atomic_write, RunManifest};

/// Largest accepted distance between the ADMM limit and the closed form.
pub const ADMM_MATCH_TOL: f64 = 1e-6;

/// Environment variable capping worker threads.
pub const THREADS_VAR: &str = "PNPGL_THREADS";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Task {
    Experiment(ExperimentKind),
    AdmmRun,
    BuildFilter,
}

impl Task {
    pub fn name(self) -> &'static str {
        match self {
            Task::Experiment(k) => k.name(),
            Task::AdmmRun => "admm-run",
            Task::BuildFilter => "build-filter",
        }
    }
}

/// Why a command failed; `usage` selects exit code 1 over 2.
#[derive(Debug, Clone, PartialEq)]
pub struct Failure {
    pub usage: bool,
    pub invariant: String,
    pub message: String,
}

impl Failure {
    fn invariant(name: &str, message: String) -> Self {
        Failure {
            usage: false,
            invariant: name.to_string(),
            message,
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure {
            usage: e.is_usage(),
            invariant: e.invariant().to_string(),
            message: e.to_string(),
        }
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.message)
    }
}

/// Summary lines for standard output plus the files written.
#[derive(Debug, Clone, Default)]
pub struct Report {
    pub lines: Vec<String>,
    pub outputs: Vec<PathBuf>,
}

type Resolved = Vec<(String, String)>;

/// Thread cap from [`THREADS_VAR`]; one thread when unset.
pub fn thread_cap(var: Option<String>) -> Result<usize, Failure> {
    match var {
        None => Ok(1),
        Some(v) => match v.trim().parse::<usize>() {
            Ok(t) if t >= 1 => Ok(t),
            _ => Err(Error::InvalidConfig(format!(
                "{THREADS_VAR}='{v}' must be a positive integer"
            ))
            .into()),
        },
    }
}

pub fn execute(
    task: Task,
    settings: &Settings,
    source: &str,
    threads: usize,
) -> Result<Report, Failure> {
    let start = Instant::now();
    let out_dir = PathBuf::from(settings.get_or("out", "out".to_string())?);
    let seed: u64 = settings.get_or("seed", 1)?;
    let (mut report, config) = match task {
        Task::Experiment(kind) => experiment(kind, settings, &out_dir, threads)?,
        Task::AdmmRun => admm_run(settings, &out_dir)?,
        Task::BuildFilter => build(settings, &out_dir)?,
    };
    let manifest = RunManifest {
        command: task.name().to_string(),
        source: source.to_string(),
        seed,
        config,
        outputs: report.outputs.clone(),
        wall_clock_s: start.elapsed().as_secs_f64(),
    };
    let path = out_dir.join(format!("{}.manifest", task.name()));
    manifest.write(&path)?;
    report.lines.push(format!("manifest: {}", path.display()));
    Ok(report)
}

fn write_table(report: &mut Report, path: PathBuf, t: &Table) -> Result<(), Failure> {
    atomic_write(&path, t.to_csv().as_bytes())?;
    report
        .lines
        .push(format!("wrote {} ({} rows)", path.display(), t.len()));
    report.outputs.push(path);
    Ok(())
}

fn kernel_from(settings: &Settings, base: KernelConfig) -> Result<KernelConfig, Failure> {
    let search_radius = match settings.raw("search_radius") {
        Some("none") => None,
        Some(_) => settings.get::<usize>("search_radius")?,
        None => base.search_radius,
    };
    let k = KernelConfig {
        h: settings.get_or("h", base.h)?,
        patch_size: settings.get_or("patch", base.patch_size)?,
        search_radius,
        spatial_sigma: settings.get_optional("spatial_sigma", base.spatial_sigma)?,
    };
    k.validate()?;
    Ok(k)
}

fn kernel_entries(k: &KernelConfig) -> Resolved {
    let opt = |v: Option<String>| v.unwrap_or_else(|| "none".to_string());
    vec![
        ("h".into(), format!("{:?}", k.h)),
        ("patch".into(), k.patch_size.to_string()),
        (
            "search_radius".into(),
            opt(k.search_radius.map(|r| r.to_string())),
        ),
        (
            "spatial_sigma".into(),
            opt(k.spatial_sigma.map(|s| format!("{s:?}"))),
        ),
    ]
}

/// Resolves an [`ExperimentSpec`] from the command defaults and `settings`.
pub fn experiment_spec(
    kind: ExperimentKind,
    settings: &Settings,
    threads: usize,
) -> Result<ExperimentSpec, Failure> {
    let mut spec = ExperimentSpec::default_for(kind);
    spec.seed = settings.get_or("seed", spec.seed)?;
    let mut base_kernel = spec.kernel;
    if let Some(path) = settings.get::<String>("image")? {
        if let SignalSource::Synthetic1d { .. } = spec.source {
            base_kernel = KernelConfig::default_image();
        }
        spec.source = SignalSource::Pgm(PathBuf::from(path));
    } else if let Some(n) = settings.get::<usize>("n")? {
        spec.source = match spec.source {
            SignalSource::TestImage { .. } => SignalSource::TestImage { rows: n, cols: n },
            _ => SignalSource::Synthetic1d { n },
        };
    }
    spec.kernel = kernel_from(settings, base_kernel)?;
    spec.alpha = settings.get_or("alpha", spec.alpha)?;
    spec.sigma_eta = settings.get_or("sigma_eta", spec.sigma_eta)?;
    spec.mu0 = settings.get_or("mu0", spec.mu0)?;
    let (lo, hi, pts) = (
        settings.get::<f64>("alpha_min")?,
        settings.get::<f64>("alpha_max")?,
        settings.get::<usize>("alpha_points")?,
    );
    if lo.is_some() || hi.is_some() || pts.is_some() {
        let (lo, hi) = (
            lo.unwrap_or(spec.alpha_grid[0]),
            hi.unwrap_or(spec.alpha_grid[spec.alpha_grid.len() - 1]),
        );
        let pts = pts.unwrap_or(spec.alpha_grid.len());
        if !(lo > 0.0 && hi >= lo) || pts == 0 {
            return Err(
                Error::InvalidConfig(format!("alpha grid {lo}..{hi} with {pts} points")).into(),
            );
        }
        spec.alpha_grid = log_grid(lo, hi, pts);
    }
    if let Some(v) = settings.list("sigma_eps")? {
        spec.sigma_eps = v;
    }
    if let Some(v) = settings.list("rates")? {
        spec.rates = v;
    }
    if let Some(v) = settings.list("bandwidths")? {
        spec.bandwidths = v;
    }
    spec.threads = threads;
    spec.validate()?;
    Ok(spec)
}

fn spec_entries(spec: &ExperimentSpec) -> Resolved {
    let mut v: Resolved = vec![("signal".into(), spec.source.describe())];
    v.extend(kernel_entries(&spec.kernel));
    v.extend([
        ("alpha".into(), format!("{:?}", spec.alpha)),
        ("sigma_eta".into(), format!("{:?}", spec.sigma_eta)),
        ("alpha_grid".into(), join(&spec.alpha_grid)),
        ("sigma_eps".into(), join(&spec.sigma_eps)),
        ("rates".into(), join(&spec.rates)),
        ("bandwidths".into(), join(&spec.bandwidths)),
        ("mu0".into(), format!("{:?}", spec.mu0)),
        ("threads".into(), spec.threads.to_string()),
    ]);
    v
}

fn experiment(
    kind: ExperimentKind,
    settings: &Settings,
    out: &Path,
    threads: usize,
) -> Result<(Report, Resolved), Failure> {
    let spec = experiment_spec(kind, settings, threads)?;
    let table = run_experiment(&spec)?;
    let mut report = Report::default();
    write_table(
        &mut report,
        out.join(format!("{}.csv", kind.name())),
        &table,
    )?;
    Ok((report, spec_entries(&spec)))
}

/// Kernel used by `admm-run`. The Gaussian spatial factor keeps the filter
/// invertible; a bandwidth below about 0.2 leaves near-disconnected clusters
/// that make masked problems badly conditioned.
pub fn admm_kernel() -> KernelConfig {
    KernelConfig {
        h: 0.3,
        patch_size: 5,
        search_radius: None,
        spatial_sigma: Some(1.5),
    }
}

fn admm_run(settings: &Settings, out: &Path) -> Result<(Report, Resolved), Failure> {
    let seed: u64 = settings.get_or("seed", 1)?;
    let n: usize = settings.get_or("n", 64)?;
    let rho: f64 = settings.get_or("rho", 0.2)?;
    let sigma: f64 = settings.get_or("sigma_eta", 0.05)?;
    let rate: f64 = settings.get_or("rate", 1.0)?;
    let tol: f64 = settings.get_or("tol", 1e-10)?;
    let max_iters: usize = settings.get_or("max_iters", 20_000)?;
    let kernel = kernel_from(settings, admm_kernel())?;
    if !(rate > 0.0 && rate <= 1.0) {
        return Err(Error::InvalidConfig(format!("sampling rate {rate} outside (0, 1]")).into());
    }

    let x = make_signal_1d(n, seed)?;
    let noisy = add_noise(&x, &NoiseModel::new(sigma, seed.wrapping_add(1))?);
    let w = build_filter(&x, &kernel, Provenance::Oracle)?;
    w.require_invertible()?;
    let a = if rate >= 1.0 {
        ForwardModel::Identity(n)
    } else {
        ForwardModel::random_mask(n, rate, seed.wrapping_add(2))?
    };
    let y = apply_forward(&a, &noisy)?;
    let pb = AdmmProblem::new(a.clone(), y.clone(), w.clone(), rho)?
        .with_tol(tol)
        .with_max_iters(max_iters);
    let st = run(&pb)?;
    let closed = CeSolver::new(&a, &y, &w, n)?.solve(rho)?;
    let distance = (st.x.data() - closed.data()).norm();
    let (res_f, res_g) = st.ce_residuals(&pb)?;
    let fixed_point = res_f.max(res_g);

    let mut report = Report::default();
    write_table(&mut report, out.join("admm-run.csv"), &st.history_table())?;
    let mut sol = Table::new(["i", "x", "y", "x_admm", "v_admm", "x_closed"]);
    for i in 0..n {
        let row: Vec<Cell> = vec![
            i.into(),
            x.as_slice()[i].into(),
            y.as_slice()[i].into(),
            st.x.as_slice()[i].into(),
            st.v.as_slice()[i].into(),
            closed.as_slice()[i].into(),
        ];
        sol.push(row)?;
    }
    write_table(&mut report, out.join("admm-run-solution.csv"), &sol)?;
    report.lines.push(format!("iterations: {}", st.k));
    report.lines.push(format!("converged: {}", st.converged));
    report
        .lines
        .push(format!("fixed-point residual: {fixed_point:.3e}"));
    report
        .lines
        .push(format!("distance to closed form: {distance:.3e}"));

    if !st.converged {
        return Err(Failure::invariant(
            "convergence",
            format!(
                "PnP ADMM stopped after {} iterations without meeting tol {tol:e}",
                st.k
            ),
        ));
    }
    if !(distance < ADMM_MATCH_TOL) {
        return Err(Failure::invariant(
            "ADMM limit equals the closed-form equilibrium",
            format!("distance {distance:e} exceeds {ADMM_MATCH_TOL:e}"),
        ));
    }
    let mut cfg: Resolved = vec![
        ("n".into(), n.to_string()),
        ("rho".into(), format!("{rho:?}")),
        ("sigma_eta".into(), format!("{sigma:?}")),
        ("rate".into(), format!("{rate:?}")),
        ("tol".into(), format!("{tol:?}")),
        ("max_iters".into(), max_iters.to_string()),
    ];
    cfg.extend(kernel_entries(&kernel));
    Ok((report, cfg))
}

fn build(settings: &Settings, out: &Path) -> Result<(Report, Resolved), Failure> {
    let seed: u64 = settings.get_or("seed", 1)?;
    let sigma: f64 = settings.get_or("sigma_eta", 0.05)?;
    let provenance = match settings
        .get_or("provenance", "oracle".to_string())?
        .as_str()
    {
        "oracle" => Provenance::Oracle,
        "prefiltered" | "pre-filtered" => Provenance::PreFiltered,
        other => {
            return Err(Error::InvalidConfig(format!(
                "provenance '{other}' is not oracle or prefiltered"
            ))
            .into())
        }
    };
    let (x, signal_desc, base) = match settings.get::<String>("image")? {
        Some(p) => {
            let x = SignalSource::Pgm(PathBuf::from(&p)).load(seed)?;
            (x, format!("pgm:{p}"), KernelConfig::default_image())
        }
        None => {
            let n: usize = settings.get_or("n", 64)?;
            (
                make_signal_1d(n, seed)?,
                format!("synthetic-1d:{n}"),
                KernelConfig::default_1d(),
            )
        }
    };
    let kernel = kernel_from(settings, base)?;
    let source = match provenance {
        Provenance::Oracle => x.clone(),
        _ => add_noise(&x, &NoiseModel::new(sigma, seed.wrapping_add(1))?),
    };
    let w = build_filter(&source, &kernel, provenance)?;
    let d = w.decomp()?;

    let mut report = Report::default();
    let path = out.join("build-filter.csv");
    atomic_write(&path, w.to_csv().as_bytes())?;
    report.lines.push(format!(
        "wrote {} ({}x{} filter)",
        path.display(),
        w.dim(),
        w.dim()
    ));
    report.outputs.push(path);
    let mut eig = Table::new(["i", "s"]);
    for (i, &s) in d.values().iter().enumerate() {
        eig.push(vec![i.into(), s.into()])?;
    }
    write_table(&mut report, out.join("build-filter-eigs.csv"), &eig)?;
    write_signal(&mut report, out, "build-filter-signal", &source)?;
    report.lines.push(format!(
        "eigenvalues in [{:.3e}, {:.6}], row-sum deviation {:.1e}",
        d.min_eig(),
        d.max_eig(),
        w.stochastic_deviation()
    ));
    let mut cfg: Resolved = vec![
        ("signal".into(), signal_desc),
        ("provenance".into(), provenance.as_str().to_string()),
        ("sigma_eta".into(), format!("{sigma:?}")),
    ];
    cfg.extend(kernel_entries(&kernel));
    Ok((report, cfg))
}

/// Images go out as binary PGM, 1D signals as a two-column CSV.
fn write_signal(report: &mut Report, out: &Path, stem: &str, x: &Signal) -> Result<(), Failure> {
    match x.shape() {
        Shape::D2 { .. } => {
            let path = out.join(format!("{stem}.pgm"));
            atomic_write(&path, &encode_pgm(x, PgmFormat::Binary)?)?;
            report.lines.push(format!("wrote {}", path.display()));
            report.outputs.push(path);
            Ok(())
        }
        Shape::D1(_) => {
            let mut t = Table::new(["i", "x"]);
            for (i, &v) in x.as_slice().iter().enumerate() {
                t.push(vec![i.into(), v.into()])?;
            }
            write_table(report, out.join(format!("{stem}.csv")), &t)
        }
    }
}

/// Loads the input PGM before any work starts; an unreadable input path is a
/// usage error.
pub fn check_image(settings: &Settings) -> Result<(), Failure> {
    if let Some(p) = settings.get::<String>("image")? {
        read_pgm(&p).map_err(|e| match e {
            Error::Io(m) => Error::InvalidConfig(format!("cannot read image {p}: {m}")),
            e => e,
        })?;
    }
    Ok(())
}
