//! Consensus equilibrium of a data-fit agent and graph-filter agents.
//!
//! For the denoising pair `F(z) = (y + αz)/(1 + α)`, `G(z) = Wz`, every
//! equilibrium `x̂` satisfies `((1−α)I + αW⁻¹)x̂ = y`. Several quadratic
//! objectives share this minimizer; [`minimize_psi`] solves each of them
//! through its own stationarity system so they can be compared.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::estimators::pnp_gain;
use crate::graph_filter::GraphFilter;
use crate::signals::{ForwardModel, Signal};
use crate::spectral::{
    check_dim, eig_sym, pinv_from_decomp, solve_spd, sqrt_from_decomp, SpdFactor, SymMatrix,
};
use crate::table::Table;

/// Tolerance on `Σ μᵢ = 1` for the prior weights.
pub const WEIGHT_SUM_TOL: f64 = 1e-12;
/// Relative ridge added to `Σ` by [`optimal_weights`] when none is given.
pub const DEFAULT_RIDGE_SCALE: f64 = 1e-10;

const CG_REL_TOL: f64 = 1e-14;

fn check_unit_alpha(alpha: f64) -> Result<()> {
    if (0.0..=1.0).contains(&alpha) {
        Ok(())
    } else {
        Err(Error::InvalidConfig(format!(
            "alpha = {alpha} must lie in [0, 1]"
        )))
    }
}

fn check_positive_alpha(alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidConfig(format!("alpha = {alpha} must be > 0")))
    }
}

/// `‖((1−α)I + αW⁻¹)x̂ − y‖`, evaluated in the eigenbasis of `W`.
pub fn ce_residual_single(xhat: &Signal, y: &Signal, w: &GraphFilter, alpha: f64) -> Result<f64> {
    check_dim(w.dim(), xhat.len())?;
    check_dim(w.dim(), y.len())?;
    let d = w.require_invertible()?;
    let lhs = d.apply_spectral(xhat.data(), |s| (1.0 - alpha) + alpha / s)?;
    Ok((lhs - y.data()).norm())
}

/// The four objectives sharing the equilibrium as minimizer.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PsiVariant {
    /// `½‖x − y‖² + (α/2) xᵀ(W⁻¹ − I)x`
    Phi,
    /// `½‖x − Wy‖² − ((1−α)/2) xᵀ(I − W)x`
    Psi1,
    /// `½(x − y)ᵀW(x − y) + (α/2) xᵀ(I − W)x`
    Psi2,
    /// `½‖x − [(1−α)I + αW⁻¹]⁻¹y‖²`
    Psi3,
}

impl PsiVariant {
    pub const ALL: [PsiVariant; 4] = [
        PsiVariant::Phi,
        PsiVariant::Psi1,
        PsiVariant::Psi2,
        PsiVariant::Psi3,
    ];
}

fn explicit_inverse(w: &GraphFilter) -> Result<SymMatrix> {
    let f = SpdFactor::new(w.matrix())?;
    let n = w.dim();
    let mut inv = DMatrix::zeros(n, n);
    for j in 0..n {
        let mut e = DVector::zeros(n);
        e[j] = 1.0;
        inv.set_column(j, &f.solve(&e)?);
    }
    SymMatrix::symmetrize_from_lower(inv)
}

/// Minimizes the chosen objective exactly, each through a different route:
///
/// * `Phi`: Cholesky on `(1−α)I + αW⁻¹`, with `W⁻¹` formed column by column
///   from a Cholesky factor of `W`.
/// * `Psi1`: Cholesky on its Hessian `αI + (1−α)W`, right-hand side `Wy`.
/// * `Psi2`: conjugate gradient driven by the gradient of the objective.
/// * `Psi3`: spectral gains `s/((1−α)s + α)`.
///
/// `alpha` must lie in `[0, 1]`.
pub fn minimize_psi(
    variant: PsiVariant,
    y: &Signal,
    w: &GraphFilter,
    alpha: f64,
) -> Result<Signal> {
    check_unit_alpha(alpha)?;
    check_dim(w.dim(), y.len())?;
    let x = match variant {
        PsiVariant::Phi => {
            w.require_invertible()?;
            let m = explicit_inverse(w)?.affine_identity(alpha, 1.0 - alpha);
            solve_spd(&m, y.data())?
        }
        PsiVariant::Psi1 => {
            let h = w.matrix().affine_identity(1.0 - alpha, alpha);
            solve_spd(&h, &w.apply(y.data())?)?
        }
        PsiVariant::Psi2 => {
            let grad = |x: &DVector<f64>| -> Result<DVector<f64>> {
                let fit = w.apply(&(x - y.data()))?;
                let reg = x - w.apply(x)?;
                Ok(fit + reg * alpha)
            };
            conjugate_gradient(grad, y.len())?
        }
        PsiVariant::Psi3 => {
            let d = w.require_invertible()?;
            d.apply_spectral(y.data(), |s| pnp_gain(s, alpha))?
        }
    };
    y.with_data(x)
}

/// Minimizes a convex quadratic given only its gradient `g(x) = Hx − b`.
fn conjugate_gradient(
    grad: impl Fn(&DVector<f64>) -> Result<DVector<f64>>,
    n: usize,
) -> Result<DVector<f64>> {
    let mut x = DVector::zeros(n);
    let g0 = grad(&x)?;
    // Hp = g(p) − g(0) since the gradient is affine
    let hess = |p: &DVector<f64>| -> Result<DVector<f64>> { Ok(grad(p)? - &g0) };
    let mut r = -&g0;
    let mut p = r.clone();
    let b_norm = g0.norm();
    if b_norm == 0.0 {
        return Ok(x);
    }
    let mut rr = r.norm_squared();
    let max_iters = 10 * n + 50;
    for _ in 0..max_iters {
        let hp = hess(&p)?;
        let php = p.dot(&hp);
        if !(php > 0.0) {
            return Err(Error::NotPositiveDefinite {
                value: php,
                tol: 0.0,
            });
        }
        let step = rr / php;
        x.axpy(step, &p, 1.0);
        r.axpy(-step, &hp, 1.0);
        let rr_new = r.norm_squared();
        if rr_new.sqrt() <= CG_REL_TOL * b_norm {
            // one recomputed residual guards against drift
            let true_r = grad(&x)?.norm();
            if true_r <= 10.0 * CG_REL_TOL * b_norm {
                return Ok(x);
            }
            r = -grad(&x)?;
            p = r.clone();
            rr = r.norm_squared();
            continue;
        }
        p = &r + &p * (rr_new / rr);
        rr = rr_new;
    }
    Err(Error::NoConvergence {
        what: "conjugate gradient",
        iters: max_iters,
        residual: grad(&x)?.norm() / b_norm,
    })
}

/// Value of the chosen objective at `x`.
pub fn psi_objective(
    variant: PsiVariant,
    x: &Signal,
    y: &Signal,
    w: &GraphFilter,
    alpha: f64,
) -> Result<f64> {
    check_dim(w.dim(), x.len())?;
    check_dim(w.dim(), y.len())?;
    let (x, y) = (x.data(), y.data());
    let lap = |v: &DVector<f64>| -> Result<f64> { Ok(v.dot(&(v - w.apply(v)?))) };
    Ok(match variant {
        PsiVariant::Phi => {
            w.require_invertible()?;
            let winv_x = solve_spd(w.matrix(), x)?;
            0.5 * (x - y).norm_squared() + 0.5 * alpha * (x.dot(&winv_x) - x.norm_squared())
        }
        PsiVariant::Psi1 => 0.5 * (x - w.apply(y)?).norm_squared() - 0.5 * (1.0 - alpha) * lap(x)?,
        PsiVariant::Psi2 => {
            let e = x - y;
            0.5 * e.dot(&w.apply(&e)?) + 0.5 * alpha * lap(x)?
        }
        PsiVariant::Psi3 => {
            let d = w.require_invertible()?;
            let target = d.apply_spectral(y, |s| pnp_gain(s, alpha))?;
            0.5 * (x - target).norm_squared()
        }
    })
}

/// `½(x − y)ᵀ(I + β(I − W))(x − y) + (α/2) xᵀ(I − W)x`.
pub fn kheradmand_milanfar_objective(
    x: &Signal,
    y: &Signal,
    w: &GraphFilter,
    alpha: f64,
    beta: f64,
) -> Result<f64> {
    check_dim(w.dim(), x.len())?;
    check_dim(w.dim(), y.len())?;
    let e = x.data() - y.data();
    let le = &e - w.apply(&e)?;
    let lx = x.data() - w.apply(x.data())?;
    Ok(0.5 * (e.norm_squared() + beta * e.dot(&le)) + 0.5 * alpha * x.data().dot(&lx))
}

/// Solves `(AᵀA + α(W⁻¹ − I))x̂ = Aᵀy` in the eigenbasis of `W`:
/// `x̂ = Uc` with `(UᵀAᵀAU + α(S⁻¹ − I))c = UᵀAᵀy`.
pub fn solve_general_linear_ce(
    a: &ForwardModel,
    y: &Signal,
    w: &GraphFilter,
    alpha: f64,
) -> Result<Signal> {
    w.require_invertible()?;
    CeSolver::new(a, y, w, w.dim())?.solve(alpha)
}

/// The same condition restricted to modes with `s > tol`; components
/// along the remaining eigenvectors are zero. This is the limit of the
/// equilibrium as those eigenvalues tend to zero, and is what a
/// rank-deficient filter yields.
pub fn solve_general_linear_ce_truncated(
    a: &ForwardModel,
    y: &Signal,
    w: &GraphFilter,
    alpha: f64,
    tol: f64,
) -> Result<Signal> {
    CeSolver::truncated(a, y, w, tol)?.solve(alpha)
}

/// The general linear equilibrium system in the eigenbasis of `W`,
/// reusable across regularization weights.
///
/// Holds `UᵀAᵀAU` and `UᵀAᵀy` for all modes. [`CeSolver::solve`] uses the
/// leading `rank` of them; [`CeSolver::solve_laplacian`] uses all of them
/// for the graph-Laplacian system `(AᵀA + λ(I − W))x = Aᵀy`.
#[derive(Debug, Clone)]
pub struct CeSolver {
    u: DMatrix<f64>,
    s: Vec<f64>,
    gram: DMatrix<f64>,
    rhs: DVector<f64>,
    rank: usize,
    template: Signal,
}

impl CeSolver {
    /// Keeps the `r` leading modes for the equilibrium solve.
    pub fn new(a: &ForwardModel, y: &Signal, w: &GraphFilter, r: usize) -> Result<Self> {
        check_dim(a.output_dim(), y.len())?;
        check_dim(w.dim(), a.input_dim())?;
        let d = w.decomp()?;
        if r == 0 || r > d.dim() {
            return Err(Error::InvalidConfig(format!(
                "rank {r} outside 1..={}",
                d.dim()
            )));
        }
        let s: Vec<f64> = d.values().iter().copied().collect();
        if let Some((index, &value)) = s[..r].iter().enumerate().find(|(_, &v)| !(v > 0.0)) {
            return Err(Error::SmallEigenvalue { index, value });
        }
        let u = d.vectors().clone();
        let gram = u.tr_mul(&(a.gram().matrix() * &u));
        let rhs = u.tr_mul(&a.adjoint(y.data())?);
        let n = a.input_dim();
        let template = if y.len() == n {
            y.clone()
        } else {
            Signal::new(crate::signals::Shape::D1(n), DVector::zeros(n))?
        };
        Ok(CeSolver {
            u,
            s,
            gram,
            rhs,
            rank: r,
            template,
        })
    }

    /// Keeps every mode with `s > tol`.
    pub fn truncated(a: &ForwardModel, y: &Signal, w: &GraphFilter, tol: f64) -> Result<Self> {
        let d = w.decomp()?;
        let r = d.values().iter().take_while(|&&s| s > tol).count();
        if r == 0 {
            return Err(Error::SingularFilter {
                min_eig: d.max_eig(),
            });
        }
        Self::new(a, y, w, r)
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    /// Equilibrium solution for weight `alpha`.
    pub fn solve(&self, alpha: f64) -> Result<Signal> {
        check_positive_alpha(alpha)?;
        let r = self.rank;
        let extra: Vec<f64> = self.s[..r]
            .iter()
            .map(|&s| alpha * (1.0 / s - 1.0))
            .collect();
        self.modal_solve(r, &extra)
    }

    /// Graph-Laplacian solution for weight `lambda`, over all modes.
    pub fn solve_laplacian(&self, lambda: f64) -> Result<Signal> {
        check_positive_alpha(lambda)?;
        let extra: Vec<f64> = self.s.iter().map(|&s| lambda * (1.0 - s)).collect();
        self.modal_solve(self.s.len(), &extra)
    }

    /// Solves `(G₁₁ + diag(extra))c = b₁` on the leading `r` modes with
    /// symmetric Jacobi scaling, then maps back with `U₁`.
    fn modal_solve(&self, r: usize, extra: &[f64]) -> Result<Signal> {
        let mut m = self.gram.view((0, 0), (r, r)).into_owned();
        for (k, &e) in extra.iter().enumerate() {
            m[(k, k)] += e;
        }
        let scale: Vec<f64> = (0..r)
            .map(|k| {
                let d = m[(k, k)];
                if d > 0.0 {
                    Ok(1.0 / d.sqrt())
                } else {
                    Err(Error::NotPositiveDefinite { value: d, tol: 0.0 })
                }
            })
            .collect::<Result<_>>()?;
        let m = SymMatrix::from_lower_fn(r, |i, j| m[(i, j)] * scale[i] * scale[j]);
        let b = DVector::from_fn(r, |k, _| self.rhs[k] * scale[k]);
        let mut c = solve_spd(&m, &b)?;
        for (ck, sk) in c.iter_mut().zip(&scale) {
            *ck *= sk;
        }
        self.template.with_data(self.u.columns(0, r) * c)
    }
}

/// Synthesis form: `x̂ = W^{1/2} z` where `z` minimizes
/// `½‖AW^{1/2}z − y‖² + (α/2) zᵀ(I − W)z`, i.e. solves
/// `(W^{1/2}AᵀAW^{1/2} + α(I − W))z = W^{1/2}Aᵀy`.
///
/// Works for singular `W`; the output then lies in its range. If the inner
/// system is numerically singular a ridge of `1e−12 · trace / n` is added
/// once.
pub fn solve_synthesis_form(
    a: &ForwardModel,
    y: &Signal,
    w: &GraphFilter,
    alpha: f64,
) -> Result<Signal> {
    check_positive_alpha(alpha)?;
    check_dim(a.output_dim(), y.len())?;
    check_dim(w.dim(), a.input_dim())?;
    let half = sqrt_from_decomp(w.decomp()?)?;
    let h = half.matrix();
    let mut inner = h * a.gram().matrix() * h;
    inner += (DMatrix::identity(w.dim(), w.dim()) - w.matrix().matrix()) * alpha;
    let inner = SymMatrix::symmetrize_from_lower(inner)?;
    let rhs = h * a.adjoint(y.data())?;
    let z = match solve_spd(&inner, &rhs) {
        Ok(z) => z,
        Err(Error::NotPositiveDefinite { .. }) => {
            let ridge = 1e-12 * inner.trace() / inner.dim() as f64;
            solve_spd(&inner.affine_identity(1.0, ridge), &rhs)?
        }
        Err(e) => return Err(e),
    };
    let x = h * z;
    match a {
        ForwardModel::Dense(_) if y.len() != x.len() => {
            Signal::new(crate::signals::Shape::D1(x.len()), x)
        }
        _ => y.with_data(x),
    }
}

/// The data agent `½‖x − y‖²` with proximal strength `alpha` and weight
/// `mu0`, plus graph-filter agents `Wᵢ` with weights `μᵢ` summing to one.
#[derive(Debug, Clone)]
pub struct AgentSet {
    pub alpha: f64,
    pub mu0: f64,
    pub priors: Vec<GraphFilter>,
    pub mu: Vec<f64>,
}

impl AgentSet {
    pub fn new(alpha: f64, mu0: f64, priors: Vec<GraphFilter>, mu: Vec<f64>) -> Result<Self> {
        let set = AgentSet {
            alpha,
            mu0,
            priors,
            mu,
        };
        set.validate()?;
        Ok(set)
    }

    /// Equal weights `1/k`.
    pub fn uniform(alpha: f64, mu0: f64, priors: Vec<GraphFilter>) -> Result<Self> {
        let k = priors.len();
        Self::new(alpha, mu0, priors, vec![1.0 / k as f64; k])
    }

    pub fn validate(&self) -> Result<()> {
        check_positive_alpha(self.alpha)?;
        if !(self.mu0 > 0.0) || !self.mu0.is_finite() {
            return Err(Error::InvalidConfig(format!(
                "mu0 = {} must be > 0",
                self.mu0
            )));
        }
        if self.priors.is_empty() {
            return Err(Error::InvalidConfig(
                "at least one prior agent is required".into(),
            ));
        }
        check_dim(self.priors.len(), self.mu.len())?;
        if let Some(m) = self.mu.iter().find(|&&m| !(m >= 0.0)) {
            return Err(Error::InvalidConfig(format!(
                "prior weight {m} must be >= 0"
            )));
        }
        let sum: f64 = self.mu.iter().sum();
        if (sum - 1.0).abs() > WEIGHT_SUM_TOL {
            return Err(Error::WeightSum(sum));
        }
        let n = self.priors[0].dim();
        for p in &self.priors {
            check_dim(n, p.dim())?;
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.priors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.priors.is_empty()
    }
}

/// Solution of a multi-agent equilibrium with its duals and residuals.
#[derive(Debug, Clone, PartialEq)]
pub struct CEReport {
    pub x: Signal,
    /// `û₀, û₁, …, û_k`.
    pub duals: Vec<DVector<f64>>,
    /// `‖Fᵢ(x̂ + ûᵢ) − x̂‖` for `i = 0..=k`.
    pub agent_residuals: Vec<f64>,
    /// `‖Σᵢ μᵢ ûᵢ‖` with `μ₀` included.
    pub consensus_residual: f64,
}

impl CEReport {
    /// Columns `term, index, residual`; one row per agent then the
    /// consensus row.
    pub fn to_table(&self) -> Table {
        let mut t = Table::new(["term", "index", "residual"]);
        for (i, &r) in self.agent_residuals.iter().enumerate() {
            t.push(vec!["agent".into(), i.into(), r.into()])
                .expect("fixed width");
        }
        t.push(vec![
            "consensus".into(),
            self.agent_residuals.len().into(),
            self.consensus_residual.into(),
        ])
        .expect("fixed width");
        t
    }

    pub fn max_residual(&self) -> f64 {
        self.agent_residuals
            .iter()
            .copied()
            .fold(self.consensus_residual, f64::max)
    }
}

/// Solves `(μ₀I + α(Σμᵢ Wᵢ⁻¹ − I))x̂ = μ₀y` with each `Wᵢ⁻¹` formed
/// spectrally, then evaluates the duals `û₀ = (x̂ − y)/α`,
/// `ûᵢ = (Wᵢ⁻¹ − I)x̂` and every equilibrium residual.
pub fn solve_multi_prior(agents: &AgentSet, y: &Signal) -> Result<CEReport> {
    agents.validate()?;
    let n = agents.priors[0].dim();
    check_dim(n, y.len())?;
    let (alpha, mu0) = (agents.alpha, agents.mu0);
    let mut m = DMatrix::<f64>::identity(n, n) * (mu0 - alpha);
    for (w, &mu) in agents.priors.iter().zip(&agents.mu) {
        let d = w.require_invertible()?;
        m += pinv_from_decomp(d, n)?.matrix() * (alpha * mu);
    }
    let m = SymMatrix::symmetrize_from_lower(m)?;
    let x = solve_spd(&m, &(y.data() * mu0))?;
    let xs = y.with_data(x)?;
    report(agents, y, xs)
}

fn report(agents: &AgentSet, y: &Signal, xs: Signal) -> Result<CEReport> {
    let (alpha, mu0) = (agents.alpha, agents.mu0);
    let x = xs.data();
    let u0 = (x - y.data()) / alpha;
    let f0 = (y.data() + (x + &u0) * alpha) / (1.0 + alpha);
    let mut agent_residuals = vec![(f0 - x).norm()];
    let mut consensus = &u0 * mu0;
    let mut duals = vec![u0];
    for (w, &mu) in agents.priors.iter().zip(&agents.mu) {
        let d = w.require_invertible()?;
        let ui = d.apply_spectral(x, |s| 1.0 / s - 1.0)?;
        agent_residuals.push((w.apply(&(x + &ui))? - x).norm());
        consensus.axpy(mu, &ui, 1.0);
        duals.push(ui);
    }
    Ok(CEReport {
        x: xs,
        duals,
        agent_residuals,
        consensus_residual: consensus.norm(),
    })
}

/// Single-prior solution with filter `i` alone (`μᵢ = 1`):
/// `x̂ᵢ = (μ₀I + α(Wᵢ⁻¹ − I))⁻¹μ₀y`, computed with the spectral gains
/// `μ₀s / (μ₀s + α(1 − s))`.
pub fn solve_individual(agents: &AgentSet, y: &Signal, i: usize) -> Result<Signal> {
    agents.validate()?;
    let w = agents
        .priors
        .get(i)
        .ok_or_else(|| Error::InvalidConfig(format!("prior index {i} out of range")))?;
    check_dim(w.dim(), y.len())?;
    let d = w.require_invertible()?;
    let (alpha, mu0) = (agents.alpha, agents.mu0);
    y.with_data(d.apply_spectral(y.data(), |s| mu0 * s / (mu0 * s + alpha * (1.0 - s)))?)
}

/// Oracle combination weights.
#[derive(Debug, Clone, PartialEq)]
pub struct Weights {
    pub mu: Vec<f64>,
    /// Ridge actually added to `Σ`.
    pub ridge: f64,
    /// `Σ` was identically zero (every estimate exact); `mu` is uniform.
    pub degenerate: bool,
}

/// `[Σ]ᵢⱼ = (x − x̂ᵢ)ᵀ(x − x̂ⱼ)`.
pub fn error_gram(x: &Signal, xhats: &[Signal]) -> Result<SymMatrix> {
    let errs: Vec<DVector<f64>> = xhats
        .iter()
        .map(|xi| {
            check_dim(x.len(), xi.len())?;
            Ok(x.data() - xi.data())
        })
        .collect::<Result<_>>()?;
    let k = errs.len();
    Ok(SymMatrix::from_lower_fn(k, |i, j| errs[i].dot(&errs[j])))
}

/// `μ* = (Σ + rI)⁻¹1 / 1ᵀ(Σ + rI)⁻¹1`, the minimizer of
/// `‖x − Σμᵢx̂ᵢ‖²` subject to `Σμᵢ = 1` (weights may be negative).
///
/// `ridge = None` uses `r = 1e−10 · trace(Σ) / k`.
pub fn optimal_weights(x: &Signal, xhats: &[Signal], ridge: Option<f64>) -> Result<Weights> {
    let k = xhats.len();
    if k < 2 {
        return Err(Error::InvalidConfig(format!(
            "need at least 2 estimates, got {k}"
        )));
    }
    let sigma = error_gram(x, xhats)?;
    let trace = sigma.trace();
    if trace == 0.0 {
        return Ok(Weights {
            mu: vec![1.0 / k as f64; k],
            ridge: 0.0,
            degenerate: true,
        });
    }
    let r = ridge.unwrap_or(DEFAULT_RIDGE_SCALE * trace / k as f64);
    if !(r >= 0.0) {
        return Err(Error::InvalidConfig(format!("ridge {r} must be >= 0")));
    }
    let d = eig_sym(&sigma.affine_identity(1.0, r))?;
    if !(d.min_eig() > 0.0) {
        return Err(Error::NotPositiveDefinite {
            value: d.min_eig(),
            tol: 0.0,
        });
    }
    let z = d.apply_spectral(&DVector::from_element(k, 1.0), |s| 1.0 / s)?;
    let total = z.sum();
    Ok(Weights {
        mu: (z / total).iter().copied().collect(),
        ridge: r,
        degenerate: false,
    })
}

/// `Σ μᵢ x̂ᵢ`; the weights must sum to one within `1e−10`.
pub fn combine_weighted(xhats: &[Signal], mu: &[f64]) -> Result<Signal> {
    check_dim(xhats.len(), mu.len())?;
    let first = xhats
        .first()
        .ok_or_else(|| Error::InvalidConfig("no estimates to combine".into()))?;
    let sum: f64 = mu.iter().sum();
    if (sum - 1.0).abs() > 1e-10 {
        return Err(Error::WeightSum(sum));
    }
    let mut acc = DVector::zeros(first.len());
    for (xi, &m) in xhats.iter().zip(mu) {
        check_dim(first.len(), xi.len())?;
        acc.axpy(m, xi.data(), 1.0);
    }
    first.with_data(acc)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::estimators::{estimate_pnp, EstimatorConfig};
    use crate::graph_filter::{
        block_filter, build_filter, random_filter, KernelConfig, Provenance,
    };
    use crate::signals::{make_signal_1d, test_image, SeededRng};

    fn sig(v: Vec<f64>) -> Signal {
        Signal::from_vec(v).unwrap()
    }

    fn rand_sig(n: usize, seed: u64) -> Signal {
        let mut rng = SeededRng::new(seed);
        sig((0..n).map(|_| rng.normal()).collect())
    }

    fn identity(n: usize) -> GraphFilter {
        GraphFilter::new(SymMatrix::identity(n), Provenance::Synthetic).unwrap()
    }

    #[test]
    fn residual_examples() {
        let w = random_filter(10, 1).unwrap();
        let y = rand_sig(10, 2);
        let xp = estimate_pnp(&y, &w, &EstimatorConfig::new(0.4, 0.0).unwrap()).unwrap();
        assert!(ce_residual_single(&xp, &y, &w, 0.4).unwrap() < 1e-8 * y.data().norm());
        assert_eq!(ce_residual_single(&y, &y, &identity(10), 0.4).unwrap(), 0.0);
        // x̂ = y with W ≠ I: residual α‖(W⁻¹ − I)y‖
        let winv = w.matrix().matrix().clone().try_inverse().unwrap();
        let expect = 0.4 * ((winv - DMatrix::identity(10, 10)) * y.data()).norm();
        let got = ce_residual_single(&y, &y, &w, 0.4).unwrap();
        assert!(got > 0.0 && (got - expect).abs() < 1e-10 * expect);
    }

    #[test]
    fn psi1_extremes() {
        let w = random_filter(8, 3).unwrap();
        let y = rand_sig(8, 4);
        let x = minimize_psi(PsiVariant::Psi1, &y, &w, 1.0).unwrap();
        assert!((x.data() - w.apply(y.data()).unwrap()).norm() < 1e-12);
        let x = minimize_psi(PsiVariant::Psi1, &y, &w, 0.0).unwrap();
        assert!((x.data() - y.data()).norm() < 1e-10);
        assert!(minimize_psi(PsiVariant::Psi1, &y, &w, 1.5).is_err());
    }

    #[test]
    fn four_variants_agree() {
        let w = random_filter(12, 7).unwrap();
        let y = rand_sig(12, 8);
        let xs: Vec<Signal> = PsiVariant::ALL
            .iter()
            .map(|&v| minimize_psi(v, &y, &w, 0.3).unwrap())
            .collect();
        for a in &xs {
            for b in &xs {
                assert!((a.data() - b.data()).norm() < 1e-8);
            }
            assert!(ce_residual_single(a, &y, &w, 0.3).unwrap() < 1e-8 * y.data().norm());
        }
    }

    #[test]
    fn minimizers_are_stationary_for_their_objectives() {
        // finite-difference check that each returned point is a minimum
        let w = random_filter(6, 2).unwrap();
        let y = rand_sig(6, 3);
        for v in PsiVariant::ALL {
            let x = minimize_psi(v, &y, &w, 0.6).unwrap();
            let f0 = psi_objective(v, &x, &y, &w, 0.6).unwrap();
            for i in 0..6 {
                let mut d = x.data().clone();
                d[i] += 1e-4;
                let f1 = psi_objective(v, &x.with_data(d).unwrap(), &y, &w, 0.6).unwrap();
                assert!(f1 >= f0 - 1e-14, "{v:?} coordinate {i}");
            }
        }
    }

    #[test]
    fn psi2_is_kheradmand_milanfar_at_beta_minus_one() {
        let w = random_filter(9, 5).unwrap();
        let y = rand_sig(9, 6);
        for seed in 0..5 {
            let x = rand_sig(9, 100 + seed);
            let a = psi_objective(PsiVariant::Psi2, &x, &y, &w, 0.4).unwrap();
            let b = kheradmand_milanfar_objective(&x, &y, &w, 0.4, -1.0).unwrap();
            assert!((a - b).abs() < 1e-10 * a.abs().max(1.0));
        }
    }

    #[test]
    fn general_linear_examples() {
        let w = random_filter(16, 9).unwrap();
        let y = make_signal_1d(16, 1).unwrap();
        let x = solve_general_linear_ce(&ForwardModel::Identity(16), &y, &w, 0.3).unwrap();
        let xp = estimate_pnp(&y, &w, &EstimatorConfig::new(0.3, 0.0).unwrap()).unwrap();
        assert!((x.data() - xp.data()).norm() < 1e-10);

        // W = I leaves plain least squares
        let mut rng = SeededRng::new(12);
        let a = ForwardModel::Dense(DMatrix::from_fn(20, 16, |_, _| rng.normal()));
        let yd = rand_sig(20, 13);
        let x = solve_general_linear_ce(&a, &yd, &identity(16), 0.3).unwrap();
        let ls = a
            .gram()
            .matrix()
            .clone()
            .lu()
            .solve(&a.adjoint(yd.data()).unwrap())
            .unwrap();
        assert!((x.data() - ls).norm() < 1e-10);

        let mask = ForwardModel::random_mask(16, 0.5, 4).unwrap();
        let ym = crate::signals::apply_forward(&mask, &y).unwrap();

        let x = solve_general_linear_ce(&mask, &ym, &w, 0.3).unwrap();
        let winv = w.matrix().matrix().clone().try_inverse().unwrap();
        let lhs =
            mask.gram().matrix() * x.data() + (winv - DMatrix::identity(16, 16)) * x.data() * 0.3;
        assert!((lhs - mask.adjoint(ym.data()).unwrap()).norm() < 1e-8);
    }

    #[test]
    fn modal_laplacian_matches_direct() {
        let x = test_image(8, 8).unwrap();
        let w = build_filter(
            &x,
            &KernelConfig {
                h: 0.5,
                patch_size: 3,
                search_radius: None,
                spatial_sigma: Some(2.0),
            },
            Provenance::Oracle,
        )
        .unwrap();
        let mask = ForwardModel::random_mask(64, 0.5, 3).unwrap();
        let y = crate::signals::apply_forward(&mask, &x).unwrap();
        let solver = CeSolver::new(&mask, &y, &w, 64).unwrap();
        for lambda in [1e-3, 0.1, 5.0] {
            let modal = solver.solve_laplacian(lambda).unwrap();
            let direct =
                crate::estimators::estimate_laplacian_general(&mask, &y, &w, lambda).unwrap();
            assert!((modal.data() - direct.data()).norm() < 1e-8 * direct.data().norm());
        }
    }

    #[test]
    fn synthesis_matches_analysis_and_respects_range() {
        let w = random_filter(14, 2).unwrap();
        let y = rand_sig(14, 1);
        let mask = ForwardModel::random_mask(14, 0.6, 3).unwrap();
        for a in [ForwardModel::Identity(14), mask] {
            let s = solve_synthesis_form(&a, &y, &w, 0.2).unwrap();
            let g = solve_general_linear_ce(&a, &y, &w, 0.2).unwrap();
            assert!((s.data() - g.data()).norm() < 1e-6);
        }
        let b = block_filter(12, 5, 2).unwrap();
        let y = rand_sig(12, 9);
        let x = solve_synthesis_form(&ForwardModel::Identity(12), &y, &b, 0.3).unwrap();
        let u2 = b.decomp().unwrap().trailing_vectors(5);
        assert!(u2.tr_mul(x.data()).norm() < 1e-8);
        // and it agrees with the truncated analysis solve
        let t = solve_general_linear_ce_truncated(&ForwardModel::Identity(12), &y, &b, 0.3, 1e-10)
            .unwrap();
        assert!((x.data() - t.data()).norm() < 1e-6);
        let x = solve_synthesis_form(&ForwardModel::Identity(12), &y, &identity(12), 0.3).unwrap();
        assert!((x.data() - y.data()).norm() < 1e-12);
    }

    #[test]
    fn multi_prior_reductions() {
        let w = random_filter(10, 4).unwrap();
        let y = rand_sig(10, 5);
        let one = AgentSet::uniform(0.3, 1.5, vec![w.clone()]).unwrap();
        let r = solve_multi_prior(&one, &y).unwrap();
        let xp = estimate_pnp(&y, &w, &EstimatorConfig::new(0.3 / 1.5, 0.0).unwrap()).unwrap();
        assert!((r.x.data() - xp.data()).norm() < 1e-10);
        assert!((solve_individual(&one, &y, 0).unwrap().data() - xp.data()).norm() < 1e-10);

        let same = AgentSet::uniform(0.3, 1.5, vec![w.clone(), w.clone(), w]).unwrap();
        let r3 = solve_multi_prior(&same, &y).unwrap();
        assert!((r3.x.data() - xp.data()).norm() < 1e-10);
        assert_eq!(r3.agent_residuals.len(), 4);
        assert!(r3.max_residual() < 1e-8);
        assert_eq!(r3.to_table().len(), 5);
    }

    #[test]
    fn multi_prior_consensus() {
        let ws: Vec<GraphFilter> = (0..4).map(|s| random_filter(12, 20 + s).unwrap()).collect();
        let agents = AgentSet::new(0.05, 1.0, ws, vec![0.1, 0.2, 0.3, 0.4]).unwrap();
        let y = rand_sig(12, 3);
        let r = solve_multi_prior(&agents, &y).unwrap();
        assert!(r.consensus_residual < 1e-8, "{}", r.consensus_residual);
        assert!(r.agent_residuals.iter().all(|&v| v < 1e-8));
    }

    #[test]
    fn agent_set_validation() {
        let w = identity(3);
        assert!(matches!(
            AgentSet::new(0.1, 1.0, vec![w.clone(), w.clone()], vec![0.5, 0.6]),
            Err(Error::WeightSum(_))
        ));
        assert!(AgentSet::new(0.1, 0.0, vec![w.clone()], vec![1.0]).is_err());
        assert!(AgentSet::new(0.1, 1.0, vec![w.clone(), w], vec![1.5, -0.5]).is_err());
    }

    #[test]
    fn weight_examples() {
        let x = sig(vec![0.0, 0.0, 0.0]);
        let e = sig(vec![0.1, -0.2, 0.3]);
        let w = optimal_weights(&x, &[e.clone(), e.clone()], None).unwrap();
        assert!((w.mu[0] - 0.5).abs() < 1e-12 && (w.mu[1] - 0.5).abs() < 1e-12);

        let a = sig(vec![1e-6, 0.0, 0.0]);
        let b = sig(vec![0.0, 1.0, 0.0]);
        let w = optimal_weights(&x, &[a, b], None).unwrap();
        assert!(w.mu[0] > 1.0 - 1e-9);

        let w = optimal_weights(&x, &[x.clone(), x.clone(), x.clone()], None).unwrap();
        assert!(w.degenerate && w.mu == vec![1.0 / 3.0; 3]);
        assert!(optimal_weights(&x, std::slice::from_ref(&x), None).is_err());
    }

    #[test]
    fn weights_satisfy_kkt() {
        let x = rand_sig(20, 1);
        let xs: Vec<Signal> = (0..4)
            .map(|k| {
                sig(x
                    .as_slice()
                    .iter()
                    .zip(rand_sig(20, 50 + k).as_slice())
                    .map(|(a, b)| a + 0.1 * b)
                    .collect())
            })
            .collect();
        let w = optimal_weights(&x, &xs, None).unwrap();
        let sigma = error_gram(&x, &xs).unwrap().affine_identity(1.0, w.ridge);
        let m = sigma.mul_vec(&DVector::from_vec(w.mu.clone())).unwrap();
        let c = m.mean();
        assert!(m.iter().all(|v| (v - c).abs() < 1e-8 * c.abs().max(1.0)));
        assert!((w.mu.iter().sum::<f64>() - 1.0).abs() < 1e-14);
        // the combination beats every single estimate
        let combo = combine_weighted(&xs, &w.mu).unwrap();
        let err = (combo.data() - x.data()).norm();
        assert!(xs
            .iter()
            .all(|xi| err <= (xi.data() - x.data()).norm() + 1e-12));
    }

    #[test]
    fn combine_examples() {
        let a = sig(vec![1.0, 2.0]);
        let b = sig(vec![3.0, -1.0]);
        assert_eq!(
            combine_weighted(&[a.clone(), b.clone()], &[1.0, 0.0]).unwrap(),
            a
        );
        assert_eq!(
            combine_weighted(&[a.clone(), a.clone()], &[0.25, 0.75]).unwrap(),
            a
        );
        assert!(matches!(
            combine_weighted(&[a, b], &[0.5, 0.6]),
            Err(Error::WeightSum(_))
        ));
    }
}
