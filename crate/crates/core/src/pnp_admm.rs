//! Plug-and-play ADMM with a fixed linear graph filter as the denoiser.
//!
//! One iteration, with scaled dual `ū`:
//!
//! ```text
//! x ← argmin ½‖Ax − y‖² + (ρ/2)‖x − (v − ū)‖²
//! v ← W (x + ū)
//! ū ← ū + x − v
//! ```
//!
//! At a fixed point `x = v = x̂`, and `(x̂, û)` with `û = −ū` is a consensus
//! equilibrium of the data agent `F(z) = (AᵀA + ρI)⁻¹(Aᵀy + ρz)` and the
//! filter `G = W`: `x̂ = F(x̂ + û)` and `x̂ = G(x̂ − û)`.

use nalgebra::DVector;

use crate::error::{Error, Result};
use crate::graph_filter::GraphFilter;
use crate::signals::{shepard_fill, ForwardModel, Signal};
use crate::spectral::{check_dim, SpdFactor, SymMatrix};
use crate::table::Table;

pub const DEFAULT_TOL: f64 = 1e-8;
pub const DEFAULT_MAX_ITERS: usize = 5000;

#[derive(Debug, Clone)]
pub struct AdmmProblem {
    pub a: ForwardModel,
    pub y: Signal,
    pub rho: f64,
    pub w: GraphFilter,
    pub max_iters: usize,
    pub tol: f64,
}

impl AdmmProblem {
    /// Problem with the default stopping rule.
    pub fn new(a: ForwardModel, y: Signal, w: GraphFilter, rho: f64) -> Result<Self> {
        let pb = AdmmProblem {
            a,
            y,
            rho,
            w,
            max_iters: DEFAULT_MAX_ITERS,
            tol: DEFAULT_TOL,
        };
        pb.validate()?;
        Ok(pb)
    }

    pub fn with_tol(mut self, tol: f64) -> Self {
        self.tol = tol;
        self
    }

    pub fn with_max_iters(mut self, max_iters: usize) -> Self {
        self.max_iters = max_iters;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.rho > 0.0) || !self.rho.is_finite() {
            return Err(Error::InvalidConfig(format!(
                "rho = {} must be > 0",
                self.rho
            )));
        }
        if !(self.tol > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "tol = {} must be > 0",
                self.tol
            )));
        }
        check_dim(self.a.output_dim(), self.y.len())?;
        check_dim(self.w.dim(), self.a.input_dim())
    }

    fn x_system(&self) -> SymMatrix {
        self.a.gram().affine_identity(1.0, self.rho)
    }
}

/// One row of the residual history.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IterRecord {
    /// `‖x_k − v_k‖`.
    pub primal: f64,
    /// `‖x_k − x_{k−1}‖ / max(1, ‖x_k‖)`.
    pub change: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdmmState {
    pub x: Signal,
    pub v: Signal,
    pub u_bar: Signal,
    pub k: usize,
    pub history: Vec<IterRecord>,
    pub converged: bool,
}

impl AdmmState {
    /// `x₀ = v₀ = Aᵀy` (Shepard interpolation for sampling masks), `ū₀ = 0`.
    pub fn initial(pb: &AdmmProblem) -> Result<Self> {
        pb.validate()?;
        let n = pb.a.input_dim();
        let x0 = match &pb.a {
            ForwardModel::Mask(_) => shepard_fill(&pb.y, &pb.a)?,
            ForwardModel::Identity(_) => pb.y.clone(),
            ForwardModel::Dense(_) => {
                Signal::new(crate::signals::Shape::D1(n), pb.a.adjoint(pb.y.data())?)?
            }
        };
        let zero = x0.with_data(DVector::zeros(n))?;
        Ok(AdmmState {
            v: x0.clone(),
            x: x0,
            u_bar: zero,
            k: 0,
            history: Vec::new(),
            converged: false,
        })
    }

    /// The consensus-equilibrium dual `û = −ū`.
    pub fn ce_dual(&self) -> DVector<f64> {
        -self.u_bar.data()
    }

    /// `(‖F(x̂ + û) − x̂‖, ‖G(x̂ − û) − x̂‖)` at the current `x̂ = x`.
    pub fn ce_residuals(&self, pb: &AdmmProblem) -> Result<(f64, f64)> {
        let x = self.x.data();
        let u = self.ce_dual();
        let rhs = pb.a.adjoint(pb.y.data())? + (x + &u) * pb.rho;
        let f = crate::spectral::solve_spd(&pb.x_system(), &rhs)?;
        let g = pb.w.apply(&(x - &u))?;
        Ok(((f - x).norm(), (g - x).norm()))
    }

    /// Residual history as columns `iter, primal_residual, change`.
    pub fn history_table(&self) -> Table {
        let mut t = Table::new(["iter", "primal_residual", "change"]);
        for (i, r) in self.history.iter().enumerate() {
            t.push(vec![(i + 1).into(), r.primal.into(), r.change.into()])
                .expect("fixed width");
        }
        t
    }
}

/// Solves `(AᵀA + ρI)x = Aᵀy + ρ(v − ū)`.
pub fn x_update(st: &AdmmState, pb: &AdmmProblem) -> Result<Signal> {
    let m = pb.x_system();
    let f = SpdFactor::new(&m)?;
    x_step(st, pb, &f)
}

fn x_step(st: &AdmmState, pb: &AdmmProblem, f: &SpdFactor<'_>) -> Result<Signal> {
    let rhs = pb.a.adjoint(pb.y.data())? + (st.v.data() - st.u_bar.data()) * pb.rho;
    st.x.with_data(f.solve(&rhs)?)
}

/// `v = W(x + ū)`.
pub fn v_update(st: &AdmmState, pb: &AdmmProblem) -> Result<Signal> {
    st.v.with_data(pb.w.apply(&(st.x.data() + st.u_bar.data()))?)
}

/// `ū + x − v`.
pub fn dual_update(st: &AdmmState) -> Result<Signal> {
    check_dim(st.u_bar.len(), st.x.len())?;
    check_dim(st.u_bar.len(), st.v.len())?;
    st.u_bar
        .with_data(st.u_bar.data() + (st.x.data() - st.v.data()))
}

/// Iterates from [`AdmmState::initial`] until both the relative change of
/// `x` and the relative primal residual `‖x − v‖ / max(1, ‖x‖)` drop below
/// `tol`, or `max_iters` is reached. The state is returned in both cases;
/// `converged` tells them apart.
///
/// The primal test matters: with `A = I` the first x-update reproduces
/// `x₀ = y` exactly, so the change alone would stop at `k = 1`.
pub fn run(pb: &AdmmProblem) -> Result<AdmmState> {
    let mut st = AdmmState::initial(pb)?;
    let m = pb.x_system();
    let f = SpdFactor::new(&m)?;
    while st.k < pb.max_iters {
        let x_prev = st.x.data().clone();
        st.x = x_step(&st, pb, &f)?;
        st.v = v_update(&st, pb)?;
        st.u_bar = dual_update(&st)?;
        st.k += 1;
        let xn = st.x.data().norm();
        let change = (st.x.data() - x_prev).norm() / xn.max(1.0);
        let primal = (st.x.data() - st.v.data()).norm();
        if !change.is_finite() || !primal.is_finite() {
            return Err(Error::NonFinite(st.k));
        }
        st.history.push(IterRecord { primal, change });
        if change < pb.tol && primal / xn.max(1.0) < pb.tol {
            st.converged = true;
            break;
        }
    }
    Ok(st)
}
