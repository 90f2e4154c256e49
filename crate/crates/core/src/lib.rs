//! Graph-filter analysis of Plug-and-Play ADMM.
//!
//! With a symmetric doubly stochastic filter `W` as the denoiser, PnP ADMM
//! solves a quadratic problem with regularizer `xᵀ(W⁻¹ − I)x`. The crate
//! builds such filters, evaluates the closed-form estimators and their
//! per-eigenmode error, runs the ADMM iteration, solves single- and
//! multi-prior consensus equilibria, and drives the experiments on top.

pub mod equilibrium;
pub mod error;
pub mod estimators;
pub mod experiments;
pub mod graph_filter;
pub mod pnp_admm;
pub mod signals;
pub mod spectral;
pub mod table;

pub use equilibrium::{AgentSet, CEReport, CeSolver, PsiVariant, Weights};
pub use error::{Error, Result};
pub use estimators::{EstimatorConfig, GainCurves, ModeReport, ModeTotals};
pub use experiments::{ExperimentKind, ExperimentSpec, SignalSource};
pub use graph_filter::{GraphFilter, KernelConfig, Provenance};
pub use pnp_admm::{AdmmProblem, AdmmState, IterRecord};
pub use signals::{ForwardModel, NoiseModel, SeededRng, Shape, Signal};
pub use spectral::{SpectralDecomp, SymMatrix};
pub use table::{Cell, Table};
