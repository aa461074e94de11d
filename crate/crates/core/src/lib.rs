//! Spectral-Galerkin simulation of the L²-sphere constrained damped heat flow
//! `u_t = Δu - |u|^{p-2}u + (‖∇u‖² + ‖u‖_p^p) u` with Dirichlet data on
//! intervals and rectangles, together with ground-state solvers and randomized
//! checks of the operator inequalities behind it.

pub mod cli;
pub mod config;
pub mod domain;
pub mod error;
pub mod flow;
pub mod ground_state;
pub mod lab;
pub mod operators;
pub mod presets;
pub mod snapshot;

pub use domain::{build_basis, norms, DomainSpec, Field, Mode, Norms, SpectralBasis};
pub use error::{Error, Result};
pub use flow::{run_flow, EnergyLedger, Flow, FlowConfig, FlowRun, FlowState, Integrator};
pub use operators::{CutoffSpec, OperatorParams};
pub use ground_state::{GroundStateResult, Method};
