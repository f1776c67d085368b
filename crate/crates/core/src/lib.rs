//! Control co-design for a boundary-controlled 1D reaction–diffusion PDE.
//!
//! The pipeline discretizes `x_t = a x_ξξ + b x` with Robin feedback
//! `x_ξ(0) = k1 x(0)`, `x_ξ(1) = k2 x(1)` by the method of lines, turns the
//! infinite-horizon quadratic cost into `f_d(a) + tr(P X0)` through a
//! Lyapunov equation, and descends on `(a, b, k1, k2)` inside the set where
//! the energy margins are negative and the closed loop is Hurwitz. A
//! separate time-stepping path re-evaluates the original cost on the
//! simulated field.

pub mod cli;
pub mod discretization;
pub mod error;
pub mod lyapunov;
pub mod model;
pub mod optimizer;
pub mod pdesim;
pub mod sensitivity;

pub use discretization::{assemble, DiscreteSystem, GridConfig, X0Mode};
pub use error::{CcdError, Result};
pub use lyapunov::{cost_jf, max_real_eig, solve_lyapunov, CostEvaluation, LyapunovSolution};
pub use model::{DesignObjective, DesignPoint, FeasibilityReport, Var, Weights};
pub use optimizer::{run_ccd, CcdOutcome, IterateTrace, OptimizerConfig, TerminalStatus};
pub use pdesim::{simulate, Scheme, SimConfig};
pub use sensitivity::{gradient_jf, Gradient};
