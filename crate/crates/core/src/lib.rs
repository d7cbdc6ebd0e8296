//! Numerical checks of Hölder regularity for Hamilton-Jacobi equations with
//! growth-bounded Hamiltonians.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod envelope;
pub mod error;
pub mod format;
pub mod gallery;
pub mod grid;
pub mod holder;
pub mod reverse_holder;
pub mod stochastic;
pub mod value_solver;

pub use envelope::{conjugate_exponent, hopf_lax_step, GrowthEnvelope, HopfLaxOptions, HopfLaxStep};
pub use error::{Error, Result};
pub use format::fmt_sig;
pub use gallery::{optimality_bruteforce, parabola_solution, residual_check, xi0_decreasing_check};
pub use grid::{DiscreteArc, GridFunction2D, UniformGrid};
pub use holder::{fit_holder_exponent, holder_seminorm, lipschitz_constant, Direction, HolderFit, Region};
pub use reverse_holder::{theta_threshold, Anchor, SampledFunction1D, ThetaResult};
pub use stochastic::{simulate_bridge, simulate_controlled, BridgeSpec, ControlPolicy, PathEnsemble, SdeSpec};
pub use value_solver::{solve_value_function, CounterexampleSpec, ValueSolution, VariationalProblem};
