//! Convexification toolbox and the per-block surrogate builders.
//!
//! Every surrogate is a [`ConvexProblem`]: a concave objective made of links
//! applied to complex quadratic forms, plus convex quadratic constraints. The
//! surrogates are tight at the expansion point and lower-bound the true
//! secrecy rate everywhere on their feasible set.

mod bounds;
mod builders;
mod forms;
mod problem;

pub use bounds::{log_frac_lower, quad_linearize, taylor_log_tangent, LogFracBound, Tangent};
pub use builders::{
    build_es_problem, build_ms_phase_problem, build_r_problem, build_w_problem, SubproblemConstants, TAU_FLOOR,
};
pub use forms::{trace_to_hadamard, QuadraticForm};
pub use problem::{Block, Constraint, ConvexProblem, Expansion, Link, Term};
