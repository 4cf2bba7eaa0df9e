//! Optimization kernels: a dense bounded-variable simplex solver and the
//! Dykstra projection used by the disaggregation loop.

mod projection;
mod simplex;

pub use projection::{clamp_box, project_affine_box, AffineProjector, TOL_PROJ};
pub use simplex::{solve_lp, LinearProgram, LpSolution, LpStatus, TOL_FEAS, TOL_OPT};
