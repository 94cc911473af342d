//! Successive convex approximation: tangent bounds, the convex subproblem
//! solver and the block coordinate descent driver.

pub mod bcd;
pub mod ldl;
pub mod subproblem;
pub mod surrogate;

pub use bcd::{bcd_solve, BcdConfig, BcdProblem, BcdTrace, BlockKind, BlockStep, BlockUpdate, Termination};
pub use subproblem::{
    solve_convex_subproblem, Func, InvTerm, LinearEq, OrderKey, Piece, SubproblemSolution, SubproblemSpec,
    SubproblemStatus, Tolerances,
};
pub use surrogate::{log_sum_inv_tangent, norm_sq_tangent, rate_of_sq_distance, rate_surrogate, AffineForm2, SurrogateRate};
