//! Scalar root finding, Lambert W, projections and a projected-gradient solver.

mod assignment;
mod fd;
mod lambert;
mod pg;
mod projection;
mod root;

pub use assignment::min_cost_assignment;
pub use fd::{finite_diff_check, FdReport};
pub use lambert::lambert_w0;
pub use pg::{projected_gradient_min, PgOptions, PgOutcome};
pub use projection::{BoxSimplexFeasibleSet, SumGroup, SumKind};
pub use root::{bisect, relay_convexity_threshold, Bisection};
