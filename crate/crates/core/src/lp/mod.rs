//! Response-function linear programs: an independent oracle for the bounds of
//! the designs where selection may be confounded.
//!
//! Every causal model compatible with a design is a distribution `q` over
//! joint response-function assignments. Observed cells are sums of `q`, and
//! `θ` is the linear functional `Σ q (Y(1) - Y(0))`, so its sharp bounds are
//! the minimum and maximum of a linear program.

mod oracle;
mod program;
mod simplex;

pub use oracle::{cells_to_f64, oracle_check, oracle_check_exact, random_instance, ExactOracleReport, OracleReport};
pub use program::{build_program, ConstraintRow, ResponseFunctionProgram, ResponseTuple};
pub use simplex::{solve_min_max, LpField, LpSolution, LpStatus};
