//! Mild solutions of the impulsive systems and an independent RK4 oracle.

mod engine;
mod oracle;
pub mod quadrature;
mod solve;
mod trajectory;

pub use engine::{Propagation, Propagator};
pub use oracle::dense_oracle;
pub(crate) use oracle::{rk4_impulsive, rk4_step, step_count};
pub use quadrature::{gauss_legendre, QuadratureGrid};
pub use solve::{
    mild_solve_linear, mild_solve_semilinear, ControlFn, PicardOptions, SemilinearSolution,
};
pub(crate) use solve::{check_impulse_controls, semilinear_with, standard_jumps};
pub use trajectory::{fmt_f64, Segment, Side, Trajectory};
