//! Simulation and resolvent-regularized control synthesis for linear,
//! semilinear and neutral evolution equations with impulsive state jumps.
//!
//! The crate is organised bottom-up:
//!
//! - [`operator`]: semigroup evaluators, jump maps and downstream transfers,
//! - [`propagator`]: mild solutions on a composite Gauss–Legendre grid and an
//!   RK4 oracle,
//! - [`gramian`]: the controllability operators and resolvent solves,
//! - [`synthesis`]: moment vectors, regularized controls and α sweeps,
//! - [`neutral`]: the delayed neutral variant,
//! - [`models`]: bundled heat, wave and rotation presets,
//! - [`cli`]: configuration, subcommands and CSV output.

pub mod cli;
pub mod error;
pub mod gramian;
pub mod interp;
pub mod models;
pub mod neutral;
pub mod operator;
pub mod propagator;
pub mod synthesis;

pub use error::{Error, Result};
