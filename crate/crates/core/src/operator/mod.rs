//! Semigroup evaluators, jump maps and the composed transfer operators.

pub mod expm;
mod semigroup;
mod system;

pub use semigroup::{SemigroupKind, SemigroupModel};
pub use system::{
    downstream_map, downstream_maps, jump_apply, Impulse, ImpulsiveSystem, NonlinearityKind,
    TabulatedForcing,
};
