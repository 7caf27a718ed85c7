//! Grids, sampled fields, finite-difference operators, quadrature and field I/O.

mod field;
mod grid;
pub mod io;
pub mod ops;

pub use field::{BoundaryFunction, ScalarField, TwoFormField, VectorField, TWO_FORM_PAIRS};
pub(crate) use field::{ensure_same, weighted_sq};
pub use grid::{DomainSpec, MIN_POINTS};
pub use io::{read_field, write_field, Field, FieldKind, FORMAT_VERSION};
pub use ops::{curl, divergence, gradient, integrate, laplacian};
