//! Numerical laboratory for Selberg zeta functions and resonances of
//! Schottky surfaces, their twisted L-functions, and finite covers.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod abelian;
pub mod cayley;
pub mod congruence;
pub mod error;
pub mod explicit_formula;
pub mod fit;
pub mod linalg;
pub mod schottky;
pub mod thermo;
pub mod transfer;
pub mod zeros;

pub use error::{Error, Result};
pub use num_complex::Complex64;
pub use schottky::{Disc, GeodesicClass, GeodesicTable, GroupSpec, MoebiusMap, SchottkyData, ValidationReport, Word};
pub use transfer::{GroupTable, TransferMatrix, TwistSpec};
