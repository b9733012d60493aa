//! Exact algebra over finite fields for the isomorphism-of-polynomials
//! problem with one secret, its canonical forms, matrix square roots,
//! solution counting and the power-system variant.

pub mod counting;
pub mod error;
pub mod ip1s;
pub mod ippow;
pub mod field;
pub mod harness;
pub mod io;
pub mod matrix;
pub mod quadform;
pub mod sqrtmat;

pub use error::{Error, Result};
pub use field::{FieldCtx, FieldElem, UniPoly};
pub use matrix::MatrixF;
