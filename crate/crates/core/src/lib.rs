//! Exact p-adic toolkit for the globally analytic principal series of the
//! pro-p Iwahori subgroup of GL(n).

pub mod base_change;
pub mod error;
pub mod iwahori;
pub mod linalg;
pub mod padic;
pub mod principal_series;
pub mod sample;
pub mod suite;
pub mod tate;
pub mod unramified;
pub mod verma;
pub mod weyl;

pub use error::{Error, Result};
pub use padic::{Coeff, PadicScalar, QpCtx};
pub use unramified::{UnramifiedField, UnramifiedScalar};
