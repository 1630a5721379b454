//! Numerical toolkit for twisted loop groups: graded Lie algebras, truncated
//! Laurent loops, generalized Iwasawa factorization, dressing, polynomial
//! Killing fields, flows and uniton diagnostics.

pub mod error;
pub mod factorization;
pub mod finite_type;
pub mod flows;
pub mod io;
pub mod lie;
pub mod linalg;
pub mod loops;
pub mod ode;
pub mod orbit;
pub mod random;
pub mod unitons;

pub use error::{Error, Result};
