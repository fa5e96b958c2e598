//! Whittaker functions of gl2 and gl3: integral representations, operator
//! realizations, intertwiners and the identities that tie them together.

pub mod cgamma;
pub mod cli;
pub mod error;
pub mod funcspace;
pub mod identities;
pub mod intertwiners;
pub mod quadrature;
pub mod realizations;
pub mod toda;
pub mod whittaker;

pub use cgamma::C;
pub use error::{Error, Result};
