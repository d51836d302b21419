//! L²-torsion of chain complexes over finite von Neumann categories with
//! trace, without the determinant class condition.

pub mod category;
pub mod cellular;
pub mod checks;
pub mod cli;
pub mod detline;
pub mod error;
pub mod extcoh;
pub mod linalg;
pub mod random;
pub mod spectral;
pub mod torsion;

pub use error::{Error, Result};
