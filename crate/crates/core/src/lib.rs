//! Numerics for hypoelliptic and partially hypoelliptic operators.

pub mod error;
pub mod grid;
pub mod io;
pub mod kernels;
pub mod levi;
pub mod norms;
pub mod spectral;
pub mod classify;
pub mod mizohata;
pub mod numeric;
pub mod symbol;

pub use error::{Error, Result};
pub use symbol::{parse, Coeff, MultiIndex, SymbolPoly, VariableSplit};
