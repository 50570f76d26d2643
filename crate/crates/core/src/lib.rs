pub mod error;
pub mod fld;
pub mod grid;
pub mod inversion;
pub mod lippmann;
pub mod measurement;
pub mod metrics;
pub mod phantoms;
pub mod pml;
pub mod sparse;
pub mod special;

pub use error::{Error, Result};
pub use grid::{ComplexField, Field, Grid, Norm, RealField};
