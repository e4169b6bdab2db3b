//! Finite noncommutative geometry: Krajewski diagrams, real spectral
//! triples, lifts along Bratteli arrows and spectral action comparison.

pub mod action;
pub mod algebra;
pub mod bratteli;
pub mod differential;
pub mod error;
pub mod io;
pub mod krajewski;
pub mod lifting;
pub mod linalg;
pub mod sample;

pub use error::{NcgError, Result};
