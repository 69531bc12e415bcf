//! Computational laboratory for lacunary systems `f(n_k x)`.

pub mod diophantine;
pub mod cli;
pub mod coupling;
pub mod discrepancy;
pub mod error;
pub mod limits;
pub mod numeric;
pub mod orbit;
pub mod par;
pub mod rng;
pub mod seqgen;

pub use error::{LabError, Result};
