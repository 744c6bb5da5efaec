//! Selection-adjusted replicability analysis of original/replication study
//! pairs.
//!
//! The numerical kernel ([`truncnorm`], [`interval`], [`selective`]) is generic
//! over [`num::Real`]; study ingestion, FDP estimation and simulation work in
//! `f64`.

pub mod decline;
pub mod error;
pub mod fdp;
pub mod interval;
pub mod multiplicity;
pub mod num;
pub mod output;
pub mod quadrature;
pub mod selective;
pub mod sim;
pub mod special;
pub mod study;
pub mod truncnorm;

pub use error::{Error, Result};
pub use num::Real;

pub type IntervalSetF64 = interval::IntervalSet<f64>;
pub type IntervalSetF32 = interval::IntervalSet<f32>;
pub type TruncatedNormalF64 = truncnorm::TruncatedNormal<f64>;
pub type TruncatedNormalF32 = truncnorm::TruncatedNormal<f32>;
pub type SelectiveProblemF64 = selective::SelectiveProblem<f64>;
pub type SelectiveProblemF32 = selective::SelectiveProblem<f32>;
pub type ContrastF64 = selective::Contrast<f64>;
pub type ContrastF32 = selective::Contrast<f32>;
