//! Spline quasi-interpolant density estimation and semiparametric
//! copula-mixture clustering.

pub mod bshqi;
pub mod copula;
pub mod data;
pub mod datagen;
pub mod error;
pub mod mesh;
pub mod metrics;
pub mod mixture;
pub mod optimize;
pub mod rng;
pub mod special;
pub mod stat_tests;

pub use error::{Error, Result};
