//! Invariant multilocus association tests for X-chromosome variants.
//!
//! The crate covers the genotype-coding transformation that removes the
//! dependence on X-inactivation status, GLM fitting with Wald/Score/LRT
//! statistics, six multilocus tests and their sex-stratified combined forms,
//! the Cauchy combination test, power analytics, simulation drivers and a
//! moving-window scanner.

pub mod analysis;
pub mod codings;
pub mod cohort;
pub mod combine;
pub mod dist;
mod error;
pub mod glm;
mod linalg;
pub mod multilocus;
pub mod power;
pub mod rng;
pub mod scan;
pub mod sim;

pub use cohort::{CohortData, GenotypeClass, Sex};
pub use error::{Error, Result};

// The guide's code listings run as doctests.
#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/codings.md")]
    mod codings {}
    #[doc = include_str!("../../../book/src/models.md")]
    mod models {}
    #[doc = include_str!("../../../book/src/multilocus.md")]
    mod multilocus {}
    #[doc = include_str!("../../../book/src/combining.md")]
    mod combining {}
    #[doc = include_str!("../../../book/src/power.md")]
    mod power {}
    #[doc = include_str!("../../../book/src/simulation.md")]
    mod simulation {}
    #[doc = include_str!("../../../book/src/scanning.md")]
    mod scanning {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
