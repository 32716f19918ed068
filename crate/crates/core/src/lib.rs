//! Stochastic compartmental models as deterministic functions of their
//! parameters and seeded random streams, with variance-based sensitivity
//! analysis that treats the intrinsic randomness as an explicit input.
//!
//! A model is a directed graph of compartments whose edges carry rate
//! expressions ([`model`], [`expr`]). A simulator ([`sim`]) turns a
//! parameter point and a [`rng::SeedVector`] into one exact path; four
//! simulators are provided, each a different representation of the same
//! Markov chain. [`gsa`] estimates Sobol' indices with the seed vector as
//! one more input group, and [`study`] runs replicated studies on
//! extinction times and compartment curves.
//!
//! ```
//! use ctmc_gsa::models::build_sir;
//! use ctmc_gsa::model::ParameterPoint;
//! use ctmc_gsa::rng::SeedVector;
//! use ctmc_gsa::sim::{trajectory, RepresentationKind, SimOptions};
//!
//! let sir = build_sir(100, 5).unwrap();
//! let theta = ParameterPoint::from_named(&sir, [("beta", 2.0), ("gamma_I", 1.0)]).unwrap();
//! let seeds = SeedVector::new(vec![7, 8]).unwrap();
//! let path = trajectory(RepresentationKind::Mnrm, &sir, &theta, &seeds, &SimOptions::until(10.0)).unwrap();
//! assert_eq!(path.final_state().total(), 100);
//! ```

pub mod config;
pub mod expr;
pub mod gsa;
pub mod model;
pub mod models;
pub mod output;
pub mod par;
pub mod rng;
pub mod sim;
pub mod stats;
pub mod study;
pub mod validate;
pub mod svg;

use thiserror::Error;

/// Any error raised by the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Model(#[from] model::ModelError),
    #[error(transparent)]
    Expr(#[from] expr::ExprError),
    #[error(transparent)]
    Rng(#[from] rng::RngError),
    #[error(transparent)]
    Sim(#[from] sim::SimError),
    #[error(transparent)]
    Gsa(#[from] gsa::GsaError),
    #[error(transparent)]
    Study(#[from] study::StudyError),
    #[error(transparent)]
    Config(#[from] config::ConfigError),
    #[error(transparent)]
    Output(#[from] output::OutputError),
}
