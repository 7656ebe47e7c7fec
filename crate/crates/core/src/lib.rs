//! Structure learning for discrete Bayesian networks from incomplete data with
//! Bayesian structural EM.
//!
//! The pipeline: [`param_em`] fits posterior-mean parameters for the current
//! structure; [`inference`] turns them into expected family counts; [`scoring`]
//! scores candidate families from those counts; [`search`] climbs over DAGs and
//! repeats until the expected score stops improving. [`data`], [`io`] and [`eval`]
//! cover sampling, file formats and evaluation.

pub mod data;
pub mod error;
pub mod eval;
pub mod experiment;
pub mod inference;
pub mod io;
pub mod model;
pub mod param_em;
pub mod scoring;
pub mod search;
pub mod special;

pub use data::Dataset;
pub use error::{Error, Result};
pub use inference::{CompletionModel, CountMoments, FamilyStatistics};
pub use model::{BayesNet, Cpt, FamilyKey, Parameters, Structure, Variable};
pub use scoring::{DirichletPrior, ExpectedScoreMethod, ScoreKind};
