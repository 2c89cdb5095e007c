//! Bayesian joint learning of multiview graph responses with scalar
//! predictors.
//!
//! Each subject carries M undirected weighted graphs on a shared node set
//! plus key and auxiliary predictors. Per (key predictor, view) the edge
//! coefficients form a symmetric low-rank matrix B Lambda B^T whose latent
//! node vectors get a joint spike-and-slab prior across views, so a node is
//! selected for all views at once. Fitting is by Gibbs sampling with
//! collapsed node updates; the crate also ships a synthetic-data harness,
//! evaluation metrics with uncertainty quantification, file formats for
//! datasets and chain summaries, and sampler-correctness checks (conjugacy
//! grid oracles, a Geweke joint-distribution test, prior diagnostics).

pub use nalgebra;

pub mod config;
pub mod dataset;
pub mod dist;
pub mod edges;
pub mod error;
pub mod exec;
pub mod io;
pub mod metrics;
pub mod model;
pub mod sampler;
pub mod simulate;
pub mod state;

pub use config::ModelConfig;
pub use dataset::{MultiviewDataset, View, ViewKind};
pub use edges::EdgeSet;
pub use error::{Error, Result};
pub use state::{ModelDims, ParameterState};
