//! Link prediction on undirected graphs via pooled random-walk profiles.
//!
//! The pipeline scores a candidate link by extracting its k-hop enclosing
//! subgraph, deriving a per-node transition matrix from learned attention
//! scores, and pooling walk statistics (return, transit, and trace
//! probabilities at lengths 2..tau_c) into a feature vector classified by a
//! small MLP. Classical heuristics (common neighbors, Adamic-Adar, Katz,
//! rooted PageRank) and a split/evaluate harness are included as baselines.
//!
//! Modules are layered: [`graph`] holds the immutable graph and dense-matrix
//! primitives, [`dataset`] ingests edge lists and produces reproducible
//! splits, [`subgraph`] extracts enclosing subgraphs, [`autodiff`] is a
//! minimal reverse-mode tape, [`walkpool`] computes the walk-profile
//! features, [`trainer`] runs the supervised loop, and [`metrics`] scores
//! rankings.

pub mod autodiff;
pub mod dataset;
pub mod graph;
pub mod heuristics;
pub mod metrics;
pub mod rng;
pub mod subgraph;
pub mod trainer;
pub mod walkpool;

pub use graph::{DenseMatrix, Graph};
