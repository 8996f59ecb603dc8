//! Command-line experiments, configuration files and result formats for
//! two-level stochastic collocation.
//!
//! The numerics live in [`tlsc_core`]; this crate adds a rayon executor,
//! the `key = value` configuration format, the binary reference cache and
//! the CSV and text outputs written by the `tlsc` binary.

use std::path::PathBuf;

pub mod cache;
pub mod config;
pub mod exec;
pub mod experiment;
pub mod formats;
pub mod study;

#[derive(Debug, thiserror::Error)]
pub enum AppError {
    #[error(transparent)]
    Config(#[from] config::ConfigError),
    #[error(transparent)]
    Cache(#[from] cache::CacheError),
    #[error(transparent)]
    Solver(#[from] tlsc_core::solvers::SolverError),
    #[error(transparent)]
    Norm(#[from] tlsc_core::norms::NormError),
    #[error(transparent)]
    Field(#[from] tlsc_core::random_field::FieldError),
    #[error(transparent)]
    Mesh(#[from] tlsc_core::mesh::MeshError),
    #[error(transparent)]
    Collocation(#[from] tlsc_core::collocation::CollocationError),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error("cannot start thread pool: {0}")]
    ThreadPool(#[from] rayon::ThreadPoolBuildError),
    #[error("{0}")]
    Usage(String),
}
