//! Relational-property model counting and whole-space evaluation of
//! decision-tree classifiers.

pub mod cnf;
pub mod counter;
pub mod dataset;
pub mod dtree;
pub mod experiment;
pub mod metrics;
pub mod props;
pub mod tree2cnf;

use thiserror::Error;

/// Any error raised by the toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Dimacs(#[from] cnf::DimacsError),
    #[error(transparent)]
    Cnf(#[from] cnf::CnfError),
    #[error(transparent)]
    Prop(#[from] props::PropError),
    #[error(transparent)]
    Count(#[from] counter::CountError),
    #[error(transparent)]
    Dataset(#[from] dataset::DatasetError),
    #[error(transparent)]
    Tree(#[from] dtree::TreeError),
    #[error(transparent)]
    Metrics(#[from] metrics::MetricsError),
    #[error(transparent)]
    Experiment(#[from] experiment::ExperimentError),
}
