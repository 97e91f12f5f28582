use thiserror::Error;

use crate::{config, flow, identity, network, social, topofile, trust};

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Trust(#[from] trust::TrustError),
    #[error(transparent)]
    Identity(#[from] identity::IsmError),
    #[error(transparent)]
    Network(#[from] network::NetworkError),
    #[error(transparent)]
    Flow(#[from] flow::FlowError),
    #[error(transparent)]
    Ingest(#[from] social::IngestError),
    #[error(transparent)]
    Config(#[from] config::ConfigError),
    #[error(transparent)]
    Topology(#[from] topofile::TopologyFileError),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

impl Error {
    /// Process exit code: 2 for input and format problems, 1 for domain or
    /// convergence failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Ingest(_)
            | Error::Config(_)
            | Error::Topology(_)
            | Error::Io(_)
            | Error::Csv(_) => 2,
            Error::Network(network::NetworkError::DuplicateNode(_)) => 2,
            _ => 1,
        }
    }
}
