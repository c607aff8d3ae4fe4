use std::path::PathBuf;

/// Errors produced by the simulation engine.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("unknown scenario id {0} (expected 1..=8)")]
    UnknownScenario(u8),

    #[error("duration {duration} outside the modelled range [{min}, {max}]")]
    DurationOutOfRange { duration: f64, min: f64, max: f64 },

    #[error("invalid design: {0}")]
    InvalidDesign(String),

    #[error("invalid basis: {0}")]
    InvalidBasis(String),

    #[error("invalid input: {0}")]
    Domain(String),

    #[error("simulation {sim_index} of cell {cell} failed: {source}")]
    Cell {
        cell: String,
        sim_index: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{}: {source}", path.display())]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn domain(msg: impl Into<String>) -> Error {
    Error::Domain(msg.into())
}
