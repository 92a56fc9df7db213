use std::path::PathBuf;

/// Errors reported by the simulator library.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("CSIT error power {error_power} is not below the channel power {channel_power} of user {user}")]
    CsitErrorTooLarge {
        user: usize,
        error_power: f64,
        channel_power: f64,
    },

    #[error("channel column {0} is all zeros; MRT direction undefined")]
    ZeroChannelColumn(usize),

    #[error("empty SINR history")]
    EmptyHistory,

    #[error("CDF value {value} at x = {at} is outside [0, 1]")]
    CdfOutOfRange { at: f64, value: f64 },

    #[error("average backtrack PER is not monotone in the retransmission length (beta = {beta})")]
    NonMonotone { beta: u64 },

    #[error("MCS table is empty")]
    EmptyMcsTable,

    #[error("MCS table parse error on line {line}: {reason}")]
    McsParse { line: usize, reason: String },

    #[error("config parse error on line {line}: {reason}")]
    ConfigParse { line: usize, reason: String },

    #[error("protocol state divergence: {0}")]
    Protocol(String),

    #[error("feedback does not match the expected stream list: {0}")]
    Feedback(String),

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("CSV error on {path}: {source}")]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },

    #[error("JSON error on {path}: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
}

impl Error {
    pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
