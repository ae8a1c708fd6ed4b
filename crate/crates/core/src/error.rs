use thiserror::Error;

use crate::protocol::SchemeKind;

/// Errors raised by the protocol engines, the harness and the auditors.
#[derive(Debug, Error)]
pub enum Error {
    #[error("modulus {0} is not a prime below 2^32")]
    NonPrimeModulus(u64),

    #[error("division by zero in F_q")]
    DivisionByZero,

    #[error("{what} index {index} out of range 1..={max}")]
    IndexOutOfRange {
        what: &'static str,
        index: usize,
        max: usize,
    },

    #[error("dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },

    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("{scheme} needs the message length to split into {parts} equal sub-packets; L={length} does not (smallest valid L is {min_length})")]
    Divisibility {
        scheme: String,
        length: usize,
        parts: usize,
        min_length: usize,
    },

    #[error("time-sharing at lambda={lambda} cannot split L={length} into valid segments (smallest valid L is {min_length})")]
    MixLength {
        lambda: String,
        length: usize,
        min_length: usize,
    },

    #[error("{scheme} requires D >= {min_d}, got D={d}")]
    SchemeInapplicable {
        scheme: SchemeKind,
        min_d: usize,
        d: usize,
    },

    #[error("server {server} refused the query: {reason}")]
    Refused { server: usize, reason: String },

    #[error("missing answer share for server {server}, group {group}")]
    MissingShare { server: usize, group: usize },

    #[error("inconsistent query: {0}")]
    InconsistentQuery(String),

    #[error("combining coefficient at the desired row is zero for pair {{{n},{m}}}")]
    ZeroCoefficient { n: usize, m: usize },

    #[error("decoding failed after {attempts} attempts")]
    RetriesExhausted { attempts: usize },

    #[error("enumeration of {size} outcomes exceeds the cap of {cap}")]
    EnumerationTooLarge { size: u128, cap: u128 },

    #[error("invalid pair design: {0}")]
    InvalidDesign(String),

    #[error("lambda {0} outside [0, 1]")]
    LambdaOutOfRange(String),

    #[error("load ratio {0} is below the smallest achievable value {1}")]
    LoadRatioOutOfRange(String, String),

    #[error("incomplete transcript: {0}")]
    IncompleteTranscript(String),

    #[error("malformed attribute claim: {0}")]
    MalformedClaim(String),

    #[error("transport: {0}")]
    Transport(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
