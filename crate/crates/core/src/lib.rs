//! Private retrieval with attribute-based access control over `D` dedicated
//! servers and one central server.
//!
//! Three schemes share one [`Engine`]: the pairwise baseline over dedicated
//! servers only ([`SchemeKind::Dapac`]), a central-heavy scheme
//! ([`SchemeKind::Het1`]) and a balanced scheme over a pair design
//! ([`SchemeKind::Het2`]). [`harness`] runs them as message-passing actors
//! and records transcripts, [`mix`] time-shares them, and [`audit`] checks
//! correctness, privacy and secrecy exactly on small instances.

pub mod access;
pub mod audit;
pub mod cli;
pub mod coins;
pub mod dapac;
pub mod error;
pub mod field;
pub mod harness;
pub mod het1;
pub mod het2;
pub mod mix;
pub mod protocol;
pub mod randomness;
pub mod store;

pub use access::{AttributeVector, GroupTag, MessageId, PairPartition, SystemParams};
pub use error::{Error, Result};
pub use field::{Fe, Field, FieldVector};
pub use harness::{metrics_of, run_protocol, run_segments, Metrics, RunOptions, RunOutput, Transcript};
pub use mix::{LoadRatio, MixPlan, Rational};
pub use protocol::{Engine, SchemeKind};
pub use randomness::RandomnessPool;
pub use store::MessageStore;
