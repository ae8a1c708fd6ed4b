//! Wire format between actors. Every envelope crosses a channel as JSON
//! text so nothing but serialized protocol data is shared.

use std::fmt;
use std::str::FromStr;
use std::sync::mpsc::{Receiver, Sender};

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::protocol::{AnswerShare, QueryTuple};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Phase {
    Verification,
    Retrieval,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MessageKind {
    Commit,
    Relay,
    Query,
    Answer,
    Refusal,
}

/// `user` or `server-<n>` on the wire.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Party {
    User,
    Server(usize),
}

impl fmt::Display for Party {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Party::User => f.write_str("user"),
            Party::Server(n) => write!(f, "server-{n}"),
        }
    }
}

impl FromStr for Party {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s == "user" {
            return Ok(Party::User);
        }
        s.strip_prefix("server-")
            .and_then(|n| n.parse().ok())
            .map(Party::Server)
            .ok_or_else(|| Error::Transport(format!("unknown party {s:?}")))
    }
}

impl Serialize for Party {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Party {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        String::deserialize(d)?.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum ProtocolMessage {
    /// Attribute values the receiver is entitled to verify.
    Commit { values: Vec<usize> },
    /// Public attributes forwarded by the central server.
    Relay { public: Vec<usize> },
    Query { query: QueryTuple },
    Answer { shares: Vec<AnswerShare> },
    Refusal { reason: String },
}

impl ProtocolMessage {
    pub fn kind(&self) -> MessageKind {
        match self {
            ProtocolMessage::Commit { .. } => MessageKind::Commit,
            ProtocolMessage::Relay { .. } => MessageKind::Relay,
            ProtocolMessage::Query { .. } => MessageKind::Query,
            ProtocolMessage::Answer { .. } => MessageKind::Answer,
            ProtocolMessage::Refusal { .. } => MessageKind::Refusal,
        }
    }

    /// Field symbols carried: vector entries of a query, payload of an
    /// answer, nothing otherwise.
    pub fn symbols(&self) -> usize {
        match self {
            ProtocolMessage::Query { query } => query.groups.iter().map(|g| g.vector.len()).sum(),
            ProtocolMessage::Answer { shares } => shares.iter().map(|a| a.payload.len()).sum(),
            _ => 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Envelope {
    pub segment: usize,
    pub attempt: usize,
    pub phase: Phase,
    pub sender: Party,
    pub receiver: Party,
    pub body: ProtocolMessage,
}

pub fn send(tx: &Sender<String>, env: &Envelope) -> Result<()> {
    let text = serde_json::to_string(env)?;
    tx.send(text)
        .map_err(|_| Error::Transport(format!("{} hung up", env.receiver)))
}

pub fn recv(rx: &Receiver<String>) -> Result<Envelope> {
    let text = rx
        .recv()
        .map_err(|_| Error::Transport("channel closed".into()))?;
    Ok(serde_json::from_str(&text)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::sync::mpsc::channel;

    #[test]
    fn party_text() {
        for p in [Party::User, Party::Server(1), Party::Server(12)] {
            assert_eq!(p.to_string().parse::<Party>().unwrap(), p);
        }
        assert!("server-x".parse::<Party>().is_err());
    }

    #[test]
    fn envelope_roundtrip() {
        let (tx, rx) = channel();
        let env = Envelope {
            segment: 0,
            attempt: 1,
            phase: Phase::Verification,
            sender: Party::Server(4),
            receiver: Party::Server(2),
            body: ProtocolMessage::Relay { public: vec![2] },
        };
        send(&tx, &env).unwrap();
        assert_eq!(recv(&rx).unwrap(), env);
        drop(tx);
        assert!(matches!(recv(&rx), Err(Error::Transport(_))));
    }
}
