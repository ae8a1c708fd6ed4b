//! The replicated message database: one length-`L` message per attribute
//! vector. Servers only ever read the slices their queries name.

use serde::{Deserialize, Serialize};

use crate::access::{MessageId, SystemParams};
use crate::coins::derive_rng;
use crate::error::{Error, Result};
use crate::field::Fe;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct MessageStore {
    params: SystemParams,
    messages: Vec<Vec<Fe>>,
}

impl MessageStore {
    /// Uniformly random contents, reproducible from `seed`.
    pub fn random(params: &SystemParams, seed: u64) -> Self {
        let field = params.field();
        let mut rng = derive_rng(seed, "store");
        let messages = (0..params.message_count())
            .map(|_| field.sample_vector(params.l, &mut rng).into_inner())
            .collect();
        MessageStore {
            params: *params,
            messages,
        }
    }

    pub fn from_messages(params: &SystemParams, messages: Vec<Vec<Fe>>) -> Result<Self> {
        if messages.len() != params.message_count() {
            return Err(Error::DimensionMismatch {
                left: messages.len(),
                right: params.message_count(),
            });
        }
        let field = params.field();
        for m in &messages {
            if m.len() != params.l {
                return Err(Error::DimensionMismatch {
                    left: m.len(),
                    right: params.l,
                });
            }
            if m.iter().any(|&x| !field.contains(x)) {
                return Err(Error::InvalidParams("message symbol outside the field".into()));
            }
        }
        Ok(MessageStore {
            params: *params,
            messages,
        })
    }

    pub fn params(&self) -> &SystemParams {
        &self.params
    }

    pub fn len(&self) -> usize {
        self.messages.len()
    }

    pub fn is_empty(&self) -> bool {
        self.messages.is_empty()
    }

    pub fn message(&self, id: MessageId) -> Result<&[Fe]> {
        self.messages
            .get(id.0)
            .map(|m| m.as_slice())
            .ok_or(Error::IndexOutOfRange {
                what: "message",
                index: id.0,
                max: self.messages.len(),
            })
    }

    /// Sub-packet `j` (1-based) when each message is cut into `count` slices.
    pub fn subpacket(&self, id: MessageId, j: usize, count: usize) -> Result<&[Fe]> {
        let msg = self.message(id)?;
        if count == 0 || msg.len() % count != 0 {
            return Err(Error::Divisibility {
                scheme: "store".into(),
                length: msg.len(),
                parts: count,
                min_length: count,
            });
        }
        if j == 0 || j > count {
            return Err(Error::IndexOutOfRange {
                what: "sub-packet",
                index: j,
                max: count,
            });
        }
        let w = msg.len() / count;
        Ok(&msg[(j - 1) * w..j * w])
    }

    /// The store restricted to symbols `start..start+len` of every message.
    pub fn segment(&self, start: usize, len: usize) -> Result<MessageStore> {
        if len == 0 || start + len > self.params.l {
            return Err(Error::InvalidParams(format!(
                "segment {start}..{} outside message length {}",
                start + len,
                self.params.l
            )));
        }
        Ok(MessageStore {
            params: self.params.with_length(len),
            messages: self
                .messages
                .iter()
                .map(|m| m[start..start + len].to_vec())
                .collect(),
        })
    }

    /// A copy with message `id` replaced.
    pub fn replace(&self, id: MessageId, contents: Vec<Fe>) -> Result<MessageStore> {
        let mut messages = self.messages.clone();
        *messages.get_mut(id.0).ok_or(Error::IndexOutOfRange {
            what: "message",
            index: id.0,
            max: self.messages.len(),
        })? = contents;
        MessageStore::from_messages(&self.params, messages)
    }
}
