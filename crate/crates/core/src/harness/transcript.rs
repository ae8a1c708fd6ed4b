//! Transcript records and the JSON-lines dump.
//!
//! A dump is one JSON object per line, discriminated by `"type"`:
//!
//! ```text
//! {"type":"config", "run":..., "scheme":..., "params":{...}, "v_star":[...], "seed":..., ...}
//! {"type":"message", "run":..., "segment":0, "attempt":0, "phase":"retrieval",
//!  "sender":"user", "receiver":"server-1", "kind":"query", "symbols":4, "digest":"<sha256 hex>"}
//! ...
//! {"type":"metrics", ...}
//! ```
//!
//! The first line is always the config, the metrics line is optional and
//! last. `digest` is the SHA-256 of the message body's JSON encoding.

use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::channel::{Envelope, MessageKind, Party, Phase};
use super::Metrics;
use crate::access::{PairPartition, SystemParams};
use crate::error::{Error, Result};
use crate::protocol::{AnswerShare, QueryTuple, SchemeKind, ServerView};

/// Everything needed to reproduce a run.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunHeader {
    pub run: String,
    /// Scheme name, or `mix` for a time-shared run.
    pub scheme: String,
    pub params: SystemParams,
    pub v_star: Vec<usize>,
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda: Option<String>,
    pub segments: Vec<(SchemeKind, usize)>,
    pub retry_cap: usize,
}

impl RunHeader {
    pub(crate) fn new(
        scheme: String,
        params: SystemParams,
        v_star: Vec<usize>,
        seed: u64,
        lambda: Option<String>,
        segments: Vec<(SchemeKind, usize)>,
        retry_cap: usize,
    ) -> Self {
        let mut h = RunHeader {
            run: String::new(),
            scheme,
            params,
            v_star,
            seed,
            lambda,
            segments,
            retry_cap,
        };
        let body = serde_json::to_vec(&h).expect("header serializes");
        h.run = hex::encode(&Sha256::digest(&body)[..8]);
        h
    }
}

/// One protocol message as seen on the wire.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Record {
    pub run: String,
    pub segment: usize,
    pub attempt: usize,
    pub phase: Phase,
    pub sender: Party,
    pub receiver: Party,
    pub kind: MessageKind,
    pub symbols: usize,
    pub digest: String,
}

impl Record {
    pub fn of(run: &str, env: &Envelope) -> Result<Self> {
        let body = serde_json::to_vec(&env.body)?;
        Ok(Record {
            run: run.to_string(),
            segment: env.segment,
            attempt: env.attempt,
            phase: env.phase,
            sender: env.sender,
            receiver: env.receiver,
            kind: env.body.kind(),
            symbols: env.body.symbols(),
            digest: hex::encode(Sha256::digest(&body)),
        })
    }
}

/// The final attempt of one time-sharing segment.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SegmentTranscript {
    pub scheme: SchemeKind,
    pub start: usize,
    pub length: usize,
    pub attempts: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub partition: Option<PairPartition>,
    pub allocated_symbols: usize,
    pub queries: Vec<QueryTuple>,
    pub answers: Vec<AnswerShare>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Transcript {
    pub header: RunHeader,
    /// Attribute views each server ended the verification phase with.
    pub views: Vec<ServerView>,
    pub segments: Vec<SegmentTranscript>,
    /// Every message of every attempt, in delivery order.
    pub records: Vec<Record>,
}

impl Transcript {
    pub fn retries(&self) -> usize {
        self.segments.iter().map(|s| s.attempts.saturating_sub(1)).sum()
    }

    /// Committed attribute values per server, as recorded in the views.
    pub fn committed(&self) -> Vec<(usize, Option<usize>)> {
        self.views.iter().map(|v| (v.server, v.sensitive)).collect()
    }
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
enum Line {
    Config(RunHeader),
    Message(Record),
    Metrics(Metrics),
}

pub fn write_jsonl<W: Write>(mut w: W, transcript: &Transcript, metrics: Option<&Metrics>) -> Result<()> {
    serde_json::to_writer(&mut w, &Line::Config(transcript.header.clone()))?;
    writeln!(w)?;
    for r in &transcript.records {
        serde_json::to_writer(&mut w, &Line::Message(r.clone()))?;
        writeln!(w)?;
    }
    if let Some(m) = metrics {
        serde_json::to_writer(&mut w, &Line::Metrics(m.clone()))?;
        writeln!(w)?;
    }
    Ok(())
}

/// A parsed dump.
#[derive(Clone, Debug, PartialEq)]
pub struct Dump {
    pub header: RunHeader,
    pub records: Vec<Record>,
    pub metrics: Option<Metrics>,
}

impl Dump {
    /// Downloaded symbols per server, from the answer records of each
    /// segment's last attempt.
    pub fn downloads(&self) -> std::collections::BTreeMap<usize, usize> {
        let mut last = std::collections::BTreeMap::new();
        for r in &self.records {
            let e = last.entry(r.segment).or_insert(0);
            *e = (*e).max(r.attempt);
        }
        let mut out = std::collections::BTreeMap::new();
        for r in &self.records {
            if r.kind == MessageKind::Answer && last.get(&r.segment) == Some(&r.attempt) {
                if let Party::Server(n) = r.sender {
                    *out.entry(n).or_insert(0) += r.symbols;
                }
            }
        }
        out
    }
}

pub fn read_jsonl<R: BufRead>(r: R) -> Result<Dump> {
    let mut header = None;
    let mut records = Vec::new();
    let mut metrics = None;
    for (i, line) in r.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        match serde_json::from_str::<Line>(&line)? {
            Line::Config(h) if i == 0 => header = Some(h),
            Line::Config(_) => return Err(Error::IncompleteTranscript(format!("config on line {}", i + 1))),
            Line::Message(m) => records.push(m),
            Line::Metrics(m) => metrics = Some(m),
        }
    }
    let header = header.ok_or_else(|| Error::IncompleteTranscript("missing config line".into()))?;
    Ok(Dump { header, records, metrics })
}
