//! Two-phase protocol simulation.
//!
//! Each server is an actor thread with its own inbox. The user (this thread)
//! doubles as the router: it delivers the verification-phase commits and
//! relays, sends one query per server and collects the replies. Servers only
//! see what arrives in their inbox, as JSON text, so no server can read
//! another's query.

pub mod channel;
pub mod transcript;

use std::collections::{BTreeMap, BTreeSet};
use std::sync::mpsc::{self, Receiver, Sender};
use std::thread;

use serde::{Deserialize, Serialize};

use crate::access::{AttributeVector, PairPartition, SystemParams};
use crate::coins::RngCoins;
use crate::error::{Error, Result};
use crate::field::Fe;
use crate::mix::{ratio_to_string, LoadRatio, Rational};
use crate::protocol::{Engine, SchemeKind, ServerView};
use crate::randomness::RandomnessPool;
use crate::store::MessageStore;

pub use channel::{Envelope, MessageKind, Party, Phase, ProtocolMessage};
pub use transcript::{read_jsonl, write_jsonl, Dump, Record, RunHeader, SegmentTranscript, Transcript};

pub const DEFAULT_RETRY_CAP: usize = 8;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RunOptions {
    /// Extra retrieval attempts allowed after a zero-coefficient failure.
    pub retry_cap: usize,
    /// Pair design for the balanced scheme; cyclic when `None`.
    pub partition: Option<PairPartition>,
    /// Recorded in the header of time-shared runs.
    pub lambda: Option<Rational>,
}

impl Default for RunOptions {
    fn default() -> Self {
        RunOptions {
            retry_cap: DEFAULT_RETRY_CAP,
            partition: None,
            lambda: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Metrics {
    /// Written as `[[server, symbols], ...]`.
    #[serde(with = "pairs")]
    pub per_server: BTreeMap<usize, usize>,
    /// Symbols from each dedicated server (they are all equal).
    pub dedicated: usize,
    pub central: usize,
    pub total: usize,
    #[serde(with = "crate::mix::ratio_serde")]
    pub rate: Rational,
    pub load_ratio: LoadRatio,
    pub randomness_allocated: usize,
    pub randomness_consumed: usize,
    pub retries: usize,
}

mod pairs {
    use std::collections::BTreeMap;

    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(m: &BTreeMap<usize, usize>, s: S) -> Result<S::Ok, S::Error> {
        s.collect_seq(m.iter())
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<BTreeMap<usize, usize>, D::Error> {
        Ok(Vec::<(usize, usize)>::deserialize(d)?.into_iter().collect())
    }
}

impl Metrics {
    pub fn summary(&self) -> String {
        format!(
            "rate {} ({:.6}), load ratio {} ({:.6}), dedicated {} each, central {}, total {}, randomness {} consumed of {} allocated, retries {}",
            ratio_to_string(&self.rate),
            crate::mix::ratio_to_f64(&self.rate),
            self.load_ratio,
            self.load_ratio.to_f64(),
            self.dedicated,
            self.central,
            self.total,
            self.randomness_consumed,
            self.randomness_allocated,
            self.retries,
        )
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RunOutput {
    pub message: Vec<Fe>,
    pub transcript: Transcript,
    pub metrics: Metrics,
}

/// Commits from the user and relays from the central server, plus the view
/// each server ends up with. Server `n <= D` learns `v*_n` and the public
/// attributes; the central server learns the public attributes only.
pub fn verification_phase(params: &SystemParams, v_star: &AttributeVector) -> Result<(Vec<ServerView>, Vec<Envelope>)> {
    if v_star.values().len() != params.n || v_star.values().iter().any(|&v| v == 0 || v > params.k) {
        return Err(Error::MalformedClaim(format!("{v_star} does not fit {params}")));
    }
    let central = params.central();
    let public = v_star.public(params).to_vec();
    let env = |sender, receiver, body| Envelope {
        segment: 0,
        attempt: 0,
        phase: Phase::Verification,
        sender,
        receiver,
        body,
    };
    let mut messages = Vec::new();
    for n in 1..=params.d {
        messages.push(env(
            Party::User,
            Party::Server(n),
            ProtocolMessage::Commit { values: vec![v_star.get(n)] },
        ));
    }
    messages.push(env(
        Party::User,
        Party::Server(central),
        ProtocolMessage::Commit { values: public.clone() },
    ));
    for n in 1..=params.d {
        messages.push(env(
            Party::Server(central),
            Party::Server(n),
            ProtocolMessage::Relay { public: public.clone() },
        ));
    }
    let views = (1..=central).map(|s| ServerView::of(params, s, v_star)).collect();
    Ok((views, messages))
}

pub fn run_protocol(
    kind: SchemeKind,
    params: &SystemParams,
    v_star: &AttributeVector,
    store: &MessageStore,
    seed: u64,
) -> Result<RunOutput> {
    run_segments(params, &[(kind, params.l)], v_star, store, seed, &RunOptions::default())
}

pub fn run_protocol_with(
    kind: SchemeKind,
    params: &SystemParams,
    v_star: &AttributeVector,
    store: &MessageStore,
    seed: u64,
    opts: &RunOptions,
) -> Result<RunOutput> {
    run_segments(params, &[(kind, params.l)], v_star, store, seed, opts)
}

struct Segment {
    engine: Engine,
    store: MessageStore,
    pool: RandomnessPool,
    start: usize,
}

/// Runs one scheme per consecutive message segment. Segment `s` uses its own
/// pool stream and user coins `user/segment-{s}/attempt-{a}`.
pub fn run_segments(
    params: &SystemParams,
    segments: &[(SchemeKind, usize)],
    v_star: &AttributeVector,
    store: &MessageStore,
    seed: u64,
    opts: &RunOptions,
) -> Result<RunOutput> {
    params.validate()?;
    if store.params() != params {
        return Err(Error::InvalidParams(format!(
            "store built for {} but run uses {params}",
            store.params()
        )));
    }
    let covered: usize = segments.iter().map(|s| s.1).sum();
    if covered != params.l || segments.iter().any(|s| s.1 == 0) {
        return Err(Error::InvalidParams(format!(
            "segments cover {covered} symbols of a length-{} message",
            params.l
        )));
    }
    let public = v_star.public(params);
    let mut ctx = Vec::with_capacity(segments.len());
    let mut start = 0;
    for (s, &(kind, len)) in segments.iter().enumerate() {
        let p = params.with_length(len);
        let engine = match (kind, &opts.partition) {
            (SchemeKind::Het2, Some(design)) => Engine::het2_with_partition(&p, design.clone())?,
            _ => Engine::new(kind, &p)?,
        };
        ctx.push(Segment {
            engine,
            store: store.segment(start, len)?,
            pool: RandomnessPool::allocate_stream(kind, &p, public, seed, &format!("segment-{s}"))?,
            start,
        });
        start += len;
    }

    let name = match (segments, opts.lambda) {
        ([(kind, _)], None) => kind.to_string(),
        _ => "mix".to_string(),
    };
    let header = RunHeader::new(
        name,
        *params,
        v_star.values().to_vec(),
        seed,
        opts.lambda.as_ref().map(ratio_to_string),
        segments.to_vec(),
        opts.retry_cap,
    );
    let (views, verification) = verification_phase(params, v_star)?;

    let (message, seg_transcripts, records) = thread::scope(|scope| {
        let (up_tx, up_rx) = mpsc::channel::<String>();
        let mut inboxes = BTreeMap::new();
        let mut handles = Vec::new();
        for server in 1..=params.central() {
            let (tx, rx) = mpsc::channel::<String>();
            inboxes.insert(server, tx);
            let up = up_tx.clone();
            let ctx = &ctx;
            let d = params.d;
            handles.push(scope.spawn(move || server_actor(server, d, ctx, rx, up)));
        }
        drop(up_tx);

        let result = user_side(&header.run, v_star, seed, opts, &ctx, &verification, &inboxes, &up_rx);
        drop(inboxes);
        let mut actor_views = Vec::new();
        for h in handles {
            match h.join() {
                Ok(Ok(v)) => actor_views.push(v),
                Ok(Err(e)) => return Err(e),
                Err(_) => return Err(Error::Transport("server actor panicked".into())),
            }
        }
        let out = result?;
        if actor_views != views {
            return Err(Error::InconsistentQuery("server views diverge from the verification phase".into()));
        }
        Ok(out)
    })?;

    let transcript = Transcript {
        header,
        views,
        segments: seg_transcripts,
        records,
    };
    let metrics = metrics_of(&transcript, params)?;
    Ok(RunOutput {
        message,
        transcript,
        metrics,
    })
}

fn deliver(inboxes: &BTreeMap<usize, Sender<String>>, env: &Envelope) -> Result<()> {
    let Party::Server(n) = env.receiver else {
        return Err(Error::Transport("user cannot route to itself".into()));
    };
    let tx = inboxes
        .get(&n)
        .ok_or_else(|| Error::Transport(format!("no server {n}")))?;
    channel::send(tx, env)
}

#[allow(clippy::too_many_arguments, clippy::type_complexity)]
fn user_side(
    run: &str,
    v_star: &AttributeVector,
    seed: u64,
    opts: &RunOptions,
    ctx: &[Segment],
    verification: &[Envelope],
    inboxes: &BTreeMap<usize, Sender<String>>,
    replies: &Receiver<String>,
) -> Result<(Vec<Fe>, Vec<SegmentTranscript>, Vec<Record>)> {
    let mut records = Vec::new();
    for env in verification {
        deliver(inboxes, env)?;
        records.push(Record::of(run, env)?);
    }

    let mut message = Vec::new();
    let mut out = Vec::with_capacity(ctx.len());
    for (s, seg) in ctx.iter().enumerate() {
        let mut attempt = 0;
        loop {
            let mut coins = RngCoins::seeded(seed, &format!("user/segment-{s}/attempt-{attempt}"));
            let queries = seg.engine.build_queries(v_star, &mut coins)?;
            for q in &queries {
                let env = Envelope {
                    segment: s,
                    attempt,
                    phase: Phase::Retrieval,
                    sender: Party::User,
                    receiver: Party::Server(q.server),
                    body: ProtocolMessage::Query { query: q.clone() },
                };
                deliver(inboxes, &env)?;
                records.push(Record::of(run, &env)?);
            }
            let mut got = Vec::with_capacity(queries.len());
            for _ in 0..queries.len() {
                got.push(channel::recv(replies)?);
            }
            got.sort_by_key(|e| e.sender);
            let mut answers = Vec::new();
            for env in got {
                records.push(Record::of(run, &env)?);
                match env.body {
                    ProtocolMessage::Answer { shares } => answers.extend(shares),
                    ProtocolMessage::Refusal { reason } => {
                        let server = match env.sender {
                            Party::Server(n) => n,
                            Party::User => 0,
                        };
                        return Err(Error::Refused { server, reason });
                    }
                    other => return Err(Error::Transport(format!("unexpected {:?} reply", other.kind()))),
                }
            }
            match seg.engine.decode(v_star, &queries, &answers) {
                Ok(part) => {
                    message.extend(part);
                    out.push(SegmentTranscript {
                        scheme: seg.engine.kind(),
                        start: seg.start,
                        length: seg.engine.params().l,
                        attempts: attempt + 1,
                        partition: opts.partition.clone().filter(|_| seg.engine.kind() == SchemeKind::Het2),
                        allocated_symbols: seg.pool.total_symbols(),
                        queries,
                        answers,
                    });
                    break;
                }
                Err(Error::ZeroCoefficient { .. }) if attempt < opts.retry_cap => attempt += 1,
                Err(Error::ZeroCoefficient { .. }) => return Err(Error::RetriesExhausted { attempts: attempt + 1 }),
                Err(e) => return Err(e),
            }
        }
    }
    Ok((message, out, records))
}

fn server_actor(
    server: usize,
    d: usize,
    ctx: &[Segment],
    inbox: Receiver<String>,
    up: Sender<String>,
) -> Result<ServerView> {
    let mut view = ServerView {
        server,
        sensitive: None,
        public: Vec::new(),
    };
    while let Ok(env) = channel::recv(&inbox) {
        match env.body {
            ProtocolMessage::Commit { values } if server <= d => view.sensitive = values.first().copied(),
            ProtocolMessage::Commit { values } => view.public = values,
            ProtocolMessage::Relay { public } => view.public = public,
            ProtocolMessage::Query { query } => {
                let seg = ctx
                    .get(env.segment)
                    .ok_or_else(|| Error::Transport(format!("no segment {}", env.segment)))?;
                let body = match seg.engine.answer(&view, &query, &seg.store, &seg.pool) {
                    Ok(shares) => ProtocolMessage::Answer { shares },
                    Err(e) => ProtocolMessage::Refusal { reason: e.to_string() },
                };
                let reply = Envelope {
                    segment: env.segment,
                    attempt: env.attempt,
                    phase: Phase::Retrieval,
                    sender: Party::Server(server),
                    receiver: Party::User,
                    body,
                };
                // The user may already have given up; a closed channel ends the actor.
                if channel::send(&up, &reply).is_err() {
                    break;
                }
            }
            other => {
                return Err(Error::Transport(format!("server {server} got a {:?}", other.kind())));
            }
        }
    }
    Ok(view)
}

fn engine_of(seg: &SegmentTranscript, params: &SystemParams) -> Result<Engine> {
    let p = params.with_length(seg.length);
    match &seg.partition {
        Some(design) => Engine::het2_with_partition(&p, design.clone()),
        None => Engine::new(seg.scheme, &p),
    }
}

/// Download counts and randomness use of each segment's final attempt.
pub fn metrics_of(transcript: &Transcript, params: &SystemParams) -> Result<Metrics> {
    let mut per_server: BTreeMap<usize, usize> = BTreeMap::new();
    let mut allocated = 0;
    let mut consumed = 0;
    for (s, seg) in transcript.segments.iter().enumerate() {
        let engine = engine_of(seg, params)?;
        let chunk = seg.length / engine.subpacket_count();
        let mut labels = BTreeSet::new();
        for server in engine.servers() {
            let q = transcript
                .segments
                .get(s)
                .and_then(|seg| seg.queries.iter().find(|q| q.server == server))
                .ok_or_else(|| Error::IncompleteTranscript(format!("segment {s}: no query for server {server}")))?;
            let view = transcript
                .views
                .iter()
                .find(|v| v.server == server)
                .ok_or_else(|| Error::IncompleteTranscript(format!("no view for server {server}")))?;
            for (gi, g) in q.groups.iter().enumerate() {
                let share = seg
                    .answers
                    .iter()
                    .find(|a| a.server == server && a.group == gi)
                    .ok_or_else(|| Error::IncompleteTranscript(format!("segment {s}: server {server} group {gi} unanswered")))?;
                if share.payload.len() != chunk {
                    return Err(Error::IncompleteTranscript(format!(
                        "segment {s}: server {server} group {gi} has {} symbols, expected {chunk}",
                        share.payload.len()
                    )));
                }
                *per_server.entry(server).or_insert(0) += chunk;
                labels.extend(engine.pad_labels(view, &g.descriptor.tag)?);
            }
        }
        allocated += seg.allocated_symbols;
        consumed += labels.len() * chunk;
    }
    if transcript.segments.iter().map(|s| s.length).sum::<usize>() != params.l {
        return Err(Error::IncompleteTranscript("segments do not cover the message".into()));
    }
    let ded: Vec<usize> = (1..=params.d).map(|n| per_server.get(&n).copied().unwrap_or(0)).collect();
    if ded.windows(2).any(|w| w[0] != w[1]) {
        return Err(Error::InconsistentQuery(format!("dedicated download counts differ: {ded:?}")));
    }
    let dedicated = ded.first().copied().unwrap_or(0);
    let central = per_server.get(&params.central()).copied().unwrap_or(0);
    let total: usize = per_server.values().sum();
    if total == 0 {
        return Err(Error::IncompleteTranscript("nothing was downloaded".into()));
    }
    Ok(Metrics {
        per_server,
        dedicated,
        central,
        total,
        rate: Rational::new(params.l as i128, total as i128),
        load_ratio: LoadRatio::from_counts(
            Rational::from_integer(dedicated as i128),
            Rational::from_integer(central as i128),
        ),
        randomness_allocated: allocated,
        randomness_consumed: consumed,
        retries: transcript.retries(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::access::message_index;
    use crate::mix::rat;

    fn setup(n: usize, d: usize, l: usize, v: &[usize]) -> (SystemParams, AttributeVector, MessageStore) {
        let params = SystemParams::new(n, d, 2, 65537, l).unwrap();
        let v = AttributeVector::new(v.to_vec(), &params).unwrap();
        let store = MessageStore::random(&params, 11);
        (params, v, store)
    }

    #[test]
    fn verification_views() {
        let params = SystemParams::new(3, 2, 2, 65537, 2).unwrap();
        let v = AttributeVector::new(vec![1, 2, 2], &params).unwrap();
        let (views, msgs) = verification_phase(&params, &v).unwrap();
        assert_eq!(views[0].sensitive, Some(1));
        assert_eq!(views[0].public, vec![2]);
        assert_eq!(views[1].sensitive, Some(2));
        assert_eq!(views[2].sensitive, None);
        assert_eq!(views[2].public, vec![2]);
        assert_eq!(msgs.len(), 5);
        assert!(msgs.iter().all(|m| m.body.symbols() == 0));
        // The central server never sees a sensitive value.
        for m in msgs.iter().filter(|m| m.receiver == Party::Server(3)) {
            assert_eq!(m.body, ProtocolMessage::Commit { values: vec![2] });
        }
    }

    #[test]
    fn full_access_leaves_central_empty() {
        let params = SystemParams::new(3, 3, 2, 65537, 3).unwrap();
        let v = AttributeVector::new(vec![1, 2, 2], &params).unwrap();
        let (views, _) = verification_phase(&params, &v).unwrap();
        assert!(views[3].public.is_empty() && views[3].sensitive.is_none());
    }

    #[test]
    fn small_runs() {
        let (params, v, store) = setup(3, 2, 2, &[1, 2, 2]);
        let out = run_protocol(SchemeKind::Het1, &params, &v, &store, 7).unwrap();
        assert_eq!(out.message, store.message(message_index(&v, &params).unwrap()).unwrap());
        assert_eq!(out.metrics.total, 6);
        assert_eq!(out.metrics.rate, rat(1, 3));
        assert_eq!(out.metrics.load_ratio, LoadRatio::Finite(rat(1, 4)));
        assert_eq!(out.metrics.randomness_consumed, 4);

        let (params, v, store) = setup(3, 3, 3, &[1, 2, 2]);
        let out = run_protocol(SchemeKind::Dapac, &params, &v, &store, 7).unwrap();
        assert_eq!(out.metrics.total, 12);
        assert_eq!(out.metrics.load_ratio, LoadRatio::Infinite);
        assert_eq!((out.metrics.randomness_consumed, out.metrics.randomness_allocated), (9, 12));
    }

    #[test]
    fn deterministic_and_dump_roundtrip() {
        let (params, v, store) = setup(4, 3, 6, &[1, 2, 1, 2]);
        let a = run_protocol(SchemeKind::Het2, &params, &v, &store, 3).unwrap();
        let b = run_protocol(SchemeKind::Het2, &params, &v, &store, 3).unwrap();
        assert_eq!(a, b);
        let mut buf = Vec::new();
        write_jsonl(&mut buf, &a.transcript, Some(&a.metrics)).unwrap();
        let mut again = Vec::new();
        write_jsonl(&mut again, &b.transcript, Some(&b.metrics)).unwrap();
        assert_eq!(buf, again);
        let dump = read_jsonl(buf.as_slice()).unwrap();
        assert_eq!(dump.header, a.transcript.header);
        assert_eq!(dump.metrics.as_ref(), Some(&a.metrics));
        assert_eq!(dump.downloads(), a.metrics.per_server);
        assert_eq!(dump.records.len(), a.transcript.records.len());
    }

    #[test]
    fn incomplete_transcript_is_rejected() {
        let (params, v, store) = setup(3, 2, 2, &[2, 1, 1]);
        let mut out = run_protocol(SchemeKind::Het1, &params, &v, &store, 1).unwrap();
        out.transcript.segments[0].answers.pop();
        assert!(matches!(metrics_of(&out.transcript, &params), Err(Error::IncompleteTranscript(_))));
    }

    #[test]
    fn retries_on_tiny_fields() {
        // At q = 2 half the decodes of the balanced scheme fail; retries hide it.
        let params = SystemParams::new(4, 3, 2, 2, 6).unwrap();
        let store = MessageStore::random(&params, 5);
        let v = AttributeVector::new(vec![2, 2, 1, 1], &params).unwrap();
        let mut retried = 0;
        for seed in 0..20 {
            match run_protocol(SchemeKind::Het2, &params, &v, &store, seed) {
                Ok(out) => {
                    assert_eq!(out.message, store.message(message_index(&v, &params).unwrap()).unwrap());
                    retried += out.metrics.retries;
                    let attempts = out.transcript.records.iter().map(|r| r.attempt).max().unwrap();
                    assert_eq!(attempts, out.metrics.retries);
                }
                Err(Error::RetriesExhausted { attempts }) => assert_eq!(attempts, DEFAULT_RETRY_CAP + 1),
                Err(e) => panic!("{e}"),
            }
        }
        assert!(retried > 0);
        let none = RunOptions { retry_cap: 0, ..RunOptions::default() };
        let failures = (0..20)
            .filter(|&s| matches!(run_protocol_with(SchemeKind::Het2, &params, &v, &store, s, &none), Err(Error::RetriesExhausted { attempts: 1 })))
            .count();
        assert!(failures > 0);
    }

    #[test]
    fn mismatched_store_is_rejected() {
        let (params, v, _) = setup(3, 2, 2, &[1, 1, 1]);
        let other = MessageStore::random(&params.with_length(4), 0);
        assert!(matches!(
            run_protocol(SchemeKind::Het1, &params, &v, &other, 0),
            Err(Error::InvalidParams(_))
        ));
    }
}
