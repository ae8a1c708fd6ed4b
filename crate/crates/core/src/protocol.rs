//! Query/answer types shared by all schemes and the [`Engine`] that builds
//! queries, answers them on the server side and decodes on the user side.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::access::{u_set, AttributeVector, GroupTag, MessageId, PairPartition, SystemParams};
use crate::coins::CoinSource;
use crate::error::{Error, Result};
use crate::field::{Fe, FieldVector, SubPacket};
use crate::randomness::{central_labels, RandomnessLabel, RandomnessPool};
use crate::store::MessageStore;
use crate::{dapac, het1, het2};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SchemeKind {
    /// Pairwise baseline over the dedicated servers only.
    Dapac,
    /// One combination per dedicated server, `KD` from the central server.
    Het1,
    /// Pairwise dedicated queries plus concatenated central queries.
    Het2,
}

impl SchemeKind {
    pub const ALL: [SchemeKind; 3] = [SchemeKind::Dapac, SchemeKind::Het1, SchemeKind::Het2];

    pub fn min_d(self) -> usize {
        match self {
            SchemeKind::Dapac => 2,
            SchemeKind::Het1 => 1,
            SchemeKind::Het2 => 3,
        }
    }

    /// Sub-packets per message for `D` dedicated servers.
    pub fn parts(self, d: usize) -> usize {
        match self {
            SchemeKind::Dapac => d * (d - 1) / 2,
            SchemeKind::Het1 => d,
            SchemeKind::Het2 => d * (d + 1) / 2,
        }
    }

    /// Checks applicability and divisibility of `L`.
    pub fn subpacket_count(self, params: &SystemParams) -> Result<usize> {
        if params.d < self.min_d() {
            return Err(Error::SchemeInapplicable {
                scheme: self,
                min_d: self.min_d(),
                d: params.d,
            });
        }
        let parts = self.parts(params.d);
        if !params.l.is_multiple_of(parts) {
            return Err(Error::Divisibility {
                scheme: self.to_string(),
                length: params.l,
                parts,
                min_length: parts,
            });
        }
        Ok(parts)
    }

    pub fn uses_central(self) -> bool {
        !matches!(self, SchemeKind::Dapac)
    }
}

impl fmt::Display for SchemeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SchemeKind::Dapac => "dapac",
            SchemeKind::Het1 => "het1",
            SchemeKind::Het2 => "het2",
        })
    }
}

impl FromStr for SchemeKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "dapac" => Ok(SchemeKind::Dapac),
            "het1" => Ok(SchemeKind::Het1),
            "het2" => Ok(SchemeKind::Het2),
            other => Err(Error::InvalidParams(format!("unknown scheme {other:?}"))),
        }
    }
}

/// One stacked sub-packet: message and storage index (1-based). The user's
/// private permutation is already applied, so servers read the index as is.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Row {
    pub message: MessageId,
    pub subpacket: usize,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct MessageGroupDescriptor {
    pub tag: GroupTag,
    pub rows: Vec<Row>,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct QueryGroup {
    pub descriptor: MessageGroupDescriptor,
    pub vector: FieldVector,
}

/// Everything one server is asked: `Q_n`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct QueryTuple {
    pub server: usize,
    pub subpackets: usize,
    pub groups: Vec<QueryGroup>,
}

impl QueryTuple {
    pub fn find(&self, tag: &GroupTag) -> Result<(usize, &QueryGroup)> {
        self.groups
            .iter()
            .enumerate()
            .find(|(_, g)| g.descriptor.tag == *tag)
            .ok_or_else(|| {
                Error::InconsistentQuery(format!("server {} has no group {tag}", self.server))
            })
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnswerShare {
    pub server: usize,
    pub group: usize,
    pub payload: SubPacket,
}

/// What a server learned in the verification phase.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ServerView {
    pub server: usize,
    /// `k_n` for a dedicated server, `None` for the central one.
    pub sensitive: Option<usize>,
    pub public: Vec<usize>,
}

impl ServerView {
    pub fn of(params: &SystemParams, server: usize, v_star: &AttributeVector) -> Self {
        ServerView {
            server,
            sensitive: (server <= params.d).then(|| v_star.get(server)),
            public: v_star.public(params).to_vec(),
        }
    }

    pub fn accessible(&self, params: &SystemParams) -> Result<BTreeSet<MessageId>> {
        Ok(match self.sensitive {
            Some(k) => u_set(params, &self.public, self.server, k)?.into_iter().collect(),
            None => (1..=params.k)
                .flat_map(|k| u_set(params, &self.public, 1, k).unwrap_or_default())
                .collect(),
        })
    }
}

/// Answers indexed by `(server, group)`.
pub struct AnswerIndex<'a> {
    map: HashMap<(usize, usize), &'a [Fe]>,
}

impl<'a> AnswerIndex<'a> {
    pub fn new(answers: &'a [AnswerShare]) -> Self {
        AnswerIndex {
            map: answers
                .iter()
                .map(|a| ((a.server, a.group), a.payload.as_slice()))
                .collect(),
        }
    }

    pub fn get(&self, server: usize, group: usize) -> Result<&'a [Fe]> {
        self.map
            .get(&(server, group))
            .copied()
            .ok_or(Error::MissingShare { server, group })
    }
}

pub(crate) fn query_for(queries: &[QueryTuple], server: usize) -> Result<&QueryTuple> {
    queries
        .iter()
        .find(|q| q.server == server)
        .ok_or_else(|| Error::InconsistentQuery(format!("no query for server {server}")))
}

/// Hands out sub-packet indices. Each message gets a lazily drawn uniform
/// permutation; "fresh" indices walk a per-message counter through it.
pub struct SubpacketAllocator {
    count: usize,
    perms: BTreeMap<MessageId, Vec<usize>>,
    next: BTreeMap<MessageId, usize>,
}

impl SubpacketAllocator {
    pub fn new(count: usize) -> Self {
        SubpacketAllocator {
            count,
            perms: BTreeMap::new(),
            next: BTreeMap::new(),
        }
    }

    fn image(&mut self, msg: MessageId, i: usize, coins: &mut dyn CoinSource) -> Result<usize> {
        if i == 0 || i > self.count {
            return Err(Error::IndexOutOfRange {
                what: "sub-packet position",
                index: i,
                max: self.count,
            });
        }
        let count = self.count;
        let perm = self
            .perms
            .entry(msg)
            .or_insert_with(|| coins.permutation(count));
        Ok(perm[i - 1])
    }

    pub fn fresh(&mut self, msg: MessageId, coins: &mut dyn CoinSource) -> Result<Row> {
        let pos = self.next.entry(msg).or_insert(0);
        *pos += 1;
        let pos = *pos;
        if pos > self.count {
            return Err(Error::InconsistentQuery(format!(
                "message {msg} ran out of its {} sub-packets",
                self.count
            )));
        }
        Ok(Row {
            message: msg,
            subpacket: self.image(msg, pos, coins)?,
        })
    }

    /// The sub-packet at a fixed position of the permuted message.
    pub fn at_position(&mut self, msg: MessageId, i: usize, coins: &mut dyn CoinSource) -> Result<Row> {
        Ok(Row {
            message: msg,
            subpacket: self.image(msg, i, coins)?,
        })
    }

    pub fn fresh_rows(&mut self, msgs: &[MessageId], coins: &mut dyn CoinSource) -> Result<Vec<Row>> {
        msgs.iter().map(|&m| self.fresh(m, coins)).collect()
    }
}

/// Puts recovered sub-packets back in storage order.
pub fn assemble(recovered: &BTreeMap<usize, SubPacket>, count: usize) -> Result<Vec<Fe>> {
    let keys: Vec<usize> = recovered.keys().copied().collect();
    if keys != (1..=count).collect::<Vec<_>>() {
        return Err(Error::InconsistentQuery(format!(
            "recovered sub-packets {keys:?}, expected 1..={count}"
        )));
    }
    Ok(recovered.values().flatten().copied().collect())
}

/// Position of `target` among the rows, 1-based.
pub(crate) fn row_of(rows: &[Row], target: MessageId) -> Result<usize> {
    rows.iter()
        .position(|r| r.message == target)
        .map(|p| p + 1)
        .ok_or_else(|| Error::InconsistentQuery(format!("message {target} missing from group")))
}

/// A configured scheme: builds queries, answers them and decodes.
#[derive(Clone, Debug)]
pub struct Engine {
    kind: SchemeKind,
    params: SystemParams,
    partition: Option<PairPartition>,
    count: usize,
}

impl Engine {
    pub fn new(kind: SchemeKind, params: &SystemParams) -> Result<Self> {
        params.validate()?;
        let count = kind.subpacket_count(params)?;
        let partition = match kind {
            SchemeKind::Het2 => Some(PairPartition::cyclic(params.d)?),
            _ => None,
        };
        Ok(Engine {
            kind,
            params: *params,
            partition,
            count,
        })
    }

    /// The pairwise-central scheme over a non-default design.
    pub fn het2_with_partition(params: &SystemParams, partition: PairPartition) -> Result<Self> {
        let mut e = Engine::new(SchemeKind::Het2, params)?;
        if partition.d != params.d {
            return Err(Error::InvalidDesign(format!(
                "design on {} points for D={}",
                partition.d, params.d
            )));
        }
        e.partition = Some(partition);
        Ok(e)
    }

    pub fn kind(&self) -> SchemeKind {
        self.kind
    }

    pub fn params(&self) -> &SystemParams {
        &self.params
    }

    pub fn subpacket_count(&self) -> usize {
        self.count
    }

    pub fn subpacket_len(&self) -> usize {
        self.params.l / self.count
    }

    pub fn partition(&self) -> Option<&PairPartition> {
        self.partition.as_ref()
    }

    pub(crate) fn design(&self) -> Result<&PairPartition> {
        self.partition
            .as_ref()
            .ok_or_else(|| Error::InvalidDesign("scheme has no pair design".into()))
    }

    /// Servers taking part in retrieval.
    pub fn servers(&self) -> Vec<usize> {
        let last = if self.kind.uses_central() {
            self.params.central()
        } else {
            self.params.d
        };
        (1..=last).collect()
    }

    /// User side. Never sees the store.
    pub fn build_queries(&self, v_star: &AttributeVector, coins: &mut dyn CoinSource) -> Result<Vec<QueryTuple>> {
        AttributeVector::new(v_star.values().to_vec(), &self.params)?;
        match self.kind {
            SchemeKind::Dapac => dapac::build_queries(self, v_star, coins),
            SchemeKind::Het1 => het1::build_queries(self, v_star, coins),
            SchemeKind::Het2 => het2::build_queries(self, v_star, coins),
        }
    }

    /// The chunks a server adds to the answer for `tag`, or a refusal.
    pub fn pad_labels(&self, view: &ServerView, tag: &GroupTag) -> Result<Vec<RandomnessLabel>> {
        let (d, k) = (self.params.d, self.params.k);
        let central = view.server == self.params.central();
        let refuse = |reason: String| Error::Refused {
            server: view.server,
            reason,
        };
        match (self.kind, *tag) {
            (SchemeKind::Dapac | SchemeKind::Het2, GroupTag::Pair { n, m, k: kn, k2 })
                if n == view.server && view.sensitive == Some(kn) =>
            {
                if m == n || m == 0 || m > d || k2 == 0 || k2 > k {
                    return Err(refuse(format!("malformed pair group {tag}")));
                }
                Ok(vec![RandomnessLabel::pair(n, m, kn, k2)])
            }
            (SchemeKind::Het1, GroupTag::Attr { n, k: kk })
                if (n == view.server && view.sensitive == Some(kk)) || (central && n <= d && kk <= k) =>
            {
                Ok(vec![RandomnessLabel::Single { n, k: kk }])
            }
            (SchemeKind::Het2, GroupTag::Attr { n, k: kk }) if central && n <= d && kk <= k => {
                central_labels(n, kk, k, self.design()?)
            }
            _ => Err(refuse(format!("group {tag} is not served by this server"))),
        }
    }

    /// Server-side admission check: every group must be one this server
    /// serves, name exactly the messages of its set, and appear once.
    pub fn validate_query(&self, view: &ServerView, query: &QueryTuple) -> Result<()> {
        let refuse = |reason: String| Error::Refused {
            server: view.server,
            reason,
        };
        if query.server != view.server {
            return Err(refuse(format!("query addressed to server {}", query.server)));
        }
        if query.subpackets != self.count {
            return Err(refuse(format!(
                "query assumes {} sub-packets, scheme uses {}",
                query.subpackets, self.count
            )));
        }
        let accessible = view.accessible(&self.params)?;
        let mut tags = BTreeSet::new();
        for g in &query.groups {
            let tag = g.descriptor.tag;
            self.pad_labels(view, &tag)?;
            if !tags.insert(tag) {
                return Err(refuse(format!("group {tag} requested twice")));
            }
            let rows = &g.descriptor.rows;
            if g.vector.len() != rows.len() {
                return Err(refuse(format!(
                    "group {tag}: vector of length {} for {} rows",
                    g.vector.len(),
                    rows.len()
                )));
            }
            let mut msgs = BTreeSet::new();
            for r in rows {
                if !accessible.contains(&r.message) {
                    return Err(refuse(format!("message {} is not accessible", r.message)));
                }
                if r.subpacket == 0 || r.subpacket > self.count {
                    return Err(refuse(format!("sub-packet index {} out of range", r.subpacket)));
                }
                if !msgs.insert(r.message) {
                    return Err(refuse(format!("group {tag} repeats message {}", r.message)));
                }
            }
            let members: BTreeSet<MessageId> = tag.members(&self.params, &view.public)?.into_iter().collect();
            if members != msgs {
                return Err(refuse(format!("rows of group {tag} do not match its set")));
            }
            if g.vector.iter().any(|&x| !self.params.field().contains(x)) {
                return Err(refuse("vector entry outside the field".into()));
            }
        }
        Ok(())
    }

    /// `h^T w + pad` per group, without admission checks.
    pub fn compute_answers(
        &self,
        view: &ServerView,
        query: &QueryTuple,
        store: &MessageStore,
        pool: &RandomnessPool,
    ) -> Result<Vec<AnswerShare>> {
        let field = self.params.field();
        query
            .groups
            .iter()
            .enumerate()
            .map(|(i, g)| {
                let rows: Vec<&[Fe]> = g
                    .descriptor
                    .rows
                    .iter()
                    .map(|r| store.subpacket(r.message, r.subpacket, self.count))
                    .collect::<Result<_>>()?;
                let data = field.combine(g.vector.as_slice(), &rows)?;
                let pad = pool.sum(&field, &self.pad_labels(view, &g.descriptor.tag)?)?;
                Ok(AnswerShare {
                    server: view.server,
                    group: i,
                    payload: field.add_vectors(&data, &pad)?,
                })
            })
            .collect()
    }

    pub fn answer(
        &self,
        view: &ServerView,
        query: &QueryTuple,
        store: &MessageStore,
        pool: &RandomnessPool,
    ) -> Result<Vec<AnswerShare>> {
        self.validate_query(view, query)?;
        self.compute_answers(view, query, store, pool)
    }

    /// User side: recovers `W_{v*}` from all shares.
    pub fn decode(&self, v_star: &AttributeVector, queries: &[QueryTuple], answers: &[AnswerShare]) -> Result<Vec<Fe>> {
        let index = AnswerIndex::new(answers);
        let recovered = match self.kind {
            SchemeKind::Dapac => dapac::decode(self, v_star, queries, &index)?,
            SchemeKind::Het1 => het1::decode(self, v_star, queries, &index)?,
            SchemeKind::Het2 => het2::decode(self, v_star, queries, &index)?,
        };
        assemble(&recovered, self.count)
    }
}
