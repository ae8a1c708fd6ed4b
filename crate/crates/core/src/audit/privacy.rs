//! Exact attribute-privacy check.
//!
//! A server's observation is its query with groups sorted by tag. Sub-packet
//! indices are relabeled per message by order of first appearance: under a
//! uniform private permutation, the indices a server sees for one message
//! are a uniform arrangement of distinct values given their equality
//! pattern, so the pattern carries all the information.
//!
//! The combining vectors are affine in the user's field coins. We recover
//! that map by probing the query builder with unit coin tapes (permutations
//! held at the identity), split observation coordinates into blocks that
//! share no coin, and enumerate each block exactly. Blocks with equal laws
//! under both attribute vectors cancel from the total-variation distance.

use std::collections::BTreeMap;

use rand::Rng;
use serde::Serialize;

use crate::access::{AttributeVector, GroupTag, MessageId};
use crate::coins::{derive_rng, CoinTape};
use crate::error::{Error, Result};
use crate::field::{Fe, Field};
use crate::mix::Rational;
use crate::protocol::{Engine, QueryTuple, ServerView};

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct ObservedGroup {
    pub tag: GroupTag,
    pub rows: Vec<(MessageId, usize)>,
    pub vector: Vec<Fe>,
}

/// What one server receives, in canonical form.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct QueryObservation {
    pub server: usize,
    pub groups: Vec<ObservedGroup>,
}

type Skeleton = Vec<(GroupTag, Vec<(MessageId, usize)>)>;

impl QueryObservation {
    /// Groups sorted by tag, indices as sent.
    pub fn raw(query: &QueryTuple) -> Self {
        let mut groups: Vec<ObservedGroup> = query
            .groups
            .iter()
            .map(|g| ObservedGroup {
                tag: g.descriptor.tag,
                rows: g.descriptor.rows.iter().map(|r| (r.message, r.subpacket)).collect(),
                vector: g.vector.as_slice().to_vec(),
            })
            .collect();
        groups.sort_by_key(|a| a.tag);
        QueryObservation {
            server: query.server,
            groups,
        }
    }

    /// As [`raw`](Self::raw) with indices relabeled by first appearance.
    pub fn canonical(query: &QueryTuple) -> Self {
        let mut obs = Self::raw(query);
        let mut seen: BTreeMap<(MessageId, usize), usize> = BTreeMap::new();
        let mut next: BTreeMap<MessageId, usize> = BTreeMap::new();
        for g in &mut obs.groups {
            for row in &mut g.rows {
                let label = *seen.entry(*row).or_insert_with(|| {
                    let c = next.entry(row.0).or_insert(0);
                    *c += 1;
                    *c
                });
                row.1 = label;
            }
        }
        obs
    }

    fn skeleton(&self) -> Skeleton {
        self.groups.iter().map(|g| (g.tag, g.rows.clone())).collect()
    }

    fn coordinates(&self) -> Vec<Fe> {
        self.groups.iter().flat_map(|g| g.vector.iter().copied()).collect()
    }
}

/// Exact probabilities over a finite outcome set.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DistributionTable<K: Ord> {
    pub probs: BTreeMap<K, Rational>,
}

impl<K: Ord + Clone> DistributionTable<K> {
    pub fn from_counts(counts: BTreeMap<K, u128>) -> Self {
        let total: u128 = counts.values().sum();
        DistributionTable {
            probs: counts
                .into_iter()
                .map(|(k, c)| (k, Rational::new(c as i128, total as i128)))
                .collect(),
        }
    }

    pub fn total(&self) -> Rational {
        self.probs.values().sum()
    }

    pub fn total_variation(&self, other: &Self) -> Rational {
        let zero = Rational::from_integer(0);
        let mut sum = zero;
        for (k, p) in &self.probs {
            let q = other.probs.get(k).copied().unwrap_or(zero);
            sum += if *p > q { *p - q } else { q - *p };
        }
        for (k, q) in &other.probs {
            if !self.probs.contains_key(k) {
                sum += *q;
            }
        }
        sum / Rational::from_integer(2)
    }
}

/// The observation as `offset + sum_j t_j * columns[j]` over coin tapes `t`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AffineObservation {
    skeleton: Skeleton,
    offset: Vec<Fe>,
    columns: Vec<Vec<Fe>>,
}

fn observe(engine: &Engine, v_star: &AttributeVector, server: usize, tape: Vec<Fe>) -> Result<(QueryObservation, usize)> {
    let mut coins = CoinTape::new(tape);
    let queries = engine.build_queries(v_star, &mut coins)?;
    let q = queries
        .iter()
        .find(|q| q.server == server)
        .ok_or_else(|| Error::InvalidParams(format!("server {server} is not queried by {}", engine.kind())))?;
    Ok((QueryObservation::canonical(q), coins.consumed()))
}

pub fn affine_observation(engine: &Engine, v_star: &AttributeVector, server: usize) -> Result<AffineObservation> {
    let field = engine.params().field();
    let (base, len) = observe(engine, v_star, server, Vec::new())?;
    let skeleton = base.skeleton();
    let offset = base.coordinates();
    let mut columns = Vec::with_capacity(len);
    for j in 0..len {
        let mut tape = vec![Fe::ZERO; len];
        tape[j] = Fe::ONE;
        let (obs, _) = observe(engine, v_star, server, tape)?;
        if obs.skeleton() != skeleton {
            return Err(Error::InconsistentQuery("group structure depends on field coins".into()));
        }
        columns.push(field.sub_vectors(&obs.coordinates(), &offset)?);
    }
    let model = AffineObservation {
        skeleton,
        offset,
        columns,
    };
    // The probe is only sound if the builder really is affine in its coins.
    let mut rng = derive_rng(len as u64, "audit/affine");
    for _ in 0..4 {
        let tape: Vec<Fe> = (0..len).map(|_| field.elem(rng.random_range(0..field.modulus()))).collect();
        let (obs, _) = observe(engine, v_star, server, tape.clone())?;
        if obs.skeleton() != model.skeleton || obs.coordinates() != model.eval(&field, &tape, None) {
            return Err(Error::InconsistentQuery("observation is not affine in the coins".into()));
        }
    }
    Ok(model)
}

impl AffineObservation {
    fn eval(&self, field: &Field, tape: &[Fe], coords: Option<&[usize]>) -> Vec<Fe> {
        let idx: Vec<usize> = match coords {
            Some(c) => c.to_vec(),
            None => (0..self.offset.len()).collect(),
        };
        idx.iter()
            .map(|&i| {
                tape.iter().zip(&self.columns).fold(self.offset[i], |acc, (&t, col)| {
                    field.add(acc, field.mul(t, col[i]))
                })
            })
            .collect()
    }

    fn vars_touching(&self, coords: &[usize]) -> Vec<usize> {
        (0..self.columns.len())
            .filter(|&j| coords.iter().any(|&i| !self.columns[j][i].is_zero()))
            .collect()
    }

    /// Law of the coordinates in `coords`, by enumerating the coins that
    /// reach them.
    fn block_law(&self, field: &Field, coords: &[usize], cap: u128) -> Result<(DistributionTable<Vec<Fe>>, u128)> {
        let vars = self.vars_touching(coords);
        let q = field.modulus() as u128;
        let size = q
            .checked_pow(vars.len() as u32)
            .filter(|&s| s <= cap)
            .ok_or(Error::EnumerationTooLarge {
                size: q.saturating_pow(vars.len() as u32),
                cap,
            })?;
        let mut tape = vec![Fe::ZERO; self.columns.len()];
        let mut counts: BTreeMap<Vec<Fe>, u128> = BTreeMap::new();
        let mut digits = vec![0u64; vars.len()];
        loop {
            for (d, &j) in digits.iter().zip(&vars) {
                tape[j] = field.elem(*d);
            }
            *counts.entry(self.eval(field, &tape, Some(coords))).or_insert(0) += 1;
            let mut i = 0;
            loop {
                if i == digits.len() {
                    return Ok((DistributionTable::from_counts(counts), size));
                }
                digits[i] += 1;
                if digits[i] < field.modulus() {
                    break;
                }
                digits[i] = 0;
                i += 1;
            }
        }
    }
}

fn find(parent: &mut [usize], mut x: usize) -> usize {
    while parent[x] != x {
        parent[x] = parent[parent[x]];
        x = parent[x];
    }
    x
}

fn product(tables: &[DistributionTable<Vec<Fe>>], cap: u128) -> Result<DistributionTable<Vec<Fe>>> {
    let size: u128 = tables.iter().map(|t| t.probs.len() as u128).product();
    if size > cap {
        return Err(Error::EnumerationTooLarge { size, cap });
    }
    let mut acc: BTreeMap<Vec<Fe>, Rational> = BTreeMap::from([(Vec::new(), Rational::from_integer(1))]);
    for t in tables {
        let mut next = BTreeMap::new();
        for (k, p) in &acc {
            for (k2, p2) in &t.probs {
                let mut key = k.clone();
                key.extend_from_slice(k2);
                next.insert(key, *p * *p2);
            }
        }
        acc = next;
    }
    Ok(DistributionTable { probs: acc })
}

/// Exact TV distance between two observation laws, and the number of coin
/// assignments enumerated.
pub fn observation_distance(field: &Field, a: &AffineObservation, b: &AffineObservation, cap: u128) -> Result<(Rational, u128)> {
    if a.skeleton != b.skeleton {
        return Ok((Rational::from_integer(1), 0));
    }
    let n = a.offset.len();
    let mut parent: Vec<usize> = (0..n).collect();
    for col in a.columns.iter().chain(&b.columns) {
        let hit: Vec<usize> = (0..n).filter(|&i| !col[i].is_zero()).collect();
        for w in hit.windows(2) {
            let (x, y) = (find(&mut parent, w[0]), find(&mut parent, w[1]));
            parent[x] = y;
        }
    }
    let mut blocks: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for i in 0..n {
        let r = find(&mut parent, i);
        blocks.entry(r).or_default().push(i);
    }
    let mut enumerated = 0;
    let (mut left, mut right) = (Vec::new(), Vec::new());
    for coords in blocks.values() {
        let (la, sa) = a.block_law(field, coords, cap)?;
        let (lb, sb) = b.block_law(field, coords, cap)?;
        enumerated += sa + sb;
        if la != lb {
            left.push(la);
            right.push(lb);
        }
    }
    if left.is_empty() {
        return Ok((Rational::from_integer(0), enumerated));
    }
    let tv = product(&left, cap)?.total_variation(&product(&right, cap)?);
    Ok((tv, enumerated))
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct PrivacyOutcome {
    pub server: usize,
    #[serde(serialize_with = "crate::mix::ratio_serde::serialize")]
    pub max_tv: Rational,
    /// Attribute-vector pairs compared.
    pub pairs: usize,
    pub enumerated: u128,
}

/// Max TV distance of server `server`'s observation over all pairs of
/// attribute vectors that agree on what the server verified.
pub fn audit_attribute_privacy(engine: &Engine, server: usize, cap: u128) -> Result<PrivacyOutcome> {
    let params = engine.params();
    let field = params.field();
    let mut classes: BTreeMap<(Option<usize>, Vec<usize>), Vec<AttributeVector>> = BTreeMap::new();
    for v in AttributeVector::all(params) {
        let view = ServerView::of(params, server, &v);
        classes.entry((view.sensitive, view.public)).or_default().push(v);
    }
    let mut out = PrivacyOutcome {
        server,
        max_tv: Rational::from_integer(0),
        pairs: 0,
        enumerated: 0,
    };
    for members in classes.values() {
        let models: Vec<AffineObservation> = members
            .iter()
            .map(|v| affine_observation(engine, v, server))
            .collect::<Result<_>>()?;
        for i in 0..models.len() {
            for j in i + 1..models.len() {
                let (tv, n) = observation_distance(&field, &models[i], &models[j], cap)?;
                out.pairs += 1;
                out.enumerated += n;
                out.max_tv = out.max_tv.max(tv);
            }
        }
    }
    Ok(out)
}

/// [`audit_attribute_privacy`] for every server the scheme queries.
pub fn audit_privacy_all(engine: &Engine, cap: u128) -> Result<Vec<PrivacyOutcome>> {
    engine
        .servers()
        .into_iter()
        .map(|s| audit_attribute_privacy(engine, s, cap))
        .collect()
}
