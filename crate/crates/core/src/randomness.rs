//! Common randomness shared by the servers and hidden from the user.
//!
//! The pool is allocated before any sensitive attribute is verified, so it
//! only depends on the scheme, the public attributes and the seed.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::access::{PairPartition, SystemParams};
use crate::coins::derive_rng;
use crate::error::{Error, Result};
use crate::field::{Fe, Field, SubPacket};
use crate::protocol::SchemeKind;

/// Name of one pool chunk.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(tag = "chunk", rename_all = "lowercase")]
pub enum RandomnessLabel {
    /// `s_{nk}`.
    Single { n: usize, k: usize },
    /// `s_{nm}^{(k,k2)}` with `n < m`.
    Pair { n: usize, m: usize, k: usize, k2: usize },
}

impl RandomnessLabel {
    /// Canonical pair label: `s_{nm}^{(k,k2)} = s_{mn}^{(k2,k)}`.
    pub fn pair(n: usize, m: usize, k: usize, k2: usize) -> Self {
        if n < m {
            RandomnessLabel::Pair { n, m, k, k2 }
        } else {
            RandomnessLabel::Pair {
                n: m,
                m: n,
                k: k2,
                k2: k,
            }
        }
    }
}

impl fmt::Display for RandomnessLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RandomnessLabel::Single { n, k } => write!(f, "s_{n}{k}"),
            RandomnessLabel::Pair { n, m, k, k2 } => write!(f, "s_{n}{m}^({k},{k2})"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RandomnessPool {
    pub scheme: SchemeKind,
    pub chunk_len: usize,
    chunks: BTreeMap<RandomnessLabel, SubPacket>,
}

/// Chunk labels a scheme needs, in allocation order.
pub fn labels(kind: SchemeKind, params: &SystemParams) -> Vec<RandomnessLabel> {
    let (d, k) = (params.d, params.k);
    match kind {
        SchemeKind::Het1 => (1..=d)
            .flat_map(|n| (1..=k).map(move |kk| RandomnessLabel::Single { n, k: kk }))
            .collect(),
        SchemeKind::Dapac | SchemeKind::Het2 => {
            let mut out = Vec::new();
            for n in 1..=d {
                for m in n + 1..=d {
                    for a in 1..=k {
                        for b in 1..=k {
                            out.push(RandomnessLabel::Pair { n, m, k: a, k2: b });
                        }
                    }
                }
            }
            out
        }
    }
}

impl RandomnessPool {
    pub fn allocate(kind: SchemeKind, params: &SystemParams, public: &[usize], seed: u64) -> Result<Self> {
        Self::allocate_stream(kind, params, public, seed, "")
    }

    /// As [`allocate`](Self::allocate), on a named sub-stream (one per
    /// time-sharing segment).
    pub fn allocate_stream(
        kind: SchemeKind,
        params: &SystemParams,
        public: &[usize],
        seed: u64,
        stream: &str,
    ) -> Result<Self> {
        let count = kind.subpacket_count(params)?;
        let chunk_len = params.l / count;
        let public: Vec<String> = public.iter().map(|v| v.to_string()).collect();
        let mut rng = derive_rng(seed, &format!("server-shared/{}/{stream}", public.join(",")));
        let field = params.field();
        let chunks = labels(kind, params)
            .into_iter()
            .map(|label| (label, field.sample_vector(chunk_len, &mut rng).into_inner()))
            .collect();
        Ok(RandomnessPool {
            scheme: kind,
            chunk_len,
            chunks,
        })
    }

    pub fn from_chunks(
        kind: SchemeKind,
        chunk_len: usize,
        chunks: BTreeMap<RandomnessLabel, SubPacket>,
    ) -> Result<Self> {
        if let Some((label, c)) = chunks.iter().find(|(_, c)| c.len() != chunk_len) {
            return Err(Error::InvalidParams(format!(
                "chunk {label} has {} symbols, expected {chunk_len}",
                c.len()
            )));
        }
        Ok(RandomnessPool {
            scheme: kind,
            chunk_len,
            chunks,
        })
    }

    pub fn get(&self, label: &RandomnessLabel) -> Result<&[Fe]> {
        let label = match *label {
            RandomnessLabel::Pair { n, m, k, k2 } => RandomnessLabel::pair(n, m, k, k2),
            other => other,
        };
        self.chunks
            .get(&label)
            .map(|c| c.as_slice())
            .ok_or_else(|| Error::InvalidParams(format!("no randomness chunk {label}")))
    }

    /// Sum of the named chunks.
    pub fn sum(&self, field: &Field, labels: &[RandomnessLabel]) -> Result<SubPacket> {
        let mut acc = vec![Fe::ZERO; self.chunk_len];
        for l in labels {
            acc = field.add_vectors(&acc, self.get(l)?)?;
        }
        Ok(acc)
    }

    pub fn labels(&self) -> impl Iterator<Item = &RandomnessLabel> {
        self.chunks.keys()
    }

    pub fn chunk_count(&self) -> usize {
        self.chunks.len()
    }

    pub fn total_symbols(&self) -> usize {
        self.chunks.len() * self.chunk_len
    }
}

/// Labels summed by the central server for group `U(n,k)`:
/// `s_{nm}^{(k,k')}` over all `k'`, where `(n, m)` is an oriented pair.
pub fn central_labels(n: usize, k: usize, alphabet: usize, partition: &PairPartition) -> Result<Vec<RandomnessLabel>> {
    let m = partner_of(n, partition)?;
    Ok((1..=alphabet).map(|k2| RandomnessLabel::pair(n, m, k, k2)).collect())
}

fn partner_of(n: usize, partition: &PairPartition) -> Result<usize> {
    partition.partner(n).map_err(|_| {
        Error::InvalidDesign(format!("server {n} has no oriented partner"))
    })
}

/// `tilde s` for group `U(n,k)`.
pub fn central_sum(
    pool: &RandomnessPool,
    field: &Field,
    n: usize,
    k: usize,
    alphabet: usize,
    partition: &PairPartition,
) -> Result<SubPacket> {
    pool.sum(field, &central_labels(n, k, alphabet, partition)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::BTreeSet;

    #[test]
    fn pool_sizes() {
        let p1 = SystemParams::new(3, 2, 2, 65537, 2).unwrap();
        let pool = RandomnessPool::allocate(SchemeKind::Het1, &p1, &[2], 1).unwrap();
        assert_eq!((pool.chunk_count(), pool.chunk_len, pool.total_symbols()), (4, 1, 4));

        let p2 = SystemParams::new(4, 3, 2, 65537, 6).unwrap();
        let pool = RandomnessPool::allocate(SchemeKind::Het2, &p2, &[2], 1).unwrap();
        assert_eq!((pool.chunk_count(), pool.chunk_len), (12, 1));

        let p3 = SystemParams::new(3, 3, 2, 65537, 3).unwrap();
        let pool = RandomnessPool::allocate(SchemeKind::Dapac, &p3, &[], 1).unwrap();
        assert_eq!((pool.chunk_count(), pool.total_symbols()), (12, 12));

        let bad = SystemParams::new(4, 3, 2, 65537, 4).unwrap();
        assert!(matches!(
            RandomnessPool::allocate(SchemeKind::Het2, &bad, &[2], 1),
            Err(Error::Divisibility { min_length: 6, .. })
        ));
    }

    #[test]
    fn closed_form_sizes() {
        for d in 3..=5 {
            for k in 2..=3 {
                let m = d * (d + 1) / 2;
                let params = SystemParams::new(d, d, k, 65537, 2 * m).unwrap();
                let h2 = RandomnessPool::allocate(SchemeKind::Het2, &params, &[], 0).unwrap();
                assert_eq!(h2.total_symbols() * (d + 1), (d - 1) * k * k * params.l);
                let pairs = d * (d - 1) / 2;
                let dp = params.with_length(pairs * 2);
                let pool = RandomnessPool::allocate(SchemeKind::Dapac, &dp, &[], 0).unwrap();
                assert_eq!(pool.total_symbols(), k * k * dp.l);
                let p1 = params.with_length(d * 3);
                let pool = RandomnessPool::allocate(SchemeKind::Het1, &p1, &[], 0).unwrap();
                assert_eq!(pool.total_symbols(), k * p1.l);
            }
        }
    }

    #[test]
    fn swapped_pair_lookup() {
        let params = SystemParams::new(3, 3, 2, 65537, 3).unwrap();
        let pool = RandomnessPool::allocate(SchemeKind::Dapac, &params, &[], 9).unwrap();
        assert_eq!(
            pool.get(&RandomnessLabel::Pair { n: 2, m: 1, k: 1, k2: 2 }).unwrap(),
            pool.get(&RandomnessLabel::Pair { n: 1, m: 2, k: 2, k2: 1 }).unwrap()
        );
    }

    #[test]
    fn chunks_are_distinct() {
        let params = SystemParams::new(4, 4, 3, 65537, 12).unwrap();
        let pool = RandomnessPool::allocate(SchemeKind::Dapac, &params, &[], 4).unwrap();
        let distinct: BTreeSet<&[Fe]> = pool.labels().map(|l| pool.get(l).unwrap()).collect();
        assert_eq!(distinct.len(), pool.chunk_count());
    }

    #[test]
    fn central_sums_follow_the_oriented_design() {
        let params = SystemParams::new(4, 3, 2, 65537, 6).unwrap();
        let field = params.field();
        let part = PairPartition::cyclic(3).unwrap();
        let pool = RandomnessPool::allocate(SchemeKind::Het2, &params, &[2], 5).unwrap();
        let s = |n, m, k, k2| pool.get(&RandomnessLabel::pair(n, m, k, k2)).unwrap().to_vec();
        let add = |a: Vec<Fe>, b: Vec<Fe>| field.add_vectors(&a, &b).unwrap();
        assert_eq!(
            central_sum(&pool, &field, 1, 1, 2, &part).unwrap(),
            add(s(1, 2, 1, 1), s(1, 2, 1, 2))
        );
        // Server 3 pairs with server 1: s_31^(2,1) + s_31^(2,2).
        assert_eq!(
            central_sum(&pool, &field, 3, 2, 2, &part).unwrap(),
            add(s(1, 3, 1, 2), s(1, 3, 2, 2))
        );
    }
}
