//! Balanced scheme: `M = D(D+1)/2` sub-packets per message, `D >= 3`.
//!
//! Dedicated server `n` gets one group per `U_nm(k_n, k)`, like the pairwise
//! baseline. Server pairs are split by a 2-regular design `C_D`:
//!
//! * pairs in `C_D` carry *two* different sub-packets of the desired message
//!   in their matched groups under *equal* vectors;
//! * the remaining pairs carry one shared sub-packet under vectors that differ
//!   by a unit vector, exactly as in the baseline.
//!
//! The central server's group `U(n, k_n)` stacks server `n`'s `K` groups
//! towards its oriented partner `m`, with the unit offset on block `k_m`, and
//! its pad is the sum of the `K` chunks those groups use. Decoding runs in
//! three stages: central minus summed dedicated answers (one sub-packet per
//! server), then the `C_D` differences (needs one field division), then the
//! remaining pairs.

use std::collections::BTreeMap;

use crate::access::{message_index, ordered_complement, AttributeVector, GroupTag, PairPartition};
use crate::coins::CoinSource;
use crate::error::{Error, Result};
use crate::field::{FieldVector, SubPacket};
use crate::protocol::{
    query_for, row_of, AnswerIndex, Engine, MessageGroupDescriptor, QueryGroup, QueryTuple, Row, SubpacketAllocator,
};

/// Positions of the desired message's sub-packets, per server pair.
/// Pairs of `C_D` (sorted) take `j` and `D + j`; the rest take `2D + j`.
#[derive(Clone, Debug)]
pub struct IndexMap {
    map: BTreeMap<(usize, usize), (usize, usize)>,
}

impl IndexMap {
    pub fn new(partition: &PairPartition) -> Self {
        let d = partition.d;
        let mut map = BTreeMap::new();
        for (j, &p) in partition.cycle.iter().enumerate() {
            map.insert(p, (j + 1, d + j + 1));
        }
        for (j, &p) in partition.rest.iter().enumerate() {
            map.insert(p, (2 * d + j + 1, 2 * d + j + 1));
        }
        IndexMap { map }
    }

    /// `(i_{nm,1}, i_{nm,2})` for `n < m`; equal entries off the design.
    pub fn get(&self, n: usize, m: usize) -> (usize, usize) {
        self.map[&(n.min(m), n.max(m))]
    }

    pub fn positions(&self) -> Vec<usize> {
        let mut v: Vec<usize> = self.map.values().flat_map(|&(a, b)| [a, b]).collect();
        v.sort_unstable();
        v.dedup();
        v
    }
}

pub(crate) fn build_queries(
    engine: &Engine,
    v_star: &AttributeVector,
    coins: &mut dyn CoinSource,
) -> Result<Vec<QueryTuple>> {
    let params = engine.params();
    let part = engine.design()?;
    let idx = IndexMap::new(part);
    let field = params.field();
    let public = v_star.public(params);
    let target = message_index(v_star, params)?;
    let mut alloc = SubpacketAllocator::new(engine.subpacket_count());
    let mut shared: BTreeMap<(usize, usize), (Vec<Row>, FieldVector)> = BTreeMap::new();
    let mut dedicated: BTreeMap<(usize, usize, usize), (Vec<Row>, FieldVector)> = BTreeMap::new();
    let mut out = Vec::with_capacity(params.d + 1);

    for n in 1..=params.d {
        let kn = v_star.get(n);
        let mut groups = Vec::new();
        for m in ordered_complement(n, params.d) {
            let km = v_star.get(m);
            let in_cycle = part.in_cycle(n, m);
            for k in 1..=params.k {
                let tag = GroupTag::Pair { n, m, k: kn, k2: k };
                let members = tag.members(params, public)?;
                let (rows, vector) = if k != km {
                    let rows = alloc.fresh_rows(&members, coins)?;
                    let h = coins.uniform_vector(&field, rows.len());
                    (rows, h)
                } else if n < m {
                    let first = idx.get(n, m).0;
                    let rows = members
                        .iter()
                        .map(|&msg| {
                            if msg == target {
                                alloc.at_position(msg, first, coins)
                            } else {
                                alloc.fresh(msg, coins)
                            }
                        })
                        .collect::<Result<Vec<_>>>()?;
                    let h = coins.uniform_vector(&field, rows.len());
                    shared.insert((n, m), (rows.clone(), h.clone()));
                    (rows, h)
                } else {
                    let (mut rows, h) = shared.get(&(m, n)).cloned().ok_or_else(|| {
                        Error::InconsistentQuery(format!("pair ({m},{n}) not built yet"))
                    })?;
                    let l = row_of(&rows, target)?;
                    if in_cycle {
                        rows[l - 1] = alloc.at_position(target, idx.get(m, n).1, coins)?;
                        (rows, h)
                    } else {
                        let v = field.offset_unit(&h, l)?;
                        (rows, v)
                    }
                };
                dedicated.insert((n, m, k), (rows.clone(), vector.clone()));
                groups.push(QueryGroup {
                    descriptor: MessageGroupDescriptor { tag, rows },
                    vector,
                });
            }
        }
        out.push(QueryTuple {
            server: n,
            subpackets: engine.subpacket_count(),
            groups,
        });
    }

    let mut central = Vec::with_capacity(params.d * params.k);
    for n in 1..=params.d {
        let m = part.partner(n)?;
        let (kn, km) = (v_star.get(n), v_star.get(m));
        for k in 1..=params.k {
            let tag = GroupTag::Attr { n, k };
            let mut rows = Vec::new();
            let mut vector = FieldVector::default();
            if k == kn {
                for k2 in 1..=params.k {
                    let (r, h) = &dedicated[&(n, m, k2)];
                    rows.extend_from_slice(r);
                    if k2 == km {
                        vector.concat(&field.offset_unit(h, row_of(r, target)?)?);
                    } else {
                        vector.concat(h);
                    }
                }
            } else {
                // Same block layout as the concatenated group, fresh rows.
                for k2 in 1..=params.k {
                    let members = GroupTag::Pair { n, m, k, k2 }.members(params, public)?;
                    rows.extend(alloc.fresh_rows(&members, coins)?);
                }
                vector = coins.uniform_vector(&field, rows.len());
            }
            central.push(QueryGroup {
                descriptor: MessageGroupDescriptor { tag, rows },
                vector,
            });
        }
    }
    out.push(QueryTuple {
        server: params.central(),
        subpackets: engine.subpacket_count(),
        groups: central,
    });
    Ok(out)
}

pub(crate) fn decode(
    engine: &Engine,
    v_star: &AttributeVector,
    queries: &[QueryTuple],
    answers: &AnswerIndex<'_>,
) -> Result<BTreeMap<usize, SubPacket>> {
    let params = engine.params();
    let part = engine.design()?;
    let field = params.field();
    let target = message_index(v_star, params)?;
    let central = query_for(queries, params.central())?;
    let mut recovered = BTreeMap::new();
    let inconsistent = |what: String| Error::InconsistentQuery(what);

    // Stage 1: central answer minus the K dedicated answers it stacks.
    for &(n, m) in &part.oriented {
        let (kn, km) = (v_star.get(n), v_star.get(m));
        let ded = query_for(queries, n)?;
        let (gc, cen) = central.find(&GroupTag::Attr { n, k: kn })?;
        let mut acc = answers.get(params.central(), gc)?.to_vec();
        let mut rows = Vec::new();
        let mut vector = FieldVector::default();
        let mut hit = None;
        for k in 1..=params.k {
            let (gi, g) = ded.find(&GroupTag::Pair { n, m, k: kn, k2: k })?;
            acc = field.sub_vectors(&acc, answers.get(n, gi)?)?;
            if k == km {
                let l = row_of(&g.descriptor.rows, target)?;
                hit = Some(g.descriptor.rows[l - 1].subpacket);
                vector.concat(&field.offset_unit(&g.vector, l)?);
            } else {
                vector.concat(&g.vector);
            }
            rows.extend_from_slice(&g.descriptor.rows);
        }
        if cen.descriptor.rows != rows || cen.vector != vector {
            return Err(inconsistent(format!("central group for server {n} is not the stacked dedicated groups")));
        }
        recovered.insert(hit.expect("k_m is in 1..=K"), acc);
    }

    // Stage 2: matched groups of every server pair.
    let matched = |n: usize, m: usize| -> Result<(usize, &QueryGroup, usize, &QueryGroup)> {
        let (kn, km) = (v_star.get(n), v_star.get(m));
        let (gi, a) = query_for(queries, n)?.find(&GroupTag::Pair { n, m, k: kn, k2: km })?;
        let (gj, b) = query_for(queries, m)?.find(&GroupTag::Pair { n: m, m: n, k: km, k2: kn })?;
        Ok((gi, a, gj, b))
    };
    for &(n, m) in &part.cycle {
        let (gi, a, gj, b) = matched(n, m)?;
        let l = row_of(&a.descriptor.rows, target)?;
        let (ra, rb) = (&a.descriptor.rows, &b.descriptor.rows);
        let same_elsewhere = ra.len() == rb.len()
            && ra.iter().zip(rb).enumerate().all(|(i, (x, y))| i == l - 1 || x == y)
            && rb[l - 1].message == target;
        if !same_elsewhere || a.vector != b.vector {
            return Err(inconsistent(format!("pair ({n},{m}) matched groups disagree")));
        }
        let c = a.vector[l - 1];
        if c.is_zero() {
            return Err(Error::ZeroCoefficient { n, m });
        }
        // answer_m - answer_n = c * (w(j2) - w(j1))
        let diff = field.scale(field.inv(c)?, &field.sub_vectors(answers.get(m, gj)?, answers.get(n, gi)?)?);
        let (j1, j2) = (ra[l - 1].subpacket, rb[l - 1].subpacket);
        if let Some(w1) = recovered.get(&j1) {
            let w2 = field.add_vectors(w1, &diff)?;
            recovered.insert(j2, w2);
        } else if let Some(w2) = recovered.get(&j2) {
            let w1 = field.sub_vectors(w2, &diff)?;
            recovered.insert(j1, w1);
        } else {
            return Err(inconsistent(format!("pair ({n},{m}) has no sub-packet from the first stage")));
        }
    }
    for &(n, m) in &part.rest {
        let (gi, a, gj, b) = matched(n, m)?;
        if a.descriptor.rows != b.descriptor.rows {
            return Err(inconsistent(format!("pair ({n},{m}) rows differ")));
        }
        let l = row_of(&a.descriptor.rows, target)?;
        if b.vector != field.offset_unit(&a.vector, l)? {
            return Err(inconsistent(format!("pair ({n},{m}) vectors are not unit-offset")));
        }
        let sub = field.sub_vectors(answers.get(m, gj)?, answers.get(n, gi)?)?;
        recovered.insert(a.descriptor.rows[l - 1].subpacket, sub);
    }
    Ok(recovered)
}
