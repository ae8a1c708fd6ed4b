//! Central-heavy scheme: `D` sub-packets per message.
//!
//! The central server combines one group per `U(n,k)` with independent
//! vectors. Dedicated server `n` is asked for the same rows as the central
//! group `U(n, k_n)` with that vector shifted by a unit vector at the desired
//! row, and both add the pad `s_{n k_n}`. One subtraction per dedicated server
//! exposes one sub-packet.

use std::collections::BTreeMap;

use crate::access::{message_index, AttributeVector, GroupTag};
use crate::coins::CoinSource;
use crate::error::{Error, Result};
use crate::field::SubPacket;
use crate::protocol::{
    query_for, row_of, AnswerIndex, Engine, MessageGroupDescriptor, QueryGroup, QueryTuple, SubpacketAllocator,
};

pub(crate) fn build_queries(
    engine: &Engine,
    v_star: &AttributeVector,
    coins: &mut dyn CoinSource,
) -> Result<Vec<QueryTuple>> {
    let params = engine.params();
    let field = params.field();
    let public = v_star.public(params);
    let target = message_index(v_star, params)?;
    let mut alloc = SubpacketAllocator::new(engine.subpacket_count());

    let mut central = Vec::with_capacity(params.d * params.k);
    for n in 1..=params.d {
        for k in 1..=params.k {
            let tag = GroupTag::Attr { n, k };
            let rows = alloc.fresh_rows(&tag.members(params, public)?, coins)?;
            let vector = coins.uniform_vector(&field, rows.len());
            central.push(QueryGroup {
                descriptor: MessageGroupDescriptor { tag, rows },
                vector,
            });
        }
    }

    let mut out = Vec::with_capacity(params.d + 1);
    for n in 1..=params.d {
        let g = &central[(n - 1) * params.k + v_star.get(n) - 1];
        let l = row_of(&g.descriptor.rows, target)?;
        out.push(QueryTuple {
            server: n,
            subpackets: engine.subpacket_count(),
            groups: vec![QueryGroup {
                descriptor: g.descriptor.clone(),
                vector: field.offset_unit(&g.vector, l)?,
            }],
        });
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
    let field = params.field();
    let target = message_index(v_star, params)?;
    let central = query_for(queries, params.central())?;
    let mut recovered = BTreeMap::new();
    for n in 1..=params.d {
        let tag = GroupTag::Attr { n, k: v_star.get(n) };
        let (gi, ded) = query_for(queries, n)?.find(&tag)?;
        let (gc, cen) = central.find(&tag)?;
        if ded.descriptor.rows != cen.descriptor.rows {
            return Err(Error::InconsistentQuery(format!("server {n} rows differ from central")));
        }
        let l = row_of(&cen.descriptor.rows, target)?;
        if ded.vector != field.offset_unit(&cen.vector, l)? {
            return Err(Error::InconsistentQuery(format!("server {n} vector is not offset by e_{l}")));
        }
        let sub = field.sub_vectors(answers.get(n, gi)?, answers.get(params.central(), gc)?)?;
        recovered.insert(cen.descriptor.rows[l - 1].subpacket, sub);
    }
    Ok(recovered)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::access::{MessageId, SystemParams};
    use crate::coins::RngCoins;
    use crate::protocol::{SchemeKind, ServerView};
    use crate::randomness::{RandomnessLabel, RandomnessPool};
    use crate::store::MessageStore;

    fn run(params: &SystemParams, v: &AttributeVector, seed: u64) -> (Vec<QueryTuple>, Vec<crate::protocol::AnswerShare>, MessageStore) {
        let engine = Engine::new(SchemeKind::Het1, params).unwrap();
        let store = MessageStore::random(params, seed);
        let pool = RandomnessPool::allocate(SchemeKind::Het1, params, v.public(params), seed).unwrap();
        let qs = engine.build_queries(v, &mut RngCoins::seeded(seed, "u")).unwrap();
        let answers = qs
            .iter()
            .flat_map(|q| engine.answer(&ServerView::of(params, q.server, v), q, &store, &pool).unwrap())
            .collect();
        (qs, answers, store)
    }

    #[test]
    fn three_attribute_two_dedicated_queries() {
        let params = SystemParams::new(3, 2, 2, 65537, 2).unwrap();
        let v = AttributeVector::new(vec![1, 2, 2], &params).unwrap();
        let (qs, answers, store) = run(&params, &v, 7);
        let field = params.field();
        let id = |a: [usize; 3]| message_index(&AttributeVector::new(a.to_vec(), &params).unwrap(), &params).unwrap();
        let g1 = &qs[0].groups[0];
        assert_eq!(g1.descriptor.tag, GroupTag::Attr { n: 1, k: 1 });
        let msgs: Vec<MessageId> = g1.descriptor.rows.iter().map(|r| r.message).collect();
        assert_eq!(msgs, vec![id([1, 1, 2]), id([1, 2, 2])]);
        let (_, c11) = qs[2].find(&GroupTag::Attr { n: 1, k: 1 }).unwrap();
        assert_eq!(g1.vector, field.offset_unit(&c11.vector, 2).unwrap());
        let (_, c22) = qs[2].find(&GroupTag::Attr { n: 2, k: 2 }).unwrap();
        assert_eq!(qs[1].groups[0].vector, field.offset_unit(&c22.vector, 1).unwrap());
        let tags: Vec<GroupTag> = qs[2].groups.iter().map(|g| g.descriptor.tag).collect();
        assert_eq!(tags.len(), 4);
        assert_eq!(answers.len(), 6);
        let engine = Engine::new(SchemeKind::Het1, &params).unwrap();
        assert_eq!(engine.decode(&v, &qs, &answers).unwrap(), store.message(id([1, 2, 2])).unwrap());
        let view = ServerView::of(&params, 2, &v);
        assert_eq!(
            engine.pad_labels(&view, &GroupTag::Attr { n: 2, k: 2 }).unwrap(),
            vec![RandomnessLabel::Single { n: 2, k: 2 }]
        );
    }

    #[test]
    fn four_attribute_counts() {
        let params = SystemParams::new(4, 3, 2, 65537, 3).unwrap();
        let v = AttributeVector::new(vec![1, 2, 1, 2], &params).unwrap();
        let (qs, answers, _) = run(&params, &v, 1);
        assert_eq!(qs[3].groups.len(), 6);
        // Dedicated groups coincide with central w_11, w_22, w_31.
        for (n, k) in [(1, 1), (2, 2), (3, 1)] {
            let (_, c) = qs[3].find(&GroupTag::Attr { n, k }).unwrap();
            assert_eq!(qs[n - 1].groups[0].descriptor, c.descriptor);
        }
        let total: usize = answers.iter().map(|a| a.payload.len()).sum();
        assert_eq!(total, 9);
        let central: usize = answers.iter().filter(|a| a.server == 4).map(|a| a.payload.len()).sum();
        assert_eq!(central, 6);
        assert!(answers.iter().all(|a| a.payload.len() == params.l / params.d));
    }

    #[test]
    fn exhaustive_roundtrip() {
        let params = SystemParams::new(3, 2, 2, 65537, 4).unwrap();
        for v in AttributeVector::all(&params) {
            for seed in 0..10 {
                let (qs, answers, store) = run(&params, &v, seed);
                let engine = Engine::new(SchemeKind::Het1, &params).unwrap();
                assert_eq!(
                    engine.decode(&v, &qs, &answers).unwrap(),
                    store.message(message_index(&v, &params).unwrap()).unwrap()
                );
            }
        }
    }

    #[test]
    fn missing_share_is_reported() {
        let params = SystemParams::new(3, 2, 2, 65537, 2).unwrap();
        let v = AttributeVector::new(vec![2, 1, 1], &params).unwrap();
        let (qs, mut answers, _) = run(&params, &v, 3);
        answers.retain(|a| a.server != 2);
        let engine = Engine::new(SchemeKind::Het1, &params).unwrap();
        assert!(matches!(
            engine.decode(&v, &qs, &answers),
            Err(Error::MissingShare { server: 2, group: 0 })
        ));
    }
}
