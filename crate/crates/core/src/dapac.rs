//! Pairwise baseline over the `D` dedicated servers.
//!
//! Each message is cut into `C(D,2)` sub-packets. Server `n` gets one group
//! per `U_nm(k_n, k)`, `m != n`. For every pair `n < m` the two groups over
//! `U_nm(k_n, k_m)` hold identical rows (with one fresh sub-packet of the
//! desired message), share one pad chunk, and server `m`'s vector is server
//! `n`'s plus a unit vector at the desired row. The difference of the two
//! answers is that sub-packet.

use std::collections::BTreeMap;

use crate::access::{message_index, ordered_complement, AttributeVector, GroupTag};
use crate::coins::CoinSource;
use crate::error::{Error, Result};
use crate::field::{FieldVector, SubPacket};
use crate::protocol::{query_for, row_of, AnswerIndex, Engine, QueryGroup, QueryTuple, Row, SubpacketAllocator, MessageGroupDescriptor};

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
    let mut shared: BTreeMap<(usize, usize), (Vec<Row>, FieldVector)> = BTreeMap::new();
    let mut out = Vec::with_capacity(params.d);

    for n in 1..=params.d {
        let kn = v_star.get(n);
        let mut groups = Vec::new();
        for m in ordered_complement(n, params.d) {
            let km = v_star.get(m);
            for k in 1..=params.k {
                let tag = GroupTag::Pair { n, m, k: kn, k2: k };
                let members = tag.members(params, public)?;
                let (rows, vector) = if k == km && m < n {
                    let (rows, h) = shared.get(&(m, n)).cloned().ok_or_else(|| {
                        Error::InconsistentQuery(format!("pair ({m},{n}) not built yet"))
                    })?;
                    let l = row_of(&rows, target)?;
                    let v = field.offset_unit(&h, l)?;
                    (rows, v)
                } else {
                    let rows = alloc.fresh_rows(&members, coins)?;
                    let h = coins.uniform_vector(&field, rows.len());
                    if k == km {
                        shared.insert((n, m), (rows.clone(), h.clone()));
                    }
                    (rows, h)
                };
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
    let mut recovered = BTreeMap::new();
    for n in 1..=params.d {
        for m in n + 1..=params.d {
            let (kn, km) = (v_star.get(n), v_star.get(m));
            let (gi, a) = query_for(queries, n)?.find(&GroupTag::Pair { n, m, k: kn, k2: km })?;
            let (gj, b) = query_for(queries, m)?.find(&GroupTag::Pair { n: m, m: n, k: km, k2: kn })?;
            if a.descriptor.rows != b.descriptor.rows {
                return Err(Error::InconsistentQuery(format!("pair ({n},{m}) rows differ")));
            }
            let l = row_of(&a.descriptor.rows, target)?;
            let diff = field.sub_vectors(b.vector.as_slice(), a.vector.as_slice())?;
            if diff != field.unit_vector(l, diff.len())?.into_inner() {
                return Err(Error::InconsistentQuery(format!(
                    "pair ({n},{m}) vectors do not differ by a unit vector"
                )));
            }
            let sub = field.sub_vectors(answers.get(m, gj)?, answers.get(n, gi)?)?;
            recovered.insert(a.descriptor.rows[l - 1].subpacket, sub);
        }
    }
    Ok(recovered)
}
