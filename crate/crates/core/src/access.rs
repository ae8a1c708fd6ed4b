//! Attribute space, message indexing, accessible-message sets and the pair
//! designs used by the pairwise schemes.
//!
//! Attribute values, attribute positions and server ids are all 1-based.
//! Server `D+1` is the central server. Message ids are 0-based and follow
//! lexicographic order over the attribute vector with entry 1 the most
//! significant, so sorting ids sorts messages lexicographically.

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::Field;
use crate::protocol::SchemeKind;

/// `(N, D, K)` together with the field modulus and the message length.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SystemParams {
    pub n: usize,
    pub d: usize,
    pub k: usize,
    pub q: u64,
    pub l: usize,
}

impl SystemParams {
    pub fn new(n: usize, d: usize, k: usize, q: u64, l: usize) -> Result<Self> {
        let p = SystemParams { n, d, k, q, l };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if self.d == 0 || self.d > self.n {
            return Err(Error::InvalidParams(format!(
                "need 1 <= D <= N, got N={} D={}",
                self.n, self.d
            )));
        }
        if self.k < 2 {
            return Err(Error::InvalidParams(format!("need K >= 2, got {}", self.k)));
        }
        if self.l == 0 {
            return Err(Error::InvalidParams("message length must be positive".into()));
        }
        // K^N messages must be addressable.
        if (self.k as u128).checked_pow(self.n as u32).is_none_or(|c| c > 1 << 24) {
            return Err(Error::InvalidParams(format!(
                "K^N = {}^{} messages is too many to materialize",
                self.k, self.n
            )));
        }
        Field::new(self.q)?;
        Ok(())
    }

    pub fn field(&self) -> Field {
        Field::new(self.q).expect("validated modulus")
    }

    pub fn with_length(&self, l: usize) -> Self {
        SystemParams { l, ..*self }
    }

    /// `K^N`.
    pub fn message_count(&self) -> usize {
        self.k.pow(self.n as u32)
    }

    /// Id of the central server.
    pub fn central(&self) -> usize {
        self.d + 1
    }

    /// Number of public attributes, `N - D`.
    pub fn public_len(&self) -> usize {
        self.n - self.d
    }
}

impl fmt::Display for SystemParams {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "(N={}, D={}, K={}) q={} L={}",
            self.n, self.d, self.k, self.q, self.l
        )
    }
}

/// Position in the global message list.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct MessageId(pub usize);

impl fmt::Display for MessageId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "#{}", self.0)
    }
}

/// A user's attribute values, entry `n` being the 1-based index into `V_n`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct AttributeVector(Vec<usize>);

impl AttributeVector {
    pub fn new(values: Vec<usize>, params: &SystemParams) -> Result<Self> {
        if values.len() != params.n {
            return Err(Error::MalformedClaim(format!(
                "expected {} attributes, got {}",
                params.n,
                values.len()
            )));
        }
        if let Some(&bad) = values.iter().find(|&&v| v == 0 || v > params.k) {
            return Err(Error::MalformedClaim(format!(
                "attribute value {bad} outside 1..={}",
                params.k
            )));
        }
        Ok(AttributeVector(values))
    }

    /// Parses `"1,2,2"`.
    pub fn parse(s: &str, params: &SystemParams) -> Result<Self> {
        let values = s
            .split(',')
            .map(|t| {
                t.trim()
                    .parse::<usize>()
                    .map_err(|_| Error::MalformedClaim(format!("not an index: {t:?}")))
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(values, params)
    }

    /// Value at 1-based position `n`.
    pub fn get(&self, n: usize) -> usize {
        self.0[n - 1]
    }

    pub fn values(&self) -> &[usize] {
        &self.0
    }

    /// Entries `1..=D`.
    pub fn sensitive(&self, params: &SystemParams) -> &[usize] {
        &self.0[..params.d]
    }

    /// Entries `D+1..=N`.
    pub fn public(&self, params: &SystemParams) -> &[usize] {
        &self.0[params.d..]
    }

    /// Every attribute vector of the system, in message-id order.
    pub fn all(params: &SystemParams) -> Vec<AttributeVector> {
        (0..params.message_count())
            .map(|i| attribute_vector(MessageId(i), params))
            .collect()
    }

    /// Every vector with the given public part, in message-id order.
    pub fn with_public(params: &SystemParams, public: &[usize]) -> Vec<AttributeVector> {
        matching(params, public, &[])
            .into_iter()
            .map(|id| attribute_vector(id, params))
            .collect()
    }

    /// `(1,2,2)`.
    pub fn label(&self) -> String {
        let parts: Vec<String> = self.0.iter().map(|v| v.to_string()).collect();
        format!("({})", parts.join(","))
    }
}

impl fmt::Display for AttributeVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.label())
    }
}

pub fn message_index(v: &AttributeVector, params: &SystemParams) -> Result<MessageId> {
    if v.0.len() != params.n {
        return Err(Error::DimensionMismatch {
            left: v.0.len(),
            right: params.n,
        });
    }
    let mut id = 0usize;
    for &x in &v.0 {
        if x == 0 || x > params.k {
            return Err(Error::IndexOutOfRange {
                what: "attribute value",
                index: x,
                max: params.k,
            });
        }
        id = id * params.k + (x - 1);
    }
    Ok(MessageId(id))
}

pub fn attribute_vector(id: MessageId, params: &SystemParams) -> AttributeVector {
    let mut rest = id.0;
    let mut values = vec![0; params.n];
    for slot in values.iter_mut().rev() {
        *slot = rest % params.k + 1;
        rest /= params.k;
    }
    AttributeVector(values)
}

/// Messages whose public part equals `public` and whose entry `n` equals `k`
/// for every `(n, k)` in `fixed`, in lexicographic order.
fn matching(params: &SystemParams, public: &[usize], fixed: &[(usize, usize)]) -> Vec<MessageId> {
    let d = params.d;
    let k = params.k;
    let mut tail = 0usize;
    for &x in public {
        tail = tail * k + (x - 1);
    }
    let tail_weight = k.pow((params.n - d) as u32);
    let mut out = Vec::new();
    let mut digits = vec![1usize; d];
    for (n, v) in fixed {
        digits[n - 1] = *v;
    }
    let free: Vec<usize> = (1..=d).filter(|n| !fixed.iter().any(|(f, _)| f == n)).collect();
    loop {
        let head = digits.iter().fold(0usize, |acc, &x| acc * k + (x - 1));
        out.push(MessageId(head * tail_weight + tail));
        // Odometer over the free positions, last position fastest.
        let mut advanced = false;
        for &n in free.iter().rev() {
            if digits[n - 1] < k {
                digits[n - 1] += 1;
                advanced = true;
                break;
            }
            digits[n - 1] = 1;
        }
        if !advanced {
            break;
        }
    }
    out
}

fn check_public(params: &SystemParams, public: &[usize]) -> Result<()> {
    if public.len() != params.public_len() {
        return Err(Error::DimensionMismatch {
            left: public.len(),
            right: params.public_len(),
        });
    }
    if let Some(&bad) = public.iter().find(|&&v| v == 0 || v > params.k) {
        return Err(Error::IndexOutOfRange {
            what: "attribute value",
            index: bad,
            max: params.k,
        });
    }
    Ok(())
}

fn check_index(what: &'static str, index: usize, max: usize) -> Result<()> {
    if index == 0 || index > max {
        return Err(Error::IndexOutOfRange { what, index, max });
    }
    Ok(())
}

/// The database `W^n` of server `n`, given the user's full vector.
pub fn accessible_messages(
    params: &SystemParams,
    server: usize,
    v_star: &AttributeVector,
) -> Result<Vec<MessageId>> {
    check_index("server", server, params.central())?;
    let public = v_star.public(params);
    if server == params.central() {
        check_public(params, public)?;
        Ok(matching(params, public, &[]))
    } else {
        u_set(params, public, server, v_star.get(server))
    }
}

/// `U(n,k)`: messages with `v_n = k` and the given public attributes.
pub fn u_set(params: &SystemParams, public: &[usize], n: usize, k: usize) -> Result<Vec<MessageId>> {
    check_public(params, public)?;
    check_index("dedicated server", n, params.d)?;
    check_index("attribute value", k, params.k)?;
    Ok(matching(params, public, &[(n, k)]))
}

/// `U_nm(k,k') = U(n,k) ∩ U(m,k')`.
pub fn u_pair(
    params: &SystemParams,
    public: &[usize],
    n: usize,
    m: usize,
    k: usize,
    k2: usize,
) -> Result<Vec<MessageId>> {
    check_public(params, public)?;
    check_index("dedicated server", n, params.d)?;
    check_index("dedicated server", m, params.d)?;
    check_index("attribute value", k, params.k)?;
    check_index("attribute value", k2, params.k)?;
    if n == m {
        return Err(Error::InvalidParams(format!("pair set needs n != m, got {n} twice")));
    }
    Ok(matching(params, public, &[(n, k), (m, k2)]))
}

/// Label of a requested message group. The label is part of the query: a
/// server uses it to pick the pad and to check the rows it is asked for.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(tag = "set", rename_all = "lowercase")]
pub enum GroupTag {
    /// `U(n,k)`.
    Attr { n: usize, k: usize },
    /// `U_nm(k,k2)`, as requested from server `n`.
    Pair { n: usize, m: usize, k: usize, k2: usize },
}

impl GroupTag {
    pub fn members(&self, params: &SystemParams, public: &[usize]) -> Result<Vec<MessageId>> {
        match *self {
            GroupTag::Attr { n, k } => u_set(params, public, n, k),
            GroupTag::Pair { n, m, k, k2 } => u_pair(params, public, n, m, k, k2),
        }
    }
}

impl fmt::Display for GroupTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GroupTag::Attr { n, k } => write!(f, "U({n},{k})"),
            GroupTag::Pair { n, m, k, k2 } => write!(f, "U_{n}{m}({k},{k2})"),
        }
    }
}

/// `[D] \ {n}` in ascending order.
pub fn ordered_complement(n: usize, d: usize) -> Vec<usize> {
    (1..=d).filter(|&m| m != n).collect()
}

/// Split of all server pairs into a 2-regular design `C_D` and the rest.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PairPartition {
    pub d: usize,
    /// Every pair `(n, m)` with `n < m`.
    pub all_pairs: Vec<(usize, usize)>,
    /// `C_D`, canonical `(n, m)` with `n < m`, sorted.
    pub cycle: Vec<(usize, usize)>,
    /// `C'_D`, sorted.
    pub rest: Vec<(usize, usize)>,
    /// `C^o_D`: each server appears once as first and once as second entry.
    pub oriented: Vec<(usize, usize)>,
}

impl PairPartition {
    /// The cyclic allotment `{n, n+1}` plus `{D, 1}`.
    pub fn cyclic(d: usize) -> Result<Self> {
        if d < 3 {
            return Err(Error::SchemeInapplicable {
                scheme: SchemeKind::Het2,
                min_d: 3,
                d,
            });
        }
        let mut pairs: Vec<(usize, usize)> = (1..d).map(|n| (n, n + 1)).collect();
        pairs.push((1, d));
        Self::from_design(d, &pairs)
    }

    /// Validates an arbitrary design and orients it.
    pub fn from_design(d: usize, pairs: &[(usize, usize)]) -> Result<Self> {
        if d < 3 {
            return Err(Error::InvalidDesign(format!("no 2-regular design on {d} points")));
        }
        let mut cycle = BTreeSet::new();
        let mut degree = vec![0usize; d + 1];
        for &(a, b) in pairs {
            if a == b || a == 0 || b == 0 || a > d || b > d {
                return Err(Error::InvalidDesign(format!("bad pair ({a},{b}) for D={d}")));
            }
            let p = (a.min(b), a.max(b));
            if !cycle.insert(p) {
                return Err(Error::InvalidDesign(format!("pair {{{},{}}} repeated", p.0, p.1)));
            }
            degree[a] += 1;
            degree[b] += 1;
        }
        if cycle.len() != d {
            return Err(Error::InvalidDesign(format!(
                "need exactly {d} pairs, got {}",
                cycle.len()
            )));
        }
        if let Some(n) = (1..=d).find(|&n| degree[n] != 2) {
            return Err(Error::InvalidDesign(format!(
                "server {n} occurs in {} pairs instead of 2",
                degree[n]
            )));
        }
        let neighbours = |n: usize| -> Vec<usize> {
            let mut v: Vec<usize> = cycle
                .iter()
                .filter_map(|&(a, b)| {
                    if a == n {
                        Some(b)
                    } else if b == n {
                        Some(a)
                    } else {
                        None
                    }
                })
                .collect();
            v.sort_unstable();
            v
        };
        // A 2-regular graph is a union of cycles; walk each from its smallest
        // vertex towards the smaller neighbour.
        let mut oriented = Vec::with_capacity(d);
        let mut seen = vec![false; d + 1];
        for start in 1..=d {
            if seen[start] {
                continue;
            }
            let mut prev = start;
            let mut cur = neighbours(start)[0];
            seen[start] = true;
            oriented.push((start, cur));
            while cur != start {
                seen[cur] = true;
                let next = neighbours(cur).into_iter().find(|&x| x != prev).expect("degree 2");
                oriented.push((cur, next));
                prev = cur;
                cur = next;
            }
        }
        let all_pairs: Vec<(usize, usize)> = (1..=d)
            .flat_map(|n| (n + 1..=d).map(move |m| (n, m)))
            .collect();
        let rest = all_pairs.iter().copied().filter(|p| !cycle.contains(p)).collect();
        Ok(PairPartition {
            d,
            all_pairs,
            cycle: cycle.into_iter().collect(),
            rest,
            oriented,
        })
    }

    /// The `m` with `(n, m)` in the oriented design.
    pub fn partner(&self, n: usize) -> Result<usize> {
        self.oriented
            .iter()
            .find(|(a, _)| *a == n)
            .map(|&(_, b)| b)
            .ok_or(Error::IndexOutOfRange {
                what: "oriented pair start",
                index: n,
                max: self.d,
            })
    }

    pub fn in_cycle(&self, n: usize, m: usize) -> bool {
        self.cycle.binary_search(&(n.min(m), n.max(m))).is_ok()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn p(n: usize, d: usize, k: usize) -> SystemParams {
        SystemParams::new(n, d, k, 5, 1).unwrap()
    }

    fn ids(params: &SystemParams, vs: &[[usize; 4]]) -> Vec<MessageId> {
        let mut out: Vec<MessageId> = vs
            .iter()
            .map(|v| message_index(&AttributeVector::new(v.to_vec(), params).unwrap(), params).unwrap())
            .collect();
        out.sort();
        out
    }

    #[test]
    fn index_origin_count_and_roundtrip() {
        let params = p(3, 2, 2);
        let origin = AttributeVector::new(vec![1, 1, 1], &params).unwrap();
        assert_eq!(message_index(&origin, &params).unwrap(), MessageId(0));
        assert_eq!(params.message_count(), 8);
        for i in 0..8 {
            let v = attribute_vector(MessageId(i), &params);
            assert_eq!(message_index(&v, &params).unwrap(), MessageId(i));
        }
        let bad = AttributeVector(vec![1, 3, 1]);
        assert!(message_index(&bad, &params).is_err());
    }

    #[test]
    fn small_instance_accessible_sets() {
        // (3,2,2) with v* = (a, 2, y): letters map to index 1/2.
        let params = p(3, 2, 2);
        let v = AttributeVector::new(vec![1, 2, 2], &params).unwrap();
        let central = accessible_messages(&params, 3, &v).unwrap();
        let expect: Vec<MessageId> = [[1, 1, 2], [1, 2, 2], [2, 1, 2], [2, 2, 2]]
            .iter()
            .map(|a| message_index(&AttributeVector(a.to_vec()), &params).unwrap())
            .collect();
        assert_eq!(central, expect);
        let server2 = accessible_messages(&params, 2, &v).unwrap();
        let expect2: Vec<MessageId> = [[1, 2, 2], [2, 2, 2]]
            .iter()
            .map(|a| message_index(&AttributeVector(a.to_vec()), &params).unwrap())
            .collect();
        assert_eq!(server2, expect2);
        assert!(accessible_messages(&params, 4, &v).is_err());
    }

    #[test]
    fn u_sets_of_the_four_attribute_example() {
        // (4,3,2), public attribute y = 2; third alphabet (u, v) = (1, 2).
        let params = p(4, 3, 2);
        let public = [2];
        assert_eq!(
            u_set(&params, &public, 2, 2).unwrap(),
            ids(&params, &[[1, 2, 1, 2], [2, 2, 1, 2], [1, 2, 2, 2], [2, 2, 2, 2]])
        );
        assert_eq!(
            u_set(&params, &public, 3, 1).unwrap(),
            ids(&params, &[[1, 1, 1, 2], [2, 1, 1, 2], [1, 2, 1, 2], [2, 2, 1, 2]])
        );
        assert_eq!(
            u_pair(&params, &public, 1, 3, 1, 2).unwrap(),
            ids(&params, &[[1, 1, 2, 2], [1, 2, 2, 2]])
        );
        assert_eq!(
            u_pair(&params, &public, 2, 3, 2, 1).unwrap(),
            ids(&params, &[[1, 2, 1, 2], [2, 2, 1, 2]])
        );
        assert!(u_pair(&params, &public, 2, 2, 1, 1).is_err());
    }

    #[test]
    fn u_pair_symmetry_exhaustive() {
        let params = p(3, 3, 2);
        for n in 1..=3 {
            for m in 1..=3 {
                if n == m {
                    continue;
                }
                for k in 1..=2 {
                    for k2 in 1..=2 {
                        assert_eq!(
                            u_pair(&params, &[], n, m, k, k2).unwrap(),
                            u_pair(&params, &[], m, n, k2, k).unwrap()
                        );
                    }
                }
            }
        }
    }

    #[test]
    fn storage_structure_properties() {
        for (d, k) in [(2, 2), (3, 2), (3, 3)] {
            let params = p(d + 1, d, k);
            for v in AttributeVector::all(&params) {
                let sets: Vec<BTreeSet<MessageId>> = (1..=d + 1)
                    .map(|s| accessible_messages(&params, s, &v).unwrap().into_iter().collect())
                    .collect();
                let target = message_index(&v, &params).unwrap();
                let common: Vec<&MessageId> = sets[0]
                    .iter()
                    .filter(|m| sets.iter().all(|s| s.contains(m)))
                    .collect();
                assert_eq!(common, vec![&target]);
                for a in 0..d {
                    assert_eq!(sets[a].len(), k.pow(d as u32 - 1));
                    assert!(sets[a].is_subset(&sets[d]));
                    for b in a + 1..d {
                        assert_eq!(sets[a].intersection(&sets[b]).count(), k.pow(d as u32 - 2));
                    }
                }
                for n in 1..=d {
                    assert_eq!(
                        u_set(&params, v.public(&params), n, v.get(n)).unwrap(),
                        accessible_messages(&params, n, &v).unwrap()
                    );
                    let mut union: Vec<MessageId> = (1..=k)
                        .flat_map(|kk| u_set(&params, v.public(&params), n, kk).unwrap())
                        .collect();
                    union.sort();
                    assert_eq!(union, accessible_messages(&params, d + 1, &v).unwrap());
                }
            }
        }
    }

    #[test]
    fn example_one_replication_pattern() {
        // DAPAC (3,2), v* = (a,2,y): count servers holding each message.
        let params = p(3, 3, 2);
        let v = AttributeVector::new(vec![1, 2, 2], &params).unwrap();
        let count = |a: [usize; 3]| {
            let id = message_index(&AttributeVector(a.to_vec()), &params).unwrap();
            (1..=3)
                .filter(|&s| accessible_messages(&params, s, &v).unwrap().contains(&id))
                .count()
        };
        assert_eq!(count([1, 2, 2]), 3);
        assert_eq!(count([1, 2, 1]), 2);
        assert_eq!(count([2, 2, 2]), 2);
        assert_eq!(count([1, 1, 2]), 2);
        assert_eq!(count([1, 1, 1]), 1);
        assert_eq!(count([2, 2, 1]), 1);
        assert_eq!(count([2, 1, 2]), 1);
        assert_eq!(count([2, 1, 1]), 0);
    }

    #[test]
    fn cyclic_partitions() {
        let p3 = PairPartition::cyclic(3).unwrap();
        assert_eq!(p3.cycle, vec![(1, 2), (1, 3), (2, 3)]);
        assert!(p3.rest.is_empty());
        assert_eq!(p3.oriented, vec![(1, 2), (2, 3), (3, 1)]);
        let p4 = PairPartition::cyclic(4).unwrap();
        assert_eq!(p4.cycle, vec![(1, 2), (1, 4), (2, 3), (3, 4)]);
        assert_eq!(p4.rest, vec![(1, 3), (2, 4)]);
        assert!(matches!(
            PairPartition::cyclic(2),
            Err(Error::SchemeInapplicable { min_d: 3, .. })
        ));
    }

    #[test]
    fn alternative_designs() {
        let alt = PairPartition::from_design(4, &[(1, 3), (2, 3), (2, 4), (1, 4)]).unwrap();
        assert_eq!(alt.partner(1).unwrap(), 3);
        assert!(PairPartition::from_design(4, &[(1, 2), (1, 3), (1, 4), (2, 3)]).is_err());
        assert!(PairPartition::from_design(4, &[(1, 2), (2, 1), (3, 4), (4, 3)]).is_err());
        // Two disjoint triangles.
        let two = PairPartition::from_design(6, &[(1, 2), (2, 3), (1, 3), (4, 5), (5, 6), (4, 6)]).unwrap();
        assert_eq!(two.partner(4).unwrap(), 5);
        assert_eq!(two.rest.len(), 6 * 3 / 2);
    }

    #[test]
    fn ordered_complements() {
        assert_eq!(ordered_complement(2, 3), vec![1, 3]);
        assert_eq!(ordered_complement(1, 4), vec![2, 3, 4]);
    }

    proptest! {
        #[test]
        fn partition_invariants(d in 3usize..12) {
            let part = PairPartition::cyclic(d).unwrap();
            prop_assert_eq!(part.cycle.len(), d);
            prop_assert_eq!(part.rest.len(), d * (d - 3) / 2);
            let mut firsts: Vec<usize> = part.oriented.iter().map(|p| p.0).collect();
            let mut seconds: Vec<usize> = part.oriented.iter().map(|p| p.1).collect();
            firsts.sort_unstable();
            seconds.sort_unstable();
            let all: Vec<usize> = (1..=d).collect();
            prop_assert_eq!(&firsts, &all);
            prop_assert_eq!(&seconds, &all);
            for &(a, b) in &part.oriented {
                prop_assert!(part.in_cycle(a, b));
            }
            for n in 1..=d {
                prop_assert_eq!(ordered_complement(n, d).len(), d - 1);
            }
        }

        #[test]
        fn index_roundtrip(n in 1usize..6, k in 2usize..5, seed in any::<u64>()) {
            let params = SystemParams::new(n, n, k, 2, 1).unwrap();
            let id = MessageId((seed % params.message_count() as u64) as usize);
            let v = attribute_vector(id, &params);
            prop_assert_eq!(message_index(&v, &params).unwrap(), id);
        }
    }
}
