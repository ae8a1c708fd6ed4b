//! Arithmetic in a prime field `F_q` with a runtime modulus, plus the few
//! vector operations the retrieval schemes need.
//!
//! Elements are plain residues; every operation goes through a [`Field`]
//! value that carries the modulus. The modulus is restricted to primes below
//! `2^32` so that products fit in a `u64` without widening.

use std::fmt;
use std::ops::Index;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default modulus: large enough that zero coefficients are rare.
pub const DEFAULT_MODULUS: u64 = 65537;

/// A residue in `[0, q)`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Fe(u64);

impl Fe {
    pub const ZERO: Fe = Fe(0);
    pub const ONE: Fe = Fe(1);

    #[inline]
    pub fn value(self) -> u64 {
        self.0
    }

    #[inline]
    pub fn is_zero(self) -> bool {
        self.0 == 0
    }
}

impl fmt::Display for Fe {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// A column of field elements: combining vectors, unit vectors, sub-packets.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct FieldVector(Vec<Fe>);

impl FieldVector {
    pub fn zeros(len: usize) -> Self {
        FieldVector(vec![Fe::ZERO; len])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[Fe] {
        &self.0
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Fe> {
        self.0.iter()
    }

    pub fn into_inner(self) -> Vec<Fe> {
        self.0
    }

    /// Appends `other` below `self`.
    pub fn concat(&mut self, other: &FieldVector) {
        self.0.extend_from_slice(&other.0);
    }
}

impl From<Vec<Fe>> for FieldVector {
    fn from(v: Vec<Fe>) -> Self {
        FieldVector(v)
    }
}

impl Index<usize> for FieldVector {
    type Output = Fe;
    fn index(&self, i: usize) -> &Fe {
        &self.0[i]
    }
}

/// One slice of a message, or of a randomness chunk.
pub type SubPacket = Vec<Fe>;

/// The prime field `F_q`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Field {
    q: u64,
}

fn is_prime(q: u64) -> bool {
    if q < 2 {
        return false;
    }
    let mut d = 2u64;
    while d * d <= q {
        if q.is_multiple_of(d) {
            return false;
        }
        d += 1;
    }
    true
}

impl Field {
    pub fn new(q: u64) -> Result<Self> {
        if q >= 1 << 32 || !is_prime(q) {
            return Err(Error::NonPrimeModulus(q));
        }
        Ok(Field { q })
    }

    pub fn modulus(&self) -> u64 {
        self.q
    }

    /// Reduces an arbitrary integer into the field.
    #[inline]
    pub fn elem(&self, v: u64) -> Fe {
        Fe(v % self.q)
    }

    /// Lifts a signed integer, e.g. `-1` to `q - 1`.
    pub fn from_i64(&self, v: i64) -> Fe {
        Fe(v.rem_euclid(self.q as i64) as u64)
    }

    pub fn contains(&self, a: Fe) -> bool {
        a.0 < self.q
    }

    #[inline]
    pub fn add(&self, a: Fe, b: Fe) -> Fe {
        let s = a.0 + b.0;
        Fe(if s >= self.q { s - self.q } else { s })
    }

    #[inline]
    pub fn sub(&self, a: Fe, b: Fe) -> Fe {
        Fe(if a.0 >= b.0 { a.0 - b.0 } else { a.0 + self.q - b.0 })
    }

    #[inline]
    pub fn neg(&self, a: Fe) -> Fe {
        Fe(if a.0 == 0 { 0 } else { self.q - a.0 })
    }

    #[inline]
    pub fn mul(&self, a: Fe, b: Fe) -> Fe {
        Fe(a.0 * b.0 % self.q)
    }

    pub fn pow(&self, a: Fe, mut e: u64) -> Fe {
        let mut base = a;
        let mut acc = Fe::ONE;
        while e > 0 {
            if e & 1 == 1 {
                acc = self.mul(acc, base);
            }
            base = self.mul(base, base);
            e >>= 1;
        }
        acc
    }

    /// Multiplicative inverse via Fermat's little theorem.
    pub fn inv(&self, a: Fe) -> Result<Fe> {
        if a.is_zero() {
            return Err(Error::DivisionByZero);
        }
        Ok(self.pow(a, self.q - 2))
    }

    pub fn div(&self, a: Fe, b: Fe) -> Result<Fe> {
        Ok(self.mul(a, self.inv(b)?))
    }

    pub fn dot(&self, a: &[Fe], b: &[Fe]) -> Result<Fe> {
        if a.len() != b.len() {
            return Err(Error::DimensionMismatch {
                left: a.len(),
                right: b.len(),
            });
        }
        Ok(a.iter()
            .zip(b)
            .fold(Fe::ZERO, |acc, (&x, &y)| self.add(acc, self.mul(x, y))))
    }

    /// The length-`len` vector with a single one at 1-based position `l`.
    pub fn unit_vector(&self, l: usize, len: usize) -> Result<FieldVector> {
        if l == 0 || l > len {
            return Err(Error::IndexOutOfRange {
                what: "unit vector",
                index: l,
                max: len,
            });
        }
        let mut v = vec![Fe::ZERO; len];
        v[l - 1] = Fe::ONE;
        Ok(FieldVector(v))
    }

    pub fn add_vectors(&self, a: &[Fe], b: &[Fe]) -> Result<Vec<Fe>> {
        if a.len() != b.len() {
            return Err(Error::DimensionMismatch {
                left: a.len(),
                right: b.len(),
            });
        }
        Ok(a.iter().zip(b).map(|(&x, &y)| self.add(x, y)).collect())
    }

    pub fn sub_vectors(&self, a: &[Fe], b: &[Fe]) -> Result<Vec<Fe>> {
        if a.len() != b.len() {
            return Err(Error::DimensionMismatch {
                left: a.len(),
                right: b.len(),
            });
        }
        Ok(a.iter().zip(b).map(|(&x, &y)| self.sub(x, y)).collect())
    }

    pub fn scale(&self, c: Fe, a: &[Fe]) -> Vec<Fe> {
        a.iter().map(|&x| self.mul(c, x)).collect()
    }

    /// `h + e_l`, the offset vector used for interference cancellation.
    pub fn offset_unit(&self, h: &FieldVector, l: usize) -> Result<FieldVector> {
        let e = self.unit_vector(l, h.len())?;
        Ok(FieldVector(self.add_vectors(h.as_slice(), e.as_slice())?))
    }

    /// `sum_r coeffs[r] * rows[r]` for equal-length rows.
    pub fn combine(&self, coeffs: &[Fe], rows: &[&[Fe]]) -> Result<Vec<Fe>> {
        if coeffs.len() != rows.len() {
            return Err(Error::DimensionMismatch {
                left: coeffs.len(),
                right: rows.len(),
            });
        }
        let width = rows.first().map_or(0, |r| r.len());
        let mut acc = vec![Fe::ZERO; width];
        for (&c, row) in coeffs.iter().zip(rows) {
            if row.len() != width {
                return Err(Error::DimensionMismatch {
                    left: row.len(),
                    right: width,
                });
            }
            if c.is_zero() {
                continue;
            }
            for (a, &x) in acc.iter_mut().zip(row.iter()) {
                *a = self.add(*a, self.mul(c, x));
            }
        }
        Ok(acc)
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Fe {
        Fe(rng.random_range(0..self.q))
    }

    /// i.i.d. uniform coordinates.
    pub fn sample_vector<R: Rng + ?Sized>(&self, len: usize, rng: &mut R) -> FieldVector {
        FieldVector((0..len).map(|_| self.sample(rng)).collect())
    }

    /// Every element of the field in increasing order.
    pub fn elements(&self) -> impl Iterator<Item = Fe> {
        (0..self.q).map(Fe)
    }
}
