//! Deterministic randomness for protocol roles.
//!
//! Every role (user attempt, shared server pool, message store) draws from its
//! own ChaCha20 stream keyed by `SHA-256(master seed || role label)`, so adding
//! draws in one role never shifts another role's stream.
//!
//! Query builders take their coins through [`CoinSource`] rather than an RNG.
//! The auditors substitute a [`CoinTape`] to replay chosen coin values.

use std::collections::VecDeque;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use sha2::{Digest, Sha256};

use crate::field::{Fe, Field, FieldVector};

pub fn derive_rng(seed: u64, role: &str) -> ChaCha20Rng {
    let mut h = Sha256::new();
    h.update(seed.to_le_bytes());
    h.update(role.as_bytes());
    let key: [u8; 32] = h.finalize().into();
    ChaCha20Rng::from_seed(key)
}

/// User-side randomness consumed while building queries.
pub trait CoinSource {
    /// i.i.d. uniform field elements.
    fn uniform_vector(&mut self, field: &Field, len: usize) -> FieldVector;

    /// A uniform permutation of `1..=len`, as the image list `[π(1), ..., π(len)]`.
    fn permutation(&mut self, len: usize) -> Vec<usize>;
}

/// Coins drawn from a real generator.
pub struct RngCoins<R> {
    rng: R,
}

impl<R: Rng> RngCoins<R> {
    pub fn new(rng: R) -> Self {
        RngCoins { rng }
    }
}

impl RngCoins<ChaCha20Rng> {
    pub fn seeded(seed: u64, role: &str) -> Self {
        RngCoins::new(derive_rng(seed, role))
    }
}

impl<R: Rng> CoinSource for RngCoins<R> {
    fn uniform_vector(&mut self, field: &Field, len: usize) -> FieldVector {
        field.sample_vector(len, &mut self.rng)
    }

    fn permutation(&mut self, len: usize) -> Vec<usize> {
        let mut p: Vec<usize> = (1..=len).collect();
        p.shuffle(&mut self.rng);
        p
    }
}

/// Replays a fixed list of field elements; reads past the end yield zero.
/// Permutations come from a script, or are the identity once it runs out.
#[derive(Clone, Debug, Default)]
pub struct CoinTape {
    tape: Vec<Fe>,
    pos: usize,
    perms: VecDeque<Vec<usize>>,
    perm_calls: usize,
}

impl CoinTape {
    pub fn new(tape: Vec<Fe>) -> Self {
        CoinTape {
            tape,
            ..Default::default()
        }
    }

    pub fn with_permutations(mut self, perms: Vec<Vec<usize>>) -> Self {
        self.perms = perms.into();
        self
    }

    /// Field elements consumed so far, including any read past the tape.
    pub fn consumed(&self) -> usize {
        self.pos
    }

    pub fn permutations_drawn(&self) -> usize {
        self.perm_calls
    }
}

impl CoinSource for CoinTape {
    fn uniform_vector(&mut self, _field: &Field, len: usize) -> FieldVector {
        let v: Vec<Fe> = (self.pos..self.pos + len)
            .map(|i| self.tape.get(i).copied().unwrap_or(Fe::ZERO))
            .collect();
        self.pos += len;
        v.into()
    }

    fn permutation(&mut self, len: usize) -> Vec<usize> {
        self.perm_calls += 1;
        match self.perms.pop_front() {
            Some(p) => {
                assert_eq!(p.len(), len, "scripted permutation has the wrong length");
                p
            }
            None => (1..=len).collect(),
        }
    }
}
