//! Batch plans for one epoch of Poisson subsampling or random shuffling.

use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{invalid, Result};

/// Address of an independent random stream.
///
/// The 64-bit seed is expanded into a ChaCha key and `stream` selects the
/// ChaCha stream, so any `(seed, stream)` pair can be opened directly without
/// drawing from its neighbours.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct RngSeed {
    pub seed: u64,
    pub stream: u64,
}

impl RngSeed {
    pub fn new(seed: u64, stream: u64) -> Self {
        Self { seed, stream }
    }

    pub fn rng(&self) -> ChaCha8Rng {
        let mut key = [0u8; 32];
        let mut state = self.seed;
        for chunk in key.chunks_exact_mut(8) {
            chunk.copy_from_slice(&splitmix64(&mut state).to_le_bytes());
        }
        let mut rng = ChaCha8Rng::from_seed(key);
        rng.set_stream(self.stream);
        rng
    }
}

fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Scheme {
    Poisson { q: f64 },
    Shuffle,
}

/// Per-round index sets over `0..n`, each sorted ascending.
#[derive(Debug, Clone, PartialEq)]
pub struct BatchPlan {
    pub rounds: Vec<Vec<usize>>,
    pub scheme: Scheme,
    pub n: usize,
    pub m: usize,
}

impl BatchPlan {
    pub fn contains(&self, round: usize, index: usize) -> bool {
        self.rounds[round].binary_search(&index).is_ok()
    }

    /// Round that contains `index`, if any (meaningful for shuffle plans,
    /// where it is unique).
    pub fn round_of(&self, index: usize) -> Option<usize> {
        (0..self.m).find(|&j| self.contains(j, index))
    }

    /// Debug dump as `round,index` rows.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["round", "index"])?;
        for (j, set) in self.rounds.iter().enumerate() {
            for i in set {
                w.write_record([j.to_string(), i.to_string()])?;
            }
        }
        w.flush()?;
        Ok(())
    }
}

/// Each index enters each of the `m` rounds independently with probability `q`.
pub fn poisson_sample<R: Rng + ?Sized>(
    n: usize,
    q: f64,
    m: usize,
    rng: &mut R,
) -> Result<BatchPlan> {
    if n == 0 || m == 0 {
        return Err(invalid(format!(
            "poisson_sample: need N >= 1 and M >= 1 (N = {n}, M = {m})"
        )));
    }
    if !(q > 0.0 && q < 1.0) {
        return Err(invalid(format!(
            "poisson_sample: q = {q} must lie in (0, 1)"
        )));
    }
    let rounds = (0..m)
        .map(|_| (0..n).filter(|_| rng.random_bool(q)).collect())
        .collect();
    Ok(BatchPlan {
        rounds,
        scheme: Scheme::Poisson { q },
        n,
        m,
    })
}

/// Uniform permutation of `0..n` cut into `m` consecutive blocks of
/// `n / m`; the last `n mod m` permuted indices are dropped.
pub fn shuffle_sample<R: Rng + ?Sized>(n: usize, m: usize, rng: &mut R) -> Result<BatchPlan> {
    if m == 0 || m > n {
        return Err(invalid(format!(
            "shuffle_sample: need 1 <= M <= N (N = {n}, M = {m})"
        )));
    }
    let perm = permutation(n, rng);
    let b = n / m;
    let rounds = perm[..m * b]
        .chunks_exact(b)
        .map(|block| {
            let mut s = block.to_vec();
            s.sort_unstable();
            s
        })
        .collect();
    Ok(BatchPlan {
        rounds,
        scheme: Scheme::Shuffle,
        n,
        m,
    })
}

/// Fisher–Yates; `random_range` draws bounded integers by rejection, so every
/// permutation is equally likely.
pub fn permutation<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Vec<usize> {
    let mut perm: Vec<usize> = (0..n).collect();
    for i in (1..n).rev() {
        let j = rng.random_range(0..=i);
        perm.swap(i, j);
    }
    perm
}
