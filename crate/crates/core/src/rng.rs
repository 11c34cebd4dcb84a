//! Seeded, splittable random streams.
//!
//! Every simulated run draws from its own generator, derived from
//! `(seed, tag, run index)` by SplitMix64 mixing. A run's draws therefore do
//! not depend on which worker executes it or in what order, and parallel
//! results are bitwise identical to sequential ones.

use std::ops::Range;

use rand::Rng;
use rand_distr::StandardNormal;
use rand_pcg::Pcg64Mcg;
use rayon::prelude::*;

use crate::ga::{UnitVector3, Vec3};
use crate::sign::Sign;

/// Generator used for every run.
pub type RunRng = Pcg64Mcg;

/// Runs per parallel task. Fixed so that partial sums are formed over the
/// same index ranges for any worker count.
pub const CHUNK: u64 = 4096;

/// SplitMix64 finalizer.
pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// FNV-1a over a label, used to name independent stream families.
pub fn label_hash(label: &str) -> u64 {
    label.bytes().fold(0xcbf2_9ce4_8422_2325u64, |h, b| {
        (h ^ b as u64).wrapping_mul(0x0000_0100_0000_01B3)
    })
}

/// A family of per-run streams for one `(seed, tag)` pair.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Substreams {
    key: u64,
}

impl Substreams {
    pub fn new(seed: u64, tag: u64) -> Self {
        Substreams {
            key: splitmix64(splitmix64(seed) ^ tag.rotate_left(17)),
        }
    }

    /// Derive a sub-family, e.g. one per grid angle.
    pub fn child(&self, tag: u64) -> Self {
        Substreams {
            key: splitmix64(self.key ^ splitmix64(tag)),
        }
    }

    /// 64-bit key of run `index`, usable as a per-run hash input.
    pub fn run_key(&self, index: u64) -> u64 {
        splitmix64(self.key.wrapping_add(splitmix64(index)))
    }

    /// Generator for run `index`.
    pub fn run(&self, index: u64) -> RunRng {
        let k = self.run_key(index);
        let hi = splitmix64(k ^ 0x5851_F42D_4C95_7F2D);
        let lo = splitmix64(k);
        // `new` forces the odd state the multiplicative generator needs.
        RunRng::new(((hi as u128) << 64) | lo as u128)
    }
}

/// Uniform direction on S² from a normalized Gaussian triple.
pub fn unit_vector<R: Rng + ?Sized>(rng: &mut R) -> UnitVector3 {
    loop {
        let v = Vec3::new(
            rng.sample(StandardNormal),
            rng.sample(StandardNormal),
            rng.sample(StandardNormal),
        );
        if v.norm_sq() > 1e-24 {
            if let Ok(u) = UnitVector3::normalize(v) {
                return u;
            }
        }
    }
}

/// Fair ±1 coin.
pub fn fair_sign<R: Rng + ?Sized>(rng: &mut R) -> Sign {
    Sign::from_bool(rng.random::<bool>())
}

/// Map `f` over `0..n` in fixed chunks of [`CHUNK`] runs, in parallel, and
/// fold the chunk results in index order.
///
/// Each chunk's value depends only on its index range, so the output is
/// independent of the rayon pool size.
pub fn chunked_fold<T, F, G>(n: u64, init: T, map: F, combine: G) -> T
where
    T: Send,
    F: Fn(Range<u64>) -> T + Sync,
    G: Fn(T, T) -> T,
{
    let chunks = n.div_ceil(CHUNK);
    let parts: Vec<T> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let start = c * CHUNK;
            map(start..(start + CHUNK).min(n))
        })
        .collect();
    parts.into_iter().fold(init, combine)
}

/// Same as [`chunked_fold`] with an early-exit error channel.
pub fn try_chunked_fold<T, E, F, G>(n: u64, init: T, map: F, combine: G) -> Result<T, E>
where
    T: Send,
    E: Send,
    F: Fn(Range<u64>) -> Result<T, E> + Sync,
    G: Fn(T, T) -> T,
{
    let chunks = n.div_ceil(CHUNK);
    let parts: Vec<T> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let start = c * CHUNK;
            map(start..(start + CHUNK).min(n))
        })
        .collect::<Result<_, E>>()?;
    Ok(parts.into_iter().fold(init, combine))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn streams_are_reproducible_and_distinct() {
        let s = Substreams::new(42, 7);
        let x: u64 = s.run(3).random();
        let y: u64 = s.run(3).random();
        let z: u64 = s.run(4).random();
        assert_eq!(x, y);
        assert_ne!(x, z);
        let other: u64 = Substreams::new(43, 7).run(3).random();
        assert_ne!(x, other);
        let tagged: u64 = Substreams::new(42, 8).run(3).random();
        assert_ne!(x, tagged);
    }

    #[test]
    fn chunked_fold_is_pool_independent() {
        let s = Substreams::new(1, 2);
        let sum = |pool: usize| {
            rayon::ThreadPoolBuilder::new()
                .num_threads(pool)
                .build()
                .unwrap()
                .install(|| {
                    chunked_fold(
                        50_000,
                        0.0f64,
                        |r| r.map(|i| s.run(i).random::<f64>()).sum::<f64>(),
                        |a, b| a + b,
                    )
                })
        };
        let one = sum(1);
        assert_eq!(one.to_bits(), sum(3).to_bits());
        assert_eq!(one.to_bits(), sum(8).to_bits());
    }

    #[test]
    fn unit_vectors_are_unit() {
        let s = Substreams::new(9, 0);
        for i in 0..1000 {
            let u = unit_vector(&mut s.run(i));
            assert!((u.vec().norm() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn label_hash_is_stable() {
        assert_eq!(label_hash(""), 0xcbf2_9ce4_8422_2325);
        assert_ne!(label_hash("curve"), label_hash("chsh"));
    }
}
