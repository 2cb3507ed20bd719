//! Seeded random streams addressed by a path of integer tags, so that each
//! Monte Carlo sample owns a generator independent of scheduling.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// A node in the stream tree: `seed` plus a hashed tag path.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Streams {
    seed: u64,
    path: u64,
}

impl Streams {
    pub fn new(seed: u64) -> Self {
        Self { seed, path: splitmix(seed) }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn child(&self, tag: u64) -> Self {
        Self { seed: self.seed, path: splitmix(self.path ^ splitmix(tag.wrapping_add(1))) }
    }

    /// The generator at this node (ChaCha8 keyed by the seed, stream = path).
    pub fn rng(&self) -> ChaCha8Rng {
        let mut r = ChaCha8Rng::seed_from_u64(self.seed);
        r.set_stream(self.path);
        r
    }

    /// Shorthand for `child(i).rng()`.
    pub fn sample(&self, i: u64) -> ChaCha8Rng {
        self.child(i).rng()
    }
}
