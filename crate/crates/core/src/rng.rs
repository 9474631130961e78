//! Named random streams. Every (type, purpose) pair gets its own generator so
//! that different schemes can replay identical node draws.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// What a stream is used for.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Purpose {
    /// Sampling active counts from an activity model.
    Activity,
    /// Block or slot choices of phase-1 trial `m` (LoF, 3-SS or 2-SS).
    Trial(u32),
    /// Participation and block choice in the balls-and-bins phase.
    Phase2,
}

impl Purpose {
    fn tag(self) -> u64 {
        match self {
            Purpose::Activity => 1,
            Purpose::Trial(m) => (2 << 32) | m as u64,
            Purpose::Phase2 => 3 << 32,
        }
    }
}

fn splitmix(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Streams {
    seed: u64,
}

impl Streams {
    pub fn new(seed: u64) -> Self {
        Streams { seed }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Streams for replicate `index` of an experiment seeded with `self`.
    pub fn replicate(&self, index: u64) -> Streams {
        Streams::new(splitmix(splitmix(self.seed ^ 0x5EED) ^ index))
    }

    /// Generator for one node type and purpose.
    pub fn stream(&self, type_index: usize, purpose: Purpose) -> ChaCha8Rng {
        let h = splitmix(splitmix(splitmix(self.seed) ^ type_index as u64) ^ purpose.tag());
        ChaCha8Rng::seed_from_u64(h)
    }
}
