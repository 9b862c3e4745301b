use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

/// Seedable random stream with deterministic, tag-addressed child streams.
///
/// Draws come from ChaCha8, which is portable across platforms. Children are
/// derived from the seed and the tag only, never from how many values the
/// parent has already produced.
#[derive(Debug, Clone)]
pub struct Rng {
    seed: u64,
    inner: ChaCha8Rng,
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

// FNV-1a, enough to spread short ASCII tags over 64 bits.
fn tag_hash(tag: &str) -> u64 {
    tag.bytes().fold(0xcbf2_9ce4_8422_2325u64, |h, b| {
        (h ^ u64::from(b)).wrapping_mul(0x0000_0100_0000_01b3)
    })
}

impl Rng {
    pub fn new(seed: u64) -> Self {
        Self {
            seed,
            inner: ChaCha8Rng::seed_from_u64(splitmix64(seed)),
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Independent child stream named by `tag`.
    pub fn split(&self, tag: &str) -> Rng {
        Rng::new(splitmix64(self.seed ^ splitmix64(tag_hash(tag))))
    }

    /// Child stream addressed by an integer, e.g. an episode index.
    pub fn split_index(&self, tag: &str, index: u64) -> Rng {
        let base = splitmix64(self.seed ^ splitmix64(tag_hash(tag)));
        Rng::new(splitmix64(base ^ splitmix64(index.wrapping_add(1))))
    }

    /// Uniform draw in `[lo, hi)`.
    pub fn uniform(&mut self, lo: f64, hi: f64) -> f64 {
        // 53 random mantissa bits
        let unit = (self.inner.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64);
        lo + (hi - lo) * unit
    }

    pub fn normal(&mut self) -> f64 {
        StandardNormal.sample(&mut self.inner)
    }

    /// Uniform integer in `0..n`. `n` must be positive.
    pub fn below(&mut self, n: usize) -> usize {
        assert!(n > 0, "Rng::below requires n > 0");
        rand::Rng::random_range(&mut self.inner, 0..n)
    }
}

impl RngCore for Rng {
    fn next_u32(&mut self) -> u32 {
        self.inner.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        self.inner.fill_bytes(dst)
    }
}
