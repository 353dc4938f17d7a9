//! Counter-based random numbers.
//!
//! Every draw is a pure function of `(key, counter)`, so any subset of a
//! pattern stack can be regenerated on any worker in any order. The mixer is
//! the SplitMix64 output function applied to `key + (counter + 1) * φ`,
//! i.e. draw `c` of the SplitMix64 stream seeded with `key`; period 2⁶⁴.

/// Name recorded in run manifests.
pub const GENERATOR_NAME: &str = "splitmix64-counter/v1";

const GOLDEN_GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

// Stream domains: each keeps its own key so pattern and noise draws never
// share counters.
const PATTERN_DOMAIN: u64 = 0x5041_5454_4552_4e53; // "PATTERNS"
const NOISE_DOMAIN: u64 = 0x4e4f_4953_4531_5f5f; // "NOISE1__"

#[inline(always)]
fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// A keyed counter-mode stream.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CounterStream {
    key: u64,
}

impl CounterStream {
    pub fn new(key: u64) -> Self {
        Self { key }
    }

    #[inline(always)]
    pub fn bits(&self, counter: u64) -> u64 {
        mix64(self.key.wrapping_add(counter.wrapping_add(1).wrapping_mul(GOLDEN_GAMMA)))
    }

    /// Uniform draw in `[0, 1)` with 53 random bits.
    #[inline(always)]
    pub fn uniform(&self, counter: u64) -> f64 {
        // The shifted value fits in 53 bits, so the signed conversion is exact.
        (self.bits(counter) >> 11) as i64 as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform draw in `(0, 1]`.
    #[inline(always)]
    pub fn uniform_open0(&self, counter: u64) -> f64 {
        ((self.bits(counter) >> 11) + 1) as i64 as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Standard normal draw from counters `2c` and `2c + 1` (Box–Muller).
    pub fn standard_normal(&self, counter: u64) -> f64 {
        let u1 = self.uniform_open0(counter.wrapping_mul(2));
        let u2 = self.uniform(counter.wrapping_mul(2).wrapping_add(1));
        libm::sqrt(-2.0 * libm::log(u1)) * libm::cos(core::f64::consts::TAU * u2)
    }
}

/// Reproducible seeding: frame `t`, pixel `m` of an `M`-pixel stack reads
/// counter `t * M + m` of the pattern stream; measurement noise for frame `t`
/// reads the independent noise stream.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SeedRecipe {
    pub master_seed: u64,
}

impl SeedRecipe {
    pub fn new(master_seed: u64) -> Self {
        Self { master_seed }
    }

    pub fn pattern_stream(&self) -> CounterStream {
        CounterStream::new(mix64(self.master_seed ^ PATTERN_DOMAIN))
    }

    pub fn noise_stream(&self) -> CounterStream {
        CounterStream::new(mix64(self.master_seed ^ NOISE_DOMAIN))
    }

    #[inline]
    pub fn pattern_counter(frame: usize, pixels: usize, pixel: usize) -> u64 {
        (frame as u64).wrapping_mul(pixels as u64).wrapping_add(pixel as u64)
    }
}
