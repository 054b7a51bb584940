//! Deterministic sources for test vectors and simulated noise.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// SplitMix64 generator; the bit source for every transmitted frame.
#[derive(Debug, Clone)]
pub struct SplitMix64 {
    state: u64,
}

impl SplitMix64 {
    pub fn new(seed: u64) -> Self {
        Self { state: seed }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(0x9E37_79B9_7F4A_7C15);
        let mut z = self.state;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }

    /// `n` bits, taken most-significant-bit first from successive outputs.
    pub fn bits(&mut self, n: usize) -> Vec<u8> {
        let mut out = Vec::with_capacity(n);
        while out.len() < n {
            let word = self.next_u64();
            for shift in (0..64).rev() {
                if out.len() == n {
                    break;
                }
                out.push(((word >> shift) & 1) as u8);
            }
        }
        out
    }
}

/// Seeded generator for Gaussian noise. ChaCha8 output is platform independent.
pub fn noise_rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
