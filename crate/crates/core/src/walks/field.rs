use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};
use serde::{Deserialize, Serialize};

const SCALE: f64 = 1.0 / (1u64 << 53) as f64;

#[inline]
fn to_unit(v: u64) -> f64 {
    (v >> 11) as f64 * SCALE
}

/// The uniforms `U_i^x`, keyed by seed, site and visit index.
///
/// Site `x` owns ChaCha8 stream `x as u64` under the seed, and `U_i^x` is the
/// 64-bit word at word position `2(i-1)`, so a value never depends on query order.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RandomField {
    pub seed: u64,
}

impl RandomField {
    pub fn new(seed: u64) -> Self {
        Self { seed }
    }

    fn stream(&self, x: i64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(x as u64);
        rng
    }

    /// `U_i^x` for `i ≥ 1`.
    pub fn uniform(&self, x: i64, i: u64) -> f64 {
        assert!(i >= 1, "visit indexes start at 1");
        let mut rng = self.stream(x);
        rng.set_word_pos(2 * (i as u128 - 1));
        to_unit(rng.next_u64())
    }

    /// Sequential reader for one site, positioned at `U_first^x`.
    pub(crate) fn cursor(&self, x: i64, first: u64) -> SiteCursor {
        let mut rng = self.stream(x);
        rng.set_word_pos(2 * (first.max(1) as u128 - 1));
        SiteCursor {
            rng,
            next: first.max(1),
        }
    }
}

/// Reads `U_i^x` for increasing `i` without reseeding.
#[derive(Clone, Debug)]
pub(crate) struct SiteCursor {
    rng: ChaCha8Rng,
    next: u64,
}

impl SiteCursor {
    #[inline]
    pub(crate) fn take(&mut self, i: u64) -> f64 {
        if i != self.next {
            self.rng.set_word_pos(2 * (i as u128 - 1));
        }
        self.next = i + 1;
        to_unit(self.rng.next_u64())
    }
}
