//! Deterministic per-scope random streams.
//!
//! Every consumer of randomness (a link's jitter, a node's strategy, a
//! client's nonces) gets its own SplitMix64 stream keyed by
//! `(scenario seed, scope, purpose)`. Draws on one stream never move
//! another, so adding a node to a scenario cannot shift the draws of an
//! existing one.

/// Identifies the owner of a stream.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scope {
    Node(u32),
    Link(u32),
    Global,
}

impl Scope {
    fn key(self) -> u64 {
        match self {
            Scope::Node(i) => 0x4e00_0000_0000_0000 | i as u64,
            Scope::Link(i) => 0x4c00_0000_0000_0000 | i as u64,
            Scope::Global => 0x4700_0000_0000_0000,
        }
    }
}

const GOLDEN: u64 = 0x9e37_79b9_7f4a_7c15;

fn splitmix_next(state: &mut u64) -> u64 {
    *state = state.wrapping_add(GOLDEN);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in bytes {
        h ^= *b as u64;
        h = h.wrapping_mul(0x1000_0000_01b3);
    }
    h
}

/// An independent deterministic stream of 64-bit values.
#[derive(Debug, Clone)]
pub struct RngStream {
    state: u64,
}

impl RngStream {
    /// Opens the stream for `(seed, scope, purpose)`. Reopening yields the
    /// same sequence.
    pub fn new(seed: u64, scope: Scope, purpose: &str) -> Self {
        let mut state = seed;
        let _ = splitmix_next(&mut state);
        state ^= scope.key();
        let _ = splitmix_next(&mut state);
        state ^= fnv1a64(purpose.as_bytes());
        let _ = splitmix_next(&mut state);
        RngStream { state }
    }

    pub fn next_u64(&mut self) -> u64 {
        splitmix_next(&mut self.state)
    }

    /// Uniform draw in `0..n`. `n` must be nonzero.
    pub fn next_range(&mut self, n: u64) -> u64 {
        self.next_u64() % n
    }

    /// Uniform draw in `0..1_000_000`, for comparing against ppm fractions.
    pub fn next_ppm(&mut self) -> u32 {
        (self.next_u64() % 1_000_000) as u32
    }

    /// A nonzero nonce.
    pub fn next_nonce(&mut self) -> u64 {
        loop {
            let v = self.next_u64();
            if v != 0 {
                return v;
            }
        }
    }

    pub fn next_bytes8(&mut self) -> [u8; 8] {
        self.next_u64().to_le_bytes()
    }
}
