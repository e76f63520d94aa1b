//! Named random streams.
//!
//! Every random quantity is drawn from a stream keyed by the master seed, a
//! purpose tag and one or two indices, so results do not depend on how work is
//! scheduled across threads. Two runs that share a master seed also share the
//! delay samples and labels for equal indices.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Stream = ChaCha8Rng;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StreamTag {
    /// Edge transmission times of sample `l`.
    Tau,
    /// Label set `u` of sample `l`.
    Label,
    /// Network generation.
    Generate,
    /// Cascade train/test splitting.
    Split,
}

impl StreamTag {
    fn code(self) -> u64 {
        match self {
            StreamTag::Tau => 0x7461_7500,
            StreamTag::Label => 0x6c61_6200,
            StreamTag::Generate => 0x6765_6e00,
            StreamTag::Split => 0x7370_6c00,
        }
    }
}

fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9e37_79b9_7f4a_7c15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Avalanche of `x`; a bijection, so distinct inputs stay distinct.
fn mix64(x: u64) -> u64 {
    let mut s = x;
    splitmix64(&mut s)
}

/// Stream for `(master_seed, tag, a, b)`.
pub fn stream(master_seed: u64, tag: StreamTag, a: u64, b: u64) -> Stream {
    // Chain avalanched values, not the additive splitmix state: folding raw
    // inputs into that state lets different (seed, a, b) keys collide.
    let key = [tag.code(), a, b]
        .into_iter()
        .fold(mix64(master_seed), |h, x| mix64(h ^ mix64(x)));

    let mut seed = [0u8; 32];
    let mut s = key;
    for chunk in seed.chunks_exact_mut(8) {
        chunk.copy_from_slice(&splitmix64(&mut s).to_le_bytes());
    }
    ChaCha8Rng::from_seed(seed)
}

pub fn tau_stream(master_seed: u64, sample: usize) -> Stream {
    stream(master_seed, StreamTag::Tau, sample as u64, 0)
}

pub fn label_stream(master_seed: u64, sample: usize, label_set: usize) -> Stream {
    stream(master_seed, StreamTag::Label, sample as u64, label_set as u64)
}
