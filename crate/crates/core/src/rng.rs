//! Counter-based random stream derivation.
//!
//! Every random draw in a simulation comes from a stream keyed by
//! `(master seed, purpose, index)`. Streams are independent ChaCha20
//! instances, so trial `i` sees the same numbers no matter which worker
//! runs it or in what order.

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

pub use rand::Rng;

/// Concrete generator handed to every sampling routine.
pub type RngStream = ChaCha20Rng;

/// What a stream is used for. Distinct purposes never share numbers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Purpose {
    Channel,
    Bits,
    Noise,
    ProgramInv,
    ProgramMvm,
    /// Free-form tag for tests and tools.
    Custom(u32),
}

impl Purpose {
    fn tag(self) -> u64 {
        match self {
            Purpose::Channel => 0x4348_414e,
            Purpose::Bits => 0x4249_5453,
            Purpose::Noise => 0x4e4f_4953,
            Purpose::ProgramInv => 0x5052_4749,
            Purpose::ProgramMvm => 0x5052_474d,
            Purpose::Custom(t) => 0x1_0000_0000 | t as u64,
        }
    }
}

/// Derives the stream for `(master_seed, purpose, index)`.
///
/// The key is the 256-bit ChaCha seed; `index` selects the 64-bit stream id.
pub fn stream(master_seed: u64, purpose: Purpose, index: u64) -> RngStream {
    let mut seed = [0u8; 32];
    seed[..8].copy_from_slice(&master_seed.to_le_bytes());
    seed[8..16].copy_from_slice(&purpose.tag().to_le_bytes());
    seed[16..24].copy_from_slice(&splitmix64(master_seed ^ purpose.tag()).to_le_bytes());
    let mut rng = ChaCha20Rng::from_seed(seed);
    rng.set_stream(index);
    rng
}

/// Stream for a sub-experiment (e.g. one SNR point) of a given purpose.
pub fn substream(master_seed: u64, purpose: Purpose, group: u64, index: u64) -> RngStream {
    stream(
        splitmix64(master_seed ^ splitmix64(group.wrapping_add(1))),
        purpose,
        index,
    )
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}
