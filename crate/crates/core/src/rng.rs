//! Counter-based random streams.
//!
//! Every random quantity is drawn from a stream addressed by
//! `(seed, domain, index)`, so results never depend on scheduling.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Stream domains. Distinct domains never share keys.
pub mod domain {
    pub const PLAIN: u64 = 1;
    pub const PERIODIC: u64 = 2;
    pub const APPROX: u64 = 3;
    pub const PILOT: u64 = 4;
    pub const STRATIFIED: u64 = 5;
    pub const SIGN: u64 = 6;
    pub const QMC_SHIFT: u64 = 7;
    pub const TEST: u64 = 99;
}

fn splitmix(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Independent generator for stream `index` of `(seed, domain)`.
pub fn stream(seed: u64, domain: u64, index: u64) -> ChaCha8Rng {
    let mut state = seed ^ domain.wrapping_mul(0xD1B5_4A32_D192_ED03);
    let mut key = [0u8; 32];
    for chunk in key.chunks_mut(8) {
        chunk.copy_from_slice(&splitmix(&mut state).to_le_bytes());
    }
    let mut rng = ChaCha8Rng::from_seed(key);
    rng.set_stream(index);
    rng
}
