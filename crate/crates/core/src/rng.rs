//! Counter-based random streams.
//!
//! Every trial owns its own generator, seeded from `(master, trial, stream)`
//! so results do not depend on execution order or thread count.

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub type StreamRng = ChaCha8Rng;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Mixes the three counters into one 64-bit seed.
pub fn derive_seed(master: u64, trial: u64, stream: u64) -> u64 {
    let a = splitmix64(master);
    let b = splitmix64(a ^ trial.wrapping_mul(0xD6E8_FEB8_6659_FD93));
    splitmix64(b ^ stream.wrapping_mul(0xA076_1D64_78BD_642F))
}

pub fn stream_rng(master: u64, trial: u64, stream: u64) -> StreamRng {
    ChaCha8Rng::seed_from_u64(derive_seed(master, trial, stream))
}

pub fn standard_normal<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    rng.sample(StandardNormal)
}

pub fn standard_normal_vector<R: Rng + ?Sized>(rng: &mut R, len: usize) -> DVector<f64> {
    DVector::from_fn(len, |_, _| standard_normal(rng))
}
