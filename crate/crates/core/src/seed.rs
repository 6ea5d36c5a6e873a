//! Seed derivation. Every independent random stream in the engine is keyed
//! by a master seed and a stream index, so results never depend on worker
//! scheduling.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

use crate::model::{CovariateProfile, Sex};

pub fn rng_from_seed(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Seed for stream `stream` of `master`.
pub fn derive_seed(master: u64, stream: u64) -> u64 {
    let mut rng = ChaCha8Rng::seed_from_u64(master);
    rng.set_stream(stream);
    rng.next_u64()
}

/// Seed for a citizen's draws. Keyed by covariates rather than position, so
/// two citizens with identical features share the same predictive model of
/// their behaviour.
pub fn profile_seed(master: u64, profile: &CovariateProfile) -> u64 {
    let mut h = Sha256::new();
    h.update(profile.age.to_le_bytes());
    h.update([
        match profile.sex {
            Sex::Male => 0,
            Sex::Female => 1,
        },
        u8::from(profile.smoker),
        u8::from(profile.alcohol),
        u8::from(profile.diabetes),
        u8::from(profile.hypertension),
        profile.ses_level,
    ]);
    h.update(profile.eq5d_index.to_bits().to_le_bytes());
    let digest = h.finalize();
    let mut stream = [0u8; 8];
    stream.copy_from_slice(&digest[..8]);
    derive_seed(master, u64::from_le_bytes(stream))
}
