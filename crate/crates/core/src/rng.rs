use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn seeded(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Independent stream keyed by `(seed, major, minor)`, so parallel work
/// items draw the same numbers regardless of scheduling.
pub fn derived(seed: u64, major: u64, minor: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(splitmix64(seed ^ splitmix64(major)));
    rng.set_stream(minor);
    rng
}

/// A child seed for a component that takes a plain `u64`.
pub fn derive_seed(seed: u64, major: u64, minor: u64) -> u64 {
    use rand::RngCore;
    derived(seed, major, minor).next_u64()
}
