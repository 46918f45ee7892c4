use rand::SeedableRng;
use rand_pcg::Pcg64;

/// The single generator type used for every seeded draw in the crate.
pub type SeededRng = Pcg64;

pub fn seeded_rng(seed: u64) -> SeededRng {
    Pcg64::seed_from_u64(seed)
}

/// Derives an independent sub-seed so that distinct consumers of one user
/// seed do not share a stream.
pub fn derive_seed(seed: u64, stream: u64) -> u64 {
    // splitmix64 finalizer
    let mut z = seed ^ stream.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
