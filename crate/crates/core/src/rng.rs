//! Seed derivation.
//!
//! Every random stream is a ChaCha8 generator keyed by
//! `splitmix64(master ^ splitmix64(domain))` and positioned on stream
//! `index`. A stream therefore depends only on `(master, domain, index)`,
//! never on scheduling order, and any single path can be regenerated in
//! isolation.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Stream domains. Changing a value changes every derived stream.
pub mod domain {
    pub const FBM: u64 = 0x6662_6d5f_7061_7468; // "fbm_path"
    pub const EFFECTS: u64 = 0x6566_6665_6374_7321; // "effects!"
    pub const REPLICATION: u64 = 0x7265_706c_6963_6174; // "replicat"
    pub const CONVERGENCE: u64 = 0x636f_6e76_6572_6765; // "converge"
}

#[inline]
pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Derive a child seed, e.g. the per-replication master seed.
pub fn derive_seed(master: u64, domain: u64, index: u64) -> u64 {
    splitmix64(splitmix64(master ^ splitmix64(domain)) ^ index.wrapping_mul(0xd1b5_4a32_d192_ed03))
}

/// The generator for stream `index` in `domain` under `master`.
pub fn stream(master: u64, domain: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(splitmix64(master ^ splitmix64(domain)));
    rng.set_stream(index);
    rng
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn streams_are_reproducible_and_distinct() {
        let a: Vec<u64> = (0..4).map(|_| 0).scan(stream(7, domain::FBM, 3), |r, _: u64| Some(r.random())).collect();
        let b: Vec<u64> = (0..4).map(|_| 0).scan(stream(7, domain::FBM, 3), |r, _: u64| Some(r.random())).collect();
        let c: Vec<u64> = (0..4).map(|_| 0).scan(stream(7, domain::FBM, 4), |r, _: u64| Some(r.random())).collect();
        let d: Vec<u64> = (0..4).map(|_| 0).scan(stream(7, domain::EFFECTS, 3), |r, _: u64| Some(r.random())).collect();
        assert_eq!(a, b);
        assert_ne!(a, c);
        assert_ne!(a, d);
    }

    #[test]
    fn derived_seeds_differ() {
        assert_ne!(derive_seed(1, domain::REPLICATION, 0), derive_seed(1, domain::REPLICATION, 1));
        assert_ne!(derive_seed(1, domain::REPLICATION, 0), derive_seed(2, domain::REPLICATION, 0));
    }
}
