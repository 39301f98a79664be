//! Deterministic seed derivation for nested randomized work.
//!
//! Every randomized unit (grid cell, truth redraw, dataset, sampler chain,
//! test-set draw) gets its own RNG seeded by a value derived from its
//! parent's seed, a stream tag, and the unit's index. Results therefore
//! depend only on the master seed and each unit's logical position — never
//! on thread scheduling or worker count.

/// Stream tags; one per kind of randomized work hanging off a parent seed.
pub mod stream {
    pub const CELL: u64 = 1;
    pub const TRUTH: u64 = 2;
    pub const DATA: u64 = 3;
    pub const MCMC: u64 = 4;
    pub const TEST_DRAWS: u64 = 5;
    pub const CHAIN: u64 = 6;
    pub const INIT: u64 = 7;
}

/// SplitMix64 finalizer. Bijective on u64, so distinct inputs stay distinct.
fn splitmix64(state: u64) -> u64 {
    let mut z = state.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Derive the seed for stream `tag`, item `index`, under `parent`.
pub fn derive_seed(parent: u64, tag: u64, index: u64) -> u64 {
    let mixed = splitmix64(parent ^ splitmix64(tag));
    splitmix64(mixed ^ splitmix64(index.wrapping_add(0x517c_c1b7_2722_0a95)))
}
