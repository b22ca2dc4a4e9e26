//! Counter-based child seeds.
//!
//! A child seed is `fmix64(key ^ fmix64(master))` with
//! `key = realization << 32 | trajectory << 8 | tag`. The 64-bit finalizer is
//! a bijection, so for a fixed master seed distinct keys never collide.

/// Seed of the coefficient-vector draw of a realization.
pub const THETA_TAG: u8 = 0x20;
/// Seed of the hidden chain and coefficient draws of a trajectory; shared by
/// every agent so comparisons are paired.
pub const ENV_TAG: u8 = 0x10;

pub const MAX_TRAJECTORIES: usize = 1 << 24;

/// MurmurHash3 64-bit finalizer.
pub fn fmix64(mut x: u64) -> u64 {
    x ^= x >> 33;
    x = x.wrapping_mul(0xff51_afd7_ed55_8ccd);
    x ^= x >> 33;
    x = x.wrapping_mul(0xc4ce_b9fe_1a85_ec53);
    x ^= x >> 33;
    x
}

pub fn child_key(realization: u32, trajectory: u32, tag: u8) -> u64 {
    debug_assert!((trajectory as usize) < MAX_TRAJECTORIES);
    (realization as u64) << 32 | ((trajectory as u64) & 0x00ff_ffff) << 8 | tag as u64
}

pub fn child_seed(master: u64, realization: u32, trajectory: u32, tag: u8) -> u64 {
    fmix64(child_key(realization, trajectory, tag) ^ fmix64(master))
}
