//! Deterministic seed derivation and counter-based sampling.
//!
//! Every random draw in the crate is keyed by an explicit (seed, stream,
//! index) coordinate rather than a shared mutable generator, so results do
//! not depend on evaluation order or on how work is split across threads.

/// splitmix64 finalizer.
fn finalize(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derive an independent seed for a named stream of a run seed.
pub fn mix(seed: u64, stream: u64) -> u64 {
    finalize(seed ^ stream.wrapping_mul(0x9E37_79B9_7F4A_7C15))
}

/// Two-level derivation, e.g. (run seed, stream, epoch).
pub fn mix3(seed: u64, stream: u64, index: u64) -> u64 {
    mix(mix(seed, stream), index)
}

/// Uniform in [0, 1) at a counter position.
pub fn uniform_at(seed: u64, index: u64) -> f64 {
    (mix(seed, index) >> 11) as f64 / (1u64 << 53) as f64
}

/// Standard normal at a counter position, via Box-Muller over two uniforms.
pub fn normal_at(seed: u64, index: u64) -> f64 {
    let u1 = uniform_at(seed, 2 * index).max(f64::MIN_POSITIVE);
    let u2 = uniform_at(seed, 2 * index + 1);
    (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
}
