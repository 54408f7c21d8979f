//! Portable deterministic random numbers.
//!
//! Generators are SplitMix64 (Steele, Lea & Flood; the reference constants
//! `0x9E3779B97F4A7C15`, `0xBF58476D1CE4E5B9`, `0x94D049BB133111EB`).
//! Uniforms use the top 53 bits: `u = (x >> 11) · 2⁻⁵³ ∈ [0, 1)`.
//! Standard normals use the Box–Muller transform on two consecutive draws
//! `u1, u2`: `sqrt(-2 ln(1 - u1)) · cos(2π u2)` and then the matching `sin`
//! value, emitted in that order.
//!
//! Each generated object draws from its own stream, seeded with
//! `stream_seed(seed, tag) = splitmix64_mix(seed ^ splitmix64_mix(tag))`, so
//! adding objects never shifts the values of existing ones. The same recipe
//! is easy to reimplement in any language.

/// One SplitMix64 output-mixing step.
pub fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn stream_seed(seed: u64, tag: u64) -> u64 {
    mix64(seed ^ mix64(tag))
}

#[derive(Clone, Debug)]
pub struct SplitMix64 {
    state: u64,
    spare_normal: Option<f64>,
}

impl SplitMix64 {
    pub fn new(seed: u64) -> Self {
        Self {
            state: seed,
            spare_normal: None,
        }
    }

    pub fn stream(seed: u64, tag: u64) -> Self {
        Self::new(stream_seed(seed, tag))
    }

    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(0x9E37_79B9_7F4A_7C15);
        mix64(self.state)
    }

    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    pub fn next_normal(&mut self) -> f64 {
        if let Some(z) = self.spare_normal.take() {
            return z;
        }
        let u1 = self.next_f64();
        let u2 = self.next_f64();
        let radius = (-2.0 * (1.0 - u1).ln()).sqrt();
        let angle = std::f64::consts::TAU * u2;
        self.spare_normal = Some(radius * angle.sin());
        radius * angle.cos()
    }

    pub fn normals(&mut self, count: usize) -> Vec<f64> {
        (0..count).map(|_| self.next_normal()).collect()
    }
}
