//! Bit-exact pseudo random generator used for weight initialization,
//! shuffling and split assignment.
//!
//! The stream is fully specified so that other implementations can
//! reproduce it:
//!
//! * seeding: `state = splitmix64(seed)`, replaced by `0x9E3779B97F4A7C15`
//!   if the mixed value is zero;
//! * step (xorshift64*): `s ^= s >> 12; s ^= s << 25; s ^= s >> 27;`
//!   output `s * 0x2545F4914F6CDD1D` (wrapping);
//! * `next_f64`: top 53 output bits scaled by `2^-53`, in `[0, 1)`.

/// xorshift64* generator seeded through splitmix64.
#[derive(Debug, Clone)]
pub struct XorShift64 {
    state: u64,
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

impl XorShift64 {
    pub fn new(seed: u64) -> Self {
        let mixed = splitmix64(seed);
        Self {
            state: if mixed == 0 { 0x9E37_79B9_7F4A_7C15 } else { mixed },
        }
    }

    /// Derive an independent stream from a parent seed and a salt.
    pub fn derived(seed: u64, salt: u64) -> Self {
        Self::new(splitmix64(seed) ^ splitmix64(salt.wrapping_add(0xD1B5_4A32_D192_ED03)))
    }

    pub fn next_u64(&mut self) -> u64 {
        let mut s = self.state;
        s ^= s >> 12;
        s ^= s << 25;
        s ^= s >> 27;
        self.state = s;
        s.wrapping_mul(0x2545_F491_4F6C_DD1D)
    }

    /// Uniform in `[0, 1)`.
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform in `[lo, hi)`.
    pub fn uniform(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.next_f64()
    }

    /// Uniform integer in `0..n` (Lemire-free modulo reduction; bias is
    /// below 2^-40 for the sizes used here). `n` must be nonzero.
    pub fn below(&mut self, n: usize) -> usize {
        debug_assert!(n > 0);
        (self.next_u64() % n as u64) as usize
    }

    /// Standard normal via Box-Muller (one value per call).
    pub fn normal(&mut self) -> f64 {
        let u1 = 1.0 - self.next_f64(); // (0, 1]
        let u2 = self.next_f64();
        (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
    }

    /// Fisher-Yates, walking from the back.
    pub fn shuffle<T>(&mut self, items: &mut [T]) {
        for i in (1..items.len()).rev() {
            let j = self.below(i + 1);
            items.swap(i, j);
        }
    }
}

/// FNV-1a, used to fold string identifiers into seeds.
pub fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xCBF2_9CE4_8422_2325;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x0100_0000_01B3);
    }
    h
}
