//! White-in-time, smooth-in-space random forcing sampled as spectral increments.
//!
//! The force is d xi = sum_s b_s dbeta_s(t) e_s(x) over the real orthonormal
//! basis e_s = sqrt(2) cos(2 pi s x) for s > 0 and e_{-s} = sqrt(2) sin(2 pi s x),
//! with independent standard Brownian motions beta_s. An increment over a step
//! of length dt is Normal(0, dt) per coefficient, drawn from a stateless
//! counter-based generator keyed by (seed, member, s, step). Any increment can
//! therefore be regenerated in isolation, which is what makes coupled-noise
//! experiments and checkpoint resume exact.

use num_complex::Complex64;

use crate::field::SpectralField;

const SQRT_HALF: f64 = std::f64::consts::FRAC_1_SQRT_2;

pub mod rng {
    //! Counter-based normal sampler: a SplitMix64 finalizer chain over the
    //! key tuple, then one Box-Muller transform. No state, no stream.

    const C_STREAM: u64 = 0xa076_1d64_78bd_642f;
    const C_LANE: u64 = 0xe703_7ed1_a0b4_28db;
    const C_COUNTER: u64 = 0x8ebc_6af0_9c88_c6e3;
    const C_OUT_A: u64 = 0x5899_65cc_7537_4cc3;
    const C_OUT_B: u64 = 0x1d8e_4e27_c47d_124f;

    #[inline]
    fn mix(mut z: u64) -> u64 {
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
        z ^ (z >> 31)
    }

    #[inline]
    fn key(seed: u64, stream: u64, lane: u64, counter: u64) -> u64 {
        let mut h = mix(seed ^ 0x9e37_79b9_7f4a_7c15);
        h = mix(h ^ stream.wrapping_add(C_STREAM));
        h = mix(h ^ lane.wrapping_add(C_LANE));
        h = mix(h ^ counter.wrapping_add(C_COUNTER));
        h
    }

    /// Uniform draw in (0, 1], strictly positive so logs are safe.
    #[inline]
    fn unit_open(x: u64) -> f64 {
        ((x >> 11) + 1) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Standard normal draw for the key (seed, stream, lane, counter).
    #[inline]
    pub fn standard_normal(seed: u64, stream: u64, lane: u64, counter: u64) -> f64 {
        let h = key(seed, stream, lane, counter);
        standard_normal_from(h)
    }

    #[inline]
    fn standard_normal_from(h: u64) -> f64 {
        let u1 = unit_open(mix(h ^ C_OUT_A));
        let u2 = (mix(h ^ C_OUT_B) >> 11) as f64 * (1.0 / (1u64 << 53) as f64);
        (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
    }

    /// Uniform draw in [0, 1) for the key.
    #[inline]
    pub fn uniform(seed: u64, stream: u64, lane: u64, counter: u64) -> f64 {
        (key(seed, stream, lane, counter) >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }
}

/// Band-limited forcing coefficients plus the RNG identity of one trajectory.
#[derive(Debug, Clone, PartialEq)]
pub struct ForcingSpec {
    /// (s, b_s) sorted by s; s != 0. May be empty (unforced runs).
    coefficients: Vec<(i32, f64)>,
    seed: u64,
    member_id: u64,
}

impl ForcingSpec {
    pub fn new(mut coefficients: Vec<(i32, f64)>, seed: u64, member_id: u64) -> Self {
        coefficients.retain(|&(s, b)| s != 0 && b != 0.0);
        coefficients.sort_by_key(|&(s, _)| s);
        assert!(
            coefficients.windows(2).all(|w| w[0].0 != w[1].0),
            "duplicate forcing wavenumber"
        );
        Self {
            coefficients,
            seed,
            member_id,
        }
    }

    /// Unforced spec; useful for deterministic runs.
    pub fn silent(seed: u64, member_id: u64) -> Self {
        Self::new(Vec::new(), seed, member_id)
    }

    /// Default band: b_s proportional to 1/|s| for 1 <= |s| <= s_max, both
    /// signs, rescaled so that sum b_s^2 = b0.
    pub fn inverse_s_bandlimited(s_max: u32, b0: f64, seed: u64, member_id: u64) -> Self {
        assert!(s_max >= 1, "need at least one forced mode");
        assert!(b0 > 0.0, "total input rate must be positive");
        let raw: f64 = (1..=s_max).map(|s| 2.0 / (s as f64 * s as f64)).sum();
        let scale = (b0 / raw).sqrt();
        let mut coefficients = Vec::with_capacity(2 * s_max as usize);
        for s in 1..=s_max as i32 {
            let b = scale / s as f64;
            coefficients.push((-s, b));
            coefficients.push((s, b));
        }
        Self::new(coefficients, seed, member_id)
    }

    /// Same coefficients and seed, different ensemble member.
    pub fn with_member(&self, member_id: u64) -> Self {
        Self {
            coefficients: self.coefficients.clone(),
            seed: self.seed,
            member_id,
        }
    }

    pub fn coefficients(&self) -> &[(i32, f64)] {
        &self.coefficients
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn member_id(&self) -> u64 {
        self.member_id
    }

    /// Largest forced |s|; 0 when unforced.
    pub fn max_mode(&self) -> usize {
        self.coefficients
            .iter()
            .map(|&(s, _)| s.unsigned_abs() as usize)
            .max()
            .unwrap_or(0)
    }

    /// B_m = sum_s (2 pi |s|)^{2m} b_s^2.
    pub fn b_constant(&self, m: u32) -> f64 {
        self.coefficients
            .iter()
            .map(|&(s, b)| (crate::field::TWO_PI * s.unsigned_abs() as f64).powi(2 * m as i32) * b * b)
            .sum()
    }

    /// The scaled Brownian increments b_s * dbeta_s over a step.
    ///
    /// Each dbeta_s is Normal(0, dt), independent across s and steps, and a
    /// pure function of (seed, member, s, step_index).
    pub fn increment_coefficients(&self, dt: f64, step_index: u64) -> Vec<(i32, f64)> {
        assert!(dt > 0.0, "step length must be positive");
        let sd = dt.sqrt();
        self.coefficients
            .iter()
            .map(|&(s, b)| {
                let lane = ((s.unsigned_abs() as u64) << 1) | u64::from(s < 0);
                let z = rng::standard_normal(self.seed, self.member_id, lane, step_index);
                (s, b * sd * z)
            })
            .collect()
    }

    /// The increment assembled as a spectral field.
    pub fn sample_increment(&self, dt: f64, step_index: u64) -> NoiseIncrement {
        let k_max = self.max_mode().max(1);
        let mut delta = SpectralField::zero(k_max).expect("k_max >= 1");
        for (s, a) in self.increment_coefficients(dt, step_index) {
            let k = s.unsigned_abs() as usize;
            let mode = if s > 0 {
                // e_s = sqrt(2) cos -> (1/sqrt(2)) (e^{ikx} + e^{-ikx})
                Complex64::new(SQRT_HALF * a, 0.0)
            } else {
                // e_{-s} = sqrt(2) sin -> -(i/sqrt(2)) e^{ikx} + c.c.
                Complex64::new(0.0, -SQRT_HALF * a)
            };
            let cur = delta.amplitude(k as i64);
            delta.set(k, cur + mode);
        }
        NoiseIncrement { dt, delta }
    }
}

/// One Wiener increment over a step of length `dt`, in spectral form.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseIncrement {
    pub dt: f64,
    pub delta: SpectralField,
}

impl NoiseIncrement {
    /// Assemble an increment directly; used by refinement tests and oracles.
    pub fn new(dt: f64, delta: SpectralField) -> Self {
        assert!(dt > 0.0, "step length must be positive");
        Self { dt, delta }
    }

    pub fn zero(dt: f64, truncation: usize) -> Self {
        Self {
            dt,
            delta: SpectralField::zero(truncation.max(1)).expect("truncation >= 1"),
        }
    }
}
