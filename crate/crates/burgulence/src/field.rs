//! Zero-mean periodic fields on the unit circle, in grid and spectral form.
//!
//! A real field u(x) with period 1 and zero mean is carried either as N
//! samples on the uniform grid x_j = j/N ([`GridField`]) or as complex
//! amplitudes of u(x) = sum_k u_k exp(2 pi i k x) over k = +-1..+-K
//! ([`SpectralField`]). The k = 0 amplitude is identically zero and never
//! stored, and u_{-k} = conj(u_k) because u is real, so only k = 1..K is kept.
//! All quadrature on the grid is the trapezoid rule, which for periodic data
//! is the plain average over samples.

use std::cell::RefCell;

use num_complex::Complex64;
use realfft::{ComplexToReal, RealFftPlanner, RealToComplex};

use crate::error::{Error, Result};

pub const TWO_PI: f64 = 2.0 * std::f64::consts::PI;

/// Relative tolerance on the sample mean of a [`GridField`].
pub const MEAN_TOL: f64 = 1e-12;

thread_local! {
    static PLANNER: RefCell<RealFftPlanner<f64>> = RefCell::new(RealFftPlanner::new());
}

fn forward_plan(n: usize) -> std::sync::Arc<dyn RealToComplex<f64>> {
    PLANNER.with(|p| p.borrow_mut().plan_fft_forward(n))
}

fn inverse_plan(n: usize) -> std::sync::Arc<dyn ComplexToReal<f64>> {
    PLANNER.with(|p| p.borrow_mut().plan_fft_inverse(n))
}

pub(crate) fn is_pow2(n: usize) -> bool {
    n >= 4 && n.is_power_of_two()
}

/// Complex Fourier amplitudes u_k of a real zero-mean field, k = 1..K.
///
/// Negative wavenumbers are implied by Hermitian symmetry and the mean mode
/// is structurally absent, so both invariants hold by construction.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralField {
    modes: Vec<Complex64>,
}

impl SpectralField {
    /// Zero field truncated at wavenumber `truncation` (>= 1).
    pub fn zero(truncation: usize) -> Result<Self> {
        if truncation == 0 {
            return Err(Error::EmptyTruncation);
        }
        Ok(Self {
            modes: vec![Complex64::new(0.0, 0.0); truncation],
        })
    }

    /// Build from the positive-wavenumber amplitudes `modes[i] = u_{i+1}`.
    pub fn from_positive_modes(modes: Vec<Complex64>) -> Result<Self> {
        if modes.is_empty() {
            return Err(Error::EmptyTruncation);
        }
        Ok(Self { modes })
    }

    /// Largest stored wavenumber K.
    pub fn truncation(&self) -> usize {
        self.modes.len()
    }

    /// Amplitude u_k for any integer k; 0 for k = 0 or |k| > K.
    pub fn amplitude(&self, k: i64) -> Complex64 {
        let a = k.unsigned_abs() as usize;
        if k == 0 || a > self.modes.len() {
            return Complex64::new(0.0, 0.0);
        }
        let v = self.modes[a - 1];
        if k > 0 {
            v
        } else {
            v.conj()
        }
    }

    /// Set u_k (k >= 1); u_{-k} follows by symmetry.
    pub fn set(&mut self, k: usize, value: Complex64) {
        assert!(k >= 1 && k <= self.modes.len(), "wavenumber out of range");
        self.modes[k - 1] = value;
    }

    pub fn positive_modes(&self) -> &[Complex64] {
        &self.modes
    }

    pub fn positive_modes_mut(&mut self) -> &mut [Complex64] {
        &mut self.modes
    }

    /// Copy with every amplitude scaled by `c`.
    pub fn scaled(&self, c: f64) -> Self {
        Self {
            modes: self.modes.iter().map(|m| m * c).collect(),
        }
    }

    /// Copy truncated (or zero-padded) to wavenumber `k_new`.
    pub fn resized(&self, k_new: usize) -> Result<Self> {
        if k_new == 0 {
            return Err(Error::EmptyTruncation);
        }
        let mut modes = vec![Complex64::new(0.0, 0.0); k_new];
        let keep = k_new.min(self.modes.len());
        modes[..keep].copy_from_slice(&self.modes[..keep]);
        Ok(Self { modes })
    }

    /// Spectral derivative: (d/dx u)_k = 2 pi i k u_k.
    pub fn derivative(&self) -> Self {
        let modes = self
            .modes
            .iter()
            .enumerate()
            .map(|(i, m)| Complex64::new(0.0, TWO_PI * (i + 1) as f64) * m)
            .collect();
        Self { modes }
    }

    /// Squared homogeneous Sobolev norm sum_k (2 pi |k|)^{2m} |u_k|^2.
    ///
    /// m = 0 is the squared L2 norm (Parseval). Negative m is accepted and
    /// yields the negative-order diagnostic by the same formula.
    pub fn sobolev_norm_sq(&self, m: i32) -> f64 {
        if m == 0 {
            return 2.0 * self.modes.iter().map(|v| v.norm_sqr()).sum::<f64>();
        }
        let p = 2 * m;
        2.0 * self
            .modes
            .iter()
            .enumerate()
            .map(|(i, v)| (TWO_PI * (i + 1) as f64).powi(p) * v.norm_sqr())
            .sum::<f64>()
    }

    /// Energy in mode k counting both signs: |u_k|^2 + |u_{-k}|^2 = 2 |u_k|^2.
    pub fn mode_energy(&self, k: usize) -> f64 {
        if k == 0 || k > self.modes.len() {
            0.0
        } else {
            2.0 * self.modes[k - 1].norm_sqr()
        }
    }

    /// Evaluate the field on N grid points x_j = j/N.
    ///
    /// Requires N >= 2(K + 1) so every stored mode fits below the Nyquist
    /// frequency. The Nyquist bin is always left at zero.
    pub fn to_grid(&self, n: usize) -> Result<GridField> {
        self.to_grid_shifted(n, 0.0)
    }

    /// Evaluate on N points x_j = (j + offset)/N; used for cell centers.
    pub fn to_grid_shifted(&self, n: usize, offset: f64) -> Result<GridField> {
        if !is_pow2(n) {
            return Err(Error::GridSize(n));
        }
        let k = self.truncation();
        if n < 2 * (k + 1) {
            return Err(Error::Resolution {
                n,
                truncation: k,
                needed: 2 * (k + 1),
            });
        }
        let mut half = vec![Complex64::new(0.0, 0.0); n / 2 + 1];
        if offset == 0.0 {
            half[1..=k].copy_from_slice(&self.modes);
        } else {
            for (i, m) in self.modes.iter().enumerate() {
                let phase = TWO_PI * (i + 1) as f64 * offset / n as f64;
                half[i + 1] = m * Complex64::new(phase.cos(), phase.sin());
            }
        }
        let plan = inverse_plan(n);
        let mut out = vec![0.0; n];
        let mut scratch = vec![Complex64::new(0.0, 0.0); plan.get_scratch_len()];
        plan.process_with_scratch(&mut half, &mut out, &mut scratch)
            .expect("half-spectrum buffer sized for the plan");
        GridField::new(out)
    }
}

/// N real samples of a zero-mean field at x_j = j/N, N a power of two >= 4.
#[derive(Debug, Clone, PartialEq)]
pub struct GridField {
    values: Vec<f64>,
}

impl GridField {
    /// Wrap samples, checking the grid-size and zero-mean invariants.
    pub fn new(values: Vec<f64>) -> Result<Self> {
        let n = values.len();
        if !is_pow2(n) {
            return Err(Error::GridSize(n));
        }
        let mean = values.iter().sum::<f64>() / n as f64;
        let amp = values.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        let tol = MEAN_TOL * amp.max(f64::MIN_POSITIVE);
        if mean.abs() > tol {
            return Err(Error::NonzeroMean { mean, tol });
        }
        Ok(Self { values })
    }

    /// Wrap samples after subtracting their mean.
    pub fn zero_mean(mut values: Vec<f64>) -> Result<Self> {
        let n = values.len();
        if !is_pow2(n) {
            return Err(Error::GridSize(n));
        }
        let mean = values.iter().sum::<f64>() / n as f64;
        for v in &mut values {
            *v -= mean;
        }
        Self::new(values)
    }

    /// Sample a function on the grid and remove its mean.
    pub fn from_fn(n: usize, f: impl Fn(f64) -> f64) -> Result<Self> {
        if !is_pow2(n) {
            return Err(Error::GridSize(n));
        }
        let values = (0..n).map(|j| f(j as f64 / n as f64)).collect();
        Self::zero_mean(values)
    }

    pub fn zero(n: usize) -> Result<Self> {
        if !is_pow2(n) {
            return Err(Error::GridSize(n));
        }
        Ok(Self {
            values: vec![0.0; n],
        })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    /// Fourier amplitudes with truncation K = N/2 - 1 (Nyquist dropped).
    pub fn to_spectral(&self) -> SpectralField {
        let n = self.values.len();
        let plan = forward_plan(n);
        let mut input = self.values.clone();
        let mut half = vec![Complex64::new(0.0, 0.0); n / 2 + 1];
        let mut scratch = vec![Complex64::new(0.0, 0.0); plan.get_scratch_len()];
        plan.process_with_scratch(&mut input, &mut half, &mut scratch)
            .expect("buffers sized for the plan");
        let scale = 1.0 / n as f64;
        let modes = half[1..n / 2].iter().map(|v| v * scale).collect();
        SpectralField { modes }
    }

    /// max_j |u(x_j)|.
    pub fn sup_norm(&self) -> f64 {
        self.values.iter().fold(0.0f64, |a, v| a.max(v.abs()))
    }

    /// ((1/N) sum_j |u_j|^p)^{1/p} for finite p > 0.
    pub fn lp_norm(&self, p: f64) -> Result<f64> {
        if !(p > 0.0) || !p.is_finite() {
            return Err(Error::InvalidExponent(p));
        }
        let n = self.values.len() as f64;
        let s = if p == 1.0 {
            self.values.iter().map(|v| v.abs()).sum::<f64>()
        } else if p == 2.0 {
            self.values.iter().map(|v| v * v).sum::<f64>()
        } else {
            self.values.iter().map(|v| v.abs().powf(p)).sum::<f64>()
        };
        Ok((s / n).powf(1.0 / p))
    }

    /// (1/N) sum_j |u_j - v_j|, the discrete L1 distance.
    pub fn l1_distance(&self, other: &GridField) -> f64 {
        assert_eq!(self.len(), other.len(), "grids differ in size");
        self.values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b).abs())
            .sum::<f64>()
            / self.values.len() as f64
    }

    /// Shock-sensitive observables of the field and its spectral derivative.
    pub fn oleinik_observables(&self) -> OleinikObservables {
        let n = self.len();
        let du = self
            .to_spectral()
            .derivative()
            .to_grid(n)
            .expect("derivative keeps the truncation");
        let mut grad_l1 = 0.0;
        let mut grad_plus_sup = 0.0f64;
        for &g in du.values() {
            grad_l1 += g.abs();
            grad_plus_sup = grad_plus_sup.max(g);
        }
        OleinikObservables {
            sup_norm: self.sup_norm(),
            grad_l1: grad_l1 / n as f64,
            grad_plus_sup: grad_plus_sup.max(0.0),
        }
    }
}

/// |u|_Linf, |u_x|_L1 and sup of the positive part of u_x.
///
/// The one-sided derivative bound is what controls shocks from above; all
/// three stay O(1) in a statistically steady state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OleinikObservables {
    pub sup_norm: f64,
    pub grad_l1: f64,
    pub grad_plus_sup: f64,
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::{assert_abs_diff_eq, assert_relative_eq};

    const SQRT2: f64 = std::f64::consts::SQRT_2;

    /// Direct O(N^2) DFT, the independent reference for the fast transform.
    fn dft_mode(values: &[f64], k: usize) -> Complex64 {
        let n = values.len();
        let mut acc = Complex64::new(0.0, 0.0);
        for (j, &v) in values.iter().enumerate() {
            let phase = -TWO_PI * k as f64 * j as f64 / n as f64;
            acc += v * Complex64::new(phase.cos(), phase.sin());
        }
        acc / n as f64
    }

    #[test]
    fn cosine_mode_amplitudes() {
        let g = GridField::from_fn(8, |x| SQRT2 * (TWO_PI * x).cos()).unwrap();
        let s = g.to_spectral();
        assert_eq!(s.truncation(), 3);
        assert_relative_eq!(s.amplitude(1).re, SQRT2 / 2.0, epsilon = 1e-12);
        assert_abs_diff_eq!(s.amplitude(1).im, 0.0, epsilon = 1e-12);
        assert_relative_eq!(s.amplitude(-1).re, SQRT2 / 2.0, epsilon = 1e-12);
        for k in 2..=3 {
            assert_abs_diff_eq!(s.amplitude(k).norm(), 0.0, epsilon = 1e-12);
        }
        // cross-check against the direct DFT sum
        for k in 1..=3 {
            let direct = dft_mode(g.values(), k as usize);
            assert_abs_diff_eq!((s.amplitude(k) - direct).norm(), 0.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn sine_mode_amplitudes() {
        let g = GridField::from_fn(8, |x| SQRT2 * (TWO_PI * x).sin()).unwrap();
        let s = g.to_spectral();
        assert_abs_diff_eq!(s.amplitude(1).re, 0.0, epsilon = 1e-12);
        assert_relative_eq!(s.amplitude(1).im, -SQRT2 / 2.0, epsilon = 1e-12);
        assert_relative_eq!(s.amplitude(-1).im, SQRT2 / 2.0, epsilon = 1e-12);
    }

    #[test]
    fn zero_grid_zero_modes() {
        let s = GridField::zero(8).unwrap().to_spectral();
        assert!(s.positive_modes().iter().all(|m| m.norm() == 0.0));
    }

    #[test]
    fn grid_from_cosine_modes() {
        let mut s = SpectralField::zero(1).unwrap();
        s.set(1, Complex64::new(SQRT2 / 2.0, 0.0));
        let g = s.to_grid(8).unwrap();
        for (j, &v) in g.values().iter().enumerate() {
            let x = j as f64 / 8.0;
            assert_abs_diff_eq!(v, SQRT2 * (TWO_PI * x).cos(), epsilon = 1e-12);
        }
    }

    #[test]
    fn grid_from_second_harmonic() {
        let mut s = SpectralField::zero(2).unwrap();
        s.set(2, Complex64::new(0.5, 0.0));
        let g = s.to_grid(8).unwrap();
        for (j, &v) in g.values().iter().enumerate() {
            let x = j as f64 / 8.0;
            assert_abs_diff_eq!(v, (2.0 * TWO_PI * x).cos(), epsilon = 1e-12);
        }
    }

    #[test]
    fn empty_modes_give_zero_grid() {
        let s = SpectralField::zero(3).unwrap();
        let g = s.to_grid(16).unwrap();
        assert!(g.values().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn round_trip_band_limited() {
        let g = GridField::from_fn(64, |x| {
            (TWO_PI * x).sin() + 0.3 * (3.0 * TWO_PI * x).cos() - 0.1 * (7.0 * TWO_PI * x).sin()
        })
        .unwrap();
        let back = g.to_spectral().to_grid(64).unwrap();
        for (a, b) in g.values().iter().zip(back.values()) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-10);
        }
    }

    #[test]
    fn sobolev_norms_of_sine() {
        // e_{-1} = sqrt(2) sin(2 pi x): unit L2 norm, first norm (2 pi)^2.
        let s = GridField::from_fn(32, |x| SQRT2 * (TWO_PI * x).sin())
            .unwrap()
            .to_spectral();
        assert_relative_eq!(s.sobolev_norm_sq(0), 1.0, epsilon = 1e-12);
        assert_relative_eq!(s.sobolev_norm_sq(1), TWO_PI * TWO_PI, epsilon = 1e-10);
        assert_eq!(SpectralField::zero(4).unwrap().sobolev_norm_sq(3), 0.0);
    }

    #[test]
    fn sobolev_scaling_is_quadratic() {
        let s = GridField::from_fn(32, |x| (TWO_PI * x).sin() + 0.2 * (2.0 * TWO_PI * x).cos())
            .unwrap()
            .to_spectral();
        let c = 3.5;
        for m in 0..3 {
            assert_relative_eq!(
                s.scaled(c).sobolev_norm_sq(m),
                c * c * s.sobolev_norm_sq(m),
                max_relative = 1e-14
            );
        }
    }

    #[test]
    fn derivative_consistency() {
        let s = GridField::from_fn(64, |x| {
            (TWO_PI * x).sin() + 0.4 * (5.0 * TWO_PI * x).cos()
        })
        .unwrap()
        .to_spectral();
        let ds = s.derivative();
        for m in 0..3 {
            assert_relative_eq!(
                s.sobolev_norm_sq(m + 1),
                ds.sobolev_norm_sq(m),
                max_relative = 1e-13
            );
        }
    }

    #[test]
    fn negative_order_diagnostic() {
        let s = GridField::from_fn(16, |x| SQRT2 * (TWO_PI * x).sin())
            .unwrap()
            .to_spectral();
        assert_relative_eq!(s.sobolev_norm_sq(-1), 1.0 / (TWO_PI * TWO_PI), epsilon = 1e-12);
    }

    #[test]
    fn oleinik_of_sine() {
        let n = 256;
        let g = GridField::from_fn(n, |x| SQRT2 * (TWO_PI * x).sin()).unwrap();
        let obs = g.oleinik_observables();
        assert_relative_eq!(obs.sup_norm, SQRT2, epsilon = 1e-12);
        // continuum value of |u_x|_L1 is 4 sqrt(2); grid error is O(N^-2)
        assert_abs_diff_eq!(obs.grad_l1, 4.0 * SQRT2, epsilon = 40.0 / (n * n) as f64);
        assert_relative_eq!(obs.grad_plus_sup, TWO_PI * SQRT2, epsilon = 1e-10);
    }

    #[test]
    fn oleinik_of_zero_and_reflection() {
        let z = GridField::zero(16).unwrap().oleinik_observables();
        assert_eq!((z.sup_norm, z.grad_l1, z.grad_plus_sup), (0.0, 0.0, 0.0));

        let n = 256;
        let plus = GridField::from_fn(n, |x| SQRT2 * (TWO_PI * x).sin()).unwrap();
        let minus = GridField::from_fn(n, |x| -SQRT2 * (TWO_PI * x).sin()).unwrap();
        let (op, om) = (plus.oleinik_observables(), minus.oleinik_observables());
        assert_relative_eq!(op.sup_norm, om.sup_norm, epsilon = 1e-12);
        assert_relative_eq!(op.grad_l1, om.grad_l1, epsilon = 1e-12);
        assert_relative_eq!(om.grad_plus_sup, TWO_PI * SQRT2, epsilon = 1e-10);
    }

    #[test]
    fn lp_norms() {
        let g = GridField::from_fn(64, |x| SQRT2 * (TWO_PI * x).sin()).unwrap();
        assert_relative_eq!(g.lp_norm(2.0).unwrap(), 1.0, epsilon = 1e-12);
        assert_eq!(GridField::zero(8).unwrap().lp_norm(0.7).unwrap(), 0.0);

        let alternating = GridField::new(vec![1.0, -1.0, 1.0, -1.0, 1.0, -1.0, 1.0, -1.0]).unwrap();
        assert_relative_eq!(alternating.lp_norm(4.0).unwrap(), 1.0, epsilon = 1e-14);

        assert!(matches!(
            g.lp_norm(0.0),
            Err(Error::InvalidExponent(_))
        ));
        assert!(matches!(
            g.lp_norm(f64::INFINITY),
            Err(Error::InvalidExponent(_))
        ));
    }

    #[test]
    fn parseval_links_grid_and_modes() {
        let g = GridField::from_fn(128, |x| {
            0.7 * (TWO_PI * x).sin() - 0.2 * (4.0 * TWO_PI * x).cos() + 0.05 * (11.0 * TWO_PI * x).sin()
        })
        .unwrap();
        let l2 = g.lp_norm(2.0).unwrap();
        assert_relative_eq!(l2 * l2, g.to_spectral().sobolev_norm_sq(0), epsilon = 1e-10);
    }

    #[test]
    fn rejects_bad_grids() {
        assert!(matches!(
            GridField::new(vec![0.0; 12]),
            Err(Error::GridSize(12))
        ));
        assert!(matches!(
            GridField::new(vec![0.0, 0.0]),
            Err(Error::GridSize(2))
        ));
        assert!(matches!(
            GridField::new(vec![1.0, 1.0, 1.0, 1.0]),
            Err(Error::NonzeroMean { .. })
        ));
        // mean removal fixes the offset
        assert!(GridField::zero_mean(vec![1.0, 1.0, 1.0, 1.0]).is_ok());
    }

    #[test]
    fn to_grid_rejects_undersized_grid() {
        let s = SpectralField::zero(10).unwrap();
        assert!(matches!(s.to_grid(16), Err(Error::Resolution { .. })));
        assert!(s.to_grid(32).is_ok());
    }

    #[test]
    fn hermitian_accessor() {
        let mut s = SpectralField::zero(2).unwrap();
        s.set(1, Complex64::new(0.3, -0.7));
        assert_eq!(s.amplitude(-1), Complex64::new(0.3, 0.7));
        assert_eq!(s.amplitude(0), Complex64::new(0.0, 0.0));
        assert_eq!(s.amplitude(5), Complex64::new(0.0, 0.0));
    }

    #[test]
    fn shifted_grid_samples_cell_centers() {
        let mut s = SpectralField::zero(1).unwrap();
        s.set(1, Complex64::new(SQRT2 / 2.0, 0.0));
        let g = s.to_grid_shifted(8, 0.5).unwrap();
        for (j, &v) in g.values().iter().enumerate() {
            let x = (j as f64 + 0.5) / 8.0;
            assert_abs_diff_eq!(v, SQRT2 * (TWO_PI * x).cos(), epsilon = 1e-12);
        }
    }
}
