//! Ensemble-and-time averaged statistics: the double-bracket average,
//! structure functions, layer-averaged energy spectra, power-law fits,
//! breakpoint detection and mixing distances.
//!
//! All ensemble reductions go through [`MeanAccumulator`], an associative,
//! commutative merge, so the reduction order never changes a result beyond
//! round-off.

use crate::error::{Error, Result};
use crate::field::{GridField, SpectralField};
use crate::stream::{ScalarObservable, TrajectoryStream};

/// Parameters of the double-bracket average: expectation over the ensemble
/// combined with a time average over [t_start, t_start + sigma].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BracketSpec {
    pub t_start: f64,
    pub sigma: f64,
    pub ensemble_size: usize,
}

impl BracketSpec {
    pub const DEFAULT_SIGMA_MIN: f64 = 1.0;

    pub fn new(t_start: f64, sigma: f64, ensemble_size: usize) -> Result<Self> {
        Self::with_sigma_min(t_start, sigma, ensemble_size, Self::DEFAULT_SIGMA_MIN)
    }

    pub fn with_sigma_min(
        t_start: f64,
        sigma: f64,
        ensemble_size: usize,
        sigma_min: f64,
    ) -> Result<Self> {
        if !(t_start >= 1.0) || !(sigma >= sigma_min) || ensemble_size == 0 {
            return Err(Error::WindowSpec {
                t_start,
                sigma,
                sigma_min,
            });
        }
        Ok(Self {
            t_start,
            sigma,
            ensemble_size,
        })
    }

    pub fn window(&self) -> (f64, f64) {
        (self.t_start, self.t_start + self.sigma)
    }
}

/// Streaming mean/variance accumulator with an exact merge.
///
/// `merge` is associative and commutative up to floating round-off, so
/// ensemble reductions can run in any order.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct MeanAccumulator {
    n: u64,
    mean: f64,
    m2: f64,
}

impl MeanAccumulator {
    pub fn push(&mut self, x: f64) {
        self.n += 1;
        let d = x - self.mean;
        self.mean += d / self.n as f64;
        self.m2 += d * (x - self.mean);
    }

    pub fn merge(self, other: Self) -> Self {
        if self.n == 0 {
            return other;
        }
        if other.n == 0 {
            return self;
        }
        let n = self.n + other.n;
        let d = other.mean - self.mean;
        let mean = self.mean + d * other.n as f64 / n as f64;
        let m2 = self.m2 + other.m2 + d * d * (self.n as f64 * other.n as f64) / n as f64;
        Self { n, mean, m2 }
    }

    pub fn count(&self) -> u64 {
        self.n
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    /// Unbiased sample variance.
    pub fn variance(&self) -> f64 {
        if self.n < 2 {
            0.0
        } else {
            self.m2 / (self.n - 1) as f64
        }
    }

    /// Standard error of the mean.
    pub fn stderr(&self) -> f64 {
        if self.n < 2 {
            0.0
        } else {
            (self.variance() / self.n as f64).sqrt()
        }
    }
}

/// Time average of a sampled series over [lo, hi] by the trapezoid rule,
/// with linear interpolation onto the window edges.
pub fn time_average(series: &[(f64, f64)], lo: f64, hi: f64) -> Result<f64> {
    if series.is_empty() {
        return Err(Error::WindowCoverage {
            t_first: f64::NAN,
            t_last: f64::NAN,
            lo,
            hi,
        });
    }
    let t_first = series.first().unwrap().0;
    let t_last = series.last().unwrap().0;
    if t_first > lo + 1e-9 || t_last < hi - 1e-9 {
        return Err(Error::WindowCoverage {
            t_first,
            t_last,
            lo,
            hi,
        });
    }
    let value_at = |t: f64| -> f64 {
        match series.binary_search_by(|probe| probe.0.partial_cmp(&t).unwrap()) {
            Ok(i) => series[i].1,
            Err(i) => {
                if i == 0 {
                    series[0].1
                } else if i == series.len() {
                    series[series.len() - 1].1
                } else {
                    let (t0, v0) = series[i - 1];
                    let (t1, v1) = series[i];
                    v0 + (v1 - v0) * (t - t0) / (t1 - t0)
                }
            }
        }
    };
    let mut integral = 0.0;
    let mut t_prev = lo;
    let mut v_prev = value_at(lo);
    for &(t, v) in series.iter().filter(|&&(t, _)| t > lo && t < hi) {
        integral += 0.5 * (v + v_prev) * (t - t_prev);
        t_prev = t;
        v_prev = v;
    }
    let v_hi = value_at(hi);
    integral += 0.5 * (v_hi + v_prev) * (hi - t_prev);
    Ok(integral / (hi - lo))
}

/// The double-bracket average of a scalar observable over an ensemble of
/// streams: time integral per trajectory, then the ensemble mean with its
/// standard error (ensemble spread over sqrt(members)).
pub fn bracket_average(
    streams: &[TrajectoryStream],
    observable: ScalarObservable,
    spec: &BracketSpec,
) -> Result<(f64, f64)> {
    let (lo, hi) = spec.window();
    let mut acc = MeanAccumulator::default();
    for stream in streams {
        let series = stream.series(observable)?;
        acc.push(time_average(&series, lo, hi)?);
    }
    Ok((acc.mean(), acc.stderr()))
}

/// Mean p-th power of grid increments at shift l = r/N cells, averaged over
/// the given snapshots.
///
/// The shift must be an exact grid rotation; no interpolation is performed.
pub fn structure_function(snapshots: &[&GridField], p: f64, l: f64) -> Result<f64> {
    if snapshots.is_empty() {
        return Err(Error::WindowCoverage {
            t_first: f64::NAN,
            t_last: f64::NAN,
            lo: 0.0,
            hi: 0.0,
        });
    }
    let n = snapshots[0].len();
    let r = shift_cells(l, n)?;
    let mut acc = 0.0;
    for snap in snapshots {
        acc += increment_moment(snap.values(), r, p);
    }
    Ok(acc / snapshots.len() as f64)
}

/// Check that l is an integer multiple of 1/N and return the cell shift.
pub fn shift_cells(l: f64, n: usize) -> Result<usize> {
    let r = l * n as f64;
    let rounded = r.round();
    if (r - rounded).abs() > 1e-9 || rounded < 1.0 || rounded > n as f64 / 2.0 {
        return Err(Error::ShiftAlignment { l, n });
    }
    Ok(rounded as usize)
}

/// (1/N) sum_j |u_{j+r} - u_j|^p with periodic indexing.
pub fn increment_moment(values: &[f64], r: usize, p: f64) -> f64 {
    let n = values.len();
    let mut acc = 0.0;
    if p == 2.0 {
        for j in 0..n {
            let d = values[(j + r) % n] - values[j];
            acc += d * d;
        }
    } else if p == 1.0 {
        for j in 0..n {
            acc += (values[(j + r) % n] - values[j]).abs();
        }
    } else if p == 0.5 {
        for j in 0..n {
            acc += (values[(j + r) % n] - values[j]).abs().sqrt();
        }
    } else if p == 3.0 {
        for j in 0..n {
            let d = (values[(j + r) % n] - values[j]).abs();
            acc += d * d * d;
        }
    } else {
        for j in 0..n {
            acc += (values[(j + r) % n] - values[j]).abs().powf(p);
        }
    }
    acc / n as f64
}

/// Spectral route to the second-order increment moment at shift l:
/// 4 sum_n sin^2(pi n l) |u_n|^2 over both signs of n.
pub fn structure_sq_spectral(spectrum: &SpectralField, l: f64) -> f64 {
    let mut acc = 0.0;
    for (i, m) in spectrum.positive_modes().iter().enumerate() {
        let s = (std::f64::consts::PI * (i + 1) as f64 * l).sin();
        acc += s * s * m.norm_sqr();
    }
    8.0 * acc // both signs of n carry |u_n|^2 each
}

/// Mean of |u_n|^2 / 2 over the integer layer k/M <= |n| <= Mk.
pub fn energy_layer(spectrum: &SpectralField, k: usize, m_layer: f64) -> Result<f64> {
    let (lo, hi) = layer_bounds(k, m_layer);
    if hi > spectrum.truncation() {
        return Err(Error::LayerRange {
            lo,
            hi,
            truncation: spectrum.truncation(),
        });
    }
    let sum: f64 = (lo..=hi).map(|n| spectrum.mode_energy(n)).sum();
    // mode_energy counts both signs; the layer cardinality does too
    let cardinality = 2 * (hi - lo + 1);
    Ok(0.5 * sum / cardinality as f64)
}

/// Integer bounds [ceil(k/M), floor(Mk)] of the layer around k.
pub fn layer_bounds(k: usize, m_layer: f64) -> (usize, usize) {
    assert!(k >= 1 && m_layer > 1.0, "need k >= 1 and M > 1");
    let lo = (k as f64 / m_layer).ceil().max(1.0) as usize;
    let hi = (m_layer * k as f64).floor() as usize;
    (lo, hi)
}

/// One point of a power-law fit: x, y and the standard error of y (0 when
/// unknown).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitPoint {
    pub x: f64,
    pub y: f64,
    pub stderr: f64,
}

/// Result of a log-log regression.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PowerLawFit {
    pub exponent: f64,
    pub exponent_stderr: f64,
    pub prefactor: f64,
    /// Root-mean-square residual in log space.
    pub residual_rms: f64,
    pub n_points: usize,
    pub window: (f64, f64),
}

/// Weighted least squares of log y against log x over points inside the
/// window. Weights come from the relative errors when every point carries
/// one; otherwise the fit is unweighted and the exponent error comes from
/// the residuals.
pub fn fit_power_law(points: &[FitPoint], window: (f64, f64)) -> Result<PowerLawFit> {
    let inside: Vec<&FitPoint> = points
        .iter()
        .filter(|p| p.x >= window.0 - 1e-12 && p.x <= window.1 + 1e-12)
        .collect();
    if inside.len() < 4 || inside.iter().any(|p| !(p.x > 0.0) || !(p.y > 0.0)) {
        return Err(Error::FitDomain {
            min: 4,
            found: inside.iter().filter(|p| p.x > 0.0 && p.y > 0.0).count(),
        });
    }
    let weighted = inside.iter().all(|p| p.stderr > 0.0);
    loglog_fit_weighted(
        &inside
            .iter()
            .map(|p| {
                let w = if weighted {
                    let rel = (p.stderr / p.y).max(1e-12);
                    1.0 / (rel * rel)
                } else {
                    1.0
                };
                (p.x.ln(), p.y.ln(), w)
            })
            .collect::<Vec<_>>(),
        weighted,
        window,
    )
}

/// Unweighted log-log slope for short series (viscosity sweeps have as few
/// as three points); exponent error from the fit residuals.
pub fn loglog_slope(points: &[(f64, f64)]) -> Result<PowerLawFit> {
    if points.len() < 2 || points.iter().any(|&(x, y)| !(x > 0.0) || !(y > 0.0)) {
        return Err(Error::FitDomain {
            min: 2,
            found: points.iter().filter(|&&(x, y)| x > 0.0 && y > 0.0).count(),
        });
    }
    let logged: Vec<(f64, f64, f64)> = points.iter().map(|&(x, y)| (x.ln(), y.ln(), 1.0)).collect();
    let xs: Vec<f64> = points.iter().map(|p| p.0).collect();
    let window = (
        xs.iter().cloned().fold(f64::INFINITY, f64::min),
        xs.iter().cloned().fold(0.0f64, f64::max),
    );
    loglog_fit_weighted(&logged, false, window)
}

fn loglog_fit_weighted(
    pts: &[(f64, f64, f64)],
    weighted: bool,
    window: (f64, f64),
) -> Result<PowerLawFit> {
    let n = pts.len();
    let sw: f64 = pts.iter().map(|p| p.2).sum();
    let sx: f64 = pts.iter().map(|p| p.2 * p.0).sum();
    let sy: f64 = pts.iter().map(|p| p.2 * p.1).sum();
    let sxx: f64 = pts.iter().map(|p| p.2 * p.0 * p.0).sum();
    let sxy: f64 = pts.iter().map(|p| p.2 * p.0 * p.1).sum();
    let delta = sw * sxx - sx * sx;
    if delta.abs() < 1e-300 {
        return Err(Error::FitDomain { min: 2, found: n });
    }
    let slope = (sw * sxy - sx * sy) / delta;
    let intercept = (sy * sxx - sx * sxy) / delta;
    let chi2: f64 = pts
        .iter()
        .map(|p| {
            let r = p.1 - (intercept + slope * p.0);
            p.2 * r * r
        })
        .sum();
    let dof = (n as f64 - 2.0).max(1.0);
    let stderr = if weighted {
        // scale by sqrt(reduced chi^2) when the scatter exceeds the quoted errors
        (sw / delta).sqrt() * (chi2 / dof).max(1.0).sqrt()
    } else {
        let x_mean = sx / sw;
        let sxx_c: f64 = pts.iter().map(|p| (p.0 - x_mean).powi(2)).sum();
        (chi2 / dof / sxx_c).sqrt()
    };
    let residual_rms = (pts
        .iter()
        .map(|p| {
            let r = p.1 - (intercept + slope * p.0);
            r * r
        })
        .sum::<f64>()
        / n as f64)
        .sqrt();
    Ok(PowerLawFit {
        exponent: slope,
        exponent_stderr: stderr,
        prefactor: intercept.exp(),
        residual_rms,
        n_points: n,
        window,
    })
}

/// Breakpoint threshold for [`dissipation_breakpoint`]: the local slope must
/// fall below `slope` over a band of width factor `band` around k.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BreakThreshold {
    pub slope: f64,
    pub band: f64,
}

impl Default for BreakThreshold {
    fn default() -> Self {
        Self {
            slope: -4.0,
            band: 2.0,
        }
    }
}

/// First k at which the local log-log slope of the spectrum drops below the
/// threshold, the slope being fitted over the band [k/sqrt(band), k sqrt(band)].
///
/// `spectrum` holds (k, E_k) pairs sorted in k with E_k > 0.
pub fn dissipation_breakpoint(spectrum: &[(f64, f64)], threshold: BreakThreshold) -> Result<f64> {
    let half = threshold.band.sqrt();
    let k_max = spectrum.last().map(|p| p.0).unwrap_or(0.0);
    for &(k, _) in spectrum {
        let (lo, hi) = (k / half, k * half);
        if hi > k_max {
            break;
        }
        let band: Vec<(f64, f64)> = spectrum
            .iter()
            .filter(|&&(x, y)| x >= lo && x <= hi && y > 0.0)
            .cloned()
            .collect();
        if band.len() < 3 {
            continue;
        }
        let fit = loglog_slope(&band)?;
        if fit.exponent < threshold.slope {
            return Ok(k);
        }
    }
    Err(Error::NoBreakpoint {
        k_max: k_max as usize,
    })
}

/// Integrated autocorrelation time of a uniformly sampled series, in units
/// of the sampling interval. Used to report the effective number of
/// independent time samples inside a bracket window.
pub fn integrated_autocorrelation(series: &[f64]) -> f64 {
    let n = series.len();
    if n < 8 {
        return 1.0;
    }
    let mean = series.iter().sum::<f64>() / n as f64;
    let var: f64 = series.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n as f64;
    if var == 0.0 {
        return 1.0;
    }
    let mut tau = 1.0;
    for lag in 1..n / 4 {
        let c: f64 = (0..n - lag)
            .map(|i| (series[i] - mean) * (series[i + lag] - mean))
            .sum::<f64>()
            / (n - lag) as f64;
        let rho = c / var;
        if rho < 0.05 {
            break;
        }
        tau += 2.0 * rho;
    }
    tau
}

/// Per-time ensemble mean and standard error of a scalar observable,
/// requiring all member streams to share the sampling grid within `tol`.
pub fn ensemble_moment_series(
    streams: &[TrajectoryStream],
    observable: ScalarObservable,
    tol: f64,
) -> Result<Vec<(f64, f64, f64)>> {
    let first = streams
        .first()
        .ok_or(Error::FitDomain { min: 1, found: 0 })?;
    let base = first.series(observable)?;
    let mut accs: Vec<MeanAccumulator> = vec![MeanAccumulator::default(); base.len()];
    for stream in streams {
        let series = stream.series(observable)?;
        if series.len() != base.len() {
            return Err(Error::TimeAlignment {
                a: base.len() as f64,
                b: series.len() as f64,
                tol: 0.0,
            });
        }
        for (i, &(t, v)) in series.iter().enumerate() {
            if (t - base[i].0).abs() > tol {
                return Err(Error::TimeAlignment {
                    a: t,
                    b: base[i].0,
                    tol,
                });
            }
            accs[i].push(v);
        }
    }
    Ok(base
        .iter()
        .zip(&accs)
        .map(|(&(t, _), acc)| (t, acc.mean(), acc.stderr()))
        .collect())
}

/// |E_A f - E_B f| per time with the joint standard error, for two
/// independently forced ensembles.
pub fn moment_distance(
    ens_a: &[TrajectoryStream],
    ens_b: &[TrajectoryStream],
    observable: ScalarObservable,
    tol: f64,
) -> Result<Vec<(f64, f64, f64)>> {
    let a = ensemble_moment_series(ens_a, observable, tol)?;
    let b = ensemble_moment_series(ens_b, observable, tol)?;
    if a.len() != b.len() {
        return Err(Error::TimeAlignment {
            a: a.len() as f64,
            b: b.len() as f64,
            tol: 0.0,
        });
    }
    a.iter()
        .zip(&b)
        .map(|(&(ta, ma, sa), &(tb, mb, sb))| {
            if (ta - tb).abs() > tol {
                return Err(Error::TimeAlignment { a: ta, b: tb, tol });
            }
            Ok((ta, (ma - mb).abs(), (sa * sa + sb * sb).sqrt()))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::TWO_PI;
    use crate::stream::{ProbeSet, Sample};
    use approx::{assert_abs_diff_eq, assert_relative_eq};

    fn stream_of(member: u64, samples: Vec<(f64, f64)>) -> TrajectoryStream {
        let probes = ProbeSet::scalars_only(vec![0]);
        let mut s = TrajectoryStream::new(member, &probes);
        s.samples = samples
            .into_iter()
            .map(|(t, v)| Sample {
                t,
                sobolev_sq: vec![v],
                oleinik: None,
                l1_norm: None,
                low_mode_energy: vec![],
            })
            .collect();
        s
    }

    #[test]
    fn bracket_of_constant_is_exact() {
        let spec = BracketSpec::new(1.0, 2.0, 3).unwrap();
        let streams: Vec<_> = (0..3)
            .map(|m| stream_of(m, (0..40).map(|i| (i as f64 * 0.1, 4.5)).collect()))
            .collect();
        let (mean, se) = bracket_average(&streams, ScalarObservable::SobolevSq(0), &spec).unwrap();
        assert_relative_eq!(mean, 4.5, epsilon = 1e-12);
        assert_abs_diff_eq!(se, 0.0, epsilon = 1e-12);
    }

    #[test]
    fn bracket_of_linear_ramp() {
        // f(t) = t over [1, 3]: mean is 2
        let spec = BracketSpec::new(1.0, 2.0, 1).unwrap();
        let streams = vec![stream_of(0, (0..61).map(|i| (i as f64 * 0.05, i as f64 * 0.05)).collect())];
        let (mean, _) = bracket_average(&streams, ScalarObservable::SobolevSq(0), &spec).unwrap();
        assert_relative_eq!(mean, 2.0, epsilon = 1e-10);
    }

    #[test]
    fn bracket_is_linear() {
        let spec = BracketSpec::new(1.0, 1.0, 2).unwrap();
        let mk = |scale: f64, offset: f64| -> Vec<TrajectoryStream> {
            (0..2)
                .map(|m| {
                    stream_of(
                        m,
                        (0..50)
                            .map(|i| {
                                let t = i as f64 * 0.05;
                                (t, scale * (t * 12.3 + m as f64).sin() + offset)
                            })
                            .collect(),
                    )
                })
                .collect()
        };
        let f = mk(1.0, 0.0);
        let g = mk(0.0, 1.0);
        let combo = mk(2.5, -0.5);
        let obs = ScalarObservable::SobolevSq(0);
        let (bf, _) = bracket_average(&f, obs, &spec).unwrap();
        let (bg, _) = bracket_average(&g, obs, &spec).unwrap();
        let (bc, _) = bracket_average(&combo, obs, &spec).unwrap();
        assert_relative_eq!(bc, 2.5 * bf - 0.5 * bg, epsilon = 1e-12);
    }

    #[test]
    fn bracket_rejects_uncovered_window() {
        let spec = BracketSpec::new(1.0, 2.0, 1).unwrap();
        let streams = vec![stream_of(0, (0..10).map(|i| (i as f64 * 0.1, 1.0)).collect())];
        assert!(matches!(
            bracket_average(&streams, ScalarObservable::SobolevSq(0), &spec),
            Err(Error::WindowCoverage { .. })
        ));
    }

    #[test]
    fn window_spec_validation() {
        assert!(BracketSpec::new(0.5, 2.0, 1).is_err());
        assert!(BracketSpec::new(2.0, 0.5, 1).is_err());
        assert!(BracketSpec::new(2.0, 2.0, 0).is_err());
    }

    #[test]
    fn structure_function_examples() {
        let zero = GridField::zero(16).unwrap();
        assert_eq!(structure_function(&[&zero], 2.0, 0.25).unwrap(), 0.0);

        // u(x + 1/2) = -u(x) for the first harmonic: increments are -2u
        let g = GridField::from_fn(64, |x| std::f64::consts::SQRT_2 * (TWO_PI * x).sin()).unwrap();
        let s = structure_function(&[&g], 2.0, 0.5).unwrap();
        assert_relative_eq!(s, 4.0, epsilon = 1e-12);
    }

    #[test]
    fn structure_function_rejects_misaligned_shift() {
        let g = GridField::zero(16).unwrap();
        assert!(matches!(
            structure_function(&[&g], 1.0, 0.1),
            Err(Error::ShiftAlignment { .. })
        ));
    }

    #[test]
    fn spectral_and_physical_increment_routes_agree() {
        let g = GridField::from_fn(128, |x| {
            (TWO_PI * x).sin() - 0.4 * (3.0 * TWO_PI * x).cos() + 0.1 * (9.0 * TWO_PI * x).sin()
        })
        .unwrap();
        let s = g.to_spectral();
        for &k in &[2usize, 4, 8, 16] {
            let l = 1.0 / k as f64;
            let phys = structure_function(&[&g], 2.0, l).unwrap();
            let spec = structure_sq_spectral(&s, l);
            assert_relative_eq!(phys, spec, epsilon = 1e-8);
        }
    }

    #[test]
    fn energy_layer_examples() {
        // e_1: amplitudes sqrt(2)/2 at +-1; layer J_1 with M = 2 is {+-1, +-2}
        let mut s = SpectralField::zero(4).unwrap();
        s.set(1, num_complex::Complex64::new(std::f64::consts::SQRT_2 / 2.0, 0.0));
        assert_relative_eq!(energy_layer(&s, 1, 2.0).unwrap(), 1.0 / 8.0, epsilon = 1e-14);

        let zero = SpectralField::zero(8).unwrap();
        assert_eq!(energy_layer(&zero, 2, 2.0).unwrap(), 0.0);

        assert!(matches!(
            energy_layer(&zero, 5, 2.0),
            Err(Error::LayerRange { .. })
        ));
    }

    #[test]
    fn energy_layer_matches_brute_force() {
        // |u_n|^2 = n^{-2} split over both signs
        let k = 64;
        let mut s = SpectralField::zero(k).unwrap();
        for n in 1..=k {
            let amp = (0.5f64).sqrt() / n as f64;
            s.set(n, num_complex::Complex64::new(amp, 0.0));
        }
        for &kk in &[1usize, 3, 7, 20] {
            let (lo, hi) = layer_bounds(kk, 2.0);
            let brute: f64 = (lo..=hi)
                .flat_map(|n| [n, n])
                .map(|n| 0.5 * s.amplitude(n as i64).norm_sqr())
                .sum::<f64>()
                / (2 * (hi - lo + 1)) as f64;
            assert_relative_eq!(energy_layer(&s, kk, 2.0).unwrap(), brute, epsilon = 1e-12);
        }
    }

    #[test]
    fn disjoint_layers_recover_total_energy() {
        // dyadic layers [2^i, 2^{i+1}) partition the band; layer means times
        // cardinalities must add up to half the squared L2 norm
        let k = 64;
        let mut s = SpectralField::zero(k).unwrap();
        for n in 1..=k {
            let z = crate::forcing::rng::standard_normal(3, 0, n as u64, 1) / n as f64;
            s.set(n, num_complex::Complex64::new(z, 0.3 * z));
        }
        let total = 0.5 * s.sobolev_norm_sq(0);
        let mut recovered = 0.0;
        let mut lo = 1usize;
        while lo <= k {
            let hi = (2 * lo - 1).min(k);
            let cardinality = 2 * (hi - lo + 1);
            let mean: f64 = (lo..=hi).map(|n| 0.5 * s.mode_energy(n)).sum::<f64>()
                / cardinality as f64;
            recovered += mean * cardinality as f64;
            lo = hi + 1;
        }
        assert_relative_eq!(total, recovered, epsilon = 1e-12);
    }

    #[test]
    fn fit_recovers_exact_power_law() {
        let points: Vec<FitPoint> = (1..=20)
            .map(|i| {
                let x = i as f64;
                FitPoint {
                    x,
                    y: x.powi(-2),
                    stderr: 0.0,
                }
            })
            .collect();
        let fit = fit_power_law(&points, (1.0, 20.0)).unwrap();
        assert_relative_eq!(fit.exponent, -2.0, epsilon = 1e-10);
        assert_abs_diff_eq!(fit.exponent_stderr, 0.0, epsilon = 1e-10);
        assert_relative_eq!(fit.prefactor, 1.0, epsilon = 1e-8);
    }

    #[test]
    fn fit_recovers_noisy_slope_within_errors() {
        let points: Vec<FitPoint> = (1..=40)
            .map(|i| {
                let x = 1.0 + i as f64;
                let noise = 1.0 + 0.01 * crate::forcing::rng::standard_normal(5, 0, i as u64, 0);
                FitPoint {
                    x,
                    y: 3.0 * x * noise,
                    stderr: 0.01 * 3.0 * x,
                }
            })
            .collect();
        let fit = fit_power_law(&points, (1.0, 50.0)).unwrap();
        assert!(
            (fit.exponent - 1.0).abs() < 3.0 * fit.exponent_stderr.max(1e-3),
            "slope {} +- {}",
            fit.exponent,
            fit.exponent_stderr
        );
        assert!((fit.prefactor - 3.0).abs() < 0.1);
    }

    #[test]
    fn fit_handles_fractional_exponent() {
        let points: Vec<FitPoint> = (1..=16)
            .map(|i| {
                let x = i as f64 / 16.0;
                FitPoint {
                    x,
                    y: x.sqrt(),
                    stderr: 0.0,
                }
            })
            .collect();
        let fit = fit_power_law(&points, (0.0, 1.0)).unwrap();
        assert_relative_eq!(fit.exponent, 0.5, epsilon = 1e-10);
    }

    #[test]
    fn fit_domain_errors() {
        let few: Vec<FitPoint> = (1..=3)
            .map(|i| FitPoint {
                x: i as f64,
                y: i as f64,
                stderr: 0.0,
            })
            .collect();
        assert!(matches!(
            fit_power_law(&few, (0.0, 10.0)),
            Err(Error::FitDomain { .. })
        ));
        let bad = vec![
            FitPoint { x: 1.0, y: 1.0, stderr: 0.0 },
            FitPoint { x: 2.0, y: -1.0, stderr: 0.0 },
            FitPoint { x: 3.0, y: 1.0, stderr: 0.0 },
            FitPoint { x: 4.0, y: 1.0, stderr: 0.0 },
        ];
        assert!(matches!(
            fit_power_law(&bad, (0.0, 10.0)),
            Err(Error::FitDomain { .. })
        ));
    }

    #[test]
    fn breakpoint_on_synthetic_spectrum() {
        let spectrum: Vec<(f64, f64)> = (1..=400)
            .map(|k| {
                let k = k as f64;
                let e = if k <= 100.0 {
                    k.powi(-2)
                } else {
                    100f64.powi(-2) * (k / 100.0).powi(-10)
                };
                (k, e)
            })
            .collect();
        let k_star = dissipation_breakpoint(&spectrum, BreakThreshold::default()).unwrap();
        assert!(
            (50.0..=200.0).contains(&k_star),
            "breakpoint {k_star} outside one band of 100"
        );
    }

    #[test]
    fn breakpoint_requires_a_cutoff() {
        let spectrum: Vec<(f64, f64)> = (1..=400).map(|k| (k as f64, (k as f64).powi(-2))).collect();
        assert!(matches!(
            dissipation_breakpoint(&spectrum, BreakThreshold::default()),
            Err(Error::NoBreakpoint { .. })
        ));
    }

    #[test]
    fn merge_order_does_not_matter() {
        let values: Vec<f64> = (0..64)
            .map(|i| crate::forcing::rng::standard_normal(8, 0, 0, i) * 3.0 + 1.0)
            .collect();
        let mut forward = MeanAccumulator::default();
        for &v in &values {
            forward.push(v);
        }
        // pairwise merge in a shuffled order
        let mut accs: Vec<MeanAccumulator> = values
            .iter()
            .map(|&v| {
                let mut a = MeanAccumulator::default();
                a.push(v);
                a
            })
            .collect();
        // deterministic shuffle
        for i in (1..accs.len()).rev() {
            let j = (crate::forcing::rng::uniform(9, 0, 0, i as u64) * (i + 1) as f64) as usize;
            accs.swap(i, j);
        }
        let merged = accs
            .into_iter()
            .fold(MeanAccumulator::default(), MeanAccumulator::merge);
        assert_relative_eq!(forward.mean(), merged.mean(), epsilon = 1e-12);
        assert_relative_eq!(forward.stderr(), merged.stderr(), epsilon = 1e-12);
        assert_eq!(forward.count(), merged.count());
    }

    #[test]
    fn identical_ensembles_have_zero_distance() {
        let mk = || {
            (0..4)
                .map(|m| stream_of(m, (0..30).map(|i| (i as f64 * 0.1, (m as f64 + 1.0) * 0.5)).collect()))
                .collect::<Vec<_>>()
        };
        let a = mk();
        let b = mk();
        let d = moment_distance(&a, &b, ScalarObservable::SobolevSq(0), 1e-9).unwrap();
        assert!(d.iter().all(|&(_, dist, _)| dist == 0.0));
    }

    #[test]
    fn misaligned_grids_error() {
        let a = vec![stream_of(0, vec![(0.0, 1.0), (0.5, 1.0)])];
        let b = vec![stream_of(0, vec![(0.0, 1.0), (0.7, 1.0)])];
        assert!(matches!(
            moment_distance(&a, &b, ScalarObservable::SobolevSq(0), 1e-3),
            Err(Error::TimeAlignment { .. })
        ));
    }

    #[test]
    fn autocorrelation_of_white_noise_is_short() {
        let series: Vec<f64> = (0..4096)
            .map(|i| crate::forcing::rng::standard_normal(12, 0, 0, i))
            .collect();
        let tau = integrated_autocorrelation(&series);
        assert!(tau < 1.5, "white noise should decorrelate immediately: {tau}");
    }
}
