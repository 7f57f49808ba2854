//! Entropy solutions at zero viscosity: a first-order finite-volume scheme
//! with exact Riemann fluxes for the flux u^2/2.
//!
//! The scheme is monotone under its CFL bound, which buys the discrete
//! maximum principle, total-variation decay and L1 contraction outright.
//! Forcing enters as discrete kicks equal to Wiener increments over each
//! step (or over fixed windows in kicked mode), added after the hyperbolic
//! update.

use crate::error::{Error, Result};
use crate::field::{is_pow2, GridField, SpectralField};
use crate::forcing::ForcingSpec;
use crate::integrator::{ForcingMode, StepSchedule};
use crate::stream::{ProbeSet, Sample, Snapshot, TrajectoryStream};

/// Hard ceiling on the advective CFL number of the scheme.
pub const MAX_CFL: f64 = 0.9;

/// N cell averages on uniform cells of width 1/N; the j-th cell is centered
/// at (j + 1/2)/N.
#[derive(Debug, Clone, PartialEq)]
pub struct CellField {
    averages: Vec<f64>,
    t: f64,
}

impl CellField {
    pub fn new(averages: Vec<f64>, t: f64) -> Result<Self> {
        let n = averages.len();
        if !is_pow2(n) {
            return Err(Error::GridSize(n));
        }
        let mean = averages.iter().sum::<f64>() / n as f64;
        let amp = averages.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        let tol = 1e-12 * amp.max(f64::MIN_POSITIVE);
        if mean.abs() > tol {
            return Err(Error::NonzeroMean { mean, tol });
        }
        Ok(Self { averages, t })
    }

    pub fn zero(n: usize) -> Result<Self> {
        if !is_pow2(n) {
            return Err(Error::GridSize(n));
        }
        Ok(Self {
            averages: vec![0.0; n],
            t: 0.0,
        })
    }

    /// Sample a function at cell centers and remove the mean.
    pub fn from_fn(n: usize, f: impl Fn(f64) -> f64) -> Result<Self> {
        if !is_pow2(n) {
            return Err(Error::GridSize(n));
        }
        let mut averages: Vec<f64> = (0..n)
            .map(|j| f((j as f64 + 0.5) / n as f64))
            .collect();
        let mean = averages.iter().sum::<f64>() / n as f64;
        for v in &mut averages {
            *v -= mean;
        }
        Ok(Self { averages, t: 0.0 })
    }

    pub fn len(&self) -> usize {
        self.averages.len()
    }

    pub fn is_empty(&self) -> bool {
        self.averages.is_empty()
    }

    pub fn averages(&self) -> &[f64] {
        &self.averages
    }

    pub fn t(&self) -> f64 {
        self.t
    }

    pub fn sup_norm(&self) -> f64 {
        self.averages.iter().fold(0.0f64, |a, v| a.max(v.abs()))
    }

    pub fn l1_norm(&self) -> f64 {
        self.averages.iter().map(|v| v.abs()).sum::<f64>() / self.len() as f64
    }

    pub fn l1_distance(&self, other: &CellField) -> f64 {
        assert_eq!(self.len(), other.len(), "cell counts differ");
        self.averages
            .iter()
            .zip(&other.averages)
            .map(|(a, b)| (a - b).abs())
            .sum::<f64>()
            / self.len() as f64
    }

    /// Periodic total variation.
    pub fn total_variation(&self) -> f64 {
        let n = self.len();
        (0..n)
            .map(|j| (self.averages[(j + 1) % n] - self.averages[j]).abs())
            .sum()
    }

    /// Fourier amplitudes of the cell data (truncation N/2 - 1).
    pub fn to_spectral(&self) -> SpectralField {
        // the half-cell phase shift does not matter for any |u_k|-based
        // statistic, so plain sample indexing is used
        GridField::zero_mean(self.averages.clone())
            .expect("cell averages are zero-mean")
            .to_spectral()
    }
}

fn flux(u: f64) -> f64 {
    0.5 * u * u
}

/// Exact interface flux for the Riemann problem (u_left, u_right).
///
/// For the convex flux u^2/2: a shock (u_left > u_right) takes the larger of
/// the two endpoint fluxes, a rarefaction takes the minimum of the flux over
/// [u_left, u_right], which is 0 whenever the fan straddles zero.
pub fn riemann_flux(u_left: f64, u_right: f64) -> f64 {
    if u_left > u_right {
        flux(u_left).max(flux(u_right))
    } else if u_left >= 0.0 {
        flux(u_left)
    } else if u_right <= 0.0 {
        flux(u_right)
    } else {
        0.0
    }
}

/// One conservative update of length `dt`, with an optional kick added after
/// the hyperbolic sub-step. The kick is sampled at cell centers and its mean
/// is removed so conservation is exact.
pub fn step_inviscid(c: &CellField, dt: f64, kick: Option<&GridField>) -> Result<CellField> {
    let n = c.len();
    let bound = MAX_CFL / (n as f64 * c.sup_norm().max(f64::MIN_POSITIVE));
    if !(dt > 0.0) || dt > bound {
        return Err(Error::StepSize {
            dt,
            bound,
            what: "advective CFL bound of the finite-volume scheme".into(),
        });
    }
    let u = &c.averages;
    let lambda = dt * n as f64; // dt / dx
    let mut out = vec![0.0; n];
    let mut f_left = riemann_flux(u[n - 1], u[0]);
    for j in 0..n {
        let f_right = riemann_flux(u[j], u[(j + 1) % n]);
        out[j] = u[j] - lambda * (f_right - f_left);
        f_left = f_right;
    }
    if let Some(kick) = kick {
        assert_eq!(kick.len(), n, "kick resolution differs from the cell grid");
        let mean = kick.values().iter().sum::<f64>() / n as f64;
        for (o, k) in out.iter_mut().zip(kick.values()) {
            *o += k - mean;
        }
    }
    CellField::new(out, c.t + dt)
}

/// A forced finite-volume trajectory with the shared probe machinery.
pub struct InviscidSimulation {
    n: usize,
    forcing: ForcingSpec,
    mode: ForcingMode,
    schedule: StepSchedule,
    probes: ProbeSet,
}

pub struct InviscidRunOutcome {
    pub stream: TrajectoryStream,
    pub state: CellField,
    pub steps: u64,
}

impl InviscidSimulation {
    pub fn new(
        n: usize,
        forcing: ForcingSpec,
        schedule: StepSchedule,
        probes: ProbeSet,
    ) -> Result<Self> {
        if !is_pow2(n) || n < 8 {
            return Err(Error::GridSize(n));
        }
        schedule.validate()?;
        if forcing.max_mode() > n / 2 - 1 {
            return Err(Error::ForcingBand {
                s_max: forcing.max_mode(),
                k_active: n / 2 - 1,
            });
        }
        Ok(Self {
            n,
            forcing,
            mode: ForcingMode::PerStep,
            schedule,
            probes,
        })
    }

    pub fn with_forcing_mode(mut self, mode: ForcingMode) -> Self {
        self.mode = mode;
        self
    }

    /// Kick field for one noise window, sampled at cell centers.
    fn kick_field(&self, dt: f64, counter: u64) -> GridField {
        let coeffs = self.forcing.increment_coefficients(dt, counter);
        let n = self.n;
        let mut values = vec![0.0; n];
        for (s, a) in coeffs {
            let k = s.unsigned_abs() as f64;
            let amp = a * std::f64::consts::SQRT_2;
            if s > 0 {
                for (j, v) in values.iter_mut().enumerate() {
                    let x = (j as f64 + 0.5) / n as f64;
                    *v += amp * (crate::field::TWO_PI * k * x).cos();
                }
            } else {
                for (j, v) in values.iter_mut().enumerate() {
                    let x = (j as f64 + 0.5) / n as f64;
                    *v += amp * (crate::field::TWO_PI * k * x).sin();
                }
            }
        }
        GridField::zero_mean(values).expect("kick built on a power-of-two grid")
    }

    pub fn run(&mut self, u0: &CellField) -> Result<InviscidRunOutcome> {
        self.run_from(u0.clone(), 0)
    }

    pub fn run_from(&mut self, mut state: CellField, mut step_index: u64) -> Result<InviscidRunOutcome> {
        if state.len() != self.n {
            return Err(Error::Checkpoint(format!(
                "state has {} cells, solver expects {}",
                state.len(),
                self.n
            )));
        }
        let sched = self.schedule.clone();
        let mut stream = TrajectoryStream::new(self.forcing.member_id(), &self.probes);
        let mut snap_index = (state.t / sched.snapshot_dt + 1e-9).floor() as u64 + 1;
        let mut kick_index = match self.mode {
            ForcingMode::Kicked { kick_dt } => (state.t / kick_dt + 1e-9).floor() as u64 + 1,
            ForcingMode::PerStep => 0,
        };
        if step_index == 0 {
            self.record_sample(&state, &mut stream);
        }
        loop {
            if let ForcingMode::Kicked { kick_dt } = self.mode {
                if state.t >= kick_index as f64 * kick_dt - 1e-9 * kick_dt {
                    let kick = self.kick_field(kick_dt, kick_index);
                    let mean = kick.values().iter().sum::<f64>() / self.n as f64;
                    let t = state.t;
                    let mut avg = state.averages;
                    for (o, k) in avg.iter_mut().zip(kick.values()) {
                        *o += k - mean;
                    }
                    state = CellField::new(avg, t)?;
                    kick_index += 1;
                }
            }
            if state.t >= sched.t_end - 1e-12 {
                break;
            }
            let sup = state.sup_norm();
            let cfl = sched.cfl.min(MAX_CFL);
            let bound = cfl / (self.n as f64 * sup.max(f64::MIN_POSITIVE));
            let mut dt = bound.min(sched.dt_max).min(sched.t_end - state.t);
            if let ForcingMode::Kicked { kick_dt } = self.mode {
                let boundary = kick_index as f64 * kick_dt;
                if state.t + dt > boundary {
                    dt = boundary - state.t;
                }
            }
            let kick = match self.mode {
                ForcingMode::PerStep => Some(self.kick_field(dt, step_index)),
                ForcingMode::Kicked { .. } => None,
            };
            state = step_inviscid(&state, dt, kick.as_ref())?;
            step_index += 1;

            let at_end = state.t >= sched.t_end - 1e-12;
            let crossed =
                state.t >= snap_index as f64 * sched.snapshot_dt - 1e-9 * sched.snapshot_dt;
            let scalar_due = if self.probes.sample_on_time_cadence {
                crossed
            } else {
                step_index % sched.observable_stride as u64 == 0
            };
            if scalar_due || at_end {
                self.record_sample(&state, &mut stream);
            }
            if crossed {
                if self.probes.wants_snapshot(state.t) {
                    self.record_snapshot(&state, &mut stream);
                }
                snap_index += 1;
            }
        }
        Ok(InviscidRunOutcome {
            stream,
            state,
            steps: step_index,
        })
    }

    fn record_sample(&self, state: &CellField, stream: &mut TrajectoryStream) {
        let spectrum = (!self.probes.sobolev_orders.is_empty()
            || !self.probes.low_mode_energy.is_empty())
        .then(|| state.to_spectral());
        let sobolev_sq = self
            .probes
            .sobolev_orders
            .iter()
            .map(|&m| spectrum.as_ref().map_or(0.0, |s| s.sobolev_norm_sq(m)))
            .collect();
        let l1_norm = self.probes.l1_norm.then(|| state.l1_norm());
        let low_mode_energy = self
            .probes
            .low_mode_energy
            .iter()
            .map(|&k| spectrum.as_ref().map_or(0.0, |s| s.mode_energy(k)))
            .collect();
        stream.samples.push(Sample {
            t: state.t,
            sobolev_sq,
            oleinik: None,
            l1_norm,
            low_mode_energy,
        });
    }

    fn record_snapshot(&self, state: &CellField, stream: &mut TrajectoryStream) {
        let spectrum = self.probes.spectrum_snapshots.then(|| state.to_spectral());
        let grid = self
            .probes
            .grid_snapshots
            .then(|| GridField::zero_mean(state.averages.clone()).expect("cells are zero-mean"));
        stream.snapshots.push(Snapshot {
            t: state.t,
            spectrum,
            grid,
        });
    }
}
