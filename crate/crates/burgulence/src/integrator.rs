//! Time-stepping for the viscous stochastic flow, plus two exact references.
//!
//! One step advances u_t + u u_x - nu u_xx = (noise) in spectral form:
//! diffusion is applied exactly through the integrating factor
//! exp(-nu (2 pi k)^2 dt), the conservative nonlinearity -(u^2/2)_x is
//! evaluated pseudospectrally with 2/3-rule dealiasing and advanced by an
//! explicit two-stage Heun rule under that factor, and the Wiener increment
//! is added propagated through half the step (the midpoint approximation of
//! the stochastic convolution, which keeps stationary mode variances accurate
//! to O(dt^2); see `ou_reference_variance`). The mean mode does not exist in
//! the representation, so momentum is conserved structurally.

use std::sync::Arc;

use num_complex::Complex64;
use realfft::{ComplexToReal, RealFftPlanner, RealToComplex};

use crate::error::{Error, Result};
use crate::field::{is_pow2, GridField, OleinikObservables, SpectralField, TWO_PI};
use crate::forcing::{ForcingSpec, NoiseIncrement};
use crate::stream::{ProbeSet, Sample, Snapshot, TrajectoryStream};

const BLOWUP_AMPLITUDE_SQ: f64 = 1e16;

/// Step-size policy and run horizon.
#[derive(Debug, Clone, PartialEq)]
pub struct StepSchedule {
    /// Hard cap on the step.
    pub dt_max: f64,
    /// Advective safety factor: dt <= cfl * dx / |u|_sup.
    pub cfl: f64,
    /// Integrate until this time.
    pub t_end: f64,
    /// Scalar observables are recorded every this many steps.
    pub observable_stride: u32,
    /// Snapshots are recorded on this time cadence.
    pub snapshot_dt: f64,
}

impl StepSchedule {
    pub const DEFAULT_DT_MAX: f64 = 1e-3;
    pub const DEFAULT_CFL: f64 = 0.4;

    /// Default policy run to the given end time.
    pub fn to(t_end: f64) -> Self {
        Self {
            dt_max: Self::DEFAULT_DT_MAX,
            cfl: Self::DEFAULT_CFL,
            t_end,
            observable_stride: 16,
            snapshot_dt: 0.25,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt_max > 0.0) {
            return Err(Error::StepSize {
                dt: self.dt_max,
                bound: f64::INFINITY,
                what: "dt_max must be positive".into(),
            });
        }
        if !(self.cfl > 0.0 && self.cfl < 1.0) {
            return Err(Error::StepSize {
                dt: self.cfl,
                bound: 1.0,
                what: "cfl must lie in (0, 1)".into(),
            });
        }
        if !(self.t_end >= 0.0) || self.observable_stride == 0 || !(self.snapshot_dt > 0.0) {
            return Err(Error::StepSize {
                dt: self.t_end,
                bound: 0.0,
                what: "t_end, observable_stride and snapshot_dt must be positive".into(),
            });
        }
        Ok(())
    }

    /// Largest admissible step for the given sup norm, quantized to
    /// dt_max / 2^j so the diffusion tables are reused across steps.
    pub fn step_for(&self, sup_norm: f64, n_grid: usize) -> f64 {
        let bound = self.cfl / (n_grid as f64 * sup_norm.max(f64::MIN_POSITIVE));
        if bound >= self.dt_max {
            return self.dt_max;
        }
        let j = (self.dt_max / bound).log2().ceil() as i32;
        let mut dt = self.dt_max * 0.5f64.powi(j);
        while dt > bound {
            dt *= 0.5;
        }
        dt
    }
}

/// Instantaneous solver state: time, modes, viscosity, active truncation.
#[derive(Debug, Clone, PartialEq)]
pub struct SolverState {
    pub t: f64,
    pub u: SpectralField,
    pub nu: f64,
    pub k_active: usize,
}

/// How the Wiener force enters a run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ForcingMode {
    /// One increment per time step (the default).
    PerStep,
    /// Increments over fixed windows of length `kick_dt`, applied as
    /// instantaneous kicks when the solution crosses each window boundary.
    /// The kick sequence is independent of the internal step sizes, which
    /// makes runs with different viscosities or schemes share one noise path.
    Kicked { kick_dt: f64 },
}

/// Pseudospectral stepper with per-instance FFT plans and work buffers.
///
/// Safe to use from worker threads: nothing is shared between instances.
pub struct Stepper {
    n_grid: usize,
    k_active: usize,
    nu: f64,
    nonlinear: bool,
    fwd: Arc<dyn RealToComplex<f64>>,
    inv: Arc<dyn ComplexToReal<f64>>,
    fwd_scratch: Vec<Complex64>,
    inv_scratch: Vec<Complex64>,
    grid: Vec<f64>,
    work_real: Vec<f64>,
    half: Vec<Complex64>,
    stage_a: Vec<Complex64>,
    stage_b: Vec<Complex64>,
    predictor: Vec<Complex64>,
    decay: Vec<f64>,
    decay_half: Vec<f64>,
    cached_dt: f64,
    grid_current: bool,
}

/// Dealiased truncation for a quadratic nonlinearity on an N-point grid.
pub fn active_truncation(n_grid: usize) -> usize {
    (n_grid.saturating_sub(2)) / 3
}

impl Stepper {
    pub fn new(n_grid: usize, nu: f64) -> Result<Self> {
        Self::build(n_grid, nu, true)
    }

    /// Stepper with the nonlinearity switched off; every mode is then an
    /// independent Ornstein-Uhlenbeck process.
    pub fn linearized(n_grid: usize, nu: f64) -> Result<Self> {
        Self::build(n_grid, nu, false)
    }

    fn build(n_grid: usize, nu: f64, nonlinear: bool) -> Result<Self> {
        if !is_pow2(n_grid) || n_grid < 8 {
            return Err(Error::GridSize(n_grid));
        }
        if !(nu > 0.0) {
            return Err(Error::NonpositiveViscosity(nu));
        }
        let k_active = active_truncation(n_grid);
        let mut planner = RealFftPlanner::new();
        let fwd = planner.plan_fft_forward(n_grid);
        let inv = planner.plan_fft_inverse(n_grid);
        let fwd_scratch = vec![Complex64::default(); fwd.get_scratch_len()];
        let inv_scratch = vec![Complex64::default(); inv.get_scratch_len()];
        Ok(Self {
            n_grid,
            k_active,
            nu,
            nonlinear,
            fwd,
            inv,
            fwd_scratch,
            inv_scratch,
            grid: vec![0.0; n_grid],
            work_real: vec![0.0; n_grid],
            half: vec![Complex64::default(); n_grid / 2 + 1],
            stage_a: vec![Complex64::default(); k_active],
            stage_b: vec![Complex64::default(); k_active],
            predictor: vec![Complex64::default(); k_active],
            decay: vec![0.0; k_active],
            decay_half: vec![0.0; k_active],
            cached_dt: f64::NAN,
            grid_current: false,
        })
    }

    pub fn n_grid(&self) -> usize {
        self.n_grid
    }

    pub fn k_active(&self) -> usize {
        self.k_active
    }

    /// State at t = 0 carrying `u0` truncated or padded to the active band.
    pub fn initial_state(&self, u0: &SpectralField) -> SolverState {
        SolverState {
            t: 0.0,
            u: u0.resized(self.k_active).expect("k_active >= 1"),
            nu: self.nu,
            k_active: self.k_active,
        }
    }

    fn synth_grid(&mut self, modes: &[Complex64]) {
        self.half.fill(Complex64::default());
        self.half[1..=modes.len()].copy_from_slice(modes);
        self.inv
            .process_with_scratch(&mut self.half, &mut self.grid, &mut self.inv_scratch)
            .expect("buffers sized for the plan");
    }

    fn ensure_grid(&mut self, state: &SolverState) {
        if !self.grid_current {
            let modes: &[Complex64] = state.u.positive_modes();
            // borrow dance: copy into predictor buffer first
            self.predictor.copy_from_slice(modes);
            let tmp = std::mem::take(&mut self.predictor);
            self.synth_grid(&tmp);
            self.predictor = tmp;
            self.grid_current = true;
        }
    }

    /// Physical samples of the current state (valid until the next step).
    pub fn grid_values(&mut self, state: &SolverState) -> &[f64] {
        self.ensure_grid(state);
        &self.grid
    }

    pub fn sup_norm(&mut self, state: &SolverState) -> f64 {
        self.ensure_grid(state);
        self.grid.iter().fold(0.0f64, |a, v| a.max(v.abs()))
    }

    /// -(u^2/2)_x of the field currently held in `self.grid`, dealiased.
    fn nonlinear_term(&mut self, into_b: bool) {
        for (w, &g) in self.work_real.iter_mut().zip(&self.grid) {
            *w = g * g;
        }
        self.fwd
            .process_with_scratch(&mut self.work_real, &mut self.half, &mut self.fwd_scratch)
            .expect("buffers sized for the plan");
        let scale = 1.0 / self.n_grid as f64;
        let out = if into_b {
            &mut self.stage_b
        } else {
            &mut self.stage_a
        };
        for (i, o) in out.iter_mut().enumerate() {
            let q = self.half[i + 1] * scale;
            let pik = std::f64::consts::PI * (i + 1) as f64;
            // -(2 pi i k) q / 2 = -i pi k q
            *o = Complex64::new(pik * q.im, -pik * q.re);
        }
    }

    fn set_tables(&mut self, dt: f64) {
        if dt == self.cached_dt {
            return;
        }
        for i in 0..self.k_active {
            let lambda = self.nu * (TWO_PI * (i + 1) as f64).powi(2);
            let h = (-0.5 * lambda * dt).exp();
            self.decay_half[i] = h;
            self.decay[i] = h * h;
        }
        self.cached_dt = dt;
    }

    /// One step of length `dt` driven by `noise` (whose dt must match).
    pub fn step(&mut self, state: &mut SolverState, dt: f64, noise: &NoiseIncrement) -> Result<()> {
        if !(dt > 0.0) || (noise.dt - dt).abs() > 1e-15 * dt.max(noise.dt) {
            return Err(Error::StepSize {
                dt,
                bound: noise.dt,
                what: "noise increment was drawn for a different step".into(),
            });
        }
        if noise.delta.truncation() > self.k_active
            && noise
                .delta
                .positive_modes()
                .iter()
                .skip(self.k_active)
                .any(|m| m.norm_sqr() > 0.0)
        {
            return Err(Error::ForcingBand {
                s_max: noise.delta.truncation(),
                k_active: self.k_active,
            });
        }
        self.ensure_grid(state);
        self.set_tables(dt);

        if self.nonlinear {
            self.nonlinear_term(false);
            for i in 0..self.k_active {
                self.predictor[i] =
                    self.decay[i] * (state.u.positive_modes()[i] + dt * self.stage_a[i]);
            }
            let tmp = std::mem::take(&mut self.predictor);
            self.synth_grid(&tmp);
            self.predictor = tmp;
            self.nonlinear_term(true);
        }

        let mut max_sq = 0.0f64;
        let modes = state.u.positive_modes_mut();
        if self.nonlinear {
            for i in 0..self.k_active {
                let v = self.decay[i] * (modes[i] + 0.5 * dt * self.stage_a[i])
                    + 0.5 * dt * self.stage_b[i];
                modes[i] = v;
                max_sq = max_sq.max(v.norm_sqr());
            }
        } else {
            for (i, m) in modes.iter_mut().enumerate() {
                *m *= self.decay[i];
                max_sq = max_sq.max(m.norm_sqr());
            }
        }
        // additive noise through half the integrating factor
        let band = noise.delta.truncation().min(self.k_active);
        for (i, d) in noise.delta.positive_modes()[..band].iter().enumerate() {
            modes[i] += self.decay_half[i] * d;
        }
        self.grid_current = false;

        if !max_sq.is_finite() || max_sq > BLOWUP_AMPLITUDE_SQ {
            return Err(Error::BlowUp { t: state.t, dt });
        }
        state.t += dt;
        Ok(())
    }

    /// Add an instantaneous kick (no diffusion applied).
    fn apply_kick(&mut self, state: &mut SolverState, kick: &SpectralField) {
        let band = kick.truncation().min(self.k_active);
        let modes = state.u.positive_modes_mut();
        for (i, d) in kick.positive_modes()[..band].iter().enumerate() {
            modes[i] += d;
        }
        self.grid_current = false;
    }

    /// Shock observables computed spectrally from the current state.
    pub fn oleinik(&mut self, state: &SolverState) -> OleinikObservables {
        self.ensure_grid(state);
        let sup = self.grid.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        // derivative through the same transform grid
        self.half.fill(Complex64::default());
        for (i, m) in state.u.positive_modes().iter().enumerate() {
            self.half[i + 1] = Complex64::new(0.0, TWO_PI * (i + 1) as f64) * m;
        }
        self.inv
            .process_with_scratch(&mut self.half, &mut self.work_real, &mut self.inv_scratch)
            .expect("buffers sized for the plan");
        let mut grad_l1 = 0.0;
        let mut grad_plus = 0.0f64;
        for &g in &self.work_real {
            grad_l1 += g.abs();
            grad_plus = grad_plus.max(g);
        }
        OleinikObservables {
            sup_norm: sup,
            grad_l1: grad_l1 / self.n_grid as f64,
            grad_plus_sup: grad_plus.max(0.0),
        }
    }
}

/// A full trajectory run: stepper + forcing + schedule + probes.
pub struct Simulation {
    stepper: Stepper,
    forcing: ForcingSpec,
    mode: ForcingMode,
    schedule: StepSchedule,
    probes: ProbeSet,
}

/// What a run returns: the stream plus the state needed to continue it.
pub struct RunOutcome {
    pub stream: TrajectoryStream,
    pub state: SolverState,
    pub steps: u64,
}

impl Simulation {
    pub fn new(
        n_grid: usize,
        nu: f64,
        forcing: ForcingSpec,
        schedule: StepSchedule,
        probes: ProbeSet,
    ) -> Result<Self> {
        Self::build(Stepper::new(n_grid, nu)?, forcing, schedule, probes)
    }

    pub fn linearized(
        n_grid: usize,
        nu: f64,
        forcing: ForcingSpec,
        schedule: StepSchedule,
        probes: ProbeSet,
    ) -> Result<Self> {
        Self::build(Stepper::linearized(n_grid, nu)?, forcing, schedule, probes)
    }

    fn build(
        stepper: Stepper,
        forcing: ForcingSpec,
        schedule: StepSchedule,
        probes: ProbeSet,
    ) -> Result<Self> {
        schedule.validate()?;
        if forcing.max_mode() > stepper.k_active() {
            return Err(Error::ForcingBand {
                s_max: forcing.max_mode(),
                k_active: stepper.k_active(),
            });
        }
        Ok(Self {
            stepper,
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

    pub fn k_active(&self) -> usize {
        self.stepper.k_active()
    }

    pub fn n_grid(&self) -> usize {
        self.stepper.n_grid()
    }

    pub fn forcing(&self) -> &ForcingSpec {
        &self.forcing
    }

    pub fn schedule(&self) -> &StepSchedule {
        &self.schedule
    }

    /// Run from rest or from an explicit initial condition at t = 0.
    pub fn run(&mut self, u0: &SpectralField) -> Result<RunOutcome> {
        let state = self.stepper.initial_state(u0);
        self.run_from(state, 0)
    }

    /// Run from t = 0 but stop once the step counter reaches `max_steps`,
    /// as an interrupted process would. Steps are the interruption
    /// granularity: stopping between steps keeps the subsequent step-size
    /// sequence identical to an uninterrupted run.
    pub fn run_capped(&mut self, u0: &SpectralField, max_steps: u64) -> Result<RunOutcome> {
        let state = self.stepper.initial_state(u0);
        self.run_loop(state, 0, Some(max_steps))
    }

    /// Continue a run from a saved state and step counter. Because every
    /// noise increment is a pure function of (seed, member, step), the
    /// continuation reproduces an uninterrupted run bit for bit.
    pub fn run_from(&mut self, state: SolverState, step_index: u64) -> Result<RunOutcome> {
        self.run_loop(state, step_index, None)
    }

    fn run_loop(
        &mut self,
        mut state: SolverState,
        mut step_index: u64,
        max_steps: Option<u64>,
    ) -> Result<RunOutcome> {
        if state.u.truncation() != self.stepper.k_active() || state.nu != self.stepper.nu {
            return Err(Error::Checkpoint(format!(
                "state (K = {}, nu = {}) does not match the solver (K = {}, nu = {})",
                state.u.truncation(),
                state.nu,
                self.stepper.k_active(),
                self.stepper.nu,
            )));
        }
        let sched = self.schedule.clone();
        let mut stream = TrajectoryStream::new(self.forcing.member_id(), &self.probes);
        // boundary counters derived from t, so resumed runs line up exactly
        let mut snap_index =
            (state.t / sched.snapshot_dt + 1e-9).floor() as u64 + 1;
        let mut kick_index = match self.mode {
            ForcingMode::Kicked { kick_dt } => (state.t / kick_dt + 1e-9).floor() as u64 + 1,
            ForcingMode::PerStep => 0,
        };

        if step_index == 0 {
            self.record_sample(&state, &mut stream);
        }
        loop {
            // apply any kick whose window boundary has been reached
            if let ForcingMode::Kicked { kick_dt } = self.mode {
                if state.t >= kick_index as f64 * kick_dt - 1e-9 * kick_dt {
                    let kick = self.forcing.sample_increment(kick_dt, kick_index).delta;
                    self.stepper.apply_kick(&mut state, &kick);
                    kick_index += 1;
                }
            }
            if state.t >= sched.t_end - 1e-12 || max_steps.is_some_and(|cap| step_index >= cap) {
                break;
            }
            let sup = self.stepper.sup_norm(&state);
            let mut dt = sched.step_for(sup, self.stepper.n_grid());
            if state.t + dt > sched.t_end {
                dt = sched.t_end - state.t;
            }
            if let ForcingMode::Kicked { kick_dt } = self.mode {
                let boundary = kick_index as f64 * kick_dt;
                if state.t + dt > boundary {
                    dt = boundary - state.t;
                }
            }
            let noise = match self.mode {
                ForcingMode::PerStep => self.forcing.sample_increment(dt, step_index),
                ForcingMode::Kicked { .. } => NoiseIncrement::zero(dt, 1),
            };
            self.stepper.step(&mut state, dt, &noise)?;
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
        Ok(RunOutcome {
            stream,
            state,
            steps: step_index,
        })
    }

    fn record_sample(&mut self, state: &SolverState, stream: &mut TrajectoryStream) {
        let sobolev_sq = self
            .probes
            .sobolev_orders
            .iter()
            .map(|&m| state.u.sobolev_norm_sq(m))
            .collect();
        let oleinik = self.probes.oleinik.then(|| self.stepper.oleinik(state));
        let l1_norm = self.probes.l1_norm.then(|| {
            let g = self.stepper.grid_values(state);
            g.iter().map(|v| v.abs()).sum::<f64>() / g.len() as f64
        });
        let low_mode_energy = self
            .probes
            .low_mode_energy
            .iter()
            .map(|&k| state.u.mode_energy(k))
            .collect();
        stream.samples.push(Sample {
            t: state.t,
            sobolev_sq,
            oleinik,
            l1_norm,
            low_mode_energy,
        });
    }

    fn record_snapshot(&mut self, state: &SolverState, stream: &mut TrajectoryStream) {
        let spectrum = self.probes.spectrum_snapshots.then(|| state.u.clone());
        let grid = self.probes.grid_snapshots.then(|| {
            GridField::new(self.stepper.grid_values(state).to_vec())
                .expect("grid synthesized from zero-mean modes")
        });
        stream.snapshots.push(Snapshot {
            t: state.t,
            spectrum,
            grid,
        });
    }
}

/// Exact reference for the unforced equation with u0 = amplitude sin(2 pi x).
///
/// The logarithmic substitution u = -2 nu (ln phi)_x turns the equation into
/// the heat equation for phi with phi(0, x) = exp(-(amplitude / 4 pi nu)
/// (1 - cos 2 pi x)); phi is advanced exactly in Fourier space and the
/// log-derivative is evaluated on the grid.
pub fn cole_hopf_reference(amplitude: f64, nu: f64, t: f64, n: usize) -> Result<GridField> {
    if !(nu > 0.0) {
        return Err(Error::NonpositiveViscosity(nu));
    }
    if !is_pow2(n) || n < 8 {
        return Err(Error::GridSize(n));
    }
    if !(t >= 0.0) {
        return Err(Error::StepSize {
            dt: t,
            bound: 0.0,
            what: "time must be nonnegative".into(),
        });
    }
    let mut planner = RealFftPlanner::new();
    let fwd = planner.plan_fft_forward(n);
    let inv = planner.plan_fft_inverse(n);

    let ratio = amplitude / (2.0 * TWO_PI * nu);
    let mut seed: Vec<f64> = (0..n)
        .map(|j| {
            let x = j as f64 / n as f64;
            (-ratio * (1.0 - (TWO_PI * x).cos())).exp()
        })
        .collect();
    let mut half = vec![Complex64::default(); n / 2 + 1];
    let mut scratch = vec![Complex64::default(); fwd.get_scratch_len()];
    fwd.process_with_scratch(&mut seed, &mut half, &mut scratch)
        .expect("buffers sized for the plan");

    // the seed spectrum must have died out well before the Nyquist band,
    // otherwise the log-derivative is garbage
    let base = half[0].norm().max(f64::MIN_POSITIVE);
    let tail = half[3 * n / 8..]
        .iter()
        .fold(0.0f64, |a, v| a.max(v.norm()));
    if tail > 1e-12 * base {
        return Err(Error::OracleResolution { n });
    }

    for (k, h) in half.iter_mut().enumerate() {
        *h *= (-nu * (TWO_PI * k as f64).powi(2) * t).exp();
    }
    let mut dhalf: Vec<Complex64> = half
        .iter()
        .enumerate()
        .map(|(k, h)| Complex64::new(0.0, TWO_PI * k as f64) * h)
        .collect();
    dhalf[n / 2] = Complex64::default();

    let mut phi = vec![0.0; n];
    let mut dphi = vec![0.0; n];
    let mut inv_scratch = vec![Complex64::default(); inv.get_scratch_len()];
    inv.process_with_scratch(&mut half, &mut phi, &mut inv_scratch)
        .expect("buffers sized for the plan");
    inv.process_with_scratch(&mut dhalf, &mut dphi, &mut inv_scratch)
        .expect("buffers sized for the plan");

    if phi.iter().any(|&v| v <= 0.0) {
        return Err(Error::OracleResolution { n });
    }
    let u = phi
        .iter()
        .zip(&dphi)
        .map(|(p, dp)| -2.0 * nu * dp / p)
        .collect();
    GridField::zero_mean(u)
}

/// Exact stationary variance of one linearized mode: b_s^2 / (2 nu (2 pi s)^2).
///
/// With the nonlinearity off, the coefficient of each forced basis function
/// is an Ornstein-Uhlenbeck process with damping nu (2 pi s)^2 and input
/// b_s^2 per unit time.
pub fn ou_reference_variance(s: i32, nu: f64, b_s: f64) -> Result<f64> {
    if s == 0 {
        return Err(Error::ZeroWavenumber);
    }
    if !(nu > 0.0) {
        return Err(Error::NonpositiveViscosity(nu));
    }
    let omega = TWO_PI * s.unsigned_abs() as f64;
    Ok(b_s * b_s / (2.0 * nu * omega * omega))
}
