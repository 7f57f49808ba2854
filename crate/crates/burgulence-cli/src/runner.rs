//! Ensemble scheduling over a worker pool.
//!
//! Workers share nothing but the read-only config; each trajectory owns its
//! solver and FFT workspaces. Results are collected in member order, so the
//! final reduction is deterministic no matter which worker finished first.

use std::sync::OnceLock;

use anyhow::{anyhow, Result};
use burgulence::forcing::rng;
use burgulence::{
    CellField, ForcingMode, ForcingSpec, GridField, InviscidSimulation, ProbeSet, Simulation,
    SpectralField, StepSchedule, TrajectoryStream,
};
use num_complex::Complex64;
use rayon::prelude::*;

pub const WORKERS_ENV: &str = "BURGULENCE_WORKERS";

static POOL: OnceLock<rayon::ThreadPool> = OnceLock::new();

/// The process-wide worker pool, sized by `BURGULENCE_WORKERS` when set.
pub fn pool() -> &'static rayon::ThreadPool {
    POOL.get_or_init(|| {
        let mut builder = rayon::ThreadPoolBuilder::new();
        if let Some(n) = std::env::var(WORKERS_ENV)
            .ok()
            .and_then(|v| v.parse::<usize>().ok())
            .filter(|&n| n > 0)
        {
            builder = builder.num_threads(n);
        }
        builder.build().expect("worker pool")
    })
}

/// Run `members` viscous trajectories from `u0`, ordered by member id.
pub fn viscous_ensemble(
    n_grid: usize,
    nu: f64,
    base: &ForcingSpec,
    schedule: &StepSchedule,
    probes: &ProbeSet,
    u0: &SpectralField,
    members: u64,
    linearized: bool,
    mode: ForcingMode,
) -> Result<Vec<TrajectoryStream>> {
    pool().install(|| {
        (0..members)
            .into_par_iter()
            .map(|m| {
                let spec = base.with_member(m);
                let mut sim = if linearized {
                    Simulation::linearized(n_grid, nu, spec, schedule.clone(), probes.clone())
                } else {
                    Simulation::new(n_grid, nu, spec, schedule.clone(), probes.clone())
                }
                .map_err(|e| anyhow!("member {m}: {e}"))?
                .with_forcing_mode(mode);
                let out = sim.run(u0).map_err(|e| anyhow!("member {m}: {e}"))?;
                Ok(out.stream)
            })
            .collect()
    })
}

/// Run `members` finite-volume trajectories from `u0`.
pub fn inviscid_ensemble(
    n_cells: usize,
    base: &ForcingSpec,
    schedule: &StepSchedule,
    probes: &ProbeSet,
    u0: &CellField,
    members: u64,
) -> Result<Vec<TrajectoryStream>> {
    pool().install(|| {
        (0..members)
            .into_par_iter()
            .map(|m| {
                let mut sim = InviscidSimulation::new(
                    n_cells,
                    base.with_member(m),
                    schedule.clone(),
                    probes.clone(),
                )
                .map_err(|e| anyhow!("member {m}: {e}"))?;
                let out = sim.run(u0).map_err(|e| anyhow!("member {m}: {e}"))?;
                Ok(out.stream)
            })
            .collect()
    })
}

/// L1 separation curve of one coupled pair: both trajectories see the same
/// increments, so their distance can only contract (up to scheme slack).
#[derive(Debug, Clone)]
pub struct CoupledCurve {
    pub pair: u64,
    /// (t, mean |u_a - u_b| over the grid) on the sample cadence.
    pub distances: Vec<(f64, f64)>,
}

/// Run pairs of trajectories on identical noise from distinct random smooth
/// initial conditions, recording the L1 distance on the `sample_dt` cadence.
pub fn coupled_pairs(
    n_grid: usize,
    nu: f64,
    base: &ForcingSpec,
    schedule: &StepSchedule,
    pairs: u64,
    sample_dt: f64,
    amplitude: f64,
) -> Result<Vec<CoupledCurve>> {
    pool().install(|| {
        (0..pairs)
            .into_par_iter()
            .map(|pair| {
                coupled_pair(n_grid, nu, base, schedule, pair, sample_dt, amplitude)
                    .map_err(|e| anyhow!("pair {pair}: {e}"))
            })
            .collect()
    })
}

fn coupled_pair(
    n_grid: usize,
    nu: f64,
    base: &ForcingSpec,
    schedule: &StepSchedule,
    pair: u64,
    sample_dt: f64,
    amplitude: f64,
) -> burgulence::Result<CoupledCurve> {
    use burgulence::Stepper;

    let spec = base.with_member(pair);
    let mut stepper_a = Stepper::new(n_grid, nu)?;
    let mut stepper_b = Stepper::new(n_grid, nu)?;
    let u0_a = random_smooth_field(base.seed() ^ 0x5eed, 2 * pair, 4, amplitude);
    let u0_b = random_smooth_field(base.seed() ^ 0x5eed, 2 * pair + 1, 4, amplitude);
    let mut state_a = stepper_a.initial_state(&u0_a);
    let mut state_b = stepper_b.initial_state(&u0_b);

    let distance = |a: &burgulence::SolverState, b: &burgulence::SolverState| {
        let ga = a.u.to_grid(n_grid).expect("state fits its grid");
        let gb = b.u.to_grid(n_grid).expect("state fits its grid");
        ga.l1_distance(&gb)
    };

    let mut curve = vec![(0.0, distance(&state_a, &state_b))];
    let mut step_index = 0u64;
    let mut sample_index = 1u64;
    while state_a.t < schedule.t_end - 1e-12 {
        let sup = stepper_a.sup_norm(&state_a).max(stepper_b.sup_norm(&state_b));
        let mut dt = schedule.step_for(sup, n_grid);
        if state_a.t + dt > schedule.t_end {
            dt = schedule.t_end - state_a.t;
        }
        let noise = spec.sample_increment(dt, step_index);
        stepper_a.step(&mut state_a, dt, &noise)?;
        stepper_b.step(&mut state_b, dt, &noise)?;
        step_index += 1;
        let at_end = state_a.t >= schedule.t_end - 1e-12;
        if state_a.t >= sample_index as f64 * sample_dt - 1e-9 * sample_dt || at_end {
            curve.push((state_a.t, distance(&state_a, &state_b)));
            sample_index = (state_a.t / sample_dt + 1e-9).floor() as u64 + 1;
        }
    }
    Ok(CoupledCurve {
        pair,
        distances: curve,
    })
}

/// Deterministic smooth random field: the first `k_max` modes carry
/// independent Gaussian amplitudes scaled by 1/k, normalized so the L2 norm
/// equals `amplitude`.
pub fn random_smooth_field(seed: u64, stream: u64, k_max: usize, amplitude: f64) -> SpectralField {
    let mut u = SpectralField::zero(k_max).expect("k_max >= 1");
    for k in 1..=k_max {
        let re = rng::standard_normal(seed, stream, k as u64, 0);
        let im = rng::standard_normal(seed, stream, k as u64, 1);
        u.set(k, Complex64::new(re, im) / k as f64);
    }
    let norm = u.sobolev_norm_sq(0).sqrt();
    if norm > 0.0 {
        u = u.scaled(amplitude / norm);
    }
    u
}

/// The same smooth field on cell centers, for finite-volume runs.
pub fn random_smooth_cells(
    seed: u64,
    stream: u64,
    k_max: usize,
    amplitude: f64,
    n_cells: usize,
) -> CellField {
    let u = random_smooth_field(seed, stream, k_max, amplitude);
    let g: GridField = u
        .to_grid_shifted(n_cells, 0.5)
        .expect("cell grid resolves the low band");
    CellField::new(g.values().to_vec(), 0.0).expect("smooth field is zero-mean")
}
