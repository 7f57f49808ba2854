//! The experiments: each one runs simulations, reduces them to law records
//! and CSV tables, and leaves interpretation to the report.

pub mod inviscid;
pub mod mixing;
pub mod scaling;
pub mod spectrum;
pub mod structure;

use anyhow::Result;
use burgulence::stats::MeanAccumulator;
use burgulence::{ForcingMode, ProbeSet, SpectralField, TrajectoryStream};

use crate::config::Config;
use crate::runner;

/// One viscosity of the main sweep: every stream carries scalar norms plus
/// spectrum and grid snapshots inside the bracket window.
pub struct SweepRun {
    pub nu: f64,
    pub n_grid: usize,
    pub streams: Vec<TrajectoryStream>,
}

/// The shared production run behind the scaling, spectrum and structure
/// analyses: one ensemble per viscosity, from rest, sampled over the bracket
/// window.
pub fn run_sweep(cfg: &Config) -> Result<Vec<SweepRun>> {
    let bracket = cfg.bracket_spec();
    let (lo, hi) = bracket.window();
    let probes = ProbeSet {
        sobolev_orders: cfg.scaling.orders.clone(),
        spectrum_snapshots: true,
        grid_snapshots: true,
        snapshot_window: Some((lo, hi)),
        ..ProbeSet::default()
    };
    let mut runs = Vec::new();
    for &nu in &cfg.sweep.nu_list {
        let n_grid = cfg.grid_for(nu)?;
        let streams = runner::viscous_ensemble(
            n_grid,
            nu,
            &cfg.forcing_for(0),
            &cfg.schedule_to(hi),
            &probes,
            &SpectralField::zero(1).expect("truncation 1"),
            bracket.ensemble_size as u64,
            false,
            ForcingMode::PerStep,
        )?;
        runs.push(SweepRun {
            nu,
            n_grid,
            streams,
        });
    }
    Ok(runs)
}

/// The linearized control sweep (scalar probes only).
pub fn run_linearized_sweep(cfg: &Config) -> Result<Vec<SweepRun>> {
    let bracket = cfg.bracket_spec();
    let (_, hi) = bracket.window();
    let probes = ProbeSet::scalars_only(vec![1]);
    let mut runs = Vec::new();
    for &nu in &cfg.sweep.nu_list {
        let n_grid = cfg.grid_for(nu)?;
        let streams = runner::viscous_ensemble(
            n_grid,
            nu,
            &cfg.forcing_for(0),
            &cfg.schedule_to(hi),
            &probes,
            &SpectralField::zero(1).expect("truncation 1"),
            bracket.ensemble_size as u64,
            true,
            ForcingMode::PerStep,
        )?;
        runs.push(SweepRun {
            nu,
            n_grid,
            streams,
        });
    }
    Ok(runs)
}

/// Per-mode time-averaged |u_n|^2 (single sign) for one stream's snapshots
/// inside [lo, hi]; length equals the snapshot truncation.
pub fn member_mode_table(stream: &TrajectoryStream, lo: f64, hi: f64) -> Vec<f64> {
    let snaps = stream.spectrum_snapshots_in(lo, hi);
    let mut table = Vec::new();
    for snap in &snaps {
        if table.is_empty() {
            table = vec![0.0; snap.truncation()];
        }
        for (i, m) in snap.positive_modes().iter().enumerate() {
            table[i] += m.norm_sqr();
        }
    }
    let count = snaps.len().max(1) as f64;
    for v in &mut table {
        *v /= count;
    }
    table
}

/// Ensemble mean and standard error per mode across member tables.
pub fn ensemble_mode_stats(tables: &[Vec<f64>]) -> Vec<(f64, f64)> {
    let len = tables.iter().map(Vec::len).max().unwrap_or(0);
    let mut accs = vec![MeanAccumulator::default(); len];
    for table in tables {
        for (i, &v) in table.iter().enumerate() {
            accs[i].push(v);
        }
    }
    accs.iter().map(|a| (a.mean(), a.stderr())).collect()
}

/// Format a viscosity for directory names: "nu_1e-3".
pub fn nu_dir(nu: f64) -> String {
    format!("nu_{nu:e}")
}

/// Format a viscosity for law ids: "1e-3".
pub fn nu_id(nu: f64) -> String {
    format!("{nu:e}")
}
