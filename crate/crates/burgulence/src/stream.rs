//! Time-stamped observable streams produced by one noise realization.

use crate::error::{Error, Result};
use crate::field::{GridField, OleinikObservables, SpectralField};

/// Which observables a run records, and how often the heavy ones are taken.
///
/// Scalars are sampled every `observable_stride` steps of the schedule;
/// snapshots are taken on the schedule's `snapshot_dt` time cadence, and only
/// inside `snapshot_window` when one is set (snapshots dominate memory).
#[derive(Debug, Clone, Default)]
pub struct ProbeSet {
    /// Squared Sobolev norms to record, e.g. [0, 1, 2, 3]. Negative orders
    /// are accepted as diagnostics.
    pub sobolev_orders: Vec<i32>,
    /// Sup norm, |u_x|_L1 and sup u_x^+ per sample.
    pub oleinik: bool,
    /// Discrete L1 norm per sample.
    pub l1_norm: bool,
    /// |u_k|^2 + |u_{-k}|^2 for these wavenumbers per sample.
    pub low_mode_energy: Vec<usize>,
    /// Full mode snapshots on the snapshot cadence.
    pub spectrum_snapshots: bool,
    /// Grid snapshots on the snapshot cadence.
    pub grid_snapshots: bool,
    /// Restrict snapshots to t in [lo, hi].
    pub snapshot_window: Option<(f64, f64)>,
    /// Record scalars on the snapshot time cadence instead of the step
    /// stride. Ensemble members then share one sampling grid (within a step)
    /// even though their step sizes differ.
    pub sample_on_time_cadence: bool,
}

impl ProbeSet {
    pub fn scalars_only(sobolev_orders: Vec<i32>) -> Self {
        Self {
            sobolev_orders,
            ..Self::default()
        }
    }

    pub fn wants_snapshot(&self, t: f64) -> bool {
        if !self.spectrum_snapshots && !self.grid_snapshots {
            return false;
        }
        match self.snapshot_window {
            Some((lo, hi)) => t >= lo - 1e-12 && t <= hi + 1e-12,
            None => true,
        }
    }
}

/// Scalar observables at one sample time.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub t: f64,
    /// Parallel to `ProbeSet::sobolev_orders`.
    pub sobolev_sq: Vec<f64>,
    pub oleinik: Option<OleinikObservables>,
    pub l1_norm: Option<f64>,
    /// Parallel to `ProbeSet::low_mode_energy`.
    pub low_mode_energy: Vec<f64>,
}

/// Heavy state snapshot at one time.
#[derive(Debug, Clone)]
pub struct Snapshot {
    pub t: f64,
    pub spectrum: Option<SpectralField>,
    pub grid: Option<GridField>,
}

/// A scalar observable extracted from samples.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ScalarObservable {
    SobolevSq(i32),
    SupNorm,
    GradL1,
    GradPlusSup,
    L1Norm,
    LowModeEnergy(usize),
}

impl std::fmt::Display for ScalarObservable {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Self::SobolevSq(m) => write!(f, "sobolev_sq[{m}]"),
            Self::SupNorm => write!(f, "sup_norm"),
            Self::GradL1 => write!(f, "grad_l1"),
            Self::GradPlusSup => write!(f, "grad_plus_sup"),
            Self::L1Norm => write!(f, "l1_norm"),
            Self::LowModeEnergy(k) => write!(f, "mode_energy[{k}]"),
        }
    }
}

/// All observables recorded along one trajectory.
#[derive(Debug, Clone, Default)]
pub struct TrajectoryStream {
    pub member_id: u64,
    pub probes_sobolev: Vec<i32>,
    pub probes_low_mode: Vec<usize>,
    pub probes_oleinik: bool,
    pub probes_l1: bool,
    pub samples: Vec<Sample>,
    pub snapshots: Vec<Snapshot>,
}

impl TrajectoryStream {
    pub fn new(member_id: u64, probes: &ProbeSet) -> Self {
        Self {
            member_id,
            probes_sobolev: probes.sobolev_orders.clone(),
            probes_low_mode: probes.low_mode_energy.clone(),
            probes_oleinik: probes.oleinik,
            probes_l1: probes.l1_norm,
            samples: Vec::new(),
            snapshots: Vec::new(),
        }
    }

    /// The (t, value) series of one scalar observable.
    pub fn series(&self, obs: ScalarObservable) -> Result<Vec<(f64, f64)>> {
        let missing = || Error::MissingProbe(obs.to_string());
        match obs {
            ScalarObservable::SobolevSq(m) => {
                let idx = self
                    .probes_sobolev
                    .iter()
                    .position(|&o| o == m)
                    .ok_or_else(missing)?;
                Ok(self
                    .samples
                    .iter()
                    .map(|s| (s.t, s.sobolev_sq[idx]))
                    .collect())
            }
            ScalarObservable::SupNorm => self.oleinik_series(|o| o.sup_norm),
            ScalarObservable::GradL1 => self.oleinik_series(|o| o.grad_l1),
            ScalarObservable::GradPlusSup => self.oleinik_series(|o| o.grad_plus_sup),
            ScalarObservable::L1Norm => {
                if !self.probes_l1 {
                    return Err(missing());
                }
                self.samples
                    .iter()
                    .map(|s| s.l1_norm.map(|v| (s.t, v)).ok_or_else(missing))
                    .collect()
            }
            ScalarObservable::LowModeEnergy(k) => {
                let idx = self
                    .probes_low_mode
                    .iter()
                    .position(|&o| o == k)
                    .ok_or_else(missing)?;
                Ok(self
                    .samples
                    .iter()
                    .map(|s| (s.t, s.low_mode_energy[idx]))
                    .collect())
            }
        }
    }

    fn oleinik_series(&self, pick: impl Fn(&OleinikObservables) -> f64) -> Result<Vec<(f64, f64)>> {
        if !self.probes_oleinik {
            return Err(Error::MissingProbe("oleinik".into()));
        }
        self.samples
            .iter()
            .map(|s| {
                s.oleinik
                    .as_ref()
                    .map(|o| (s.t, pick(o)))
                    .ok_or_else(|| Error::MissingProbe("oleinik".into()))
            })
            .collect()
    }

    /// Grid snapshots inside [lo, hi].
    pub fn grid_snapshots_in(&self, lo: f64, hi: f64) -> Vec<&GridField> {
        self.snapshots
            .iter()
            .filter(|s| s.t >= lo - 1e-9 && s.t <= hi + 1e-9)
            .filter_map(|s| s.grid.as_ref())
            .collect()
    }

    /// Spectrum snapshots inside [lo, hi].
    pub fn spectrum_snapshots_in(&self, lo: f64, hi: f64) -> Vec<&SpectralField> {
        self.snapshots
            .iter()
            .filter(|s| s.t >= lo - 1e-9 && s.t <= hi + 1e-9)
            .filter_map(|s| s.spectrum.as_ref())
            .collect()
    }

    pub fn last_sample(&self) -> Option<&Sample> {
        self.samples.last()
    }

    /// Join a stream with the continuation produced by a resumed run.
    ///
    /// The first segment must come from a step-capped interruption (see
    /// `Simulation::run_capped`); the concatenation is then sample-for-sample
    /// identical to the run that never stopped.
    pub fn concat_resumed(mut self, tail: TrajectoryStream) -> Self {
        self.samples.extend(tail.samples);
        self.snapshots.extend(tail.snapshots);
        self
    }
}
