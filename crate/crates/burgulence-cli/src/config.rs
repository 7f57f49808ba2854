//! Experiment configuration: a strict TOML schema with defaults.
//!
//! Unknown keys are rejected outright; a silently ignored typo in a
//! viscosity or a seed would invalidate every scaling fit downstream.

use std::path::Path;

use burgulence::{BracketSpec, ForcingSpec, StepSchedule};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Read {
        path: String,
        source: std::io::Error,
    },
    #[error("config parse error: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("invalid config: {0}")]
    Invalid(String),
}

fn invalid(msg: impl Into<String>) -> ConfigError {
    ConfigError::Invalid(msg.into())
}

#[derive(Debug, Clone, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct Config {
    #[serde(default)]
    pub experiment: ExperimentSection,
    #[serde(default)]
    pub forcing: ForcingSection,
    #[serde(default)]
    pub grid: GridSection,
    #[serde(default)]
    pub schedule: ScheduleSection,
    #[serde(default)]
    pub bracket: BracketSection,
    #[serde(default)]
    pub sweep: SweepSection,
    #[serde(default)]
    pub scaling: ScalingSection,
    #[serde(default)]
    pub spectrum: SpectrumSection,
    #[serde(default)]
    pub structure: StructureSection,
    #[serde(default)]
    pub mixing: MixingSection,
    #[serde(default)]
    pub inviscid: InviscidSection,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSection {
    #[serde(default = "d_seed")]
    pub seed: u64,
    #[serde(default = "d_out_dir")]
    pub out_dir: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ForcingSection {
    /// "inverse_s_bandlimited" (uses s_max, b0) or "explicit" (uses
    /// coefficients).
    #[serde(default = "d_rule")]
    pub rule: String,
    #[serde(default = "d_s_max")]
    pub s_max: u32,
    #[serde(default = "d_b0")]
    pub b0: f64,
    /// (s, b_s) pairs for rule = "explicit".
    #[serde(default)]
    pub coefficients: Vec<(i32, f64)>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSection {
    /// The grid must resolve N >= resolution_factor / nu.
    #[serde(default = "d_resolution_factor")]
    pub resolution_factor: f64,
    #[serde(default = "d_n_max")]
    pub n_max: usize,
    /// Force a specific N for every viscosity (0 = derive from the rule).
    #[serde(default)]
    pub n_override: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScheduleSection {
    #[serde(default = "d_dt_max")]
    pub dt_max: f64,
    #[serde(default = "d_cfl")]
    pub cfl: f64,
    #[serde(default = "d_stride")]
    pub observable_stride: u32,
    #[serde(default = "d_snapshot_dt")]
    pub snapshot_dt: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BracketSection {
    #[serde(default = "d_t_start")]
    pub t_start: f64,
    #[serde(default = "d_sigma")]
    pub sigma: f64,
    #[serde(default = "d_ensemble")]
    pub ensemble_size: usize,
    #[serde(default = "d_sigma_min")]
    pub sigma_min: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    #[serde(default = "d_nu_list")]
    pub nu_list: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScalingSection {
    /// Sobolev orders whose viscosity scaling is fitted.
    #[serde(default = "d_orders")]
    pub orders: Vec<i32>,
    /// Orders asserted against the predicted exponent, with tolerances.
    #[serde(default = "d_order_tolerances")]
    pub order_tolerances: Vec<(i32, f64)>,
    /// Run the linearized control sweep as well.
    #[serde(default = "d_true")]
    pub linearized_control: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpectrumSection {
    #[serde(default = "d_layer_m")]
    pub layer_m: f64,
    #[serde(default = "d_fit_k_lo")]
    pub fit_k_lo: f64,
    /// Upper fit edge as a fraction of 1/nu.
    #[serde(default = "d_fit_k_hi_factor")]
    pub fit_k_hi_factor: f64,
    #[serde(default = "d_slope_tol")]
    pub slope_tolerance: f64,
    #[serde(default = "d_breakpoint_slope")]
    pub breakpoint_slope: f64,
    #[serde(default = "d_breakpoint_band")]
    pub breakpoint_band: f64,
    #[serde(default = "d_cd_tol")]
    pub cd_tolerance: f64,
    /// Far-dissipation decay check: a dedicated run at this viscosity and
    /// resolution measures the drop of E_k at k = 4/nu below the power-law
    /// extrapolation.
    #[serde(default = "d_tail_nu")]
    pub tail_nu: f64,
    #[serde(default = "d_tail_n")]
    pub tail_n: usize,
    #[serde(default = "d_tail_members")]
    pub tail_members: usize,
    #[serde(default = "d_tail_drop")]
    pub tail_min_drop: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StructureSection {
    #[serde(default = "d_p_list")]
    pub p_list: Vec<f64>,
    /// Inertial window [lo_factor * nu, hi], fitted at the smallest viscosity.
    #[serde(default = "d_inertial_lo_factor")]
    pub inertial_lo_factor: f64,
    #[serde(default = "d_inertial_hi")]
    pub inertial_hi: f64,
    /// Small-increment window [1/N, hi_factor * nu), fitted at the largest
    /// viscosity where it spans the most cells.
    #[serde(default = "d_diss_hi_factor")]
    pub dissipation_hi_factor: f64,
    /// Asserted (p, tolerance) pairs for the inertial exponents.
    #[serde(default = "d_inertial_tols")]
    pub inertial_tolerances: Vec<(f64, f64)>,
    /// Asserted (p, tolerance) pairs for the small-increment exponents.
    #[serde(default = "d_diss_tols")]
    pub dissipation_tolerances: Vec<(f64, f64)>,
    /// Fixed shift for the viscosity-prefactor fit (reported).
    #[serde(default = "d_prefactor_l")]
    pub prefactor_l: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MixingSection {
    #[serde(default = "d_mix_t_end")]
    pub t_end: f64,
    #[serde(default = "d_pairs")]
    pub pairs: usize,
    #[serde(default = "d_mix_nu_list")]
    pub nu_list: Vec<f64>,
    #[serde(default = "d_ensemble")]
    pub ensemble_size: usize,
    #[serde(default = "d_sample_dt")]
    pub sample_dt: f64,
    #[serde(default = "d_decay_max")]
    pub coupled_decay_max: f64,
    #[serde(default = "d_slack")]
    pub contraction_slack: f64,
    /// Initial amplitude of the second independent ensemble (first starts
    /// from rest).
    #[serde(default = "d_mix_amp")]
    pub initial_amplitude: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InviscidSection {
    #[serde(default = "d_n_cells")]
    pub n_cells: usize,
    #[serde(default = "d_inv_t_end")]
    pub t_end: f64,
    #[serde(default = "d_ensemble")]
    pub ensemble_size: usize,
    #[serde(default = "d_fit_k_lo")]
    pub fit_k_lo: f64,
    /// Upper spectrum fit edge as a fraction of N.
    #[serde(default = "d_inv_k_hi_fraction")]
    pub fit_k_hi_fraction: f64,
    #[serde(default = "d_inv_slope_tol")]
    pub slope_tolerance: f64,
    /// Structure-function window [lo_cells / N, hi].
    #[serde(default = "d_inv_lo_cells")]
    pub structure_lo_cells: f64,
    #[serde(default = "d_inertial_hi")]
    pub structure_hi: f64,
    /// Viscous-against-inviscid gap check on a shared kick path.
    #[serde(default = "d_gap_t_end")]
    pub gap_t_end: f64,
    #[serde(default = "d_gap_kick_dt")]
    pub gap_kick_dt: f64,
}

fn d_seed() -> u64 {
    42
}
fn d_out_dir() -> String {
    "out".into()
}
fn d_rule() -> String {
    "inverse_s_bandlimited".into()
}
fn d_s_max() -> u32 {
    4
}
fn d_b0() -> f64 {
    1.0
}
fn d_resolution_factor() -> f64 {
    8.0
}
fn d_n_max() -> usize {
    8192
}
fn d_dt_max() -> f64 {
    StepSchedule::DEFAULT_DT_MAX
}
fn d_cfl() -> f64 {
    StepSchedule::DEFAULT_CFL
}
fn d_stride() -> u32 {
    16
}
fn d_snapshot_dt() -> f64 {
    0.25
}
fn d_t_start() -> f64 {
    5.0
}
fn d_sigma() -> f64 {
    10.0
}
fn d_ensemble() -> usize {
    16
}
fn d_sigma_min() -> f64 {
    BracketSpec::DEFAULT_SIGMA_MIN
}
fn d_nu_list() -> Vec<f64> {
    vec![1e-2, 3e-3, 1e-3]
}
fn d_orders() -> Vec<i32> {
    vec![-1, 0, 1, 2, 3]
}
fn d_order_tolerances() -> Vec<(i32, f64)> {
    vec![(1, 0.2), (2, 0.5)]
}
fn d_true() -> bool {
    true
}
fn d_layer_m() -> f64 {
    2.0
}
fn d_fit_k_lo() -> f64 {
    4.0
}
fn d_fit_k_hi_factor() -> f64 {
    0.25
}
fn d_slope_tol() -> f64 {
    0.15
}
fn d_breakpoint_slope() -> f64 {
    -4.0
}
fn d_breakpoint_band() -> f64 {
    2.0
}
fn d_cd_tol() -> f64 {
    0.2
}
fn d_tail_nu() -> f64 {
    1e-2
}
fn d_tail_n() -> usize {
    4096
}
fn d_tail_members() -> usize {
    4
}
fn d_tail_drop() -> f64 {
    1e3
}
fn d_p_list() -> Vec<f64> {
    vec![0.5, 1.0, 2.0, 3.0]
}
fn d_inertial_lo_factor() -> f64 {
    10.0
}
fn d_inertial_hi() -> f64 {
    0.05
}
fn d_diss_hi_factor() -> f64 {
    0.5
}
fn d_inertial_tols() -> Vec<(f64, f64)> {
    vec![(0.5, 0.1), (1.0, 0.1), (2.0, 0.15), (3.0, 0.15)]
}
fn d_diss_tols() -> Vec<(f64, f64)> {
    vec![(0.5, 0.2), (2.0, 0.2)]
}
fn d_prefactor_l() -> f64 {
    1.0 / 1024.0
}
fn d_mix_t_end() -> f64 {
    20.0
}
fn d_pairs() -> usize {
    8
}
fn d_mix_nu_list() -> Vec<f64> {
    vec![1e-2, 1e-3]
}
fn d_sample_dt() -> f64 {
    0.25
}
fn d_decay_max() -> f64 {
    0.2
}
fn d_slack() -> f64 {
    1.01
}
fn d_mix_amp() -> f64 {
    3.0
}
fn d_n_cells() -> usize {
    8192
}
fn d_inv_t_end() -> f64 {
    15.0
}
fn d_inv_k_hi_fraction() -> f64 {
    1.0 / 6.0
}
fn d_inv_slope_tol() -> f64 {
    0.2
}
fn d_inv_lo_cells() -> f64 {
    4.0
}
fn d_gap_t_end() -> f64 {
    3.0
}
fn d_gap_kick_dt() -> f64 {
    0.01
}

impl Default for ExperimentSection {
    fn default() -> Self {
        Self {
            seed: d_seed(),
            out_dir: d_out_dir(),
        }
    }
}
impl Default for ForcingSection {
    fn default() -> Self {
        Self {
            rule: d_rule(),
            s_max: d_s_max(),
            b0: d_b0(),
            coefficients: Vec::new(),
        }
    }
}
impl Default for GridSection {
    fn default() -> Self {
        Self {
            resolution_factor: d_resolution_factor(),
            n_max: d_n_max(),
            n_override: 0,
        }
    }
}
impl Default for ScheduleSection {
    fn default() -> Self {
        Self {
            dt_max: d_dt_max(),
            cfl: d_cfl(),
            observable_stride: d_stride(),
            snapshot_dt: d_snapshot_dt(),
        }
    }
}
impl Default for BracketSection {
    fn default() -> Self {
        Self {
            t_start: d_t_start(),
            sigma: d_sigma(),
            ensemble_size: d_ensemble(),
            sigma_min: d_sigma_min(),
        }
    }
}
impl Default for SweepSection {
    fn default() -> Self {
        Self {
            nu_list: d_nu_list(),
        }
    }
}
impl Default for ScalingSection {
    fn default() -> Self {
        Self {
            orders: d_orders(),
            order_tolerances: d_order_tolerances(),
            linearized_control: true,
        }
    }
}
impl Default for SpectrumSection {
    fn default() -> Self {
        Self {
            layer_m: d_layer_m(),
            fit_k_lo: d_fit_k_lo(),
            fit_k_hi_factor: d_fit_k_hi_factor(),
            slope_tolerance: d_slope_tol(),
            breakpoint_slope: d_breakpoint_slope(),
            breakpoint_band: d_breakpoint_band(),
            cd_tolerance: d_cd_tol(),
            tail_nu: d_tail_nu(),
            tail_n: d_tail_n(),
            tail_members: d_tail_members(),
            tail_min_drop: d_tail_drop(),
        }
    }
}
impl Default for StructureSection {
    fn default() -> Self {
        Self {
            p_list: d_p_list(),
            inertial_lo_factor: d_inertial_lo_factor(),
            inertial_hi: d_inertial_hi(),
            dissipation_hi_factor: d_diss_hi_factor(),
            inertial_tolerances: d_inertial_tols(),
            dissipation_tolerances: d_diss_tols(),
            prefactor_l: d_prefactor_l(),
        }
    }
}
impl Default for MixingSection {
    fn default() -> Self {
        Self {
            t_end: d_mix_t_end(),
            pairs: d_pairs(),
            nu_list: d_mix_nu_list(),
            ensemble_size: d_ensemble(),
            sample_dt: d_sample_dt(),
            coupled_decay_max: d_decay_max(),
            contraction_slack: d_slack(),
            initial_amplitude: d_mix_amp(),
        }
    }
}
impl Default for InviscidSection {
    fn default() -> Self {
        Self {
            n_cells: d_n_cells(),
            t_end: d_inv_t_end(),
            ensemble_size: d_ensemble(),
            fit_k_lo: d_fit_k_lo(),
            fit_k_hi_fraction: d_inv_k_hi_fraction(),
            slope_tolerance: d_inv_slope_tol(),
            structure_lo_cells: d_inv_lo_cells(),
            structure_hi: d_inertial_hi(),
            gap_t_end: d_gap_t_end(),
            gap_kick_dt: d_gap_kick_dt(),
        }
    }
}

impl Config {
    pub fn from_path(path: impl AsRef<Path>) -> Result<Self, ConfigError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Read {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_toml(&text)
    }

    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        let cfg: Config = toml::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.forcing.rule != "inverse_s_bandlimited" && self.forcing.rule != "explicit" {
            return Err(invalid(format!(
                "unknown forcing rule {:?} (expected \"inverse_s_bandlimited\" or \"explicit\")",
                self.forcing.rule
            )));
        }
        if self.forcing.rule == "explicit" && self.forcing.coefficients.is_empty() {
            return Err(invalid("explicit forcing rule needs coefficients"));
        }
        if self.forcing.rule == "inverse_s_bandlimited"
            && (self.forcing.s_max == 0 || !(self.forcing.b0 > 0.0))
        {
            return Err(invalid("band-limited rule needs s_max >= 1 and b0 > 0"));
        }
        for &nu in self.sweep.nu_list.iter().chain(&self.mixing.nu_list) {
            if !(nu > 0.0 && nu <= 1.0) {
                return Err(invalid(format!("viscosity {nu} outside (0, 1]")));
            }
            self.grid_for(nu)?;
        }
        if self.sweep.nu_list.is_empty() {
            return Err(invalid("sweep.nu_list must not be empty"));
        }
        if !(self.schedule.cfl > 0.0 && self.schedule.cfl < 1.0) || !(self.schedule.dt_max > 0.0) {
            return Err(invalid("schedule needs 0 < cfl < 1 and dt_max > 0"));
        }
        if self.bracket.t_start < 1.0 || self.bracket.sigma < self.bracket.sigma_min {
            return Err(invalid(format!(
                "bracket needs t_start >= 1 and sigma >= {}",
                self.bracket.sigma_min
            )));
        }
        if self.bracket.ensemble_size == 0 || self.mixing.ensemble_size == 0 {
            return Err(invalid("ensemble sizes must be positive"));
        }
        if !self.inviscid.n_cells.is_power_of_two() || self.inviscid.n_cells < 8 {
            return Err(invalid("inviscid.n_cells must be a power of two >= 8"));
        }
        Ok(())
    }

    /// Grid size for a viscosity under the resolution rule, rejected when it
    /// would exceed n_max.
    pub fn grid_for(&self, nu: f64) -> Result<usize, ConfigError> {
        if self.grid.n_override != 0 {
            if !self.grid.n_override.is_power_of_two() {
                return Err(invalid("grid.n_override must be a power of two"));
            }
            return Ok(self.grid.n_override);
        }
        let needed = self.grid.resolution_factor / nu;
        let n = (needed.ceil() as usize).next_power_of_two().max(8);
        if n > self.grid.n_max {
            return Err(invalid(format!(
                "viscosity {nu} needs N = {n} > n_max = {} under the resolution rule",
                self.grid.n_max
            )));
        }
        Ok(n)
    }

    /// Forcing spec for one ensemble member.
    pub fn forcing_for(&self, member_id: u64) -> ForcingSpec {
        match self.forcing.rule.as_str() {
            "explicit" => ForcingSpec::new(
                self.forcing.coefficients.clone(),
                self.experiment.seed,
                member_id,
            ),
            _ => ForcingSpec::inverse_s_bandlimited(
                self.forcing.s_max,
                self.forcing.b0,
                self.experiment.seed,
                member_id,
            ),
        }
    }

    pub fn schedule_to(&self, t_end: f64) -> StepSchedule {
        StepSchedule {
            dt_max: self.schedule.dt_max,
            cfl: self.schedule.cfl,
            t_end,
            observable_stride: self.schedule.observable_stride,
            snapshot_dt: self.schedule.snapshot_dt,
        }
    }

    pub fn bracket_spec(&self) -> BracketSpec {
        BracketSpec::with_sigma_min(
            self.bracket.t_start,
            self.bracket.sigma,
            self.bracket.ensemble_size,
            self.bracket.sigma_min,
        )
        .expect("validated at load time")
    }
}
