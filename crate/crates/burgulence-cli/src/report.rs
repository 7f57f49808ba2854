//! Per-law records, section artifacts (CSV + JSON) and the merged summary.

use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};

use crate::config::Config;

/// How a measured value is compared against its target.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Comparison {
    /// |measured - target| <= tolerance.
    Within,
    /// measured <= target (tolerance unused).
    AtMost,
    /// measured >= target.
    AtLeast,
}

/// One law of the run: a measured exponent or ratio against its prediction.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LawRecord {
    pub id: String,
    pub measured: f64,
    pub stderr: f64,
    pub target: f64,
    pub tolerance: f64,
    pub comparison: Comparison,
    /// The fit window or probe location, always emitted with the exponent.
    pub window: String,
    /// Reported-only rows are informative and never gate the exit status.
    pub asserted: bool,
    pub detail: String,
    pub runtime_s: f64,
}

impl LawRecord {
    pub fn passes(&self) -> bool {
        match self.comparison {
            Comparison::Within => (self.measured - self.target).abs() <= self.tolerance,
            Comparison::AtMost => self.measured <= self.target,
            Comparison::AtLeast => self.measured >= self.target,
        }
    }

    pub fn gate_failed(&self) -> bool {
        self.asserted && !self.passes()
    }
}

/// A plain CSV artifact written under the section directory.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CsvTable {
    /// Path relative to the section directory, e.g. "nu_1e-3/layers.csv".
    pub rel_path: String,
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl CsvTable {
    pub fn new(rel_path: impl Into<String>, header: &[&str]) -> Self {
        Self {
            rel_path: rel_path.into(),
            header: header.iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }
}

/// Everything one experiment produces.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Section {
    pub name: String,
    pub records: Vec<LawRecord>,
    pub tables: Vec<CsvTable>,
}

impl Section {
    pub fn new(name: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            records: Vec::new(),
            tables: Vec::new(),
        }
    }

    pub fn any_gate_failed(&self) -> bool {
        self.records.iter().any(LawRecord::gate_failed)
    }

    /// Write the section directory: CSV tables, the per-law records CSV and
    /// a JSON file consumed by the `report` subcommand.
    pub fn write(&self, out_dir: &Path, cfg: &Config) -> Result<()> {
        let dir = out_dir.join(&self.name);
        fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
        for table in &self.tables {
            let path = dir.join(&table.rel_path);
            if let Some(parent) = path.parent() {
                fs::create_dir_all(parent)?;
            }
            let mut w = csv::Writer::from_path(&path)
                .with_context(|| format!("writing {}", path.display()))?;
            w.write_record(&table.header)?;
            for row in &table.rows {
                w.write_record(row)?;
            }
            w.flush()?;
        }
        let mut w = csv::Writer::from_path(dir.join("records.csv"))?;
        w.write_record([
            "id", "measured", "stderr", "target", "tolerance", "comparison", "window", "asserted",
            "pass",
        ])?;
        for r in &self.records {
            w.write_record([
                r.id.clone(),
                format!("{:.8e}", r.measured),
                format!("{:.8e}", r.stderr),
                format!("{:.8e}", r.target),
                format!("{:.8e}", r.tolerance),
                format!("{:?}", r.comparison),
                r.window.clone(),
                r.asserted.to_string(),
                r.passes().to_string(),
            ])?;
        }
        w.flush()?;
        let blob = SectionFile {
            section: self.clone(),
            config: cfg.clone(),
        };
        fs::write(
            dir.join("section.json"),
            serde_json::to_string_pretty(&blob)?,
        )?;
        Ok(())
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct SectionFile {
    section: Section,
    config: Config,
}

/// Asserted law ids that a complete report must carry exactly once.
pub const REQUIRED_LAWS: &[&str] = &[
    "up_down:m=1",
    "up_down:m=2",
    "power:nu=1e-3",
    "diss_scale:c_d",
    "inertial:p=0.5",
    "inertial:p=1",
    "inertial:p=2",
    "inertial:p=3",
    "diss_range:p=0.5",
    "diss_range:p=2",
    "coupled_contraction:nu=1e-2",
    "coupled_contraction:nu=1e-3",
    "coupled_decay:nu=1e-2",
    "coupled_decay:nu=1e-3",
    "moment_agreement:nu=1e-2",
    "moment_agreement:nu=1e-3",
    "inviscid_power",
    "inviscid_structure:p=1",
    "inviscid_structure:p=2",
    "inviscid_gap_monotone",
];

/// Merge previously written sections into one summary (JSON + text table),
/// returning the gate outcome. When `complete` is set, the canonical law
/// list must be covered exactly once.
pub fn merge_sections(
    out_dir: &Path,
    section_names: &[String],
    complete: bool,
) -> Result<(PathBuf, bool)> {
    let mut sections = Vec::new();
    let mut config_echo = None;
    for name in section_names {
        let path = out_dir.join(name).join("section.json");
        let text = fs::read_to_string(&path)
            .with_context(|| format!("section {name} not found at {}", path.display()))?;
        let blob: SectionFile = serde_json::from_str(&text)?;
        config_echo.get_or_insert(blob.config);
        sections.push(blob.section);
    }
    let mut seen = BTreeSet::new();
    for s in &sections {
        for r in &s.records {
            if !seen.insert(r.id.clone()) {
                bail!("law {} appears more than once across sections", r.id);
            }
        }
    }
    if complete {
        for law in REQUIRED_LAWS {
            if !seen.contains(*law) {
                bail!("complete report is missing law {law}");
            }
        }
    }

    let mut txt = String::new();
    txt.push_str(&format!(
        "{:<34} {:>12} {:>9} {:>12} {:>9}  {:<6} {}\n",
        "law", "measured", "stderr", "target", "tol", "pass", "window"
    ));
    let mut all_pass = true;
    for s in &sections {
        txt.push_str(&format!("-- {} --\n", s.name));
        for r in &s.records {
            let pass = r.passes();
            if r.gate_failed() {
                all_pass = false;
            }
            let flag = match (r.asserted, pass) {
                (true, true) => "PASS",
                (true, false) => "FAIL",
                (false, true) => "info",
                (false, false) => "info!",
            };
            txt.push_str(&format!(
                "{:<34} {:>12.4} {:>9.2e} {:>12.4} {:>9.2} {:<6} {}\n",
                r.id, r.measured, r.stderr, r.target, r.tolerance, flag, r.window
            ));
        }
    }
    let summary_json = serde_json::json!({
        "sections": sections,
        "config": config_echo,
        "all_asserted_laws_pass": all_pass,
    });
    fs::create_dir_all(out_dir)?;
    let json_path = out_dir.join("summary.json");
    fs::write(&json_path, serde_json::to_string_pretty(&summary_json)?)?;
    fs::write(out_dir.join("summary.txt"), &txt)?;
    print!("{txt}");
    Ok((json_path, all_pass))
}
