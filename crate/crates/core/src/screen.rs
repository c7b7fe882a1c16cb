//! Selectivity screening over docked binding modes.
//!
//! Modes are filtered on their RMSD upper bound, averaged per ligand and
//! receptor, and ligands are ranked by how much more strongly they bind the
//! target receptor than the counter-receptor. Candidates are then picked
//! relative to a control ligand.

use std::collections::BTreeMap;
use std::io;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dockrun::{BindingMode, DockingResult};

pub const MRJP1: &str = "MRJP1";
pub const APISIMIN: &str = "Apisimin";

/// Slack on the inclusive selection thresholds so that values sitting exactly
/// on a threshold in decimal are not lost to binary rounding.
const THRESHOLD_SLACK: f64 = 1e-9;

/// Deltas are ordered at this resolution (kcal/mol); anything finer is noise
/// from averaging.
const RANK_RESOLUTION: f64 = 1e-6;

#[derive(Debug, Error)]
pub enum ScreenError {
    #[error("profile for {ligand} has no retained modes on {receptor}")]
    IncompleteProfile { ligand: String, receptor: String },
    #[error("invalid screening configuration: {0}")]
    Config(String),
    #[error("mode table line {line}: {message}")]
    Table { line: u64, message: String },
    #[error("mode table: {0}")]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Aggregation {
    /// Arithmetic mean over retained modes.
    Mean,
    /// Affinity of the best retained mode only.
    BestMode,
}

impl std::str::FromStr for Aggregation {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "mean" => Ok(Aggregation::Mean),
            "best_mode" | "best" => Ok(Aggregation::BestMode),
            other => Err(format!("unknown aggregation {other:?} (expected mean or best_mode)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScreeningConfig {
    /// Modes with `rmsd_ub` at or above this are discarded (Å).
    pub rmsd_ub_max: f64,
    pub control_ligand: String,
    /// Largest allowed |counter mean - control counter mean| (kcal/mol).
    pub apisimin_tolerance: f64,
    /// Required improvement over the control on the target (kcal/mol).
    pub mrjp1_margin: f64,
    pub target: String,
    pub counter: String,
    pub aggregation: Aggregation,
}

impl Default for ScreeningConfig {
    fn default() -> Self {
        ScreeningConfig {
            rmsd_ub_max: 3.5,
            control_ligand: "94R".to_string(),
            apisimin_tolerance: 0.6,
            mrjp1_margin: 0.9,
            target: MRJP1.to_string(),
            counter: APISIMIN.to_string(),
            aggregation: Aggregation::Mean,
        }
    }
}

impl ScreeningConfig {
    pub fn validate(&self) -> Result<(), ScreenError> {
        if self.rmsd_ub_max.is_nan() || self.rmsd_ub_max <= 0.0 {
            return Err(ScreenError::Config(format!(
                "rmsd_ub_max must be positive, got {}",
                self.rmsd_ub_max
            )));
        }
        if self.apisimin_tolerance.is_nan() || self.apisimin_tolerance < 0.0 {
            return Err(ScreenError::Config(format!(
                "tolerance must be non-negative, got {}",
                self.apisimin_tolerance
            )));
        }
        if self.mrjp1_margin.is_nan() || self.mrjp1_margin < 0.0 {
            return Err(ScreenError::Config(format!(
                "margin must be non-negative, got {}",
                self.mrjp1_margin
            )));
        }
        if self.target == self.counter {
            return Err(ScreenError::Config("target and counter receptor must differ".into()));
        }
        Ok(())
    }
}

/// Keep modes with `rmsd_ub < cfg.rmsd_ub_max`. Mode numbers are not changed.
pub fn filter_modes(result: &DockingResult, cfg: &ScreeningConfig) -> DockingResult {
    DockingResult {
        receptor_id: result.receptor_id.clone(),
        ligand_id: result.ligand_id.clone(),
        modes: result
            .modes
            .iter()
            .filter(|m| m.rmsd_ub < cfg.rmsd_ub_max)
            .copied()
            .collect(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LigandProfile {
    pub ligand_id: String,
    /// Only receptors with at least one retained mode have an entry.
    pub mean_affinity: BTreeMap<String, f64>,
    pub mode_count: BTreeMap<String, usize>,
}

impl LigandProfile {
    pub fn mean(&self, receptor: &str) -> Result<f64, ScreenError> {
        self.mean_affinity
            .get(receptor)
            .copied()
            .ok_or_else(|| ScreenError::IncompleteProfile {
                ligand: self.ligand_id.clone(),
                receptor: receptor.to_string(),
            })
    }

    pub fn modes_on(&self, receptor: &str) -> usize {
        self.mode_count.get(receptor).copied().unwrap_or(0)
    }
}

fn aggregate(modes: &[BindingMode], how: Aggregation) -> Option<f64> {
    let lo = modes.iter().map(|m| m.affinity).reduce(f64::min)?;
    let hi = modes.iter().map(|m| m.affinity).reduce(f64::max)?;
    Some(match how {
        Aggregation::BestMode => lo,
        // clamp only absorbs summation rounding
        Aggregation::Mean => {
            (modes.iter().map(|m| m.affinity).sum::<f64>() / modes.len() as f64).clamp(lo, hi)
        }
    })
}

/// One profile per ligand, sorted by ligand id. Results for the same
/// (ligand, receptor) pair are pooled.
pub fn aggregate_profiles(results: &[DockingResult], how: Aggregation) -> Vec<LigandProfile> {
    let mut grouped: BTreeMap<&str, BTreeMap<&str, Vec<BindingMode>>> = BTreeMap::new();
    for r in results {
        grouped
            .entry(&r.ligand_id)
            .or_default()
            .entry(&r.receptor_id)
            .or_default()
            .extend_from_slice(&r.modes);
    }
    grouped
        .into_iter()
        .map(|(ligand, per_receptor)| {
            let mut profile = LigandProfile {
                ligand_id: ligand.to_string(),
                mean_affinity: BTreeMap::new(),
                mode_count: BTreeMap::new(),
            };
            for (receptor, modes) in per_receptor {
                profile.mode_count.insert(receptor.to_string(), modes.len());
                if let Some(value) = aggregate(&modes, how) {
                    profile.mean_affinity.insert(receptor.to_string(), value);
                }
            }
            profile
        })
        .collect()
}

/// `mean[target] - mean[counter]`; negative means the ligand prefers the target.
pub fn selectivity_delta(profile: &LigandProfile, target: &str, counter: &str) -> Result<f64, ScreenError> {
    Ok(profile.mean(target)? - profile.mean(counter)?)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RankedLigand {
    pub profile: LigandProfile,
    pub delta: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize)]
pub struct Ranking {
    pub ranked: Vec<RankedLigand>,
    /// Ligands lacking a mean on one of the two receptors.
    pub incomplete: Vec<String>,
}

impl Ranking {
    pub fn ids(&self) -> Vec<&str> {
        self.ranked.iter().map(|r| r.profile.ligand_id.as_str()).collect()
    }
}

fn rank_key(delta: f64) -> i64 {
    (delta / RANK_RESOLUTION).round() as i64
}

/// Most target-selective first; equal deltas fall back to ligand id.
pub fn rank_candidates(profiles: &[LigandProfile], target: &str, counter: &str) -> Ranking {
    let mut ranking = Ranking::default();
    for p in profiles {
        match selectivity_delta(p, target, counter) {
            Ok(delta) => ranking.ranked.push(RankedLigand {
                profile: p.clone(),
                delta,
            }),
            Err(_) => ranking.incomplete.push(p.ligand_id.clone()),
        }
    }
    ranking.ranked.sort_by(|a, b| {
        rank_key(a.delta)
            .cmp(&rank_key(b.delta))
            .then_with(|| a.profile.ligand_id.cmp(&b.profile.ligand_id))
    });
    ranking.incomplete.sort();
    ranking
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Rationale {
    pub ligand_id: String,
    pub target_mean: f64,
    pub control_target_mean: f64,
    /// How much better than the control on the target (positive = better).
    pub target_advantage: f64,
    pub counter_mean: f64,
    pub control_counter_mean: f64,
    /// |counter mean - control counter mean|.
    pub counter_gap: f64,
    pub counter_ok: bool,
    pub target_ok: bool,
    pub selected: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Selection {
    pub selected: Vec<String>,
    pub rationale: Vec<Rationale>,
}

/// Pick ligands that bind the counter-receptor about like the control does
/// but bind the target clearly better than the control.
///
/// A non-control ligand is selected when its counter mean is within
/// `apisimin_tolerance` of the control's and its target mean is at least
/// `mrjp1_margin` below the control's.
pub fn select_candidates(profiles: &[LigandProfile], cfg: &ScreeningConfig) -> Result<Selection, ScreenError> {
    cfg.validate()?;
    let control = profiles
        .iter()
        .find(|p| p.ligand_id == cfg.control_ligand)
        .ok_or_else(|| ScreenError::Config(format!("control ligand {} not among profiles", cfg.control_ligand)))?;
    let control_target = control
        .mean(&cfg.target)
        .map_err(|e| ScreenError::Config(format!("control incomplete: {e}")))?;
    let control_counter = control
        .mean(&cfg.counter)
        .map_err(|e| ScreenError::Config(format!("control incomplete: {e}")))?;

    let mut selection = Selection {
        selected: Vec::new(),
        rationale: Vec::new(),
    };
    for p in profiles.iter().filter(|p| p.ligand_id != cfg.control_ligand) {
        let (Ok(target_mean), Ok(counter_mean)) = (p.mean(&cfg.target), p.mean(&cfg.counter)) else {
            continue;
        };
        let counter_gap = (counter_mean - control_counter).abs();
        let target_advantage = control_target - target_mean;
        let counter_ok = counter_gap <= cfg.apisimin_tolerance + THRESHOLD_SLACK;
        let target_ok = target_advantage + THRESHOLD_SLACK >= cfg.mrjp1_margin;
        let selected = counter_ok && target_ok;
        if selected {
            selection.selected.push(p.ligand_id.clone());
        }
        selection.rationale.push(Rationale {
            ligand_id: p.ligand_id.clone(),
            target_mean,
            control_target_mean: control_target,
            target_advantage,
            counter_mean,
            control_counter_mean: control_counter,
            counter_gap,
            counter_ok,
            target_ok,
            selected,
        });
    }
    selection.selected.sort();
    selection.rationale.sort_by(|a, b| a.ligand_id.cmp(&b.ligand_id));
    Ok(selection)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct ModeRow {
    receptor: String,
    ligand: String,
    mode: u32,
    affinity_kcal_mol: f64,
    rmsd_ub_angstrom: f64,
}

/// Read a mode table (`receptor,ligand,mode,affinity_kcal_mol,rmsd_ub_angstrom`).
///
/// Rows are grouped per (receptor, ligand) in file order; the table carries no
/// lower bound, so `rmsd_lb` reads as 0. A `(Control)` suffix on a ligand name
/// is dropped.
pub fn read_mode_table<R: io::Read>(reader: R) -> Result<Vec<DockingResult>, ScreenError> {
    let mut csv = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let mut grouped: BTreeMap<(String, String), Vec<BindingMode>> = BTreeMap::new();
    let headers = csv.headers()?.clone();
    for record in csv.records() {
        let record = record?;
        let line = record.position().map_or(0, |p| p.line());
        let row: ModeRow = record.deserialize(Some(&headers))?;
        let ligand = row
            .ligand
            .strip_suffix("(Control)")
            .map(|s| s.trim().to_string())
            .unwrap_or(row.ligand);
        if row.receptor.is_empty() || ligand.is_empty() {
            return Err(ScreenError::Table {
                line,
                message: "empty receptor or ligand".into(),
            });
        }
        if !row.affinity_kcal_mol.is_finite() || row.rmsd_ub_angstrom.is_nan() || row.rmsd_ub_angstrom < 0.0 {
            return Err(ScreenError::Table {
                line,
                message: format!("{ligand}/{} mode {}: invalid numbers", row.receptor, row.mode),
            });
        }
        grouped.entry((row.receptor, ligand)).or_default().push(BindingMode {
            mode: row.mode,
            affinity: row.affinity_kcal_mol,
            rmsd_lb: 0.0,
            rmsd_ub: row.rmsd_ub_angstrom,
        });
    }
    Ok(grouped
        .into_iter()
        .map(|((receptor_id, ligand_id), modes)| DockingResult {
            receptor_id,
            ligand_id,
            modes,
        })
        .collect())
}

pub fn read_mode_table_file(path: &std::path::Path) -> Result<Vec<DockingResult>, ScreenError> {
    read_mode_table(std::fs::File::open(path)?)
}

/// Write results in the mode-table format, results in the given order.
pub fn write_mode_table(results: &[DockingResult]) -> String {
    let mut out = String::from("receptor,ligand,mode,affinity_kcal_mol,rmsd_ub_angstrom\n");
    for r in results {
        for m in &r.modes {
            out.push_str(&format!(
                "{},{},{},{:.3},{:.3}\n",
                r.receptor_id, r.ligand_id, m.mode, m.affinity, m.rmsd_ub
            ));
        }
    }
    out
}
