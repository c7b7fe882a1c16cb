//! End-to-end run: isolate receptors, size grids, dock every pair, screen and
//! write reports.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use royalscreen::dockrun::{run_batch, BatchOptions, BatchOutcome, CommandEngine, DockError, DockingEngine, MockEngine};
use royalscreen::geometry::{suggest_grid_box, GeometryError};
use royalscreen::report::{emit_chart_svg, emit_report, Format, ScreenReport};
use royalscreen::screen::{write_mode_table, ScreenError};
use royalscreen::structio::{
    isolate_receptor, parse_structure, serialize_structure, validate_prepared_ligand, StructureError,
};
use royalscreen::{DockingJob, GridBox, SourceKind};
use thiserror::Error;

use crate::manifest::{EngineSpec, PipelineManifest};

/// Process exit status shared by every subcommand.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RunStatus {
    Success,
    /// Outputs were written but some jobs or the analysis failed.
    Failures,
    /// Bad arguments, configuration or inputs; nothing was written.
    Usage,
}

impl RunStatus {
    pub fn code(self) -> u8 {
        match self {
            RunStatus::Success => 0,
            RunStatus::Failures => 1,
            RunStatus::Usage => 2,
        }
    }
}

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("missing input file {0}")]
    MissingInput(PathBuf),
    #[error("reading {path}: {source}")]
    Read {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("receptor {id}: {source}")]
    Receptor {
        id: String,
        #[source]
        source: StructureError,
    },
    #[error("receptor {id}: {source}")]
    Grid {
        id: String,
        #[source]
        source: GeometryError,
    },
    #[error("ligand {id}: {message}")]
    Ligand { id: String, message: String },
    #[error(transparent)]
    Dock(#[from] DockError),
    #[error(transparent)]
    Screen(#[from] ScreenError),
    #[error("writing {path}: {source}")]
    Write {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

#[derive(Debug, Clone)]
pub struct PipelineSummary {
    pub job_count: usize,
    pub outcome: BatchOutcome,
    pub report: ScreenReport,
    pub chart_error: Option<String>,
}

impl PipelineSummary {
    pub fn status(&self) -> RunStatus {
        if self.outcome.failures.is_empty() && self.report.selection_error.is_none() && self.chart_error.is_none() {
            RunStatus::Success
        } else {
            RunStatus::Failures
        }
    }

    /// Plain-text run summary, free of absolute output paths.
    pub fn render(&self) -> String {
        let r = &self.report;
        let mut s = String::new();
        let _ = writeln!(s, "jobs: {}", self.job_count);
        let _ = writeln!(s, "docked: {}", self.outcome.results.len());
        let _ = writeln!(s, "failed: {}", self.outcome.failures.len());
        let _ = writeln!(s, "ranked: {}", r.ranking.len());
        let _ = writeln!(s, "ranking: {}", r.ranked_ids().join(", "));
        let _ = writeln!(s, "selected: {}", r.selected.join(", "));
        let _ = writeln!(s, "incomplete: {}", r.incomplete.join(", "));
        let _ = writeln!(s, "selection_error: {}", r.selection_error.as_deref().unwrap_or("none"));
        let _ = writeln!(s, "chart: {}", self.chart_error.as_deref().unwrap_or("written"));
        let _ = writeln!(s, "status: {}", self.status().code());
        if !self.outcome.failures.is_empty() {
            s.push_str("failures:\n");
            for f in &self.outcome.failures {
                let _ = writeln!(s, "  {f}");
            }
        }
        s
    }
}

struct Prepared {
    id: String,
    text: String,
    extension: &'static str,
    grid: GridBox,
}

fn read(path: &Path) -> Result<String, PipelineError> {
    fs::read_to_string(path).map_err(|source| PipelineError::Read {
        path: path.to_path_buf(),
        source,
    })
}

fn write(path: &Path, contents: &str) -> Result<(), PipelineError> {
    fs::write(path, contents).map_err(|source| PipelineError::Write {
        path: path.to_path_buf(),
        source,
    })
}

fn create_dir(path: &Path) -> Result<(), PipelineError> {
    fs::create_dir_all(path).map_err(|source| PipelineError::Write {
        path: path.to_path_buf(),
        source,
    })
}

/// Checks and parses every input before touching `out_dir`, so any
/// configuration error leaves no partial outputs behind.
fn prepare(m: &PipelineManifest) -> Result<Vec<Prepared>, PipelineError> {
    if let Some(missing) = m.inputs().find(|p| !p.is_file()) {
        return Err(PipelineError::MissingInput(missing.to_path_buf()));
    }
    if let EngineSpec::Command(template) = &m.engine {
        CommandEngine::new(template.clone())?;
    }

    let mut receptors = Vec::new();
    for r in &m.receptors {
        let kind = SourceKind::from_path(&r.path);
        let receptor_err = |source| PipelineError::Receptor { id: r.id.clone(), source };
        let full = parse_structure(&read(&r.path)?, kind).map_err(receptor_err)?;
        let isolated = isolate_receptor(&full, &r.selection).map_err(receptor_err)?;
        let grid = match r.grid {
            Some(g) => g,
            None => suggest_grid_box(&isolated, m.grid_margin).map_err(|source| PipelineError::Grid {
                id: r.id.clone(),
                source,
            })?,
        };
        receptors.push(Prepared {
            id: r.id.clone(),
            text: serialize_structure(&isolated).map_err(receptor_err)?,
            extension: match kind {
                SourceKind::Pdb => "pdb",
                SourceKind::Pdbqt => "pdbqt",
            },
            grid,
        });
    }

    for l in &m.ligands {
        let parsed = parse_structure(&read(&l.path)?, SourceKind::Pdbqt).map_err(|e| PipelineError::Ligand {
            id: l.id.clone(),
            message: e.to_string(),
        })?;
        let report = validate_prepared_ligand(&parsed);
        if !report.passed() {
            let reasons: Vec<String> = report.failures().map(|f| f.message.clone()).collect();
            return Err(PipelineError::Ligand {
                id: l.id.clone(),
                message: format!("not a prepared ligand: {}", reasons.join("; ")),
            });
        }
    }
    Ok(receptors)
}

/// Run the whole screen described by `m`, writing everything under `out_dir`.
///
/// Errors mean nothing useful ran (status 2); job and analysis failures are
/// reported through [`PipelineSummary::status`] with all outputs written.
pub fn run_pipeline(m: &PipelineManifest, out_dir: &Path) -> Result<PipelineSummary, PipelineError> {
    let receptors = prepare(m)?;
    let engine: Box<dyn DockingEngine> = match &m.engine {
        EngineSpec::Mock => Box::new(MockEngine),
        EngineSpec::Command(t) => Box::new(CommandEngine::new(t.clone())?),
    };

    let out_dir = std::path::absolute(out_dir).map_err(|source| PipelineError::Write {
        path: out_dir.to_path_buf(),
        source,
    })?;
    let receptor_dir = out_dir.join("receptors");
    let job_dir = out_dir.join("jobs");
    create_dir(&receptor_dir)?;
    create_dir(&job_dir)?;

    let mut jobs = Vec::new();
    for r in &receptors {
        let receptor_path = receptor_dir.join(format!("{}.{}", r.id, r.extension));
        write(&receptor_path, &r.text)?;
        for l in &m.ligands {
            let ligand_path = std::path::absolute(&l.path).map_err(|source| PipelineError::Read {
                path: l.path.clone(),
                source,
            })?;
            jobs.push(DockingJob {
                receptor_id: r.id.clone(),
                ligand_id: l.id.clone(),
                receptor_path: receptor_path.clone(),
                ligand_path,
                grid: r.grid,
                num_modes: m.num_modes,
                exhaustiveness: m.exhaustiveness,
                out_path: job_dir.join(format!("{}__{}.pdbqt", r.id, l.id)),
            });
        }
    }

    let outcome = run_batch(
        &jobs,
        engine.as_ref(),
        BatchOptions {
            max_parallel: m.max_parallel,
            timeout: m.timeout,
        },
    )?;

    let report = ScreenReport::build(&outcome.results, &m.screening)?;
    write(&out_dir.join("results.csv"), &write_mode_table(&outcome.results))?;
    write(&out_dir.join("report.csv"), &emit_report(&report, Format::Csv))?;
    write(&out_dir.join("report.json"), &emit_report(&report, Format::Json))?;
    let chart_path = out_dir.join("chart.svg");
    let chart_error = match emit_chart_svg(&report) {
        Ok(svg) => {
            write(&chart_path, &svg)?;
            None
        }
        Err(e) => {
            // never leave a chart from an earlier run next to a new report
            if chart_path.exists() {
                fs::remove_file(&chart_path).map_err(|source| PipelineError::Write {
                    path: chart_path.clone(),
                    source,
                })?;
            }
            Some(e.to_string())
        }
    };

    let summary = PipelineSummary {
        job_count: jobs.len(),
        outcome,
        report,
        chart_error,
    };
    write(&out_dir.join("summary.txt"), &summary.render())?;
    Ok(summary)
}
