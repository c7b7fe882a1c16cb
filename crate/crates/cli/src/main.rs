use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use royalscreen::claseval::{
    build_confusion, coarsen_confusion, compute_metrics, named_mapping, read_prediction_pairs, six_class_labels,
};
use royalscreen::geometry::{suggest_grid_box, DEFAULT_GRID_MARGIN};
use royalscreen::keyvalue::format_decimal;
use royalscreen::report::{emit_chart_svg, emit_report, Format, ScreenReport};
use royalscreen::screen::{read_mode_table_file, Aggregation};
use royalscreen::structio::{isolate_receptor, parse_structure, serialize_structure};
use royalscreen::{ChainSelection, ScreeningConfig, SourceKind};
use royalscreen_cli::{load_manifest, run_pipeline, EngineSpec, RunStatus};

#[derive(Parser)]
#[command(name = "royalscreen", version, about = "Docking-based ligand screening for MRJP1 / Apisimin")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Keep selected chains of a receptor structure.
    Isolate {
        /// Chain ids to keep; repeat or comma-separate.
        #[arg(long, required = true, value_delimiter = ',')]
        keep: Vec<char>,
        /// Also drop HETATM records (waters, co-crystallized ligands).
        #[arg(long)]
        drop_hetero: bool,
        input: PathBuf,
        output: PathBuf,
    },
    /// Suggest a docking grid box around a receptor.
    Gridgen {
        receptor: PathBuf,
        /// Padding added on every face (Å).
        #[arg(long, default_value_t = DEFAULT_GRID_MARGIN)]
        margin: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Dock every receptor/ligand pair in a manifest and screen the results.
    Run {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        out_dir: PathBuf,
        /// "mock" or a shell template containing {config}.
        #[arg(long)]
        engine: Option<String>,
        #[arg(long)]
        max_parallel: Option<usize>,
        /// Grid padding for receptors without an explicit box (Å).
        #[arg(long)]
        grid_margin: Option<f64>,
        #[command(flatten)]
        thresholds: Thresholds,
    },
    /// Rank and select ligands from a mode table.
    Screen {
        /// CSV with receptor,ligand,mode,affinity_kcal_mol,rmsd_ub_angstrom.
        #[arg(long)]
        fixture: PathBuf,
        #[arg(long, value_enum, default_value_t = OutFormat::Csv)]
        format: OutFormat,
        /// Shorthand for --format json.
        #[arg(long)]
        json: bool,
        #[arg(long)]
        out: Option<PathBuf>,
        #[command(flatten)]
        thresholds: Thresholds,
    },
    /// Write report CSV, JSON and chart for a mode table.
    Report {
        #[arg(long)]
        fixture: PathBuf,
        #[arg(long)]
        out_dir: PathBuf,
        #[command(flatten)]
        thresholds: Thresholds,
    },
    /// Confusion-matrix metrics for classifier predictions.
    Claseval {
        /// CSV with true_label,predicted_label.
        #[arg(long)]
        pairs: PathBuf,
        /// six_class, three_class or two_class.
        #[arg(long, default_value = "six_class")]
        mapping: String,
        #[arg(long, value_enum, default_value_t = OutFormat::Csv)]
        format: OutFormat,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args)]
struct Thresholds {
    /// Discard modes with rmsd_ub at or above this (Å).
    #[arg(long)]
    rmsd_max: Option<f64>,
    /// Allowed Apisimin deviation from the control (kcal/mol).
    #[arg(long)]
    tolerance: Option<f64>,
    /// Required MRJP1 improvement over the control (kcal/mol).
    #[arg(long)]
    margin: Option<f64>,
    #[arg(long)]
    control: Option<String>,
    #[arg(long)]
    aggregation: Option<String>,
}

impl Thresholds {
    fn apply(&self, cfg: &mut ScreeningConfig) -> Result<()> {
        if let Some(v) = self.rmsd_max {
            cfg.rmsd_ub_max = v;
        }
        if let Some(v) = self.tolerance {
            cfg.apisimin_tolerance = v;
        }
        if let Some(v) = self.margin {
            cfg.mrjp1_margin = v;
        }
        if let Some(v) = &self.control {
            cfg.control_ligand = v.clone();
        }
        if let Some(v) = &self.aggregation {
            cfg.aggregation = v.parse::<Aggregation>().map_err(anyhow::Error::msg)?;
        }
        cfg.validate()?;
        Ok(())
    }

    fn config(&self) -> Result<ScreeningConfig> {
        let mut cfg = ScreeningConfig::default();
        self.apply(&mut cfg)?;
        Ok(cfg)
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum OutFormat {
    Csv,
    Json,
}

impl From<OutFormat> for Format {
    fn from(f: OutFormat) -> Format {
        match f {
            OutFormat::Csv => Format::Csv,
            OutFormat::Json => Format::Json,
        }
    }
}

fn require_file(path: &Path) -> Result<()> {
    if !path.is_file() {
        bail!("input file {} does not exist", path.display());
    }
    Ok(())
}

fn emit(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(path) => fs::write(path, text).with_context(|| format!("writing {}", path.display())),
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout.write_all(text.as_bytes())?;
            stdout.flush()?;
            Ok(())
        }
    }
}

fn load_report(fixture: &Path, thresholds: &Thresholds) -> Result<ScreenReport> {
    require_file(fixture)?;
    let cfg = thresholds.config()?;
    let results = read_mode_table_file(fixture).with_context(|| format!("reading {}", fixture.display()))?;
    Ok(ScreenReport::build(&results, &cfg)?)
}

fn run(cli: Cli) -> Result<RunStatus> {
    match cli.command {
        Command::Isolate { keep, drop_hetero, input, output } => {
            require_file(&input)?;
            let text = fs::read_to_string(&input).with_context(|| format!("reading {}", input.display()))?;
            let parsed = parse_structure(&text, SourceKind::from_path(&input))
                .with_context(|| format!("parsing {}", input.display()))?;
            let isolated = isolate_receptor(&parsed, &ChainSelection::new(keep, drop_hetero)?)?;
            emit(Some(&output), &serialize_structure(&isolated)?)?;
            Ok(RunStatus::Success)
        }
        Command::Gridgen { receptor, margin, out } => {
            require_file(&receptor)?;
            let text = fs::read_to_string(&receptor).with_context(|| format!("reading {}", receptor.display()))?;
            let parsed = parse_structure(&text, SourceKind::from_path(&receptor))
                .with_context(|| format!("parsing {}", receptor.display()))?;
            let grid = suggest_grid_box(&parsed, margin)?;
            let mut lines = String::new();
            for (axis, k) in ["x", "y", "z"].iter().zip(0..3) {
                lines.push_str(&format!("center_{axis} = {}\n", format_decimal(grid.center[k])));
            }
            for (axis, k) in ["x", "y", "z"].iter().zip(0..3) {
                lines.push_str(&format!("size_{axis} = {}\n", format_decimal(grid.size[k])));
            }
            emit(out.as_deref(), &lines)?;
            Ok(RunStatus::Success)
        }
        Command::Run { manifest, out_dir, engine, max_parallel, grid_margin, thresholds } => {
            require_file(&manifest)?;
            let mut m = load_manifest(&manifest)?;
            if let Some(e) = engine {
                m.engine = EngineSpec::parse(&e);
            }
            if let Some(n) = max_parallel {
                if n == 0 {
                    bail!("--max-parallel must be at least 1");
                }
                m.max_parallel = n;
            }
            if let Some(g) = grid_margin {
                m.grid_margin = g;
            }
            thresholds.apply(&mut m.screening)?;
            let summary = run_pipeline(&m, &out_dir)?;
            emit(None, &summary.render())?;
            Ok(summary.status())
        }
        Command::Screen { fixture, format, json, out, thresholds } => {
            let report = load_report(&fixture, &thresholds)?;
            let format = if json { Format::Json } else { format.into() };
            emit(out.as_deref(), &emit_report(&report, format))?;
            if let Some(e) = &report.selection_error {
                eprintln!("selection failed: {e}");
                return Ok(RunStatus::Failures);
            }
            Ok(RunStatus::Success)
        }
        Command::Report { fixture, out_dir, thresholds } => {
            let report = load_report(&fixture, &thresholds)?;
            fs::create_dir_all(&out_dir).with_context(|| format!("creating {}", out_dir.display()))?;
            emit(Some(&out_dir.join("report.csv")), &emit_report(&report, Format::Csv))?;
            emit(Some(&out_dir.join("report.json")), &emit_report(&report, Format::Json))?;
            let mut status = RunStatus::Success;
            match emit_chart_svg(&report) {
                Ok(svg) => emit(Some(&out_dir.join("chart.svg")), &svg)?,
                Err(e) => {
                    eprintln!("chart not written: {e}");
                    status = RunStatus::Failures;
                }
            }
            if let Some(e) = &report.selection_error {
                eprintln!("selection failed: {e}");
                status = RunStatus::Failures;
            }
            Ok(status)
        }
        Command::Claseval { pairs, mapping, format, out } => {
            require_file(&pairs)?;
            let mapping = named_mapping(&mapping)?;
            let file = fs::File::open(&pairs).with_context(|| format!("opening {}", pairs.display()))?;
            let pairs = read_prediction_pairs(file)?;
            let fine = build_confusion(&pairs, &six_class_labels())?;
            let metrics = compute_metrics(&coarsen_confusion(&fine, &mapping)?)?;
            let text = match format {
                OutFormat::Csv => metrics.to_csv(),
                OutFormat::Json => metrics.to_json(),
            };
            emit(out.as_deref(), &text)?;
            Ok(RunStatus::Success)
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => e.exit(),
    };
    match run(cli) {
        Ok(status) => ExitCode::from(status.code()),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(RunStatus::Usage.code())
        }
    }
}
