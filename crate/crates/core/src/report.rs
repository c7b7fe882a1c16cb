//! Screening report emitters: CSV, JSON and an SVG bar chart of mean
//! affinities. All output is byte-deterministic for a given report.

use std::fmt::Write as _;
use std::io;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dockrun::DockingResult;
use crate::screen::{
    aggregate_profiles, filter_modes, rank_candidates, select_candidates, Rationale, RankedLigand,
    ScreenError, ScreeningConfig,
};

pub const CSV_HEADER: &str =
    "ligand,mean_affinity_mrjp1,mean_affinity_apisimin,delta,modes_mrjp1,modes_apisimin,selected";

#[derive(Debug, Error)]
pub enum ReportError {
    #[error("ligand {0} has no mean affinity on both receptors")]
    IncompleteProfile(String),
    #[error("report csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("report csv: unexpected header {0:?}")]
    Header(String),
    #[error(transparent)]
    Io(#[from] io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Csv,
    Json,
}

impl std::str::FromStr for Format {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "csv" => Ok(Format::Csv),
            "json" => Ok(Format::Json),
            other => Err(format!("unknown format {other:?} (expected csv or json)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScreenReport {
    /// Thresholds actually used, echoed into every output.
    pub config: ScreeningConfig,
    /// Complete profiles in rank order.
    pub ranking: Vec<RankedLigand>,
    pub incomplete: Vec<String>,
    pub selected: Vec<String>,
    pub rationale: Vec<Rationale>,
    /// Why selection could not run (e.g. control ligand missing).
    pub selection_error: Option<String>,
}

impl ScreenReport {
    /// Filter, aggregate, rank and select in one go.
    pub fn build(results: &[DockingResult], config: &ScreeningConfig) -> Result<Self, ScreenError> {
        config.validate()?;
        let filtered: Vec<DockingResult> = results.iter().map(|r| filter_modes(r, config)).collect();
        let profiles = aggregate_profiles(&filtered, config.aggregation);
        let ranking = rank_candidates(&profiles, &config.target, &config.counter);
        let (selected, rationale, selection_error) = match select_candidates(&profiles, config) {
            Ok(s) => (s.selected, s.rationale, None),
            Err(e) => (Vec::new(), Vec::new(), Some(e.to_string())),
        };
        Ok(ScreenReport {
            config: config.clone(),
            ranking: ranking.ranked,
            incomplete: ranking.incomplete,
            selected,
            rationale,
            selection_error,
        })
    }

    pub fn empty(config: ScreeningConfig) -> Self {
        ScreenReport {
            config,
            ranking: Vec::new(),
            incomplete: Vec::new(),
            selected: Vec::new(),
            rationale: Vec::new(),
            selection_error: None,
        }
    }

    pub fn ranked_ids(&self) -> Vec<&str> {
        self.ranking.iter().map(|r| r.profile.ligand_id.as_str()).collect()
    }

    pub fn is_selected(&self, ligand: &str) -> bool {
        self.selected.iter().any(|s| s == ligand)
    }
}

fn fixed4(v: f64) -> String {
    let text = format!("{v:.4}");
    if text == "-0.0000" {
        "0.0000".to_string()
    } else {
        text
    }
}

pub fn emit_report(r: &ScreenReport, format: Format) -> String {
    match format {
        Format::Csv => emit_csv(r),
        Format::Json => emit_json(r),
    }
}

fn emit_csv(r: &ScreenReport) -> String {
    let (target, counter) = (&r.config.target, &r.config.counter);
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for row in &r.ranking {
        let p = &row.profile;
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{}",
            p.ligand_id,
            fixed4(p.mean_affinity[target]),
            fixed4(p.mean_affinity[counter]),
            fixed4(row.delta),
            p.modes_on(target),
            p.modes_on(counter),
            r.is_selected(&p.ligand_id)
        );
    }
    out
}

#[derive(Serialize)]
struct JsonRow<'a> {
    ligand: &'a str,
    mean_affinity_target: f64,
    mean_affinity_counter: f64,
    delta: f64,
    modes_target: usize,
    modes_counter: usize,
    selected: bool,
}

#[derive(Serialize)]
struct JsonReport<'a> {
    config: &'a ScreeningConfig,
    ranking: Vec<JsonRow<'a>>,
    selected: &'a [String],
    incomplete: &'a [String],
    rationale: &'a [Rationale],
    selection_error: &'a Option<String>,
}

fn emit_json(r: &ScreenReport) -> String {
    let (target, counter) = (&r.config.target, &r.config.counter);
    let json = JsonReport {
        config: &r.config,
        ranking: r
            .ranking
            .iter()
            .map(|row| JsonRow {
                ligand: &row.profile.ligand_id,
                mean_affinity_target: row.profile.mean_affinity[target],
                mean_affinity_counter: row.profile.mean_affinity[counter],
                delta: row.delta,
                modes_target: row.profile.modes_on(target),
                modes_counter: row.profile.modes_on(counter),
                selected: r.is_selected(&row.profile.ligand_id),
            })
            .collect(),
        selected: &r.selected,
        incomplete: &r.incomplete,
        rationale: &r.rationale,
        selection_error: &r.selection_error,
    };
    let mut text = serde_json::to_string_pretty(&json).expect("report serialises");
    text.push('\n');
    text
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
pub struct ReportRow {
    pub ligand: String,
    pub mean_affinity_mrjp1: f64,
    pub mean_affinity_apisimin: f64,
    pub delta: f64,
    pub modes_mrjp1: usize,
    pub modes_apisimin: usize,
    pub selected: bool,
}

pub fn parse_report_csv<R: io::Read>(reader: R) -> Result<Vec<ReportRow>, ReportError> {
    let mut csv = csv::Reader::from_reader(reader);
    let header = csv.headers()?.iter().collect::<Vec<_>>().join(",");
    if header != CSV_HEADER {
        return Err(ReportError::Header(header));
    }
    Ok(csv.deserialize().collect::<Result<_, _>>()?)
}

const BAR_WIDTH: f64 = 18.0;
const GROUP_GAP: f64 = 24.0;
const PLOT_HEIGHT: f64 = 300.0;
const LEFT: f64 = 80.0;
const TOP: f64 = 50.0;
const TARGET_FILL: &str = "#c8811a";
const COUNTER_FILL: &str = "#4a7ab5";

fn escape(text: &str) -> String {
    text.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

/// Grouped bar chart, one group per ranked ligand with the target bar first.
/// Bars are drawn as affinity magnitudes; taller means stronger binding.
pub fn emit_chart_svg(r: &ScreenReport) -> Result<String, ReportError> {
    if let Some(ligand) = r.incomplete.first() {
        return Err(ReportError::IncompleteProfile(ligand.clone()));
    }
    let (target, counter) = (&r.config.target, &r.config.counter);
    let groups = r.ranking.len();
    let peak = r
        .ranking
        .iter()
        .flat_map(|row| [row.profile.mean_affinity[target], row.profile.mean_affinity[counter]])
        .map(f64::abs)
        .fold(0.0f64, f64::max);
    let axis_max = peak.ceil().max(1.0);
    let px_per_kcal = PLOT_HEIGHT / axis_max;
    let plot_width = groups as f64 * (2.0 * BAR_WIDTH + GROUP_GAP) + GROUP_GAP;
    let width = LEFT + plot_width + 160.0;
    let height = TOP + PLOT_HEIGHT + 80.0;
    let baseline = TOP + PLOT_HEIGHT;

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{width:.0}" height="{height:.0}" viewBox="0 0 {width:.0} {height:.0}">"#
    );
    let _ = writeln!(
        svg,
        r#"<text x="{:.1}" y="24" font-family="sans-serif" font-size="15" text-anchor="middle">Mean binding affinity per ligand</text>"#,
        width / 2.0
    );
    // y axis with integer kcal/mol ticks
    let _ = writeln!(
        svg,
        r#"<line x1="{LEFT:.1}" y1="{TOP:.1}" x2="{LEFT:.1}" y2="{baseline:.1}" stroke="black"/>"#
    );
    let _ = writeln!(
        svg,
        r#"<line x1="{LEFT:.1}" y1="{baseline:.1}" x2="{:.1}" y2="{baseline:.1}" stroke="black"/>"#,
        LEFT + plot_width
    );
    for tick in 0..=axis_max as u32 {
        let y = baseline - tick as f64 * px_per_kcal;
        let _ = writeln!(
            svg,
            r#"<text x="{:.1}" y="{:.1}" font-family="sans-serif" font-size="10" text-anchor="end">-{tick}</text>"#,
            LEFT - 6.0,
            y + 3.0
        );
    }
    let _ = writeln!(
        svg,
        r#"<text class="axis-label" x="20" y="{:.1}" font-family="sans-serif" font-size="12" text-anchor="middle" transform="rotate(-90 20 {:.1})">Binding affinity (kcal/mol), more negative = stronger</text>"#,
        TOP + PLOT_HEIGHT / 2.0,
        TOP + PLOT_HEIGHT / 2.0
    );

    for (g, row) in r.ranking.iter().enumerate() {
        let ligand = escape(&row.profile.ligand_id);
        let x0 = LEFT + GROUP_GAP + g as f64 * (2.0 * BAR_WIDTH + GROUP_GAP);
        let _ = writeln!(svg, r#"<g class="ligand" data-ligand="{ligand}">"#);
        for (k, (receptor, fill)) in [(target, TARGET_FILL), (counter, COUNTER_FILL)].into_iter().enumerate() {
            let mean = row.profile.mean_affinity[receptor];
            let h = mean.abs() * px_per_kcal;
            let _ = writeln!(
                svg,
                r#"<rect class="bar" data-receptor="{}" data-mean="{:.4}" x="{:.3}" y="{:.3}" width="{BAR_WIDTH:.3}" height="{h:.3}" fill="{fill}"/>"#,
                escape(receptor),
                mean,
                x0 + k as f64 * BAR_WIDTH,
                baseline - h
            );
        }
        let _ = writeln!(
            svg,
            r#"<text x="{:.3}" y="{:.1}" font-family="sans-serif" font-size="11" text-anchor="middle">{ligand}</text>"#,
            x0 + BAR_WIDTH,
            baseline + 16.0
        );
        svg.push_str("</g>\n");
    }

    let legend_x = LEFT + plot_width + 20.0;
    for (k, (receptor, fill)) in [(target, TARGET_FILL), (counter, COUNTER_FILL)].into_iter().enumerate() {
        let y = TOP + 10.0 + k as f64 * 20.0;
        let _ = writeln!(
            svg,
            r#"<rect x="{legend_x:.1}" y="{:.1}" width="12" height="12" fill="{fill}"/>"#,
            y - 10.0
        );
        let _ = writeln!(
            svg,
            r#"<text x="{:.1}" y="{y:.1}" font-family="sans-serif" font-size="12">{}</text>"#,
            legend_x + 18.0,
            escape(receptor)
        );
    }
    svg.push_str("</svg>\n");
    Ok(svg)
}
