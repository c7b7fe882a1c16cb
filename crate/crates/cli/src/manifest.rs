//! Pipeline manifest: `key = value` pairs grouped under `[engine]`,
//! `[screening]`, `[receptor ID]` and `[ligand ID]` sections.
//!
//! Relative paths resolve against the manifest's directory.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use royalscreen::dockrun::{DEFAULT_EXHAUSTIVENESS, DEFAULT_NUM_MODES, DEFAULT_TIMEOUT};
use royalscreen::geometry::{GridBox, DEFAULT_GRID_MARGIN};
use royalscreen::keyvalue::{parse_entries, parse_value, Entry, KeyValueError};
use royalscreen::screen::Aggregation;
use royalscreen::{ChainSelection, ScreeningConfig};
use std::time::Duration;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ManifestError {
    #[error("{path}: {source}")]
    Syntax {
        path: String,
        #[source]
        source: KeyValueError,
    },
    #[error("reading {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum EngineSpec {
    Mock,
    /// Shell template containing `{config}`.
    Command(String),
}

impl EngineSpec {
    pub fn parse(text: &str) -> EngineSpec {
        if text == "mock" {
            EngineSpec::Mock
        } else {
            EngineSpec::Command(text.to_string())
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReceptorEntry {
    pub id: String,
    pub path: PathBuf,
    pub selection: ChainSelection,
    pub grid: Option<GridBox>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LigandEntry {
    pub id: String,
    pub path: PathBuf,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineManifest {
    pub engine: EngineSpec,
    pub max_parallel: usize,
    pub timeout: Duration,
    pub num_modes: u32,
    pub exhaustiveness: u32,
    pub grid_margin: f64,
    pub screening: ScreeningConfig,
    pub receptors: Vec<ReceptorEntry>,
    pub ligands: Vec<LigandEntry>,
}

impl PipelineManifest {
    /// Every file the pipeline will read.
    pub fn inputs(&self) -> impl Iterator<Item = &Path> {
        self.receptors
            .iter()
            .map(|r| r.path.as_path())
            .chain(self.ligands.iter().map(|l| l.path.as_path()))
    }
}

pub fn load_manifest(path: &Path) -> Result<PipelineManifest, ManifestError> {
    let text = std::fs::read_to_string(path).map_err(|source| ManifestError::Io {
        path: path.display().to_string(),
        source,
    })?;
    let base = path.parent().unwrap_or(Path::new("."));
    parse_manifest(&text, base).map_err(|source| ManifestError::Syntax {
        path: path.display().to_string(),
        source,
    })
}

enum Section {
    Engine,
    Screening,
    Receptor(usize),
    Ligand(usize),
}

#[derive(Default)]
struct ReceptorDraft {
    line: usize,
    id: String,
    path: Option<PathBuf>,
    chains: Option<Vec<char>>,
    drop_hetero: bool,
    center: Option<[f64; 3]>,
    size: Option<[f64; 3]>,
}

struct LigandDraft {
    line: usize,
    id: String,
    path: Option<PathBuf>,
}

/// Ids become file names, so keep them to a portable character set.
fn valid_id(id: &str) -> bool {
    !id.is_empty()
        && !id.starts_with('.')
        && id.chars().all(|c| c.is_ascii_alphanumeric() || matches!(c, '.' | '_' | '-'))
}

fn triple(line: usize, key: &str, value: &str) -> Result<[f64; 3], KeyValueError> {
    let parts: Vec<&str> = value.split_whitespace().collect();
    if parts.len() != 3 {
        return Err(KeyValueError::new(line, format!("{key} needs three numbers, got {value:?}")));
    }
    Ok([
        parse_value(line, key, parts[0])?,
        parse_value(line, key, parts[1])?,
        parse_value(line, key, parts[2])?,
    ])
}

fn chain_list(line: usize, value: &str) -> Result<Vec<char>, KeyValueError> {
    let mut chains = Vec::new();
    for part in value.split(|c: char| c == ',' || c.is_whitespace()).filter(|p| !p.is_empty()) {
        let mut it = part.chars();
        match (it.next(), it.next()) {
            (Some(c), None) => chains.push(c),
            _ => return Err(KeyValueError::new(line, format!("chain ids are single characters, got {part:?}"))),
        }
    }
    if chains.is_empty() {
        return Err(KeyValueError::new(line, "chains must list at least one chain id"));
    }
    Ok(chains)
}

pub fn parse_manifest(text: &str, base: &Path) -> Result<PipelineManifest, KeyValueError> {
    let mut engine = None;
    let mut max_parallel = 1usize;
    let mut timeout = DEFAULT_TIMEOUT;
    let mut num_modes = DEFAULT_NUM_MODES;
    let mut exhaustiveness = DEFAULT_EXHAUSTIVENESS;
    let mut grid_margin = DEFAULT_GRID_MARGIN;
    let mut screening = ScreeningConfig::default();
    let mut receptors: Vec<ReceptorDraft> = Vec::new();
    let mut ligands: Vec<LigandDraft> = Vec::new();

    let mut section: Option<Section> = None;
    let mut seen_sections = BTreeSet::new();
    let mut seen_keys: BTreeSet<String> = BTreeSet::new();

    for entry in parse_entries(text)? {
        match entry {
            Entry::Section { line, name } => {
                if !seen_sections.insert(name.clone()) {
                    return Err(KeyValueError::new(line, format!("duplicate section [{name}]")));
                }
                seen_keys.clear();
                let (kind, id) = match name.split_once(' ') {
                    Some((k, id)) => (k, Some(id.to_string())),
                    None => (name.as_str(), None),
                };
                if let Some(id) = &id {
                    if !valid_id(id) {
                        return Err(KeyValueError::new(
                            line,
                            format!("id {id:?} may only contain letters, digits, '.', '_' and '-'"),
                        ));
                    }
                }
                section = Some(match (kind, id) {
                    ("engine", None) => Section::Engine,
                    ("screening", None) => Section::Screening,
                    ("receptor", Some(id)) => {
                        receptors.push(ReceptorDraft { line, id, ..Default::default() });
                        Section::Receptor(receptors.len() - 1)
                    }
                    ("ligand", Some(id)) => {
                        ligands.push(LigandDraft { line, id, path: None });
                        Section::Ligand(ligands.len() - 1)
                    }
                    _ => return Err(KeyValueError::new(line, format!("unknown section [{name}]"))),
                });
            }
            Entry::Pair { line, key, value } => {
                let Some(current) = &section else {
                    return Err(KeyValueError::new(line, format!("{key} appears before any section")));
                };
                if !seen_keys.insert(key.clone()) {
                    return Err(KeyValueError::new(line, format!("duplicate key {key}")));
                }
                let v = value.as_str();
                match (current, key.as_str()) {
                    (Section::Engine, "command") => engine = Some(EngineSpec::parse(v)),
                    (Section::Engine, "max_parallel") => max_parallel = parse_value(line, &key, v)?,
                    (Section::Engine, "timeout_secs") => {
                        timeout = Duration::from_secs_f64(parse_value::<f64>(line, &key, v).and_then(|t| {
                            if t > 0.0 && t.is_finite() {
                                Ok(t)
                            } else {
                                Err(KeyValueError::new(line, "timeout_secs must be positive"))
                            }
                        })?)
                    }
                    (Section::Engine, "num_modes") => num_modes = parse_value(line, &key, v)?,
                    (Section::Engine, "exhaustiveness") => exhaustiveness = parse_value(line, &key, v)?,
                    (Section::Engine, "grid_margin") => grid_margin = parse_value(line, &key, v)?,
                    (Section::Screening, "rmsd_ub_max") => screening.rmsd_ub_max = parse_value(line, &key, v)?,
                    (Section::Screening, "control_ligand") => screening.control_ligand = v.to_string(),
                    (Section::Screening, "apisimin_tolerance") => {
                        screening.apisimin_tolerance = parse_value(line, &key, v)?
                    }
                    (Section::Screening, "mrjp1_margin") => screening.mrjp1_margin = parse_value(line, &key, v)?,
                    (Section::Screening, "target") => screening.target = v.to_string(),
                    (Section::Screening, "counter") => screening.counter = v.to_string(),
                    (Section::Screening, "aggregation") => {
                        screening.aggregation = v
                            .parse::<Aggregation>()
                            .map_err(|e| KeyValueError::new(line, e))?
                    }
                    (Section::Receptor(i), "path") => receptors[*i].path = Some(base.join(v)),
                    (Section::Receptor(i), "chains") => receptors[*i].chains = Some(chain_list(line, v)?),
                    (Section::Receptor(i), "drop_hetero") => receptors[*i].drop_hetero = parse_value(line, &key, v)?,
                    (Section::Receptor(i), "grid_center") => receptors[*i].center = Some(triple(line, &key, v)?),
                    (Section::Receptor(i), "grid_size") => receptors[*i].size = Some(triple(line, &key, v)?),
                    (Section::Ligand(i), "path") => ligands[*i].path = Some(base.join(v)),
                    _ => return Err(KeyValueError::new(line, format!("unknown key {key} in this section"))),
                }
            }
        }
    }

    let end = text.lines().count().max(1);
    let engine = engine.ok_or_else(|| KeyValueError::new(end, "[engine] command is required"))?;
    if max_parallel == 0 {
        return Err(KeyValueError::new(end, "max_parallel must be at least 1"));
    }
    if grid_margin.is_nan() || grid_margin < 0.0 {
        return Err(KeyValueError::new(end, "grid_margin must be non-negative"));
    }
    screening.validate().map_err(|e| KeyValueError::new(end, e.to_string()))?;

    let mut ids = BTreeSet::new();
    let mut out_receptors = Vec::new();
    for r in receptors {
        if !ids.insert(r.id.clone()) {
            return Err(KeyValueError::new(r.line, format!("duplicate receptor id {}", r.id)));
        }
        let path = r.path.ok_or_else(|| KeyValueError::new(r.line, format!("receptor {} has no path", r.id)))?;
        let chains = r.chains.ok_or_else(|| KeyValueError::new(r.line, format!("receptor {} has no chains", r.id)))?;
        let selection = ChainSelection::new(chains, r.drop_hetero).map_err(|e| KeyValueError::new(r.line, e.to_string()))?;
        let grid = match (r.center, r.size) {
            (None, None) => None,
            (Some(c), Some(s)) => Some(GridBox::new(c, s).map_err(|e| KeyValueError::new(r.line, e.to_string()))?),
            _ => {
                return Err(KeyValueError::new(
                    r.line,
                    format!("receptor {} needs both grid_center and grid_size", r.id),
                ))
            }
        };
        out_receptors.push(ReceptorEntry { id: r.id, path, selection, grid });
    }
    let mut ids = BTreeSet::new();
    let mut out_ligands = Vec::new();
    for l in ligands {
        if !ids.insert(l.id.clone()) {
            return Err(KeyValueError::new(l.line, format!("duplicate ligand id {}", l.id)));
        }
        let path = l.path.ok_or_else(|| KeyValueError::new(l.line, format!("ligand {} has no path", l.id)))?;
        out_ligands.push(LigandEntry { id: l.id, path });
    }
    if out_receptors.is_empty() || out_ligands.is_empty() {
        return Err(KeyValueError::new(end, "at least one receptor and one ligand are required"));
    }

    Ok(PipelineManifest {
        engine,
        max_parallel,
        timeout,
        num_modes,
        exhaustiveness,
        grid_margin,
        screening,
        receptors: out_receptors,
        ligands: out_ligands,
    })
}
