//! Docking job configuration, engine invocation and result-log parsing.
//!
//! A batch is a set of receptor/ligand pairs. Each job writes its config next
//! to its pose output (`<out>.conf`), runs the engine, and keeps the engine's
//! standard output as `<out>.log`. Results come back sorted by
//! `(receptor_id, ligand_id)` whatever order the jobs finished in.

use std::collections::BTreeSet;
use std::fmt;
use std::io::Read;
use std::path::{Path, PathBuf};
use std::process::{Command, Stdio};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::thread;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::geometry::GridBox;
use crate::keyvalue::{self, format_decimal, Entry, KeyValueError};

pub const DEFAULT_NUM_MODES: u32 = 9;
pub const DEFAULT_EXHAUSTIVENESS: u32 = 8;
pub const DEFAULT_TIMEOUT: Duration = Duration::from_secs(600);

const CONFIG_KEYS: [&str; 11] = [
    "receptor",
    "ligand",
    "center_x",
    "center_y",
    "center_z",
    "size_x",
    "size_y",
    "size_z",
    "num_modes",
    "exhaustiveness",
    "out",
];

#[derive(Debug, Clone, Error, PartialEq)]
pub enum LogError {
    #[error("no result table found in engine output")]
    MissingTable,
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("malformed result: {0}")]
    Malformed(String),
}

#[derive(Debug, Error)]
pub enum DockError {
    #[error("duplicate job for receptor {receptor_id} and ligand {ligand_id}")]
    DuplicateJob {
        receptor_id: String,
        ligand_id: String,
    },
    #[error("invalid job {0}")]
    InvalidJob(String),
    #[error("engine command template must contain {{config}}: {0:?}")]
    BadTemplate(String),
    #[error("config: {0}")]
    Config(#[from] KeyValueError),
    #[error("config: missing key {0:?}")]
    MissingKey(&'static str),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DockingJob {
    pub receptor_id: String,
    pub ligand_id: String,
    pub receptor_path: PathBuf,
    pub ligand_path: PathBuf,
    pub grid: GridBox,
    pub num_modes: u32,
    pub exhaustiveness: u32,
    pub out_path: PathBuf,
}

impl DockingJob {
    pub fn validate(&self) -> Result<(), DockError> {
        if self.receptor_id.is_empty() || self.ligand_id.is_empty() {
            return Err(DockError::InvalidJob("with empty receptor or ligand id".into()));
        }
        if self.num_modes == 0 || self.exhaustiveness == 0 {
            return Err(DockError::InvalidJob(format!(
                "{}/{}: num_modes and exhaustiveness must be positive",
                self.receptor_id, self.ligand_id
            )));
        }
        GridBox::new(self.grid.center, self.grid.size)
            .map_err(|e| DockError::InvalidJob(format!("{}/{}: {e}", self.receptor_id, self.ligand_id)))?;
        Ok(())
    }

    pub fn config_path(&self) -> PathBuf {
        self.out_path.with_extension("conf")
    }

    pub fn log_path(&self) -> PathBuf {
        self.out_path.with_extension("log")
    }

    fn key(&self) -> (&str, &str) {
        (&self.receptor_id, &self.ligand_id)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BindingMode {
    pub mode: u32,
    /// kcal/mol, more negative binds tighter.
    pub affinity: f64,
    pub rmsd_lb: f64,
    pub rmsd_ub: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DockingResult {
    pub receptor_id: String,
    pub ligand_id: String,
    pub modes: Vec<BindingMode>,
}

/// Checks a freshly docked mode table: modes numbered 1..n, mode 1 at zero
/// RMSD, affinities best-first.
pub fn check_modes(modes: &[BindingMode]) -> Result<(), LogError> {
    if modes.is_empty() {
        return Err(LogError::Malformed("result table has no rows".into()));
    }
    for (i, m) in modes.iter().enumerate() {
        if m.mode as usize != i + 1 {
            return Err(LogError::Malformed(format!(
                "expected mode {} but found mode {}",
                i + 1,
                m.mode
            )));
        }
        if !m.affinity.is_finite() || m.rmsd_lb.is_nan() || m.rmsd_lb < 0.0 || m.rmsd_ub.is_nan() || m.rmsd_ub < 0.0 {
            return Err(LogError::Malformed(format!("mode {} has invalid values", m.mode)));
        }
    }
    if modes[0].rmsd_lb != 0.0 || modes[0].rmsd_ub != 0.0 {
        return Err(LogError::Malformed("mode 1 must have zero RMSD".into()));
    }
    if let Some(w) = modes.windows(2).find(|w| w[1].affinity < w[0].affinity) {
        return Err(LogError::Malformed(format!(
            "affinity of mode {} ({}) is better than mode {} ({})",
            w[1].mode, w[1].affinity, w[0].mode, w[0].affinity
        )));
    }
    Ok(())
}

/// Render the engine config. Key order and number formatting are fixed so the
/// same job always produces the same bytes.
pub fn generate_config(job: &DockingJob) -> String {
    let g = &job.grid;
    let mut lines = vec![
        format!("receptor = {}", job.receptor_path.display()),
        format!("ligand = {}", job.ligand_path.display()),
    ];
    for (axis, v) in ["x", "y", "z"].iter().zip(g.center) {
        lines.push(format!("center_{axis} = {}", format_decimal(v)));
    }
    for (axis, v) in ["x", "y", "z"].iter().zip(g.size) {
        lines.push(format!("size_{axis} = {}", format_decimal(v)));
    }
    lines.push(format!("num_modes = {}", job.num_modes));
    lines.push(format!("exhaustiveness = {}", job.exhaustiveness));
    lines.push(format!("out = {}", job.out_path.display()));
    let mut text = lines.join("\n");
    text.push('\n');
    text
}

#[derive(Debug, Clone, PartialEq)]
pub struct DockingConfig {
    pub receptor: PathBuf,
    pub ligand: PathBuf,
    pub grid: GridBox,
    pub num_modes: u32,
    pub exhaustiveness: u32,
    pub out: PathBuf,
}

/// Read a config written by [`generate_config`]. All eleven keys are required
/// and nothing else is accepted.
pub fn parse_config(text: &str) -> Result<DockingConfig, DockError> {
    let mut values: [Option<(usize, String)>; 11] = Default::default();
    for entry in keyvalue::parse_entries(text)? {
        match entry {
            Entry::Section { line, .. } => {
                return Err(KeyValueError::new(line, "sections are not allowed in a docking config").into())
            }
            Entry::Pair { line, key, value } => {
                let slot = CONFIG_KEYS
                    .iter()
                    .position(|k| *k == key)
                    .ok_or_else(|| KeyValueError::new(line, format!("unknown key {key:?}")))?;
                if values[slot].is_some() {
                    return Err(KeyValueError::new(line, format!("duplicate key {key:?}")).into());
                }
                values[slot] = Some((line, value));
            }
        }
    }
    let get = |i: usize| values[i].clone().ok_or(DockError::MissingKey(CONFIG_KEYS[i]));
    let float = |i: usize| -> Result<f64, DockError> {
        let (line, v) = get(i)?;
        Ok(keyvalue::parse_value(line, CONFIG_KEYS[i], &v)?)
    };
    let int = |i: usize| -> Result<u32, DockError> {
        let (line, v) = get(i)?;
        Ok(keyvalue::parse_value(line, CONFIG_KEYS[i], &v)?)
    };
    let grid = GridBox::new(
        [float(2)?, float(3)?, float(4)?],
        [float(5)?, float(6)?, float(7)?],
    )
    .map_err(|e| KeyValueError::new(values[5].as_ref().map_or(0, |v| v.0), e.to_string()))?;
    Ok(DockingConfig {
        receptor: get(0)?.1.into(),
        ligand: get(1)?.1.into(),
        grid,
        num_modes: int(8)?,
        exhaustiveness: int(9)?,
        out: get(10)?.1.into(),
    })
}

fn is_separator(line: &str) -> bool {
    let t = line.trim();
    t.contains('-') && t.chars().all(|c| c == '-' || c == '+')
}

/// Pull the mode table out of engine output.
///
/// Looks for a header line starting with `mode`, then a dashed separator, then
/// rows of `mode affinity rmsd_lb rmsd_ub`. The table ends at the first line
/// whose first field is not an integer.
pub fn parse_result_log(log: &str) -> Result<Vec<BindingMode>, LogError> {
    let lines: Vec<&str> = log.lines().collect();
    let header = lines
        .iter()
        .position(|l| l.trim_start().starts_with("mode"))
        .ok_or(LogError::MissingTable)?;
    let separator = lines[header + 1..]
        .iter()
        .position(|l| is_separator(l))
        .map(|p| p + header + 1)
        .ok_or(LogError::MissingTable)?;

    let mut modes = Vec::new();
    for (idx, line) in lines.iter().enumerate().skip(separator + 1) {
        let fields: Vec<&str> = line.split_whitespace().collect();
        let Some(first) = fields.first() else { break };
        let Ok(mode) = first.parse::<u32>() else { break };
        let lineno = idx + 1;
        if fields.len() != 4 {
            return Err(LogError::Parse {
                line: lineno,
                message: format!("expected 4 fields, found {}", fields.len()),
            });
        }
        let mut nums = [0.0; 3];
        for (slot, text) in nums.iter_mut().zip(&fields[1..]) {
            *slot = text.parse().map_err(|_| LogError::Parse {
                line: lineno,
                message: format!("non-numeric field {text:?}"),
            })?;
        }
        modes.push(BindingMode {
            mode,
            affinity: nums[0],
            rmsd_lb: nums[1],
            rmsd_ub: nums[2],
        });
    }
    check_modes(&modes)?;
    Ok(modes)
}

fn pair_seed(receptor_id: &str, ligand_id: &str) -> u64 {
    let mut hasher = Sha256::new();
    hasher.update(receptor_id.as_bytes());
    hasher.update([0u8]);
    hasher.update(ligand_id.as_bytes());
    let digest = hasher.finalize();
    u64::from_le_bytes(digest[..8].try_into().expect("sha256 digest is 32 bytes"))
}

/// Synthetic engine output that depends only on the receptor/ligand ids and
/// the requested mode count.
pub fn mock_engine(job: &DockingJob) -> String {
    let mut rng = ChaCha8Rng::seed_from_u64(pair_seed(&job.receptor_id, &job.ligand_id));
    let n = job.num_modes.max(1) as usize;
    let mut affinities: Vec<f64> = (0..n)
        .map(|_| (rng.gen_range(-8.0..=-4.0f64) * 10.0).round() / 10.0)
        .collect();
    affinities.sort_by(|a, b| a.total_cmp(b));

    let lb_fraction = rng.gen_range(0.4..0.8);
    let mut ub = rng.gen_range(0.8..1.8);
    let mut out = String::new();
    out.push_str("Mock docking engine (deterministic)\n");
    out.push_str(&format!("Receptor: {}\nLigand: {}\n\n", job.receptor_id, job.ligand_id));
    out.push_str("mode |   affinity | dist from best mode\n");
    out.push_str("     | (kcal/mol) | rmsd l.b.| rmsd u.b.\n");
    out.push_str("-----+------------+----------+----------\n");
    for (i, affinity) in affinities.iter().enumerate() {
        let (lb, ubv) = if i == 0 {
            (0.0, 0.0)
        } else {
            let row = (ub * lb_fraction, ub);
            ub += rng.gen_range(0.2..1.2);
            row
        };
        out.push_str(&format!("{:>4} {:>12.1} {:>10.3} {:>10.3}\n", i + 1, affinity, lb, ubv));
    }
    out.push_str("Writing output ... done.\n");
    out
}

#[derive(Debug, Clone, PartialEq)]
pub enum FailureCause {
    MissingInput(PathBuf),
    Io(String),
    ExitStatus { code: Option<i32>, stderr: String },
    Timeout(Duration),
    Unparseable(LogError),
}

impl fmt::Display for FailureCause {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FailureCause::MissingInput(p) => write!(f, "missing input file {}", p.display()),
            FailureCause::Io(msg) => write!(f, "i/o error: {msg}"),
            FailureCause::ExitStatus { code, stderr } => {
                match code {
                    Some(c) => write!(f, "engine exited with status {c}")?,
                    None => write!(f, "engine killed by signal")?,
                }
                let tail = stderr.trim();
                if !tail.is_empty() {
                    write!(f, ": {}", tail.lines().last().unwrap_or(""))?;
                }
                Ok(())
            }
            FailureCause::Timeout(d) => write!(f, "engine timed out after {} s", d.as_secs_f64()),
            FailureCause::Unparseable(e) => write!(f, "unparseable engine output: {e}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct JobFailure {
    pub receptor_id: String,
    pub ligand_id: String,
    pub cause: FailureCause,
}

impl fmt::Display for JobFailure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} / {}: {}", self.receptor_id, self.ligand_id, self.cause)
    }
}

/// Something that can dock one job given its written config file and return
/// the engine's log text.
pub trait DockingEngine: Sync {
    fn dock(&self, job: &DockingJob, config_path: &Path, timeout: Duration) -> Result<String, FailureCause>;
}

fn require_inputs(job: &DockingJob) -> Result<(), FailureCause> {
    for path in [&job.receptor_path, &job.ligand_path] {
        if !path.is_file() {
            return Err(FailureCause::MissingInput(path.clone()));
        }
    }
    Ok(())
}

/// In-process stand-in for a real engine; see [`mock_engine`].
#[derive(Debug, Clone, Copy, Default)]
pub struct MockEngine;

impl DockingEngine for MockEngine {
    fn dock(&self, job: &DockingJob, _config_path: &Path, _timeout: Duration) -> Result<String, FailureCause> {
        require_inputs(job)?;
        Ok(mock_engine(job))
    }
}

/// Runs a shell command built from a template such as `vina --config {config}`.
#[derive(Debug, Clone)]
pub struct CommandEngine {
    template: String,
}

impl CommandEngine {
    pub fn new(template: impl Into<String>) -> Result<Self, DockError> {
        let template = template.into();
        if !template.contains("{config}") {
            return Err(DockError::BadTemplate(template));
        }
        Ok(CommandEngine { template })
    }

    pub fn command_line(&self, config_path: &Path) -> String {
        self.template.replace("{config}", &shell_quote(&config_path.to_string_lossy()))
    }
}

fn shell_quote(s: &str) -> String {
    format!("'{}'", s.replace('\'', r"'\''"))
}

fn drain<R: Read + Send + 'static>(reader: Option<R>) -> thread::JoinHandle<String> {
    thread::spawn(move || {
        let mut buf = String::new();
        if let Some(mut r) = reader {
            let _ = r.read_to_string(&mut buf);
        }
        buf
    })
}

impl DockingEngine for CommandEngine {
    fn dock(&self, job: &DockingJob, config_path: &Path, timeout: Duration) -> Result<String, FailureCause> {
        require_inputs(job)?;
        let mut child = Command::new("sh")
            .arg("-c")
            .arg(self.command_line(config_path))
            .stdin(Stdio::null())
            .stdout(Stdio::piped())
            .stderr(Stdio::piped())
            .spawn()
            .map_err(|e| FailureCause::Io(format!("spawning engine: {e}")))?;
        let stdout = drain(child.stdout.take());
        let stderr = drain(child.stderr.take());

        let started = Instant::now();
        let status = loop {
            match child.try_wait() {
                Ok(Some(status)) => break status,
                Ok(None) if started.elapsed() >= timeout => {
                    let _ = child.kill();
                    let _ = child.wait();
                    return Err(FailureCause::Timeout(timeout));
                }
                Ok(None) => thread::sleep(Duration::from_millis(10)),
                Err(e) => return Err(FailureCause::Io(format!("waiting for engine: {e}"))),
            }
        };
        let out = stdout.join().unwrap_or_default();
        let err = stderr.join().unwrap_or_default();
        if !status.success() {
            return Err(FailureCause::ExitStatus {
                code: status.code(),
                stderr: err,
            });
        }
        Ok(out)
    }
}

#[derive(Debug, Clone, Copy)]
pub struct BatchOptions {
    pub max_parallel: usize,
    pub timeout: Duration,
}

impl Default for BatchOptions {
    fn default() -> Self {
        BatchOptions {
            max_parallel: 1,
            timeout: DEFAULT_TIMEOUT,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct BatchOutcome {
    pub results: Vec<DockingResult>,
    pub failures: Vec<JobFailure>,
}

fn run_one(job: &DockingJob, engine: &dyn DockingEngine, timeout: Duration) -> Result<DockingResult, FailureCause> {
    let config_path = job.config_path();
    std::fs::write(&config_path, generate_config(job))
        .map_err(|e| FailureCause::Io(format!("writing {}: {e}", config_path.display())))?;
    let log = engine.dock(job, &config_path, timeout)?;
    let log_path = job.log_path();
    std::fs::write(&log_path, &log)
        .map_err(|e| FailureCause::Io(format!("writing {}: {e}", log_path.display())))?;
    let modes = parse_result_log(&log).map_err(FailureCause::Unparseable)?;
    if modes.len() > job.num_modes as usize {
        return Err(FailureCause::Unparseable(LogError::Malformed(format!(
            "{} modes reported but {} requested",
            modes.len(),
            job.num_modes
        ))));
    }
    Ok(DockingResult {
        receptor_id: job.receptor_id.clone(),
        ligand_id: job.ligand_id.clone(),
        modes,
    })
}

/// Run every job, at most `max_parallel` at a time. A failing job becomes a
/// [`JobFailure`] and never stops the others.
pub fn run_batch(
    jobs: &[DockingJob],
    engine: &dyn DockingEngine,
    options: BatchOptions,
) -> Result<BatchOutcome, DockError> {
    let mut seen = BTreeSet::new();
    for job in jobs {
        job.validate()?;
        if !seen.insert(job.key()) {
            return Err(DockError::DuplicateJob {
                receptor_id: job.receptor_id.clone(),
                ligand_id: job.ligand_id.clone(),
            });
        }
    }

    let next = AtomicUsize::new(0);
    let finished: Mutex<Vec<(usize, Result<DockingResult, FailureCause>)>> =
        Mutex::new(Vec::with_capacity(jobs.len()));
    let workers = options.max_parallel.clamp(1, jobs.len().max(1));
    thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                let Some(job) = jobs.get(i) else { break };
                let outcome = run_one(job, engine, options.timeout);
                finished.lock().expect("worker panicked").push((i, outcome));
            });
        }
    });

    let mut finished = finished.into_inner().expect("worker panicked");
    finished.sort_by(|a, b| jobs[a.0].key().cmp(&jobs[b.0].key()));
    let mut outcome = BatchOutcome::default();
    for (i, result) in finished {
        match result {
            Ok(r) => outcome.results.push(r),
            Err(cause) => outcome.failures.push(JobFailure {
                receptor_id: jobs[i].receptor_id.clone(),
                ligand_id: jobs[i].ligand_id.clone(),
                cause,
            }),
        }
    }
    Ok(outcome)
}
