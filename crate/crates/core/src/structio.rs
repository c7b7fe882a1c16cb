//! Fixed-column PDB / PDBQT reading and writing.
//!
//! Coordinates live in columns 31-54, the serial in 7-11. PDBQT adds the
//! partial charge in 71-76 and the AutoDock atom type in 78-79. Torsion tree
//! records (`ROOT`, `BRANCH`, `TORSDOF`, ...) are kept as positional markers so
//! a ligand survives a read/write cycle with its tree intact.

use std::collections::{BTreeSet, HashSet};
use std::fmt::{self, Write as _};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum StructureError {
    #[error("line {line}: malformed {field} field: {text:?}")]
    Malformed {
        line: usize,
        field: &'static str,
        text: String,
    },
    #[error("line {line}: duplicate atom serial {serial} in model {model_id}")]
    DuplicateSerial {
        line: usize,
        serial: u32,
        model_id: i32,
    },
    #[error("structure contains no atoms")]
    EmptyStructure,
    #[error("model {0} contains no atoms")]
    EmptyModel(i32),
    #[error("no atoms left after selecting chains {0:?}")]
    EmptySelection(Vec<char>),
    #[error("chain selection must name at least one chain")]
    NoChains,
    #[error("{field} value {value} does not fit its fixed-width column")]
    Overflow { field: &'static str, value: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SourceKind {
    Pdb,
    Pdbqt,
}

impl FromStr for SourceKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "pdb" => Ok(SourceKind::Pdb),
            "pdbqt" => Ok(SourceKind::Pdbqt),
            other => Err(format!("unknown structure format {other:?}")),
        }
    }
}

impl SourceKind {
    /// Guess the format from a file extension; anything but `.pdbqt` is PDB.
    pub fn from_path(path: &std::path::Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some(ext) if ext.eq_ignore_ascii_case("pdbqt") => SourceKind::Pdbqt,
            _ => SourceKind::Pdb,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Atom {
    pub serial: u32,
    pub name: String,
    pub alt_loc: char,
    pub residue_name: String,
    pub chain_id: char,
    pub residue_seq: i32,
    pub insertion_code: char,
    pub x: f64,
    pub y: f64,
    pub z: f64,
    pub occupancy: f64,
    pub temp_factor: f64,
    pub element: String,
    pub partial_charge: Option<f64>,
    pub autodock_type: Option<String>,
    /// Came from a HETATM record.
    pub hetero: bool,
}

impl Atom {
    /// Minimal ATOM record at the given position; the remaining fields take
    /// neutral defaults.
    pub fn new(serial: u32, name: &str, element: &str, xyz: [f64; 3]) -> Self {
        Atom {
            serial,
            name: name.to_string(),
            alt_loc: ' ',
            residue_name: "UNK".to_string(),
            chain_id: 'A',
            residue_seq: 1,
            insertion_code: ' ',
            x: xyz[0],
            y: xyz[1],
            z: xyz[2],
            occupancy: 1.0,
            temp_factor: 0.0,
            element: element.to_string(),
            partial_charge: None,
            autodock_type: None,
            hetero: false,
        }
    }

    pub fn position(&self) -> [f64; 3] {
        [self.x, self.y, self.z]
    }

    pub fn is_hydrogen(&self) -> bool {
        self.element.eq_ignore_ascii_case("H")
    }
}

/// A torsion-tree record (`ROOT`, `ENDROOT`, `BRANCH a b`, `ENDBRANCH a b`,
/// `TORSDOF n`) positioned before the atom at `before_atom`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TreeMarker {
    pub before_atom: usize,
    pub record: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    pub id: i32,
    pub atoms: Vec<Atom>,
    pub markers: Vec<TreeMarker>,
}

impl Model {
    pub fn new(id: i32, atoms: Vec<Atom>) -> Self {
        Model {
            id,
            atoms,
            markers: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MolecularStructure {
    pub models: Vec<Model>,
    pub torsion_count: Option<u32>,
    pub source_kind: SourceKind,
    /// Records of unknown or ignored type seen while parsing.
    pub skipped_records: usize,
}

impl MolecularStructure {
    pub fn single(atoms: Vec<Atom>, kind: SourceKind) -> Self {
        MolecularStructure {
            models: vec![Model::new(1, atoms)],
            torsion_count: None,
            source_kind: kind,
            skipped_records: 0,
        }
    }

    pub fn atom_count(&self) -> usize {
        self.models.iter().map(|m| m.atoms.len()).sum()
    }

    pub fn atoms(&self) -> impl Iterator<Item = &Atom> {
        self.models.iter().flat_map(|m| m.atoms.iter())
    }

    pub fn chains(&self) -> BTreeSet<char> {
        self.atoms().map(|a| a.chain_id).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ChainSelection {
    keep_chains: BTreeSet<char>,
    pub drop_hetero: bool,
}

impl ChainSelection {
    pub fn new<I: IntoIterator<Item = char>>(
        keep: I,
        drop_hetero: bool,
    ) -> Result<Self, StructureError> {
        let keep_chains: BTreeSet<char> = keep.into_iter().collect();
        if keep_chains.is_empty() {
            return Err(StructureError::NoChains);
        }
        Ok(ChainSelection {
            keep_chains,
            drop_hetero,
        })
    }

    pub fn keep_chains(&self) -> &BTreeSet<char> {
        &self.keep_chains
    }

    pub fn keeps(&self, atom: &Atom) -> bool {
        self.keep_chains.contains(&atom.chain_id) && !(self.drop_hetero && atom.hetero)
    }
}

fn columns(line: &str, start: usize, end: usize) -> &str {
    // 1-based inclusive column range, clipped to the line.
    let len = line.len();
    if start > len {
        return "";
    }
    &line[start - 1..end.min(len)]
}

fn column_char(line: &str, col: usize) -> char {
    line.as_bytes()
        .get(col - 1)
        .map(|&b| b as char)
        .unwrap_or(' ')
}

fn required<T: FromStr>(
    line: &str,
    lineno: usize,
    start: usize,
    end: usize,
    field: &'static str,
) -> Result<T, StructureError> {
    let text = columns(line, start, end).trim();
    text.parse().map_err(|_| StructureError::Malformed {
        line: lineno,
        field,
        text: text.to_string(),
    })
}

fn optional<T: FromStr>(
    line: &str,
    lineno: usize,
    start: usize,
    end: usize,
    field: &'static str,
) -> Result<Option<T>, StructureError> {
    let text = columns(line, start, end).trim();
    if text.is_empty() {
        return Ok(None);
    }
    text.parse()
        .map(Some)
        .map_err(|_| StructureError::Malformed {
            line: lineno,
            field,
            text: text.to_string(),
        })
}

/// Element implied by an AutoDock atom type (`OA` -> O, `A` -> C, `HD` -> H).
pub fn element_from_autodock_type(ad_type: &str) -> String {
    match ad_type {
        "A" => "C".into(),
        "OA" | "OS" => "O".into(),
        "NA" | "NS" => "N".into(),
        "SA" => "S".into(),
        "HD" | "HS" => "H".into(),
        "Cl" | "CL" => "Cl".into(),
        "Br" | "BR" => "Br".into(),
        other => other.to_string(),
    }
}

fn element_from_name(name: &str) -> String {
    name.chars()
        .find(|c| c.is_ascii_alphabetic())
        .map(|c| c.to_ascii_uppercase().to_string())
        .unwrap_or_default()
}

fn normalise_element(raw: &str) -> String {
    let mut chars = raw.chars();
    match chars.next() {
        None => String::new(),
        Some(first) => {
            let mut out = first.to_ascii_uppercase().to_string();
            out.extend(chars.map(|c| c.to_ascii_lowercase()));
            out
        }
    }
}

fn parse_atom(
    line: &str,
    lineno: usize,
    kind: SourceKind,
    hetero: bool,
) -> Result<Atom, StructureError> {
    let serial = required(line, lineno, 7, 11, "serial")?;
    let name = columns(line, 13, 16).trim().to_string();
    let x: f64 = required(line, lineno, 31, 38, "x coordinate")?;
    let y: f64 = required(line, lineno, 39, 46, "y coordinate")?;
    let z: f64 = required(line, lineno, 47, 54, "z coordinate")?;
    for (value, field) in [(x, "x coordinate"), (y, "y coordinate"), (z, "z coordinate")] {
        if !value.is_finite() {
            return Err(StructureError::Malformed {
                line: lineno,
                field,
                text: value.to_string(),
            });
        }
    }
    let occupancy = optional(line, lineno, 55, 60, "occupancy")?.unwrap_or(1.0);
    let temp_factor = optional(line, lineno, 61, 66, "temperature factor")?.unwrap_or(0.0);

    let (partial_charge, autodock_type, element) = match kind {
        SourceKind::Pdbqt => {
            let charge: Option<f64> = optional(line, lineno, 71, 76, "partial charge")?;
            let ad_type = Some(columns(line, 78, 79).trim())
                .filter(|t| !t.is_empty())
                .map(str::to_string);
            let element = ad_type
                .as_deref()
                .map(element_from_autodock_type)
                .unwrap_or_else(|| element_from_name(&name));
            (charge, ad_type, element)
        }
        SourceKind::Pdb => {
            let raw = columns(line, 77, 78).trim();
            let element = if raw.is_empty() {
                element_from_name(&name)
            } else {
                normalise_element(raw)
            };
            (None, None, element)
        }
    };

    Ok(Atom {
        serial,
        name,
        alt_loc: column_char(line, 17),
        residue_name: columns(line, 18, 20).trim().to_string(),
        chain_id: column_char(line, 22),
        residue_seq: optional(line, lineno, 23, 26, "residue number")?.unwrap_or(0),
        insertion_code: column_char(line, 27),
        x,
        y,
        z,
        occupancy,
        temp_factor,
        element,
        partial_charge,
        autodock_type,
        hetero,
    })
}

struct ModelBuilder {
    id: i32,
    atoms: Vec<Atom>,
    markers: Vec<TreeMarker>,
    serials: HashSet<u32>,
}

impl ModelBuilder {
    fn new(id: i32) -> Self {
        ModelBuilder {
            id,
            atoms: Vec::new(),
            markers: Vec::new(),
            serials: HashSet::new(),
        }
    }

    fn finish(self) -> Result<Model, StructureError> {
        if self.atoms.is_empty() {
            return Err(StructureError::EmptyModel(self.id));
        }
        Ok(Model {
            id: self.id,
            atoms: self.atoms,
            markers: self.markers,
        })
    }
}

/// Parse PDB or PDBQT text.
///
/// Atoms outside any `MODEL` block go to model 1. Torsion tree records set
/// `torsion_count` (from `TORSDOF`, else the number of `BRANCH` records).
pub fn parse_structure(input: &str, kind: SourceKind) -> Result<MolecularStructure, StructureError> {
    let mut models = Vec::new();
    let mut current: Option<ModelBuilder> = None;
    let mut skipped = 0;
    let mut torsdof: Option<u32> = None;
    let mut branches = 0u32;
    let mut saw_tree = false;

    for (idx, raw) in input.lines().enumerate() {
        let lineno = idx + 1;
        let line = raw.trim_end_matches('\r');
        let record = columns(line, 1, 6).trim_end();
        match record {
            "ATOM" | "HETATM" => {
                let atom = parse_atom(line, lineno, kind, record == "HETATM")?;
                let model = current.get_or_insert_with(|| ModelBuilder::new(1));
                if !model.serials.insert(atom.serial) {
                    return Err(StructureError::DuplicateSerial {
                        line: lineno,
                        serial: atom.serial,
                        model_id: model.id,
                    });
                }
                model.atoms.push(atom);
            }
            "MODEL" => {
                if let Some(open) = current.take() {
                    models.push(open.finish()?);
                }
                let id = line[record.len()..].trim();
                let id = if id.is_empty() {
                    models.len() as i32 + 1
                } else {
                    id.parse().map_err(|_| StructureError::Malformed {
                        line: lineno,
                        field: "model id",
                        text: id.to_string(),
                    })?
                };
                current = Some(ModelBuilder::new(id));
            }
            "ENDMDL" => {
                if let Some(open) = current.take() {
                    models.push(open.finish()?);
                }
            }
            _ if kind == SourceKind::Pdbqt && is_tree_record(line) => {
                saw_tree = true;
                let trimmed = line.trim().to_string();
                let mut words = trimmed.split_whitespace();
                match words.next() {
                    Some("BRANCH") => branches += 1,
                    Some("TORSDOF") => {
                        let n = words.next().unwrap_or("");
                        torsdof = Some(n.parse().map_err(|_| StructureError::Malformed {
                            line: lineno,
                            field: "TORSDOF",
                            text: n.to_string(),
                        })?);
                    }
                    _ => {}
                }
                let model = current.get_or_insert_with(|| ModelBuilder::new(1));
                model.markers.push(TreeMarker {
                    before_atom: model.atoms.len(),
                    record: normalise_whitespace(&trimmed),
                });
            }
            _ => skipped += 1,
        }
    }
    if let Some(open) = current.take() {
        if !open.atoms.is_empty() || models.is_empty() {
            models.push(open.finish().map_err(|_| StructureError::EmptyStructure)?);
        }
    }
    if models.is_empty() {
        return Err(StructureError::EmptyStructure);
    }

    let torsion_count = match (torsdof, saw_tree) {
        (Some(n), _) => Some(n),
        (None, true) => Some(branches),
        (None, false) => None,
    };
    Ok(MolecularStructure {
        models,
        torsion_count,
        source_kind: kind,
        skipped_records: skipped,
    })
}

fn is_tree_record(line: &str) -> bool {
    matches!(
        line.split_whitespace().next(),
        Some("ROOT" | "ENDROOT" | "BRANCH" | "ENDBRANCH" | "TORSDOF")
    )
}

fn normalise_whitespace(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ")
}

/// Keep only atoms on the selected chains, optionally dropping HETATM records
/// (ligands, waters). Order is preserved; tree markers follow their atoms.
pub fn isolate_receptor(
    s: &MolecularStructure,
    sel: &ChainSelection,
) -> Result<MolecularStructure, StructureError> {
    let mut models = Vec::with_capacity(s.models.len());
    for model in &s.models {
        let mut new_index = Vec::with_capacity(model.atoms.len() + 1);
        let mut atoms = Vec::new();
        for atom in &model.atoms {
            new_index.push(atoms.len());
            if sel.keeps(atom) {
                atoms.push(atom.clone());
            }
        }
        new_index.push(atoms.len());
        if atoms.is_empty() {
            continue;
        }
        let markers = model
            .markers
            .iter()
            .map(|m| TreeMarker {
                before_atom: new_index[m.before_atom],
                record: m.record.clone(),
            })
            .collect();
        models.push(Model {
            id: model.id,
            atoms,
            markers,
        });
    }
    if models.is_empty() {
        return Err(StructureError::EmptySelection(
            sel.keep_chains.iter().copied().collect(),
        ));
    }
    Ok(MolecularStructure {
        models,
        torsion_count: s.torsion_count,
        source_kind: s.source_kind,
        skipped_records: s.skipped_records,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum LigandCheck {
    PartialCharges,
    AtomTypes,
    TorsionTree,
    SingleModel,
}

impl fmt::Display for LigandCheck {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            LigandCheck::PartialCharges => "partial charges",
            LigandCheck::AtomTypes => "atom types",
            LigandCheck::TorsionTree => "torsion tree",
            LigandCheck::SingleModel => "single model",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckOutcome {
    pub check: LigandCheck,
    pub passed: bool,
    pub failing_serials: Vec<u32>,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValidationReport {
    pub checks: Vec<CheckOutcome>,
}

impl ValidationReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn outcome(&self, check: LigandCheck) -> &CheckOutcome {
        self.checks
            .iter()
            .find(|c| c.check == check)
            .expect("every check is always reported")
    }

    pub fn failures(&self) -> impl Iterator<Item = &CheckOutcome> {
        self.checks.iter().filter(|c| !c.passed)
    }
}

fn atom_check(
    s: &MolecularStructure,
    check: LigandCheck,
    has: impl Fn(&Atom) -> bool,
) -> CheckOutcome {
    let failing: Vec<u32> = s.atoms().filter(|a| !has(a)).map(|a| a.serial).collect();
    let message = if failing.is_empty() {
        format!("all {} atoms have {check}", s.atom_count())
    } else {
        format!("{} atom(s) missing {check}: {:?}", failing.len(), failing)
    };
    CheckOutcome {
        check,
        passed: failing.is_empty(),
        failing_serials: failing,
        message,
    }
}

/// Check that a ligand looks docking-ready. Never fails; problems are entries
/// in the report.
pub fn validate_prepared_ligand(s: &MolecularStructure) -> ValidationReport {
    let charges = atom_check(s, LigandCheck::PartialCharges, |a| a.partial_charge.is_some());
    let types = atom_check(s, LigandCheck::AtomTypes, |a| a.autodock_type.is_some());
    let torsions = CheckOutcome {
        check: LigandCheck::TorsionTree,
        passed: s.torsion_count.is_some(),
        failing_serials: Vec::new(),
        message: match s.torsion_count {
            Some(n) => format!("{n} torsional degrees of freedom"),
            None => "no ROOT/BRANCH/TORSDOF records".to_string(),
        },
    };
    let single = CheckOutcome {
        check: LigandCheck::SingleModel,
        passed: s.models.len() == 1,
        failing_serials: Vec::new(),
        message: format!("{} model(s)", s.models.len()),
    };
    ValidationReport {
        checks: vec![charges, types, torsions, single],
    }
}

fn fixed(value: f64, width: usize, decimals: usize, field: &'static str) -> Result<String, StructureError> {
    let text = format!("{value:>width$.decimals$}");
    if text.len() > width {
        return Err(StructureError::Overflow { field, value: text });
    }
    Ok(text)
}

fn bounded_int(value: i64, width: usize, field: &'static str) -> Result<String, StructureError> {
    let text = format!("{value:>width$}");
    if text.len() > width {
        return Err(StructureError::Overflow { field, value: text });
    }
    Ok(text)
}

fn atom_name_field(atom: &Atom) -> String {
    // Single-letter elements start in column 14 unless the name fills all four.
    if atom.name.len() < 4 && atom.element.len() < 2 {
        format!(" {:<3}", atom.name)
    } else {
        format!("{:<4}", atom.name)
    }
}

fn write_atom(out: &mut String, atom: &Atom, kind: SourceKind) -> Result<(), StructureError> {
    let record = if atom.hetero { "HETATM" } else { "ATOM  " };
    let name = atom_name_field(atom);
    if name.len() > 4 {
        return Err(StructureError::Overflow {
            field: "atom name",
            value: atom.name.clone(),
        });
    }
    let _ = write!(
        out,
        "{record}{serial} {name}{alt}{res:>3} {chain}{seq}{icode}   {x}{y}{z}{occ}{bfac}",
        serial = bounded_int(atom.serial as i64, 5, "serial")?,
        alt = atom.alt_loc,
        res = atom.residue_name,
        chain = atom.chain_id,
        seq = bounded_int(atom.residue_seq as i64, 4, "residue number")?,
        icode = atom.insertion_code,
        x = fixed(atom.x, 8, 3, "x coordinate")?,
        y = fixed(atom.y, 8, 3, "y coordinate")?,
        z = fixed(atom.z, 8, 3, "z coordinate")?,
        occ = fixed(atom.occupancy, 6, 2, "occupancy")?,
        bfac = fixed(atom.temp_factor, 6, 2, "temperature factor")?,
    );
    match kind {
        SourceKind::Pdbqt => {
            let charge = match atom.partial_charge {
                Some(q) => fixed(q, 6, 3, "partial charge")?,
                None => " ".repeat(6),
            };
            let ad_type = atom.autodock_type.as_deref().unwrap_or("");
            let _ = write!(out, "    {charge} {ad_type:<2}");
        }
        SourceKind::Pdb => {
            let _ = write!(out, "          {:>2}", atom.element.to_ascii_uppercase());
        }
    }
    let trimmed = out.trim_end_matches(' ').len();
    out.truncate(trimmed);
    out.push('\n');
    Ok(())
}

/// Canonical fixed-column text. Multi-model structures get MODEL/ENDMDL
/// blocks; a single model numbered 1 is written bare.
pub fn serialize_structure(s: &MolecularStructure) -> Result<String, StructureError> {
    let mut out = String::new();
    let wrap = s.models.len() > 1 || s.models.first().is_some_and(|m| m.id != 1);
    for model in &s.models {
        if wrap {
            let _ = writeln!(out, "MODEL {:>8}", model.id);
        }
        let mut markers = model.markers.iter().peekable();
        for (idx, atom) in model.atoms.iter().enumerate() {
            while let Some(m) = markers.next_if(|m| m.before_atom <= idx) {
                out.push_str(&m.record);
                out.push('\n');
            }
            let mut line = String::new();
            write_atom(&mut line, atom, s.source_kind)?;
            out.push_str(&line);
        }
        for m in markers {
            out.push_str(&m.record);
            out.push('\n');
        }
        if wrap {
            out.push_str("ENDMDL\n");
        }
    }
    out.push_str("END\n");
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    const LIGAND: &str = "\
REMARK  Name = test
ROOT
ATOM      1  C1  LIG L   1       1.000   2.000   3.000  1.00  0.00     0.120 C
ATOM      2  O1  LIG L   1       2.000   2.000   3.000  1.00  0.00    -0.380 OA
ENDROOT
BRANCH   1   3
ATOM      3  C2  LIG L   1       1.000   3.500   3.000  1.00  0.00     0.050 A
ENDBRANCH   1   3
TORSDOF 1
";

    #[test]
    fn single_atom_line() {
        let text = "ATOM      1  CA  ALA A   1       1.000   2.000   3.000  1.00  0.00           C\n";
        let s = parse_structure(text, SourceKind::Pdb).unwrap();
        assert_eq!(s.models.len(), 1);
        assert_eq!(s.models[0].id, 1);
        let atom = &s.models[0].atoms[0];
        assert_eq!(atom.position(), [1.0, 2.0, 3.0]);
        assert_eq!(atom.name, "CA");
        assert_eq!(atom.chain_id, 'A');
        assert_eq!(atom.element, "C");
        assert!(s.torsion_count.is_none());
    }

    #[test]
    fn pdbqt_ligand_fields() {
        let s = parse_structure(LIGAND, SourceKind::Pdbqt).unwrap();
        assert_eq!(s.torsion_count, Some(1));
        assert_eq!(s.skipped_records, 1);
        let atoms = &s.models[0].atoms;
        assert_eq!(atoms[1].partial_charge, Some(-0.38));
        assert_eq!(atoms[1].autodock_type.as_deref(), Some("OA"));
        assert_eq!(atoms[1].element, "O");
        assert_eq!(atoms[2].element, "C");
        assert_eq!(s.models[0].markers.len(), 5);
    }

    #[test]
    fn bad_coordinate_reports_line() {
        let text = "REMARK x\nATOM      1  CA  ALA A   1       1.000   abcde   3.000\n";
        let err = parse_structure(text, SourceKind::Pdb).unwrap_err();
        assert!(matches!(err, StructureError::Malformed { line: 2, field: "y coordinate", .. }));
    }

    #[test]
    fn empty_input_is_error() {
        assert_eq!(
            parse_structure("REMARK nothing\nEND\n", SourceKind::Pdb).unwrap_err(),
            StructureError::EmptyStructure
        );
    }

    #[test]
    fn duplicate_serial_rejected() {
        let text = "ATOM      1  CA  ALA A   1       1.000   2.000   3.000\n\
                    ATOM      1  CB  ALA A   1       1.000   2.000   4.000\n";
        assert!(matches!(
            parse_structure(text, SourceKind::Pdb),
            Err(StructureError::DuplicateSerial { line: 2, .. })
        ));
    }

    #[test]
    fn models_split() {
        let mut text = String::new();
        for m in 1..=3 {
            text.push_str(&format!("MODEL {m}\n"));
            text.push_str("ATOM      1  C1  LIG L   1       1.000   2.000   3.000\n");
            text.push_str("ENDMDL\n");
        }
        let s = parse_structure(&text, SourceKind::Pdb).unwrap();
        assert_eq!(s.models.iter().map(|m| m.id).collect::<Vec<_>>(), vec![1, 2, 3]);
    }

    #[test]
    fn empty_model_rejected() {
        let text = "MODEL 1\nENDMDL\n";
        assert_eq!(
            parse_structure(text, SourceKind::Pdb).unwrap_err(),
            StructureError::EmptyModel(1)
        );
    }

    fn two_chain_structure() -> MolecularStructure {
        let mut a1 = Atom::new(1, "N", "N", [0.0, 0.0, 0.0]);
        a1.chain_id = 'A';
        let mut b1 = Atom::new(2, "N", "N", [1.0, 0.0, 0.0]);
        b1.chain_id = 'B';
        let mut a2 = Atom::new(3, "CA", "C", [2.0, 0.0, 0.0]);
        a2.chain_id = 'A';
        let mut het = Atom::new(4, "C1", "C", [3.0, 0.0, 0.0]);
        het.chain_id = 'A';
        het.hetero = true;
        het.residue_name = "94R".into();
        MolecularStructure::single(vec![a1, b1, a2, het], SourceKind::Pdb)
    }

    #[test]
    fn isolate_keeps_chain_a_protein() {
        let s = two_chain_structure();
        let sel = ChainSelection::new(['A'], true).unwrap();
        let out = isolate_receptor(&s, &sel).unwrap();
        let serials: Vec<u32> = out.atoms().map(|a| a.serial).collect();
        assert_eq!(serials, vec![1, 3]);
        assert!(out.atoms().all(|a| a.chain_id == 'A' && !a.hetero));
        assert_eq!(s.atom_count(), 4);
    }

    #[test]
    fn isolate_everything_is_identity() {
        let s = two_chain_structure();
        let sel = ChainSelection::new(s.chains(), false).unwrap();
        assert_eq!(isolate_receptor(&s, &sel).unwrap(), s);
    }

    #[test]
    fn isolate_nothing_names_chains() {
        let s = two_chain_structure();
        let sel = ChainSelection::new(['Z', 'Q'], false).unwrap();
        assert_eq!(
            isolate_receptor(&s, &sel).unwrap_err(),
            StructureError::EmptySelection(vec!['Q', 'Z'])
        );
        assert_eq!(ChainSelection::new([], false).unwrap_err(), StructureError::NoChains);
    }

    #[test]
    fn ligand_validation() {
        let s = parse_structure(LIGAND, SourceKind::Pdbqt).unwrap();
        assert!(validate_prepared_ligand(&s).passed());

        let mut stripped = s.clone();
        stripped.models[0].atoms[1].partial_charge = None;
        let report = validate_prepared_ligand(&stripped);
        let charges = report.outcome(LigandCheck::PartialCharges);
        assert!(!charges.passed);
        assert_eq!(charges.failing_serials, vec![2]);
        assert!(report.outcome(LigandCheck::AtomTypes).passed);
    }

    #[test]
    fn receptor_as_ligand_fails_torsion_check() {
        let text = "ATOM      1  N   ALA A   1       1.000   2.000   3.000  1.00  0.00    -0.350 N\n";
        let s = parse_structure(text, SourceKind::Pdbqt).unwrap();
        let report = validate_prepared_ligand(&s);
        assert!(!report.outcome(LigandCheck::TorsionTree).passed);
        assert!(report.outcome(LigandCheck::PartialCharges).passed);
    }

    #[test]
    fn single_atom_serialises_to_one_line_plus_end() {
        let s = MolecularStructure::single(vec![Atom::new(1, "C1", "C", [1.0, 2.0, 3.0])], SourceKind::Pdb);
        let text = serialize_structure(&s).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 2);
        assert!(lines[0].starts_with("ATOM      1  C1  UNK A   1       1.000   2.000   3.000"));
        assert_eq!(lines[1], "END");
    }

    #[test]
    fn ligand_round_trip_fixed_point() {
        let s = parse_structure(LIGAND, SourceKind::Pdbqt).unwrap();
        let once = serialize_structure(&s).unwrap();
        let again = serialize_structure(&parse_structure(&once, SourceKind::Pdbqt).unwrap()).unwrap();
        assert_eq!(once, again);
        assert!(once.starts_with("ROOT\nATOM"));
        assert!(once.contains("ENDBRANCH 1 3\nTORSDOF 1\nEND\n"));
        assert!(once.contains("     0.120 C\n"));
    }

    #[test]
    fn coordinate_overflow() {
        let s = MolecularStructure::single(
            vec![Atom::new(1, "C1", "C", [123456.0, 0.0, 0.0])],
            SourceKind::Pdb,
        );
        assert!(matches!(
            serialize_structure(&s),
            Err(StructureError::Overflow { field: "x coordinate", .. })
        ));
    }
}
