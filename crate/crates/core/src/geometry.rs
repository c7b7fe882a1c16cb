//! Pose RMSD bounds and docking grid boxes.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::structio::{Atom, MolecularStructure};

#[derive(Debug, Error, PartialEq)]
pub enum GeometryError {
    #[error("poses are not comparable: {0}")]
    IncomparablePoses(String),
    #[error("structure has no atoms")]
    EmptyStructure,
    #[error("margin must be a finite non-negative length, got {0}")]
    InvalidMargin(f64),
    #[error("grid box {axis} size must be positive, got {size}")]
    DegenerateBox { axis: char, size: f64 },
    #[error("grid box {0} is not finite")]
    NonFinite(&'static str),
}

pub const DEFAULT_GRID_MARGIN: f64 = 5.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PoseRmsd {
    pub lower_bound: f64,
    pub upper_bound: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridBox {
    pub center: [f64; 3],
    pub size: [f64; 3],
}

impl GridBox {
    pub fn new(center: [f64; 3], size: [f64; 3]) -> Result<Self, GeometryError> {
        if center.iter().any(|c| !c.is_finite()) {
            return Err(GeometryError::NonFinite("center"));
        }
        for (axis, &s) in ['x', 'y', 'z'].iter().zip(&size) {
            if !s.is_finite() {
                return Err(GeometryError::NonFinite("size"));
            }
            if s <= 0.0 {
                return Err(GeometryError::DegenerateBox { axis: *axis, size: s });
            }
        }
        Ok(GridBox { center, size })
    }

    pub fn contains(&self, p: [f64; 3]) -> bool {
        (0..3).all(|k| (p[k] - self.center[k]).abs() <= self.size[k] / 2.0)
    }
}

fn squared_distance(a: [f64; 3], b: [f64; 3]) -> f64 {
    (0..3).map(|k| (a[k] - b[k]).powi(2)).sum()
}

fn directed_nearest(from: &[Atom], to: &[Atom]) -> Result<f64, GeometryError> {
    let mut total = 0.0;
    for a in from {
        let nearest = to
            .iter()
            .filter(|b| b.element.eq_ignore_ascii_case(&a.element))
            .map(|b| squared_distance(a.position(), b.position()))
            .fold(f64::INFINITY, f64::min);
        if !nearest.is_finite() {
            return Err(GeometryError::IncomparablePoses(format!(
                "no {} atom to match serial {}",
                a.element, a.serial
            )));
        }
        total += nearest;
    }
    Ok((total / from.len() as f64).sqrt())
}

/// RMSD bounds between two poses of the same ligand, in the receptor frame
/// (no superposition).
///
/// The upper bound pairs atoms by position in the file. The lower bound is the
/// larger of the two directed nearest-same-element matchings.
pub fn pose_rmsd(a: &[Atom], b: &[Atom]) -> Result<PoseRmsd, GeometryError> {
    if a.len() != b.len() {
        return Err(GeometryError::IncomparablePoses(format!(
            "{} atoms vs {} atoms",
            a.len(),
            b.len()
        )));
    }
    if a.is_empty() {
        return Err(GeometryError::EmptyStructure);
    }
    let hydrogens = |atoms: &[Atom]| atoms.iter().filter(|x| x.is_hydrogen()).count();
    if hydrogens(a) != hydrogens(b) {
        return Err(GeometryError::IncomparablePoses(format!(
            "{} hydrogens vs {} hydrogens",
            hydrogens(a),
            hydrogens(b)
        )));
    }
    let mut sum = 0.0;
    for (i, (p, q)) in a.iter().zip(b).enumerate() {
        if !p.element.eq_ignore_ascii_case(&q.element) {
            return Err(GeometryError::IncomparablePoses(format!(
                "atom {} is {} in one pose and {} in the other",
                i + 1,
                p.element,
                q.element
            )));
        }
        sum += squared_distance(p.position(), q.position());
    }
    let upper = (sum / a.len() as f64).sqrt();
    let lower = directed_nearest(a, b)?.max(directed_nearest(b, a)?);
    Ok(PoseRmsd {
        lower_bound: lower,
        upper_bound: upper,
    })
}

/// RMSD of every model against the first one, as a docking engine reports it
/// next to each mode.
pub fn rmsd_from_best(poses: &MolecularStructure) -> Result<Vec<PoseRmsd>, GeometryError> {
    let best = &poses.models.first().ok_or(GeometryError::EmptyStructure)?.atoms;
    poses
        .models
        .iter()
        .map(|m| pose_rmsd(best, &m.atoms))
        .collect()
}

/// Axis-aligned bounding box of the first model, grown by `margin` on every face.
pub fn suggest_grid_box(receptor: &MolecularStructure, margin: f64) -> Result<GridBox, GeometryError> {
    if !margin.is_finite() || margin < 0.0 {
        return Err(GeometryError::InvalidMargin(margin));
    }
    let atoms = &receptor
        .models
        .first()
        .ok_or(GeometryError::EmptyStructure)?
        .atoms;
    if atoms.is_empty() {
        return Err(GeometryError::EmptyStructure);
    }
    let mut lo = [f64::INFINITY; 3];
    let mut hi = [f64::NEG_INFINITY; 3];
    for atom in atoms {
        let p = atom.position();
        for k in 0..3 {
            lo[k] = lo[k].min(p[k]);
            hi[k] = hi[k].max(p[k]);
        }
    }
    let center = [0, 1, 2].map(|k| (lo[k] + hi[k]) / 2.0);
    let size = [0, 1, 2].map(|k| hi[k] - lo[k] + 2.0 * margin);
    GridBox::new(center, size)
}
