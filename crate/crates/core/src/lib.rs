//! Post-processing for docking-based virtual screening.
//!
//! - [`structio`]: PDB/PDBQT parsing, chain isolation, ligand checks
//! - [`geometry`]: pose RMSD bounds and grid boxes
//! - [`dockrun`]: engine configs, batch execution, result logs
//! - [`screen`]: RMSD filtering, per-ligand averaging, selectivity ranking
//! - [`report`]: CSV/JSON/SVG output
//! - [`claseval`]: confusion matrices and class coarsening

pub mod claseval;
pub mod dockrun;
pub mod geometry;
pub mod keyvalue;
pub mod report;
pub mod screen;
pub mod structio;

pub use dockrun::{BindingMode, DockingJob, DockingResult};
pub use geometry::{GridBox, PoseRmsd};
pub use screen::{LigandProfile, ScreeningConfig};
pub use structio::{Atom, ChainSelection, MolecularStructure, SourceKind};
