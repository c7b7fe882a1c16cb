//! Library side of the `royalscreen` command: manifest parsing and the
//! end-to-end pipeline, kept out of `main` so tests can drive them directly.

pub mod manifest;
pub mod pipeline;

pub use manifest::{load_manifest, parse_manifest, EngineSpec, ManifestError, PipelineManifest};
pub use pipeline::{run_pipeline, PipelineError, PipelineSummary, RunStatus};
