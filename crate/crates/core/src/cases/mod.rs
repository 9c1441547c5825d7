//! Case bundles on disk, synthetic phantoms with analytic ground truth, and the end-to-end
//! pipeline.

mod bundle;
mod phantom;
mod pipeline;

use thiserror::Error;

pub use bundle::{
    load_case, load_cohort, save_case, CaseBundle, CohortEntry, MANIFEST_FILE, MASK_FILE,
};
pub use phantom::{generate_phantom, GroundTruth, LesionSpec, PhantomError, PhantomSpec};
pub use pipeline::{
    analyze_case, params_for_case, run_pipeline, save_report, AnalysisReport, CaseAnalysis,
    FailureCause, PipelineError, PipelineOptions, Stage, StageTimings,
};

use crate::geometry::GeometryError;

#[derive(Debug, Error)]
pub enum CaseError {
    #[error("no manifest.json in {0}")]
    MissingManifest(std::path::PathBuf),
    #[error("manifest field '{field}': {reason}")]
    SchemaViolation { field: String, reason: String },
    #[error("anisotropic pixel spacing {x} x {y} mm is not supported")]
    AnisotropicSpacing { x: f64, y: f64 },
    #[error("{path}: {message}")]
    Io {
        path: std::path::PathBuf,
        message: String,
    },
    #[error("invalid mask: {0}")]
    Mask(#[from] GeometryError),
}

impl CaseError {
    pub(crate) fn schema(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Self::SchemaViolation {
            field: field.into(),
            reason: reason.into(),
        }
    }

    pub(crate) fn io(path: &std::path::Path, e: impl std::fmt::Display) -> Self {
        Self::Io {
            path: path.to_path_buf(),
            message: e.to_string(),
        }
    }
}
