use std::fmt;
use std::io::Write;
use std::path::Path;
use std::time::Instant;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{CaseBundle, CaseError};
use crate::geometry::{
    diameter_profile, estimate_reference, extract_centerline, Centerline, DiameterProfile,
    GeometryError, Pixel, DEFAULT_PROXIMAL_FRACTION, DEFAULT_STEP_MM,
};
use crate::hemodynamics::{
    compute_qfr, estimate_flow, reference_area, FlowEstimate, HemoError, HemoParams, QfrResult,
    TransitEstimate,
};
use crate::rfc::{
    build_heatmap, classify_pattern, compute_rfc, CoregistrationMap, Heatmap, PatternLabel,
    RfcProfile, DEFAULT_DEPTH_THRESHOLD, DEFAULT_WIDTH_THRESHOLD_MM,
};
use crate::stenting::{discretize_with_branches, BranchSite, CaseSnapshot};
use crate::units::mmhg_to_pa;
use crate::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Validation,
    Centerline,
    DiameterProfile,
    Reference,
    Rfc,
    Heatmap,
    Discretize,
    Flow,
    Qfr,
}

impl Stage {
    fn is_geometry(self) -> bool {
        matches!(
            self,
            Stage::Centerline
                | Stage::DiameterProfile
                | Stage::Reference
                | Stage::Rfc
                | Stage::Heatmap
        )
    }

    fn is_physiology(self) -> bool {
        matches!(self, Stage::Discretize | Stage::Flow | Stage::Qfr)
    }
}

/// Exclusion categories used when aggregating failed cases.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FailureCause {
    PoorImageQualityOrOverlap,
    MissingOrInvalidFfr,
    InvalidInput,
    ModelFailure,
}

impl fmt::Display for FailureCause {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            FailureCause::PoorImageQualityOrOverlap => "Poor image quality/overlap",
            FailureCause::MissingOrInvalidFfr => "Missing/invalid FFR",
            FailureCause::InvalidInput => "Invalid input",
            FailureCause::ModelFailure => "Model failure",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Error, Serialize, Deserialize)]
#[error("{cause} at stage {stage:?}: {message}")]
pub struct PipelineError {
    pub stage: Stage,
    pub cause: FailureCause,
    pub message: String,
}

impl PipelineError {
    fn new(stage: Stage, cause: FailureCause, e: impl fmt::Display) -> Self {
        Self {
            stage,
            cause,
            message: e.to_string(),
        }
    }

    fn geometry(stage: Stage, e: GeometryError) -> Self {
        let cause = match e {
            GeometryError::SeedOffMask(_) | GeometryError::NonPositiveOverride(_) => {
                FailureCause::InvalidInput
            }
            GeometryError::InvalidStep(_) | GeometryError::InvalidFraction(_) => {
                FailureCause::InvalidInput
            }
            _ => FailureCause::PoorImageQualityOrOverlap,
        };
        Self::new(stage, cause, e)
    }

    fn hemo(stage: Stage, e: HemoError) -> Self {
        let cause = match e {
            HemoError::NonPositiveFrameInterval | HemoError::FrameSizeMismatch { .. } => {
                FailureCause::InvalidInput
            }
            HemoError::TooFewFrames(_)
            | HemoError::NoArrival
            | HemoError::NonMonotoneFront { .. }
            | HemoError::NonPositiveTransitTime
            | HemoError::NonPositiveDiameter { .. } => FailureCause::PoorImageQualityOrOverlap,
            _ => FailureCause::ModelFailure,
        };
        Self::new(stage, cause, e)
    }
}

impl From<CaseError> for PipelineError {
    fn from(e: CaseError) -> Self {
        let cause = match &e {
            CaseError::SchemaViolation { field, .. } if field == "reference_ffr" => {
                FailureCause::MissingOrInvalidFfr
            }
            _ => FailureCause::InvalidInput,
        };
        Self::new(Stage::Validation, cause, e)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct PipelineOptions<T> {
    pub step_mm: T,
    pub proximal_fraction: T,
    /// Takes precedence over the bundle's own override.
    pub reference_override: Option<T>,
    /// Takes precedence over the bundle's own hint.
    pub seed_hint: Option<Pixel>,
    /// Resting flow (m³/s) used instead of the contrast-transit estimate.
    pub forced_rest_flow: Option<T>,
}

impl<T: Scalar> Default for PipelineOptions<T> {
    fn default() -> Self {
        Self {
            step_mm: T::lit(DEFAULT_STEP_MM),
            proximal_fraction: T::lit(DEFAULT_PROXIMAL_FRACTION),
            reference_override: None,
            seed_hint: None,
            forced_rest_flow: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StageTiming {
    pub stage: Stage,
    pub ms: f64,
}

/// Wall-clock per stage. `total_ms` also covers validation and bookkeeping, so it is at least
/// the sum of the stages.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageTimings {
    pub stages: Vec<StageTiming>,
    pub geometry_ms: f64,
    pub physiology_ms: f64,
    pub total_ms: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct AnalysisReport<T> {
    pub case_id: String,
    pub centerline_length_mm: T,
    pub profile: DiameterProfile<T>,
    pub rfc: RfcProfile<T>,
    pub pattern: PatternLabel<T>,
    /// Absent when the flow was forced.
    pub transit: Option<TransitEstimate<T>>,
    pub flow: FlowEstimate<T>,
    pub qfr: QfrResult<T>,
    pub params: HemoParams<T>,
    pub reference_ffr: Option<T>,
    pub timings: StageTimings,
    /// True when no operator override (seed hint, reference diameter, forced flow) was used.
    pub autocompleted: bool,
    pub overrides: Vec<String>,
}

impl<T> AnalysisReport<T> {
    /// Copy with timings zeroed, for comparing runs.
    pub fn without_timings(&self) -> Self
    where
        T: Clone,
    {
        let mut r = self.clone();
        r.timings = StageTimings {
            stages: r
                .timings
                .stages
                .iter()
                .map(|s| StageTiming {
                    stage: s.stage,
                    ms: 0.0,
                })
                .collect(),
            geometry_ms: 0.0,
            physiology_ms: 0.0,
            total_ms: 0.0,
        };
        r
    }
}

/// Report plus the artefacts the interactive views and stent simulation need.
#[derive(Debug, Clone, PartialEq)]
pub struct CaseAnalysis<T> {
    pub report: AnalysisReport<T>,
    pub centerline: Centerline,
    pub heatmap: Heatmap<T>,
    pub coregistration: CoregistrationMap,
    pub snapshot: CaseSnapshot<T>,
}

/// Default parameters, with `p_prox` from `pprox_mmhg`, else the bundle's aortic pressure.
pub fn params_for_case<T: Scalar>(
    case: &CaseBundle,
    kappa: Option<f64>,
    pprox_mmhg: Option<f64>,
) -> HemoParams<T> {
    let mut params = HemoParams::default();
    if let Some(k) = kappa {
        params.kappa = T::lit(k);
    }
    if let Some(p) = pprox_mmhg.or(case.aortic_pressure) {
        params.p_prox = mmhg_to_pa(T::lit(p));
    }
    params
}

struct Clock {
    started: Instant,
    stages: Vec<StageTiming>,
}

impl Clock {
    fn run<R>(&mut self, stage: Stage, f: impl FnOnce() -> R) -> R {
        let t = Instant::now();
        let out = f();
        self.stages.push(StageTiming {
            stage,
            ms: t.elapsed().as_secs_f64() * 1e3,
        });
        out
    }

    fn finish(self) -> StageTimings {
        let sum = |pred: fn(Stage) -> bool| {
            self.stages
                .iter()
                .filter(|s| pred(s.stage))
                .map(|s| s.ms)
                .sum::<f64>()
        };
        let geometry_ms = sum(Stage::is_geometry);
        let physiology_ms = sum(Stage::is_physiology);
        let staged: f64 = self.stages.iter().map(|s| s.ms).sum();
        let total_ms = (self.started.elapsed().as_secs_f64() * 1e3).max(staged);
        StageTimings {
            stages: self.stages,
            geometry_ms,
            physiology_ms,
            total_ms,
        }
    }
}

pub fn run_pipeline<T: Scalar>(
    case: &CaseBundle,
    params: &HemoParams<T>,
    options: &PipelineOptions<T>,
) -> Result<AnalysisReport<T>, PipelineError> {
    analyze_case(case, params, options).map(|a| a.report)
}

/// centreline → diameter profile → reference → RFC → heat map → discretisation → flow → QFR.
pub fn analyze_case<T: Scalar>(
    case: &CaseBundle,
    params: &HemoParams<T>,
    options: &PipelineOptions<T>,
) -> Result<CaseAnalysis<T>, PipelineError> {
    let mut clock = Clock {
        started: Instant::now(),
        stages: Vec::new(),
    };
    clock.run(Stage::Validation, || case.validate())?;
    params
        .validate()
        .map_err(|e| PipelineError::new(Stage::Validation, FailureCause::InvalidInput, e))?;

    let seed = options.seed_hint.or(case.seed_hint);
    let reference_override = options
        .reference_override
        .or(case.reference_override.map(T::lit));
    let mut overrides = Vec::new();
    if seed.is_some() {
        overrides.push("seed_hint".to_string());
    }
    if reference_override.is_some() {
        overrides.push("reference_diameter".to_string());
    }
    if options.forced_rest_flow.is_some() {
        overrides.push("forced_rest_flow".to_string());
    }

    let mask = &case.mask;
    let centerline = clock
        .run(Stage::Centerline, || extract_centerline(mask, seed))
        .map_err(|e| PipelineError::geometry(Stage::Centerline, e))?;
    let profile = clock
        .run(Stage::DiameterProfile, || {
            diameter_profile(mask, &centerline, options.step_mm)
        })
        .map_err(|e| PipelineError::geometry(Stage::DiameterProfile, e))?;
    let d_ref = clock
        .run(Stage::Reference, || {
            estimate_reference(&profile, options.proximal_fraction, reference_override)
        })
        .map_err(|e| PipelineError::geometry(Stage::Reference, e))?;
    let profile = profile.with_reference(d_ref);
    let (rfc, pattern) = clock
        .run(Stage::Rfc, || {
            compute_rfc(&profile).map(|rfc| {
                let pattern = classify_pattern(
                    &rfc,
                    T::lit(DEFAULT_DEPTH_THRESHOLD),
                    T::lit(DEFAULT_WIDTH_THRESHOLD_MM),
                );
                (rfc, pattern)
            })
        })
        .map_err(|e| PipelineError::new(Stage::Rfc, FailureCause::ModelFailure, e))?;
    let (heatmap, coregistration) = clock
        .run(Stage::Heatmap, || build_heatmap(mask, &centerline, &rfc))
        .map_err(|e| PipelineError::new(Stage::Heatmap, FailureCause::ModelFailure, e))?;

    let branches: Vec<BranchSite<T>> = case
        .branch_nodes
        .iter()
        .map(|b| BranchSite {
            position_mm: T::lit(b.position_mm),
            daughter_radius_mm: T::lit(b.daughter_radius_mm),
        })
        .collect();
    let geometry = clock
        .run(Stage::Discretize, || {
            discretize_with_branches(&profile, &branches)
        })
        .map_err(|e| PipelineError::hemo(Stage::Discretize, e))?;
    let (transit, flow) = match options.forced_rest_flow {
        Some(q) => {
            if !(q >= T::zero() && q.is_finite()) {
                return Err(PipelineError::new(
                    Stage::Flow,
                    FailureCause::InvalidInput,
                    HemoError::NegativeFlow(q.to_f64_lossy()),
                ));
            }
            let flow = clock.run(Stage::Flow, || {
                FlowEstimate::new(reference_area(&profile), q, params.kappa)
            });
            (None, flow)
        }
        None => {
            let (transit, flow) = clock
                .run(Stage::Flow, || {
                    estimate_flow(
                        &case.frames,
                        &centerline,
                        mask,
                        &profile,
                        T::lit(case.frame_interval),
                        case.contrast_polarity,
                        params,
                    )
                })
                .map_err(|e| PipelineError::hemo(Stage::Flow, e))?;
            (Some(transit), flow)
        }
    };
    let qfr = clock.run(Stage::Qfr, || compute_qfr(&geometry, &flow, params));

    let snapshot = CaseSnapshot {
        profile: profile.clone(),
        geometry,
        flow,
        params: *params,
        branches,
        qfr_pre: qfr.clone(),
    };
    let report = AnalysisReport {
        case_id: case.id.clone(),
        centerline_length_mm: T::lit(centerline.length_total),
        profile,
        rfc,
        pattern,
        transit,
        flow,
        qfr,
        params: *params,
        reference_ffr: case.reference_ffr.map(T::lit),
        timings: clock.finish(),
        autocompleted: overrides.is_empty(),
        overrides,
    };
    Ok(CaseAnalysis {
        report,
        centerline,
        heatmap,
        coregistration,
        snapshot,
    })
}

/// Writes the report as JSON through a temporary file in the target directory, so readers never
/// see a partial report.
pub fn save_report<T: Scalar>(report: &AnalysisReport<T>, path: &Path) -> Result<(), CaseError> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| CaseError::io(dir, e))?;
    serde_json::to_writer_pretty(&mut tmp, report).map_err(|e| CaseError::io(path, e))?;
    tmp.write_all(b"\n").map_err(|e| CaseError::io(path, e))?;
    tmp.persist(path)
        .map_err(|e| CaseError::io(path, e.error))?;
    Ok(())
}
