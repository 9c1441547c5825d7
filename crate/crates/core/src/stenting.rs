//! Virtual stenting: tapered target lumen, smoothstep blending into the native profile, then
//! RFC and QFR recomputation with the flow held fixed.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::DiameterProfile;
use crate::hemodynamics::{
    compute_qfr, discretize, BranchNode, FlowEstimate, Geometry1D, HemoError, HemoParams,
    QfrResult, QualityFlag,
};
use crate::rfc::{compute_rfc, RfcError, RfcProfile};
use crate::scalar::percentile;
use crate::units::mm_to_m;
use crate::Scalar;

pub const DEFAULT_EDGE_LEN_MM: f64 = 2.0;
/// Landing-zone reference windows extend this far beyond each landing point.
pub const LANDING_WINDOW_MM: f64 = 5.0;
const LANDING_PERCENTILE: f64 = 90.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum StentError {
    #[error("stent span [{x_prox}, {x_dist}] mm is outside the vessel [0, {length}] mm")]
    SpanOutOfRange {
        x_prox: f64,
        x_dist: f64,
        length: f64,
    },
    #[error("edge length {edge_len} mm exceeds half the span ({half_span} mm) or is not positive")]
    SpanTooShortForEdges { edge_len: f64, half_span: f64 },
    #[error("maximal stent diameter must be positive")]
    NonPositiveStentDiameter,
    #[error(transparent)]
    Rfc(#[from] RfcError),
    #[error(transparent)]
    Hemo(#[from] HemoError),
}

/// Operator-chosen landing points and sizing, mm.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct StentPlan<T> {
    pub x_prox: T,
    pub x_dist: T,
    pub d_max: T,
    #[serde(default = "default_edge")]
    pub edge_len: T,
}

fn default_edge<T: Scalar>() -> T {
    T::lit(DEFAULT_EDGE_LEN_MM)
}

impl<T: Scalar> StentPlan<T> {
    pub fn new(x_prox: T, x_dist: T, d_max: T) -> Self {
        Self {
            x_prox,
            x_dist,
            d_max,
            edge_len: default_edge(),
        }
    }

    pub fn validate(&self, length: T) -> Result<(), StentError> {
        let ok_range = self.x_prox >= T::zero()
            && self.x_prox < self.x_dist
            && self.x_dist <= length
            && self.x_prox.is_finite()
            && self.x_dist.is_finite();
        if !ok_range {
            return Err(StentError::SpanOutOfRange {
                x_prox: self.x_prox.to_f64_lossy(),
                x_dist: self.x_dist.to_f64_lossy(),
                length: length.to_f64_lossy(),
            });
        }
        if !(self.d_max > T::zero()) {
            return Err(StentError::NonPositiveStentDiameter);
        }
        let half_span = (self.x_dist - self.x_prox) * T::lit(0.5);
        if !(self.edge_len > T::zero() && self.edge_len <= half_span) {
            return Err(StentError::SpanTooShortForEdges {
                edge_len: self.edge_len.to_f64_lossy(),
                half_span: half_span.to_f64_lossy(),
            });
        }
        Ok(())
    }

    pub fn contains(&self, x: T) -> bool {
        x >= self.x_prox && x <= self.x_dist
    }

    /// Blend weight α(x): smoothstep 0→1 over the proximal edge, 1 on the plateau, 1→0 over
    /// the distal edge, 0 outside the span.
    pub fn blend_weight(&self, x: T) -> T {
        if !self.contains(x) {
            return T::zero();
        }
        let rise = (x - self.x_prox) / self.edge_len;
        let fall = (self.x_dist - x) / self.edge_len;
        smoothstep(rise.min(fall))
    }
}

/// `3t² − 2t³` on [0, 1], clamped outside.
pub fn smoothstep<T: Scalar>(t: T) -> T {
    let t = t.max(T::zero()).min(T::one());
    t * t * (T::lit(3.0) - T::lit(2.0) * t)
}

/// 90th-percentile diameters in the windows just outside each landing point. A landing point
/// at the vessel end has no outside window and falls back to the diameter at the landing
/// point itself.
pub fn landing_references<T: Scalar>(profile: &DiameterProfile<T>, plan: &StentPlan<T>) -> (T, T) {
    let window = T::lit(LANDING_WINDOW_MM);
    let pick = |lo: T, hi: T, lo_open: bool, hi_open: bool| -> Vec<T> {
        profile
            .samples
            .iter()
            .enumerate()
            .filter(|(i, _)| {
                let x = profile.position(*i);
                let above = if lo_open { x > lo } else { x >= lo };
                let below = if hi_open { x < hi } else { x <= hi };
                above && below
            })
            .map(|(_, d)| *d)
            .collect()
    };
    let at = |x: T| -> T {
        let i = (x / profile.step).round().to_usize().unwrap_or(0);
        profile.samples[i.min(profile.len() - 1)]
    };
    let prox = pick(plan.x_prox - window, plan.x_prox, false, true);
    let dist = pick(plan.x_dist, plan.x_dist + window, true, false);
    let q = T::lit(LANDING_PERCENTILE);
    (
        percentile(&prox, q).unwrap_or_else(|| at(plan.x_prox)),
        percentile(&dist, q).unwrap_or_else(|| at(plan.x_dist)),
    )
}

/// Post-stent diameter profile; `d_ref` and everything outside the span are unchanged.
pub fn apply_stent<T: Scalar>(
    profile: &DiameterProfile<T>,
    plan: &StentPlan<T>,
) -> Result<DiameterProfile<T>, StentError> {
    plan.validate(profile.length())?;
    let (d_prox, d_dist) = landing_references(profile, plan);
    let span = plan.x_dist - plan.x_prox;
    let mut post = profile.clone();
    for (i, d) in post.samples.iter_mut().enumerate() {
        let x = profile.position(i);
        if !plan.contains(x) {
            continue;
        }
        let alpha = plan.blend_weight(x);
        let target = (d_prox + (d_dist - d_prox) * (x - plan.x_prox) / span).min(plan.d_max);
        *d = alpha * target + (T::one() - alpha) * *d;
    }
    Ok(post)
}

/// Side-branch take-off along the main vessel.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct BranchSite<T> {
    pub position_mm: T,
    pub daughter_radius_mm: T,
}

/// Maps take-offs onto the segment whose inlet is nearest.
pub fn branch_nodes<T: Scalar>(
    sites: &[BranchSite<T>],
    step: T,
    segments: usize,
) -> Vec<BranchNode<T>> {
    sites
        .iter()
        .map(|s| BranchNode {
            segment_index: (s.position_mm / step)
                .round()
                .to_usize()
                .unwrap_or(0)
                .min(segments.saturating_sub(1)),
            daughter_radii: vec![mm_to_m(s.daughter_radius_mm)],
        })
        .collect()
}

/// Immutable analysed case that stent plans are evaluated against.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct CaseSnapshot<T> {
    pub profile: DiameterProfile<T>,
    pub geometry: Geometry1D<T>,
    pub flow: FlowEstimate<T>,
    pub params: HemoParams<T>,
    pub branches: Vec<BranchSite<T>>,
    pub qfr_pre: QfrResult<T>,
}

impl<T: Scalar> CaseSnapshot<T> {
    /// Discretises `profile` (which must carry `d_ref`) and computes the pre-stent QFR.
    pub fn new(
        profile: DiameterProfile<T>,
        flow: FlowEstimate<T>,
        params: HemoParams<T>,
        branches: Vec<BranchSite<T>>,
    ) -> Result<Self, StentError> {
        if profile.d_ref.is_none() {
            return Err(RfcError::MissingReference.into());
        }
        let geometry = discretize_with_branches(&profile, &branches)?;
        let qfr_pre = compute_qfr(&geometry, &flow, &params);
        Ok(Self {
            profile,
            geometry,
            flow,
            params,
            branches,
            qfr_pre,
        })
    }
}

pub fn discretize_with_branches<T: Scalar>(
    profile: &DiameterProfile<T>,
    branches: &[BranchSite<T>],
) -> Result<Geometry1D<T>, HemoError> {
    let geometry = discretize(profile)?;
    let nodes = branch_nodes(branches, profile.step, geometry.len());
    Ok(geometry.with_branches(nodes))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct StentSimResult<T> {
    pub plan: StentPlan<T>,
    pub post_profile: DiameterProfile<T>,
    pub rfc_post: RfcProfile<T>,
    pub qfr_pre: T,
    /// Residual QFR.
    pub qfr_post: T,
    pub delta_qfr: T,
    pub flags: BTreeSet<QualityFlag>,
}

/// Evaluates one plan. Flow and model parameters come from the snapshot unchanged.
pub fn simulate_stent<T: Scalar>(
    case: &CaseSnapshot<T>,
    plan: &StentPlan<T>,
) -> Result<StentSimResult<T>, StentError> {
    let post_profile = apply_stent(&case.profile, plan)?;
    let rfc_post = compute_rfc(&post_profile)?;
    let geometry = discretize_with_branches(&post_profile, &case.branches)?;
    let post = compute_qfr(&geometry, &case.flow, &case.params);
    let mut flags = post.flags.clone();
    if case.branches.iter().any(|b| plan.contains(b.position_mm)) {
        flags.insert(QualityFlag::LimitedAccuracyBranch);
    }
    let qfr_pre = case.qfr_pre.qfr;
    Ok(StentSimResult {
        plan: *plan,
        post_profile,
        rfc_post,
        qfr_pre,
        qfr_post: post.qfr,
        delta_qfr: post.qfr - qfr_pre,
        flags,
    })
}
