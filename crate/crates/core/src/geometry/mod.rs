//! Lumen mask → ordered centreline → per-millimetre diameter profile.
//!
//! The centreline is the Zhang–Suen skeleton of the largest 8-connected lumen component, with
//! spurs shorter than [`SPUR_PRUNE_MM`] removed and reduced to its longest geodesic path.
//! Local diameter comes from the exact Euclidean distance transform, corrected for the half
//! pixel between the last foreground centre and the first background centre:
//! `d = (2·EDT − 1)·spacing`.

mod edt;
mod mask;
mod skeleton;
mod thinning;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scalar::{percentile, Scalar};

pub use edt::{distance_transform, DistanceMap};
pub use mask::{LumenMask, Pixel};
pub use thinning::zhang_suen;

/// Spur branches shorter than this (from their junction) are pruned.
pub const SPUR_PRUNE_MM: f64 = 2.0;
/// Minimum centreline length worth profiling.
pub const MIN_CENTERLINE_MM: f64 = 5.0;
pub const DEFAULT_STEP_MM: f64 = 1.0;
pub const DEFAULT_PROXIMAL_FRACTION: f64 = 0.2;
pub const REFERENCE_PERCENTILE: f64 = 90.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("mask has no foreground pixels")]
    EmptyMask,
    #[error(
        "skeleton too short to profile: {length_mm:.2} mm after pruning (minimum {min_mm} mm)"
    )]
    DegenerateSkeleton { length_mm: f64, min_mm: f64 },
    #[error("centreline point ({}, {}) lies on background", .0.row, .0.col)]
    CenterlineOutsideMask(Pixel),
    #[error("seed hint ({}, {}) is not on the lumen", .0.row, .0.col)]
    SeedOffMask(Pixel),
    #[error("mask has no background pixels; diameters are unbounded")]
    NoBackground,
    #[error("reference diameter override must be positive, got {0}")]
    NonPositiveOverride(f64),
    #[error("proximal fraction must be in (0, 1], got {0}")]
    InvalidFraction(f64),
    #[error("sampling step must be positive, got {0}")]
    InvalidStep(f64),
    #[error("pixel spacing must be positive and finite, got {0}")]
    InvalidSpacing(f64),
    #[error("mask buffer has {actual} pixels, expected {expected}")]
    DimensionMismatch { expected: usize, actual: usize },
    #[error("diameter profile is empty")]
    EmptyProfile,
}

/// Ordered single-pixel path from the proximal to the distal end.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Centerline {
    pub points: Vec<Pixel>,
    /// Cumulative curvilinear coordinate of each point, mm.
    pub arclength: Vec<f64>,
    pub length_total: f64,
    pub spacing: f64,
}

impl Centerline {
    /// Builds the arclength table for an ordered 8-connected path.
    pub fn from_points(points: Vec<Pixel>, spacing: f64) -> Self {
        let mut arclength = Vec::with_capacity(points.len());
        let mut acc = 0.0;
        for (i, p) in points.iter().enumerate() {
            if i > 0 {
                acc += skeleton::step_len(points[i - 1], *p) * spacing;
            }
            arclength.push(acc);
        }
        Self {
            points,
            arclength,
            length_total: acc,
            spacing,
        }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Bracketing point indices and interpolation weight for arclength `x` (mm).
    pub fn locate(&self, x: f64) -> (usize, usize, f64) {
        let n = self.arclength.len();
        if n == 1 {
            return (0, 0, 0.0);
        }
        if x <= 0.0 {
            return (0, 1, 0.0);
        }
        if x >= self.length_total {
            return (n - 2, n - 1, 1.0);
        }
        let hi = self.arclength.partition_point(|a| *a <= x).clamp(1, n - 1);
        let lo = hi - 1;
        let span = self.arclength[hi] - self.arclength[lo];
        let t = if span > 0.0 {
            (x - self.arclength[lo]) / span
        } else {
            0.0
        };
        (lo, hi, t)
    }

    /// Continuous (row, col) position at arclength `x`.
    pub fn position(&self, x: f64) -> (f64, f64) {
        let (lo, hi, t) = self.locate(x);
        let a = self.points[lo];
        let b = self.points[hi];
        (
            a.row as f64 + t * (b.row as f64 - a.row as f64),
            a.col as f64 + t * (b.col as f64 - a.col as f64),
        )
    }

    /// Index of the centreline point nearest to arclength `x`; ties go proximal.
    pub fn nearest_point(&self, x: f64) -> usize {
        let (lo, hi, t) = self.locate(x);
        if t <= 0.5 {
            lo
        } else {
            hi
        }
    }
}

/// Diameter samples at `x = 0, step, 2·step, …` (mm).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct DiameterProfile<T> {
    pub step: T,
    pub samples: Vec<T>,
    pub d_ref: Option<T>,
    /// Originating centreline point per sample.
    pub source_map: Vec<usize>,
}

impl<T: Scalar> DiameterProfile<T> {
    /// Profile not tied to an image (phantom ground truth, edited profiles).
    pub fn from_samples(step: T, samples: Vec<T>) -> Self {
        let source_map = (0..samples.len()).collect();
        Self {
            step,
            samples,
            d_ref: None,
            source_map,
        }
    }

    pub fn with_reference(mut self, d_ref: T) -> Self {
        self.d_ref = Some(d_ref);
        self
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Arclength of sample `i`, mm.
    pub fn position(&self, i: usize) -> T {
        self.step * T::from_usize_lossy(i)
    }

    pub fn length(&self) -> T {
        self.position(self.samples.len().saturating_sub(1))
    }

    pub fn min(&self) -> Option<(usize, T)> {
        self.samples
            .iter()
            .copied()
            .enumerate()
            .fold(None, |acc, (i, v)| match acc {
                Some((_, m)) if m <= v => acc,
                _ => Some((i, v)),
            })
    }
}

/// Extracts the ordered centreline of the main vessel in `mask`.
///
/// The proximal end is the path endpoint nearest `seed_hint`, or, without a hint, the one
/// closest to the top-left corner of the image.
pub fn extract_centerline(
    mask: &LumenMask,
    seed_hint: Option<Pixel>,
) -> Result<Centerline, GeometryError> {
    if mask.foreground_count() == 0 {
        return Err(GeometryError::EmptyMask);
    }
    if let Some(seed) = seed_hint {
        if !mask.contains(seed) {
            return Err(GeometryError::SeedOffMask(seed));
        }
    }
    let component = mask.largest_component();
    let skel = zhang_suen(&component);
    let mut graph = skeleton::SkeletonGraph::from_mask(&skel);
    graph.prune_spurs(SPUR_PRUNE_MM / mask.spacing());
    if graph.alive_count() == 0 {
        return Err(GeometryError::DegenerateSkeleton {
            length_mm: 0.0,
            min_mm: MIN_CENTERLINE_MM,
        });
    }
    let mut points: Vec<Pixel> = graph
        .longest_path()
        .into_iter()
        .map(|i| graph.pixels[i])
        .collect();

    let (first, last) = (points[0], points[points.len() - 1]);
    let reverse = match seed_hint {
        Some(seed) => last.distance(&seed) < first.distance(&seed),
        None => boundary_key(last) < boundary_key(first),
    };
    if reverse {
        points.reverse();
    }
    let centerline = Centerline::from_points(points, mask.spacing());
    if centerline.length_total < MIN_CENTERLINE_MM {
        return Err(GeometryError::DegenerateSkeleton {
            length_mm: centerline.length_total,
            min_mm: MIN_CENTERLINE_MM,
        });
    }
    Ok(centerline)
}

/// L1 distance to the top-left corner, then column, then row. Comparing two endpoints by this
/// key gives the same answer after any whole-pixel translation.
fn boundary_key(p: Pixel) -> (usize, usize, usize) {
    (p.row + p.col, p.col, p.row)
}

/// Resamples the local diameter along `centerline` every `step` mm. `d_ref` is left unset.
pub fn diameter_profile<T: Scalar>(
    mask: &LumenMask,
    centerline: &Centerline,
    step: T,
) -> Result<DiameterProfile<T>, GeometryError> {
    if !(step > T::zero()) {
        return Err(GeometryError::InvalidStep(step.to_f64_lossy()));
    }
    if centerline.is_empty() {
        return Err(GeometryError::EmptyProfile);
    }
    if let Some(p) = centerline.points.iter().find(|p| !mask.contains(**p)) {
        return Err(GeometryError::CenterlineOutsideMask(*p));
    }
    let dt = distance_transform(mask);
    let edt: Vec<f64> = centerline
        .points
        .iter()
        .map(|p| dt.distance(p.row, p.col))
        .collect();
    if edt.iter().any(|d| d.is_infinite()) {
        return Err(GeometryError::NoBackground);
    }
    Ok(profile_from_edt(centerline, &edt, step))
}

/// Shared resampling rule: EDT linearly interpolated between bracketing centreline points.
pub(crate) fn profile_from_edt<T: Scalar>(
    centerline: &Centerline,
    edt: &[f64],
    step: T,
) -> DiameterProfile<T> {
    let step_mm = step.to_f64_lossy();
    let count = (centerline.length_total / step_mm + 1e-9).floor() as usize + 1;
    let mut samples = Vec::with_capacity(count);
    let mut source_map = Vec::with_capacity(count);
    for k in 0..count {
        let x = k as f64 * step_mm;
        let (lo, hi, t) = centerline.locate(x);
        let e = edt[lo] + t * (edt[hi] - edt[lo]);
        samples.push(T::lit((2.0 * e - 1.0) * centerline.spacing));
        source_map.push(if t <= 0.5 { lo } else { hi });
    }
    DiameterProfile {
        step,
        samples,
        d_ref: None,
        source_map,
    }
}

/// Proximal reference diameter: `override_mm` when given, else the 90th percentile of the
/// proximal `proximal_fraction` of the profile.
pub fn estimate_reference<T: Scalar>(
    profile: &DiameterProfile<T>,
    proximal_fraction: T,
    override_mm: Option<T>,
) -> Result<T, GeometryError> {
    if let Some(d) = override_mm {
        return if d > T::zero() && d.is_finite() {
            Ok(d)
        } else {
            Err(GeometryError::NonPositiveOverride(d.to_f64_lossy()))
        };
    }
    if profile.is_empty() {
        return Err(GeometryError::EmptyProfile);
    }
    if !(proximal_fraction > T::zero() && proximal_fraction <= T::one()) {
        return Err(GeometryError::InvalidFraction(
            proximal_fraction.to_f64_lossy(),
        ));
    }
    let window = proximal_window(profile.len(), proximal_fraction);
    let d_ref = percentile(&profile.samples[..window], T::lit(REFERENCE_PERCENTILE))
        .expect("window non-empty");
    Ok(d_ref)
}

/// Number of samples in the proximal window (at least one).
pub fn proximal_window<T: Scalar>(len: usize, fraction: T) -> usize {
    let n = (fraction * T::from_usize_lossy(len))
        .ceil()
        .to_usize()
        .unwrap_or(1);
    n.clamp(1, len.max(1))
}
