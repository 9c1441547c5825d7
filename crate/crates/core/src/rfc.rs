//! Relative Flow Capacity: `RFC(x) = (d(x)/d_ref)⁴`, its heat-map projection onto the frame,
//! curve↔image co-registration, and focal/diffuse classification of the nadir.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{Centerline, DiameterProfile, LumenMask, Pixel};
use crate::Scalar;

pub const DEFAULT_DEPTH_THRESHOLD: f64 = 0.75;
pub const DEFAULT_WIDTH_THRESHOLD_MM: f64 = 20.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RfcError {
    #[error("diameter profile has no reference diameter")]
    MissingReference,
    #[error("reference diameter must be positive")]
    NonPositiveReference,
    #[error("inconsistent inputs: {0}")]
    InconsistentInputs(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct RfcProfile<T> {
    pub step: T,
    pub values: Vec<T>,
    pub nadir_index: usize,
    pub nadir_value: T,
}

impl<T: Scalar> RfcProfile<T> {
    /// Builds a profile from raw values, locating the (first) minimum.
    pub fn from_values(step: T, values: Vec<T>) -> Self {
        let (nadir_index, nadir_value) =
            values
                .iter()
                .copied()
                .enumerate()
                .fold(
                    (0, T::infinity()),
                    |(bi, bv), (i, v)| {
                        if v < bv {
                            (i, v)
                        } else {
                            (bi, bv)
                        }
                    },
                );
        Self {
            step,
            values,
            nadir_index,
            nadir_value,
        }
    }
}

#[inline]
pub fn relative_capacity<T: Scalar>(d: T, d_ref: T) -> T {
    let ratio = d / d_ref;
    let sq = ratio * ratio;
    sq * sq
}

pub fn compute_rfc<T: Scalar>(profile: &DiameterProfile<T>) -> Result<RfcProfile<T>, RfcError> {
    let d_ref = profile.d_ref.ok_or(RfcError::MissingReference)?;
    if !(d_ref > T::zero()) {
        return Err(RfcError::NonPositiveReference);
    }
    let values = profile
        .samples
        .iter()
        .map(|&d| relative_capacity(d, d_ref))
        .collect();
    Ok(RfcProfile::from_values(profile.step, values))
}

/// Bidirectional link between RFC samples and frame pixels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoregistrationMap {
    pub width: usize,
    pub height: usize,
    pub curve_to_pixel: Vec<Pixel>,
    /// Row-major; `None` on background.
    pub pixel_to_curve: Vec<Option<usize>>,
}

impl CoregistrationMap {
    pub fn sample_at(&self, p: Pixel) -> Option<usize> {
        if p.row >= self.height || p.col >= self.width {
            return None;
        }
        self.pixel_to_curve[p.row * self.width + p.col]
    }
}

/// Per-foreground-pixel RFC value with its colour-scale bounds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct Heatmap<T> {
    pub width: usize,
    pub height: usize,
    pub values: Vec<Option<T>>,
    pub scale_min: T,
    pub scale_max: T,
}

impl<T: Scalar> Heatmap<T> {
    pub fn value(&self, p: Pixel) -> Option<T> {
        self.values[p.row * self.width + p.col]
    }
}

/// Colours every foreground pixel with the RFC of its nearest resampled centreline position
/// (Euclidean, ties to the lower sample index).
pub fn build_heatmap<T: Scalar>(
    mask: &LumenMask,
    centerline: &Centerline,
    rfc: &RfcProfile<T>,
) -> Result<(Heatmap<T>, CoregistrationMap), RfcError> {
    let step = rfc.step.to_f64_lossy();
    if centerline.is_empty() || !(step > 0.0) {
        return Err(RfcError::InconsistentInputs(
            "empty centreline or non-positive step".into(),
        ));
    }
    let expected = (centerline.length_total / step + 1e-9).floor() as usize + 1;
    if expected != rfc.values.len() {
        return Err(RfcError::InconsistentInputs(format!(
            "{} RFC samples but centreline length {:.3} mm at step {step} mm implies {expected}",
            rfc.values.len(),
            centerline.length_total
        )));
    }

    let positions: Vec<(f64, f64)> = (0..expected)
        .map(|k| centerline.position(k as f64 * step))
        .collect();
    let curve_to_pixel: Vec<Pixel> = (0..expected)
        .map(|k| centerline.points[centerline.nearest_point(k as f64 * step)])
        .collect();

    let (w, h) = (mask.width(), mask.height());
    let mut pixel_to_curve = vec![None; w * h];
    let mut values = vec![None; w * h];
    for p in mask.foreground() {
        let (pr, pc) = (p.row as f64, p.col as f64);
        let mut best = 0usize;
        let mut best_d = f64::INFINITY;
        for (k, (r, c)) in positions.iter().enumerate() {
            let d = (r - pr) * (r - pr) + (c - pc) * (c - pc);
            if d < best_d {
                best_d = d;
                best = k;
            }
        }
        let i = mask.index(p);
        pixel_to_curve[i] = Some(best);
        values[i] = Some(rfc.values[best]);
    }

    let scale_max = rfc.values.iter().copied().fold(T::one(), |a, b| a.max(b));
    Ok((
        Heatmap {
            width: w,
            height: h,
            values,
            scale_min: T::zero(),
            scale_max,
        },
        CoregistrationMap {
            width: w,
            height: h,
            curve_to_pixel,
            pixel_to_curve,
        },
    ))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PatternKind {
    Focal,
    Diffuse,
    NoLesion,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct PatternLabel<T> {
    pub label: PatternKind,
    pub nadir_width: T,
}

/// Measures the contiguous run of samples at or below `depth_threshold` that contains the
/// nadir. Width is `run_len × step`, so a single sample counts as one step.
pub fn classify_pattern<T: Scalar>(
    rfc: &RfcProfile<T>,
    depth_threshold: T,
    width_threshold: T,
) -> PatternLabel<T> {
    let v = &rfc.values;
    let nadir = rfc.nadir_index;
    if v.is_empty() || v[nadir] > depth_threshold {
        return PatternLabel {
            label: PatternKind::NoLesion,
            nadir_width: T::zero(),
        };
    }
    let mut lo = nadir;
    while lo > 0 && v[lo - 1] <= depth_threshold {
        lo -= 1;
    }
    let mut hi = nadir;
    while hi + 1 < v.len() && v[hi + 1] <= depth_threshold {
        hi += 1;
    }
    let nadir_width = T::from_usize_lossy(hi - lo + 1) * rfc.step;
    let label = if nadir_width <= width_threshold {
        PatternKind::Focal
    } else {
        PatternKind::Diffuse
    };
    PatternLabel { label, nadir_width }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn profile(samples: Vec<f64>, d_ref: f64) -> DiameterProfile<f64> {
        DiameterProfile::from_samples(1.0, samples).with_reference(d_ref)
    }

    #[test]
    fn rfc_values() {
        let r = compute_rfc(&profile(vec![3.0, 1.5, 2.4], 3.0)).unwrap();
        assert_eq!(&r.values[..2], &[1.0, 0.0625]);
        assert!((r.values[2] - 0.4096).abs() < 1e-15);
        assert_eq!(r.nadir_index, 1);
        assert_eq!(r.nadir_value, 0.0625);
    }

    #[test]
    fn missing_reference() {
        let p = DiameterProfile::from_samples(1.0, vec![3.0]);
        assert_eq!(compute_rfc(&p), Err(RfcError::MissingReference));
    }

    fn run(len_below: usize, pad: usize) -> RfcProfile<f64> {
        let mut v = vec![1.0; pad];
        v.extend((0..len_below).map(|i| if i == len_below / 2 { 0.3 } else { 0.6 }));
        v.extend(vec![1.0; pad]);
        RfcProfile::from_values(1.0, v)
    }

    #[test]
    fn focal_and_diffuse() {
        let f = classify_pattern(&run(15, 10), 0.75, 20.0);
        assert_eq!(f.label, PatternKind::Focal);
        assert_eq!(f.nadir_width, 15.0);
        let d = classify_pattern(&run(25, 10), 0.75, 20.0);
        assert_eq!(d.label, PatternKind::Diffuse);
        assert_eq!(d.nadir_width, 25.0);
        let n = classify_pattern(&RfcProfile::from_values(1.0, vec![1.0; 30]), 0.75, 20.0);
        assert_eq!(n.label, PatternKind::NoLesion);
        assert_eq!(n.nadir_width, 0.0);
        let edge = classify_pattern(&run(20, 3), 0.75, 20.0);
        assert_eq!(edge.label, PatternKind::Focal);
    }

    #[test]
    fn heatmap_on_strip() {
        let mask = LumenMask::from_fn(41, 11, 0.5, |r, _| (3..8).contains(&r)).unwrap();
        let cl = Centerline::from_points((0..41).map(|c| Pixel::new(5, c)).collect(), 0.5);
        let rfc = RfcProfile::from_values(1.0, vec![1.0; 21]);
        let (hm, co) = build_heatmap(&mask, &cl, &rfc).unwrap();
        for p in mask.foreground() {
            assert_eq!(hm.value(p), Some(1.0));
        }
        assert_eq!(
            hm.values.iter().filter(|v| v.is_some()).count(),
            mask.foreground_count()
        );
        // sample k sits at column 2k
        assert_eq!(co.sample_at(Pixel::new(3, 8)), Some(4));
        // column 2k+1 is equidistant from k and k+1; ties go to k
        assert_eq!(co.sample_at(Pixel::new(3, 9)), Some(4));
        for (k, p) in co.curve_to_pixel.iter().enumerate() {
            assert_eq!(co.sample_at(*p), Some(k));
        }
        let short = RfcProfile::from_values(1.0, vec![1.0; 5]);
        assert!(matches!(
            build_heatmap(&mask, &cl, &short),
            Err(RfcError::InconsistentInputs(_))
        ));
    }
}
