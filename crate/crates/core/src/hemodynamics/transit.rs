//! Contrast-front tracking along the centreline.
//!
//! Frame 0 is the pre-contrast baseline. In every frame the along-centreline intensity
//! (3×3 in-mask mean, then a 3-point median along the path) is compared with the baseline;
//! a point is opacified once it drops below [`OPACIFICATION_RATIO`] × baseline. The front is
//! the most distal opacified point, refined to the sub-pixel threshold crossing.

use image::GrayImage;
use serde::{Deserialize, Serialize};

use super::{FlowEstimate, HemoError, HemoParams, TransitEstimate};
use crate::geometry::{
    proximal_window, Centerline, DiameterProfile, LumenMask, DEFAULT_PROXIMAL_FRACTION,
};
use crate::units::mm_to_m;
use crate::Scalar;

pub const OPACIFICATION_RATIO: f64 = 0.6;
/// Distal arrival is timed at this fraction of the centreline length.
pub const DISTAL_REFERENCE_FRACTION: f64 = 0.9;
const MAX_REGRESSION_FRACTION: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ContrastPolarity {
    /// Contrast darkens the lumen (standard angiographic display).
    #[default]
    Dark,
    Bright,
}

fn median3(v: &[f64]) -> Vec<f64> {
    let n = v.len();
    (0..n)
        .map(|i| {
            if i == 0 || i + 1 == n {
                return v[i];
            }
            let mut w = [v[i - 1], v[i], v[i + 1]];
            w.sort_by(f64::total_cmp);
            w[1]
        })
        .collect()
}

fn sample_profile(
    frame: &GrayImage,
    mask: &LumenMask,
    centerline: &Centerline,
    polarity: ContrastPolarity,
) -> Vec<f64> {
    let raw: Vec<f64> = centerline
        .points
        .iter()
        .map(|p| {
            let mut sum = 0.0;
            let mut count = 0usize;
            for q in std::iter::once(*p).chain(mask.neighbours(*p)) {
                if mask.contains(q) {
                    let v = frame.get_pixel(q.col as u32, q.row as u32).0[0] as f64;
                    sum += match polarity {
                        ContrastPolarity::Dark => v,
                        ContrastPolarity::Bright => 255.0 - v,
                    };
                    count += 1;
                }
            }
            if count == 0 {
                0.0
            } else {
                sum / count as f64
            }
        })
        .collect();
    median3(&raw)
}

/// Most distal threshold crossing in one frame, mm; `None` when nothing is opacified.
fn front_position(ratio: &[f64], arclength: &[f64]) -> Option<f64> {
    let last = ratio.iter().rposition(|r| *r < OPACIFICATION_RATIO)?;
    if last + 1 == ratio.len() {
        return Some(arclength[last]);
    }
    let (r0, r1) = (ratio[last], ratio[last + 1]);
    let t = if r1 > r0 {
        ((OPACIFICATION_RATIO - r0) / (r1 - r0)).clamp(0.0, 1.0)
    } else {
        0.0
    };
    Some(arclength[last] + t * (arclength[last + 1] - arclength[last]))
}

/// Median of each defined value with its defined neighbours.
fn smooth_fronts(raw: &[Option<f64>]) -> Vec<Option<f64>> {
    (0..raw.len())
        .map(|i| {
            let centre = raw[i]?;
            let prev = if i > 0 { raw[i - 1] } else { None };
            let next = raw.get(i + 1).copied().flatten();
            match (prev, next) {
                (Some(a), Some(b)) => {
                    let mut w = [a, centre, b];
                    w.sort_by(f64::total_cmp);
                    Some(w[1])
                }
                _ => Some(centre),
            }
        })
        .collect()
}

/// Time at which the (non-decreasing) front first reaches `target` mm, interpolating between
/// frames. Before the first opacified frame the front is extrapolated back at the velocity of
/// the first two defined frames, but never earlier than the preceding frame.
fn arrival_time(fronts: &[Option<f64>], target: f64, interval: f64) -> Option<f64> {
    let k = fronts.iter().position(|f| f.is_some_and(|v| v >= target))?;
    let fk = fronts[k]?;
    let tk = k as f64 * interval;
    match k.checked_sub(1).and_then(|j| fronts[j]) {
        Some(prev) if fk > prev => Some(tk - (fk - target) / (fk - prev) * interval),
        Some(_) => Some(tk),
        None => {
            let next = fronts.get(k + 1).copied().flatten();
            match next {
                Some(fn1) if fn1 > fk => {
                    let back = (fk - target) / (fn1 - fk) * interval;
                    Some(tk - back.min(if k > 0 { interval } else { 0.0 }))
                }
                _ => Some(tk),
            }
        }
    }
}

/// Mean lumen area over the proximal window, m².
pub fn reference_area<T: Scalar>(profile: &DiameterProfile<T>) -> T {
    let window = proximal_window(profile.len(), T::lit(DEFAULT_PROXIMAL_FRACTION));
    let quarter_pi = T::PI() * T::lit(0.25);
    profile.samples[..window]
        .iter()
        .map(|d| {
            let dm = mm_to_m(*d);
            quarter_pi * dm * dm
        })
        .fold(T::zero(), |a, b| a + b)
        / T::from_usize_lossy(window)
}

/// Resting velocity from contrast transit, then `Q_rest = v·A_ref` and `Q_hyp = κ·Q_rest`.
pub fn estimate_flow<T: Scalar>(
    frames: &[GrayImage],
    centerline: &Centerline,
    mask: &LumenMask,
    profile: &DiameterProfile<T>,
    frame_interval: T,
    polarity: ContrastPolarity,
    params: &HemoParams<T>,
) -> Result<(TransitEstimate<T>, FlowEstimate<T>), HemoError> {
    if frames.len() < 2 {
        return Err(HemoError::TooFewFrames(frames.len()));
    }
    if !(frame_interval > T::zero()) {
        return Err(HemoError::NonPositiveFrameInterval);
    }
    if profile.is_empty() {
        return Err(HemoError::EmptyProfile);
    }
    for (index, f) in frames.iter().enumerate() {
        let actual = (f.width() as usize, f.height() as usize);
        if actual != (mask.width(), mask.height()) {
            return Err(HemoError::FrameSizeMismatch {
                index,
                expected: (mask.width(), mask.height()),
                actual,
            });
        }
    }
    let interval = frame_interval.to_f64_lossy();
    let length = centerline.length_total;

    let baseline = sample_profile(&frames[0], mask, centerline, polarity);
    let raw: Vec<Option<f64>> = frames
        .iter()
        .map(|frame| {
            let current = sample_profile(frame, mask, centerline, polarity);
            let ratio: Vec<f64> = current
                .iter()
                .zip(&baseline)
                .map(|(c, b)| if *b > 0.0 { c / b } else { 1.0 })
                .collect();
            front_position(&ratio, &centerline.arclength)
        })
        .collect();

    let smoothed = smooth_fronts(&raw);
    let mut running = f64::NEG_INFINITY;
    let mut fronts = Vec::with_capacity(smoothed.len());
    for f in &smoothed {
        match f {
            Some(v) => {
                let regress = running - v;
                if regress > MAX_REGRESSION_FRACTION * length {
                    return Err(HemoError::NonMonotoneFront {
                        regress_mm: regress,
                    });
                }
                running = running.max(*v);
                fronts.push(Some(running));
            }
            None if running.is_finite() => fronts.push(Some(running)),
            None => fronts.push(None),
        }
    }

    let distal = DISTAL_REFERENCE_FRACTION * length;
    let t_distal = arrival_time(&fronts, distal, interval).ok_or(HemoError::NoArrival)?;
    let t_proximal = arrival_time(&fronts, 0.0, interval).ok_or(HemoError::NoArrival)?;
    let dt = t_distal - t_proximal;
    if !(dt > 0.0) {
        return Err(HemoError::NonPositiveTransitTime);
    }

    let path_length = mm_to_m(T::lit(distal));
    let dt_t = T::lit(dt);
    let v_rest = path_length / dt_t;

    let a_ref = reference_area(profile);

    let transit = TransitEstimate {
        t_proximal: T::lit(t_proximal),
        t_distal: T::lit(t_distal),
        dt: dt_t,
        path_length,
        v_rest,
        front_positions: fronts
            .iter()
            .map(|f| f.map(|v| mm_to_m(T::lit(v))))
            .collect(),
    };
    Ok((
        transit,
        FlowEstimate::new(a_ref, v_rest * a_ref, params.kappa),
    ))
}
