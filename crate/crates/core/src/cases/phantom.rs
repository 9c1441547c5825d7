//! Straight synthetic vessels with Gaussian-bump lesions and a contrast front moving at a known
//! velocity. The vessel runs horizontally across the full image width, proximal end at column 0.

use image::{GrayImage, Luma};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::CaseBundle;
use crate::geometry::{LumenMask, DEFAULT_STEP_MM};
use crate::hemodynamics::ContrastPolarity;
use crate::stenting::BranchSite;

const MAX_DIMENSION_PX: usize = 8192;
const DEFAULT_MARGIN_PX: usize = 8;
const BACKGROUND_LEVEL: f64 = 200.0;
const LUMEN_LEVEL: f64 = 180.0;
const CONTRAST_LEVEL: f64 = 60.0;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PhantomError {
    #[error("invalid phantom spec: {0}")]
    InvalidSpec(String),
    #[error("phantom does not fit the image: {0}")]
    GeometryOverflow(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LesionSpec {
    pub centre_mm: f64,
    pub width_mm: f64,
    /// Fractional diameter reduction at the centre, in (0, 1).
    pub depth: f64,
}

impl LesionSpec {
    fn sigma(&self) -> f64 {
        self.width_mm / 4.0
    }
}

fn default_spacing() -> f64 {
    0.2
}

fn default_frame_interval() -> f64 {
    1.0 / 15.0
}

fn default_start_frame() -> usize {
    1
}

fn default_noise() -> f64 {
    2.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhantomSpec {
    #[serde(default)]
    pub id: Option<String>,
    pub length_mm: f64,
    pub ref_diameter_mm: f64,
    #[serde(default)]
    pub lesions: Vec<LesionSpec>,
    /// Zero leaves every frame unopacified.
    pub front_velocity_mm_s: f64,
    pub frames: usize,
    pub seed: u64,
    #[serde(default = "default_spacing")]
    pub spacing_mm: f64,
    #[serde(default = "default_frame_interval")]
    pub frame_interval_s: f64,
    /// Defaults to the vessel plus an 8 px margin on each side.
    #[serde(default)]
    pub height_px: Option<usize>,
    /// First frame with contrast in the vessel; frame 0 is always the baseline.
    #[serde(default = "default_start_frame")]
    pub contrast_start_frame: usize,
    /// Standard deviation of additive Gaussian noise, grey levels.
    #[serde(default = "default_noise")]
    pub noise_sd: f64,
    #[serde(default)]
    pub contrast_polarity: ContrastPolarity,
    #[serde(default)]
    pub branch_nodes: Vec<BranchSite<f64>>,
    #[serde(default)]
    pub kappa_star: Option<f64>,
    #[serde(default)]
    pub reference_ffr: Option<f64>,
    #[serde(default)]
    pub aortic_pressure_mmhg: Option<f64>,
}

impl PhantomSpec {
    pub fn new(
        length_mm: f64,
        ref_diameter_mm: f64,
        front_velocity_mm_s: f64,
        frames: usize,
        seed: u64,
    ) -> Self {
        Self {
            id: None,
            length_mm,
            ref_diameter_mm,
            lesions: Vec::new(),
            front_velocity_mm_s,
            frames,
            seed,
            spacing_mm: default_spacing(),
            frame_interval_s: default_frame_interval(),
            height_px: None,
            contrast_start_frame: default_start_frame(),
            noise_sd: default_noise(),
            contrast_polarity: ContrastPolarity::Dark,
            branch_nodes: Vec::new(),
            kappa_star: None,
            reference_ffr: None,
            aortic_pressure_mmhg: None,
        }
    }

    pub fn with_lesion(mut self, centre_mm: f64, width_mm: f64, depth: f64) -> Self {
        self.lesions.push(LesionSpec {
            centre_mm,
            width_mm,
            depth,
        });
        self
    }

    /// Analytic diameter at arclength `x`. Several lesions combine multiplicatively.
    pub fn diameter_at(&self, x: f64) -> f64 {
        self.lesions.iter().fold(self.ref_diameter_mm, |d, l| {
            let z = (x - l.centre_mm) / l.sigma();
            d * (1.0 - l.depth * (-0.5 * z * z).exp())
        })
    }

    /// Ground-truth front arclength in frame `k`, mm.
    pub fn front_at(&self, k: usize) -> Option<f64> {
        (self.front_velocity_mm_s > 0.0 && k >= self.contrast_start_frame).then(|| {
            self.front_velocity_mm_s
                * (k - self.contrast_start_frame) as f64
                * self.frame_interval_s
        })
    }

    fn validate(&self) -> Result<(), PhantomError> {
        let bad = |m: String| Err(PhantomError::InvalidSpec(m));
        for (name, v) in [
            ("length_mm", self.length_mm),
            ("ref_diameter_mm", self.ref_diameter_mm),
            ("spacing_mm", self.spacing_mm),
            ("frame_interval_s", self.frame_interval_s),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return bad(format!("{name} must be positive"));
            }
        }
        if !(self.front_velocity_mm_s >= 0.0 && self.front_velocity_mm_s.is_finite()) {
            return bad("front_velocity_mm_s must be non-negative".into());
        }
        if !(self.noise_sd >= 0.0 && self.noise_sd.is_finite()) {
            return bad("noise_sd must be non-negative".into());
        }
        if self.frames < 2 {
            return bad("at least two frames are needed".into());
        }
        if self.contrast_start_frame == 0 {
            return bad("contrast_start_frame must leave frame 0 as baseline".into());
        }
        for (i, l) in self.lesions.iter().enumerate() {
            if !(l.depth > 0.0 && l.depth < 1.0) {
                return bad(format!("lesions[{i}].depth must lie in (0, 1)"));
            }
            if !(l.width_mm > 0.0 && l.width_mm.is_finite()) {
                return bad(format!("lesions[{i}].width_mm must be positive"));
            }
            if !(l.centre_mm >= 0.0 && l.centre_mm <= self.length_mm) {
                return Err(PhantomError::GeometryOverflow(format!(
                    "lesions[{i}] centre {} mm lies outside the {} mm vessel",
                    l.centre_mm, self.length_mm
                )));
            }
        }
        Ok(())
    }
}

/// Analytic answers for a generated phantom.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub spec: PhantomSpec,
    /// Rendered midline length, mm.
    pub length_mm: f64,
    pub step_mm: f64,
    /// d(x) at x = k·step, mm.
    pub diameter_mm: Vec<f64>,
    pub min_diameter_mm: f64,
    pub min_position_mm: f64,
    /// Per frame, mm; `None` before contrast enters.
    pub front_schedule_mm: Vec<Option<f64>>,
    pub velocity_mm_s: f64,
    pub kappa_star: Option<f64>,
}

fn analytic_minimum(spec: &PhantomSpec, length: f64) -> (f64, f64) {
    let mut best = (spec.diameter_at(0.0), 0.0);
    let candidates = spec
        .lesions
        .iter()
        .map(|l| l.centre_mm)
        .chain((0..=(length * 100.0).round() as usize).map(|i| i as f64 / 100.0));
    for x in candidates {
        let d = spec.diameter_at(x);
        if d < best.0 {
            best = (d, x);
        }
    }
    best
}

/// Renders `spec` to a bundle. The mask has an odd pixel count across the lumen, the one closest
/// to `d(x)/spacing`, centred on a single row, so `(2·EDT − 1)·spacing` is within one spacing of
/// `d(x)`.
pub fn generate_phantom(spec: &PhantomSpec) -> Result<CaseBundle, PhantomError> {
    spec.validate()?;
    let s = spec.spacing_mm;
    let width = (spec.length_mm / s).round() as usize + 1;
    let vessel_px = (spec.ref_diameter_mm / s).ceil() as usize + 1;
    let height = spec
        .height_px
        .unwrap_or((vessel_px + 2 * DEFAULT_MARGIN_PX) | 1);
    if width > MAX_DIMENSION_PX || height > MAX_DIMENSION_PX {
        return Err(PhantomError::GeometryOverflow(format!(
            "{width}x{height} px exceeds {MAX_DIMENSION_PX} px"
        )));
    }
    if vessel_px + 2 > height {
        return Err(PhantomError::GeometryOverflow(format!(
            "a {} mm vessel needs more than {height} px of image height",
            spec.ref_diameter_mm
        )));
    }
    let centre_row = (height - 1) / 2;
    let length = (width - 1) as f64 * s;

    let half_width: Vec<usize> = (0..width)
        .map(|c| {
            let d_px = spec.diameter_at(c as f64 * s) / s;
            // Largest odd count 2h + 1 not exceeding d/s + 1.
            (d_px / 2.0 + 1e-9).floor().max(0.0) as usize
        })
        .collect();
    let mask = LumenMask::from_fn(width, height, s, |r, c| {
        r.abs_diff(centre_row) <= half_width[c]
    })
    .map_err(|e| PhantomError::InvalidSpec(e.to_string()))?;

    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let noise = Normal::new(0.0, spec.noise_sd).expect("validated noise_sd");
    let front_schedule: Vec<Option<f64>> = (0..spec.frames).map(|k| spec.front_at(k)).collect();
    let frames = front_schedule
        .iter()
        .map(|front| {
            GrayImage::from_fn(width as u32, height as u32, |c, r| {
                let (r, c) = (r as usize, c as usize);
                let mut v = if mask.get(r, c) {
                    let covered =
                        front.map_or(0.0, |f| ((f - (c as f64 - 0.5) * s) / s).clamp(0.0, 1.0));
                    LUMEN_LEVEL + (CONTRAST_LEVEL - LUMEN_LEVEL) * covered
                } else {
                    BACKGROUND_LEVEL
                };
                if spec.noise_sd > 0.0 {
                    v += noise.sample(&mut rng);
                }
                if spec.contrast_polarity == ContrastPolarity::Bright {
                    v = 255.0 - v;
                }
                Luma([v.round().clamp(0.0, 255.0) as u8])
            })
        })
        .collect();

    let step = DEFAULT_STEP_MM;
    let samples = (length / step + 1e-9).floor() as usize + 1;
    let (min_d, min_x) = analytic_minimum(spec, length);
    let truth = GroundTruth {
        spec: spec.clone(),
        length_mm: length,
        step_mm: step,
        diameter_mm: (0..samples)
            .map(|k| spec.diameter_at(k as f64 * step))
            .collect(),
        min_diameter_mm: min_d,
        min_position_mm: min_x,
        front_schedule_mm: front_schedule,
        velocity_mm_s: spec.front_velocity_mm_s,
        kappa_star: spec.kappa_star,
    };
    Ok(CaseBundle {
        id: spec
            .id
            .clone()
            .unwrap_or_else(|| format!("phantom-{}", spec.seed)),
        frames,
        frame_interval: spec.frame_interval_s,
        spacing: s,
        mask,
        contrast_polarity: spec.contrast_polarity,
        branch_nodes: spec.branch_nodes.clone(),
        reference_ffr: spec.reference_ffr,
        aortic_pressure: spec.aortic_pressure_mmhg,
        vessel: None,
        quality: None,
        seed_hint: None,
        reference_override: None,
        ground_truth: Some(truth),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimum_diameter_follows_depth() {
        let spec = PhantomSpec::new(40.0, 3.0, 15.0, 10, 1).with_lesion(20.0, 8.0, 0.5);
        let b = generate_phantom(&spec).unwrap();
        let gt = b.ground_truth.unwrap();
        assert!((gt.min_diameter_mm - 1.5).abs() < 1e-12);
        assert!((gt.min_position_mm - 20.0).abs() < 1e-12);
    }

    #[test]
    fn front_advances_v_dt_per_frame() {
        let spec = PhantomSpec::new(40.0, 3.0, 15.0, 10, 1);
        let gt = generate_phantom(&spec).unwrap().ground_truth.unwrap();
        assert_eq!(gt.front_schedule_mm[0], None);
        for k in 2..10 {
            let step = gt.front_schedule_mm[k].unwrap() - gt.front_schedule_mm[k - 1].unwrap();
            assert!((step - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn same_seed_same_bundle() {
        let spec = PhantomSpec::new(30.0, 3.0, 20.0, 8, 42).with_lesion(12.0, 6.0, 0.4);
        assert_eq!(
            generate_phantom(&spec).unwrap(),
            generate_phantom(&spec).unwrap()
        );
        let mut other = spec.clone();
        other.seed = 43;
        assert_ne!(
            generate_phantom(&spec).unwrap().frames,
            generate_phantom(&other).unwrap().frames
        );
    }

    #[test]
    fn mask_width_within_one_spacing() {
        let spec = PhantomSpec::new(30.0, 3.1, 20.0, 3, 0).with_lesion(15.0, 10.0, 0.37);
        let b = generate_phantom(&spec).unwrap();
        for c in 0..b.mask.width() {
            let count = (0..b.mask.height()).filter(|&r| b.mask.get(r, c)).count() as f64;
            let d = spec.diameter_at(c as f64 * spec.spacing_mm);
            assert!((count * spec.spacing_mm - d).abs() <= spec.spacing_mm + 1e-9);
        }
    }

    #[test]
    fn spec_errors() {
        let bad_depth = PhantomSpec::new(30.0, 3.0, 20.0, 3, 0).with_lesion(15.0, 10.0, 1.0);
        assert!(matches!(
            generate_phantom(&bad_depth),
            Err(PhantomError::InvalidSpec(_))
        ));
        let outside = PhantomSpec::new(30.0, 3.0, 20.0, 3, 0).with_lesion(45.0, 10.0, 0.5);
        assert!(matches!(
            generate_phantom(&outside),
            Err(PhantomError::GeometryOverflow(_))
        ));
        let mut short = PhantomSpec::new(30.0, 3.0, 20.0, 3, 0);
        short.height_px = Some(10);
        assert!(matches!(
            generate_phantom(&short),
            Err(PhantomError::GeometryOverflow(_))
        ));
        let huge = PhantomSpec::new(5000.0, 3.0, 20.0, 3, 0);
        assert!(matches!(
            generate_phantom(&huge),
            Err(PhantomError::GeometryOverflow(_))
        ));
    }
}
