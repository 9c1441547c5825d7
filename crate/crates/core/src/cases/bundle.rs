use std::fs;
use std::path::{Path, PathBuf};

use image::{GrayImage, ImageFormat, Luma};
use serde::de::DeserializeOwned;
use serde_json::{json, Map, Value};

use super::{CaseError, GroundTruth};
use crate::geometry::{LumenMask, Pixel};
use crate::hemodynamics::ContrastPolarity;
use crate::stats::{QualityLabel, VesselLabel};
use crate::stenting::BranchSite;

pub const MANIFEST_FILE: &str = "manifest.json";
pub const MASK_FILE: &str = "mask.png";
const FRAME_DIR: &str = "frames";

/// One vessel ready for analysis. The mask belongs to frame `mask.frame_index()`.
#[derive(Debug, Clone, PartialEq)]
pub struct CaseBundle {
    pub id: String,
    pub frames: Vec<GrayImage>,
    /// s
    pub frame_interval: f64,
    /// mm/px, isotropic.
    pub spacing: f64,
    pub mask: LumenMask,
    pub contrast_polarity: ContrastPolarity,
    pub branch_nodes: Vec<BranchSite<f64>>,
    pub reference_ffr: Option<f64>,
    /// mmHg
    pub aortic_pressure: Option<f64>,
    pub vessel: Option<VesselLabel>,
    pub quality: Option<QualityLabel>,
    /// Operator-placed point near the proximal end.
    pub seed_hint: Option<Pixel>,
    /// Operator-supplied reference diameter, mm.
    pub reference_override: Option<f64>,
    pub ground_truth: Option<GroundTruth>,
}

impl CaseBundle {
    pub fn validate(&self) -> Result<(), CaseError> {
        if self.id.trim().is_empty() {
            return Err(CaseError::schema("id", "must be a non-empty string"));
        }
        if !(self.frame_interval > 0.0 && self.frame_interval.is_finite()) {
            return Err(CaseError::schema("frame_interval", "must be positive"));
        }
        if !(self.spacing > 0.0 && self.spacing.is_finite()) {
            return Err(CaseError::schema("spacing", "must be positive"));
        }
        if self.mask.spacing() != self.spacing {
            return Err(CaseError::schema(
                "spacing",
                "differs from the mask spacing",
            ));
        }
        if self.frames.is_empty() {
            return Err(CaseError::schema(
                "frames",
                "at least one frame is required",
            ));
        }
        let dims = (self.mask.width() as u32, self.mask.height() as u32);
        for (i, f) in self.frames.iter().enumerate() {
            if f.dimensions() != dims {
                return Err(CaseError::schema(
                    format!("frames[{i}]"),
                    format!(
                        "{}x{} differs from the mask's {}x{}",
                        f.width(),
                        f.height(),
                        dims.0,
                        dims.1
                    ),
                ));
            }
        }
        if self.mask.frame_index() >= self.frames.len() {
            return Err(CaseError::schema("analysis_frame", "beyond the last frame"));
        }
        if let Some(ffr) = self.reference_ffr {
            if !(ffr > 0.0 && ffr <= 1.2) {
                return Err(CaseError::schema("reference_ffr", "must lie in (0, 1.2]"));
            }
        }
        if let Some(p) = self.aortic_pressure {
            if !(p > 0.0 && p.is_finite()) {
                return Err(CaseError::schema(
                    "aortic_pressure_mmhg",
                    "must be positive",
                ));
            }
        }
        if let Some(d) = self.reference_override {
            if !(d > 0.0 && d.is_finite()) {
                return Err(CaseError::schema(
                    "reference_diameter_mm",
                    "must be positive",
                ));
            }
        }
        for (i, b) in self.branch_nodes.iter().enumerate() {
            if !(b.position_mm >= 0.0 && b.daughter_radius_mm > 0.0) {
                return Err(CaseError::schema(
                    format!("branch_nodes[{i}]"),
                    "needs position_mm >= 0 and daughter_radius_mm > 0",
                ));
            }
        }
        Ok(())
    }
}

fn frame_name(i: usize) -> String {
    format!("{FRAME_DIR}/frame_{i:03}.png")
}

fn mask_image(mask: &LumenMask) -> GrayImage {
    GrayImage::from_fn(mask.width() as u32, mask.height() as u32, |x, y| {
        Luma([if mask.get(y as usize, x as usize) {
            255
        } else {
            0
        }])
    })
}

/// Writes `bundle` as `manifest.json`, `mask.png` and `frames/frame_NNN.png` under `dir`.
/// The manifest is written last, so a partially written directory never loads.
pub fn save_case(bundle: &CaseBundle, dir: &Path) -> Result<(), CaseError> {
    bundle.validate()?;
    fs::create_dir_all(dir.join(FRAME_DIR)).map_err(|e| CaseError::io(dir, e))?;
    let mut names = Vec::with_capacity(bundle.frames.len());
    for (i, frame) in bundle.frames.iter().enumerate() {
        let name = frame_name(i);
        let path = dir.join(&name);
        frame
            .save_with_format(&path, ImageFormat::Png)
            .map_err(|e| CaseError::io(&path, e))?;
        names.push(name);
    }
    let mask_path = dir.join(MASK_FILE);
    mask_image(&bundle.mask)
        .save_with_format(&mask_path, ImageFormat::Png)
        .map_err(|e| CaseError::io(&mask_path, e))?;

    let mut m = Map::new();
    m.insert("id".into(), json!(bundle.id));
    m.insert("frame_interval".into(), json!(bundle.frame_interval));
    m.insert("spacing".into(), json!([bundle.spacing, bundle.spacing]));
    m.insert("contrast_polarity".into(), json!(bundle.contrast_polarity));
    m.insert("frames".into(), json!(names));
    m.insert("mask".into(), json!(MASK_FILE));
    m.insert("analysis_frame".into(), json!(bundle.mask.frame_index()));
    m.insert("branch_nodes".into(), json!(bundle.branch_nodes));
    let optional = [
        ("reference_ffr", bundle.reference_ffr.map(|v| json!(v))),
        (
            "aortic_pressure_mmhg",
            bundle.aortic_pressure.map(|v| json!(v)),
        ),
        ("vessel", bundle.vessel.map(|v| json!(v))),
        ("quality", bundle.quality.map(|v| json!(v))),
        ("seed_hint", bundle.seed_hint.map(|v| json!(v))),
        (
            "reference_diameter_mm",
            bundle.reference_override.map(|v| json!(v)),
        ),
        (
            "ground_truth",
            bundle.ground_truth.as_ref().map(|v| json!(v)),
        ),
    ];
    for (key, value) in optional {
        if let Some(v) = value {
            m.insert(key.into(), v);
        }
    }
    let text = serde_json::to_string_pretty(&Value::Object(m)).expect("manifest serialises");
    let tmp = dir.join(".manifest.json.tmp");
    fs::write(&tmp, text).map_err(|e| CaseError::io(&tmp, e))?;
    let manifest = dir.join(MANIFEST_FILE);
    fs::rename(&tmp, &manifest).map_err(|e| CaseError::io(&manifest, e))
}

fn required<'a>(m: &'a Map<String, Value>, field: &str) -> Result<&'a Value, CaseError> {
    m.get(field)
        .filter(|v| !v.is_null())
        .ok_or_else(|| CaseError::schema(field, "required field is missing"))
}

fn parse<T: DeserializeOwned>(field: &str, v: &Value) -> Result<T, CaseError> {
    serde_json::from_value(v.clone()).map_err(|e| CaseError::schema(field, e.to_string()))
}

fn optional<T: DeserializeOwned>(
    m: &Map<String, Value>,
    field: &str,
) -> Result<Option<T>, CaseError> {
    match m.get(field) {
        None | Some(Value::Null) => Ok(None),
        Some(v) => parse(field, v).map(Some),
    }
}

fn positive(field: &str, v: &Value) -> Result<f64, CaseError> {
    let x: f64 = parse(field, v)?;
    if x > 0.0 && x.is_finite() {
        Ok(x)
    } else {
        Err(CaseError::schema(
            field,
            format!("must be positive, got {x}"),
        ))
    }
}

fn spacing(v: &Value) -> Result<f64, CaseError> {
    match v {
        Value::Array(items) if items.len() == 2 => {
            let x = positive("spacing", &items[0])?;
            let y = positive("spacing", &items[1])?;
            if x != y {
                return Err(CaseError::AnisotropicSpacing { x, y });
            }
            Ok(x)
        }
        Value::Number(_) => positive("spacing", v),
        _ => Err(CaseError::schema("spacing", "expected [x, y] in mm/px")),
    }
}

fn relative_file(dir: &Path, field: &str, v: &Value) -> Result<PathBuf, CaseError> {
    let name: String = parse(field, v)?;
    let rel = Path::new(&name);
    if rel.is_absolute()
        || rel
            .components()
            .any(|c| matches!(c, std::path::Component::ParentDir))
    {
        return Err(CaseError::schema(
            field,
            "must be a path inside the case directory",
        ));
    }
    Ok(dir.join(rel))
}

fn read_gray(path: &Path) -> Result<GrayImage, CaseError> {
    let img = image::open(path).map_err(|e| CaseError::io(path, e))?;
    Ok(img.into_luma8())
}

pub fn load_case(dir: &Path) -> Result<CaseBundle, CaseError> {
    let manifest_path = dir.join(MANIFEST_FILE);
    if !manifest_path.is_file() {
        return Err(CaseError::MissingManifest(dir.to_path_buf()));
    }
    let text = fs::read_to_string(&manifest_path).map_err(|e| CaseError::io(&manifest_path, e))?;
    let root: Value =
        serde_json::from_str(&text).map_err(|e| CaseError::schema("manifest", e.to_string()))?;
    let Value::Object(m) = root else {
        return Err(CaseError::schema("manifest", "expected a JSON object"));
    };

    let id: String = parse("id", required(&m, "id")?)?;
    let frame_interval = positive("frame_interval", required(&m, "frame_interval")?)?;
    let spacing = spacing(required(&m, "spacing")?)?;
    let frame_list: Vec<Value> = parse("frames", required(&m, "frames")?)?;
    let mask_path = relative_file(dir, "mask", required(&m, "mask")?)?;
    let contrast_polarity = optional(&m, "contrast_polarity")?.unwrap_or_default();
    let analysis_frame: usize = optional(&m, "analysis_frame")?.unwrap_or(0);

    let mut frames = Vec::with_capacity(frame_list.len());
    for (i, v) in frame_list.iter().enumerate() {
        let field = format!("frames[{i}]");
        frames.push(read_gray(&relative_file(dir, &field, v)?)?);
    }
    let mask_img = read_gray(&mask_path)?;
    let data = mask_img.pixels().map(|p| p.0[0] > 127).collect();
    let mask = LumenMask::new(
        mask_img.width() as usize,
        mask_img.height() as usize,
        data,
        spacing,
        analysis_frame,
    )?;

    let bundle = CaseBundle {
        id,
        frames,
        frame_interval,
        spacing,
        mask,
        contrast_polarity,
        branch_nodes: optional(&m, "branch_nodes")?.unwrap_or_default(),
        reference_ffr: optional(&m, "reference_ffr")?,
        aortic_pressure: optional(&m, "aortic_pressure_mmhg")?,
        vessel: optional(&m, "vessel")?,
        quality: optional(&m, "quality")?,
        seed_hint: optional(&m, "seed_hint")?,
        reference_override: optional(&m, "reference_diameter_mm")?,
        ground_truth: optional(&m, "ground_truth")?,
    };
    bundle.validate()?;
    Ok(bundle)
}

/// One cohort entry: the case directory and its load outcome.
pub type CohortEntry = (PathBuf, Result<CaseBundle, CaseError>);

/// Every immediate subdirectory of `dir` holding a manifest, in name order.
pub fn load_cohort(dir: &Path) -> Result<Vec<CohortEntry>, CaseError> {
    let entries = fs::read_dir(dir).map_err(|e| CaseError::io(dir, e))?;
    let mut dirs: Vec<PathBuf> = entries
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.join(MANIFEST_FILE).is_file())
        .collect();
    dirs.sort();
    Ok(dirs
        .into_iter()
        .map(|d| {
            let case = load_case(&d);
            (d, case)
        })
        .collect())
}
