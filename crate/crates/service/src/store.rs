use std::io::Cursor;
use std::sync::{Arc, RwLock};

use image::{ImageFormat, Rgba, RgbaImage};
use serde::Serialize;
use serde_json::json;

use qfr_core::cases::CaseBundle;
use qfr_core::geometry::Pixel;
use qfr_core::rfc::Heatmap;
use qfr_core::Analysis;

/// A frozen analysed case. Read-only payloads are rendered once at creation, so repeated reads
/// return identical bytes.
#[derive(Debug)]
pub struct Session {
    pub id: String,
    pub version: u64,
    pub case: CaseBundle,
    pub analysis: Analysis,
    pub report_json: Vec<u8>,
    pub rfc_json: Vec<u8>,
    pub coregistration_json: Vec<u8>,
    pub heatmap_png: Vec<u8>,
}

fn to_json<T: Serialize>(v: &T) -> Vec<u8> {
    serde_json::to_vec(v).expect("payload serialises")
}

/// Red at RFC 0 through yellow at 0.5 to green at 1 and above.
fn rfc_colour(v: f64) -> Rgba<u8> {
    let t = v.clamp(0.0, 1.0);
    let (r, g) = if t < 0.5 {
        (255.0, 510.0 * t)
    } else {
        (510.0 * (1.0 - t), 255.0)
    };
    Rgba([r.round() as u8, g.round() as u8, 0, 255])
}

pub fn heatmap_png(map: &Heatmap<f64>) -> Vec<u8> {
    let img = RgbaImage::from_fn(map.width as u32, map.height as u32, |x, y| {
        match map.value(Pixel::new(y as usize, x as usize)) {
            Some(v) => rfc_colour(v),
            None => Rgba([0, 0, 0, 0]),
        }
    });
    let mut out = Cursor::new(Vec::new());
    img.write_to(&mut out, ImageFormat::Png)
        .expect("in-memory PNG");
    out.into_inner()
}

pub fn frame_png(case: &CaseBundle, index: usize) -> Option<Vec<u8>> {
    let frame = case.frames.get(index)?;
    let mut out = Cursor::new(Vec::new());
    frame
        .write_to(&mut out, ImageFormat::Png)
        .expect("in-memory PNG");
    Some(out.into_inner())
}

impl Session {
    fn new(version: u64, case: CaseBundle, analysis: Analysis) -> Self {
        let report = &analysis.report;
        let rfc = json!({
            "step_mm": report.rfc.step,
            "values": report.rfc.values,
            "nadir_index": report.rfc.nadir_index,
            "nadir_value": report.rfc.nadir_value,
            "d_ref_mm": report.profile.d_ref,
            "diameters_mm": report.profile.samples,
            "pattern": report.pattern,
        });
        let coregistration = json!({
            "width": analysis.coregistration.width,
            "height": analysis.coregistration.height,
            "step_mm": report.rfc.step,
            "curve_to_pixel": analysis.coregistration.curve_to_pixel,
            "pixel_to_curve": analysis.coregistration.pixel_to_curve,
        });
        Self {
            id: format!("s{version}"),
            version,
            report_json: to_json(report),
            rfc_json: to_json(&rfc),
            coregistration_json: to_json(&coregistration),
            heatmap_png: heatmap_png(&analysis.heatmap),
            case,
            analysis,
        }
    }
}

/// Append-only; sessions are never modified or removed once stored.
#[derive(Debug, Default)]
pub struct SessionStore {
    sessions: RwLock<Vec<Arc<Session>>>,
}

impl SessionStore {
    pub fn insert(&self, case: CaseBundle, analysis: Analysis) -> Arc<Session> {
        let mut sessions = self.sessions.write().expect("store lock");
        let session = Arc::new(Session::new(sessions.len() as u64 + 1, case, analysis));
        sessions.push(Arc::clone(&session));
        session
    }

    pub fn get(&self, id: &str) -> Option<Arc<Session>> {
        let version: usize = id.strip_prefix('s')?.parse().ok()?;
        let sessions = self.sessions.read().expect("store lock");
        sessions.get(version.checked_sub(1)?).cloned()
    }

    pub fn len(&self) -> usize {
        self.sessions.read().expect("store lock").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}
