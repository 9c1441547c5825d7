use serde::{Deserialize, Serialize};

use super::golden::golden_section;
use super::StatsError;
use crate::hemodynamics::{compute_qfr, FlowEstimate, Geometry1D, HemoParams};
use crate::Scalar;

pub const DEFAULT_KAPPA_RANGE: (f64, f64) = (0.5, 5.0);
const KAPPA_TOL: f64 = 1e-4;

/// Frozen geometry and resting flow of one calibration vessel with its invasive FFR.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct CalibrationCase<T> {
    pub geometry: Geometry1D<T>,
    pub flow: FlowEstimate<T>,
    pub params: HemoParams<T>,
    pub ffr: T,
}

impl<T: Scalar> CalibrationCase<T> {
    pub fn model_qfr(&self, kappa: T) -> T {
        compute_qfr(&self.geometry, &self.flow.with_kappa(kappa), &self.params).qfr
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct KappaCalibration<T> {
    pub kappa: T,
    pub sse: T,
    pub cases: usize,
    pub evaluations: usize,
    pub search_range: (T, T),
}

/// `argmin_κ Σ (QFR(κ) − FFR)²` by golden-section search to 1e-4 in κ.
pub fn calibrate_kappa<T: Scalar>(
    cases: &[CalibrationCase<T>],
    search_range: (T, T),
) -> Result<KappaCalibration<T>, StatsError> {
    if cases.is_empty() {
        return Err(StatsError::EmptyCohort);
    }
    let (lo, hi) = search_range;
    if !(lo > T::zero() && hi > lo && hi.is_finite()) {
        return Err(StatsError::InvalidRange(
            lo.to_f64_lossy(),
            hi.to_f64_lossy(),
        ));
    }
    let objective = |kappa: T| {
        cases.iter().fold(T::zero(), |acc, c| {
            let e = c.model_qfr(kappa) - c.ffr;
            acc + e * e
        })
    };
    let tol = T::lit(KAPPA_TOL);
    let search = golden_section(objective, lo, hi, tol);
    if search.x - lo <= tol || hi - search.x <= tol {
        return Err(StatsError::NoInteriorMinimum {
            kappa: search.x.to_f64_lossy(),
        });
    }
    Ok(KappaCalibration {
        kappa: search.x,
        sse: search.fx,
        cases: cases.len(),
        evaluations: search.evaluations,
        search_range,
    })
}
