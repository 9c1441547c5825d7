//! κ calibration and the agreement / diagnostic-performance battery.

mod agreement;
mod calibrate;
mod decision;
mod golden;
mod roc;
mod tables;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::Scalar;

pub use agreement::{agreement_stats, AgreementReport};
pub use calibrate::{calibrate_kappa, CalibrationCase, KappaCalibration, DEFAULT_KAPPA_RANGE};
pub use decision::{
    decision_curve, default_threshold_grid, fit_logistic, net_benefit, treat_all_net_benefit,
    DecisionCurve, LogisticFit, NetBenefitPoint,
};
pub use golden::{golden_section, GoldenSearch};
pub use roc::{roc_analysis, wilson_interval, ConfusionCounts, RocReport};
pub use tables::{
    read_pairs_csv, validation_tables, write_pairs_csv, SubgroupRow, ValidationTables,
};

/// Ischaemia cut-off for invasive FFR; pairs at or below it are positive.
pub const FFR_ISCHAEMIA_THRESHOLD: f64 = 0.80;
pub const DEFAULT_CLINICAL_THRESHOLD: f64 = 0.80;
/// Two-sided 95% standard normal quantile.
pub const Z_95: f64 = 1.959_963_984_540_054;
/// Bland–Altman limits multiplier.
pub const LOA_MULTIPLIER: f64 = 1.96;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum StatsError {
    #[error("need at least {needed} observations, got {got}")]
    InsufficientData { needed: usize, got: usize },
    #[error("zero variance in {0}; correlation is undefined")]
    ZeroVariance(&'static str),
    #[error("labels are all {0}; need both classes")]
    DegenerateLabels(&'static str),
    #[error("calibration cohort is empty")]
    EmptyCohort,
    #[error("least-squares minimum lies on the search boundary (kappa = {kappa})")]
    NoInteriorMinimum { kappa: f64 },
    #[error("invalid search range [{0}, {1}]")]
    InvalidRange(f64, f64),
    #[error("value out of range: {0}")]
    OutOfRange(String),
    #[error("csv: {0}")]
    Csv(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum VesselLabel {
    #[serde(alias = "lad")]
    LAD,
    #[serde(alias = "rca")]
    RCA,
    #[serde(alias = "lcx", alias = "LCX")]
    LCx,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum QualityLabel {
    #[serde(alias = "good")]
    Good,
    #[serde(alias = "suboptimal")]
    Suboptimal,
}

/// One vessel: model QFR against invasive FFR.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct PairedObservation<T> {
    #[serde(default)]
    pub id: Option<String>,
    pub qfr: T,
    pub ffr: T,
    #[serde(default)]
    pub vessel: Option<VesselLabel>,
    #[serde(default)]
    pub quality: Option<QualityLabel>,
}

impl<T: Scalar> PairedObservation<T> {
    pub fn new(qfr: T, ffr: T) -> Self {
        Self {
            id: None,
            qfr,
            ffr,
            vessel: None,
            quality: None,
        }
    }

    pub fn validate(&self) -> Result<(), StatsError> {
        let upper = T::lit(1.2);
        for (name, v) in [("qfr", self.qfr), ("ffr", self.ffr)] {
            if !(v > T::zero() && v <= upper) {
                return Err(StatsError::OutOfRange(format!(
                    "{name} = {} not in (0, 1.2]",
                    v.to_f64_lossy()
                )));
            }
        }
        Ok(())
    }

    /// Reference-standard label: FFR ≤ 0.80.
    pub fn is_ischaemic(&self) -> bool {
        self.ffr <= T::lit(FFR_ISCHAEMIA_THRESHOLD)
    }

    /// Discrimination score, higher ⇒ more ischaemic.
    pub fn score(&self) -> T {
        T::one() - self.qfr
    }
}

pub(crate) fn mean<T: Scalar>(v: impl IntoIterator<Item = T>) -> T {
    let mut n = 0usize;
    let mut s = T::zero();
    for x in v {
        s = s + x;
        n += 1;
    }
    s / T::from_usize_lossy(n.max(1))
}
