//! Decision-curve analysis. The model's probability of ischaemia is a logistic mapping of the
//! score `1 − qfr`, fitted in-sample by Newton–Raphson.

use serde::{Deserialize, Serialize};

use super::{PairedObservation, StatsError};
use crate::Scalar;

pub const PROBABILITY_MAPPING: &str = "logistic(1 - qfr), maximum likelihood on the same pairs";

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct LogisticFit<T> {
    pub intercept: T,
    pub slope: T,
    pub iterations: usize,
}

impl<T: Scalar> LogisticFit<T> {
    pub fn probability(&self, score: T) -> T {
        let z = self.intercept + self.slope * score;
        T::one() / (T::one() + (-z).exp())
    }
}

/// Logistic regression of `labels` on `x`. Under perfect separation the likelihood has no
/// maximum; iteration stops at the cap with a steep but finite, order-preserving fit.
pub fn fit_logistic<T: Scalar>(x: &[T], labels: &[bool]) -> LogisticFit<T> {
    const MAX_ITER: usize = 60;
    let (mut b0, mut b1) = (T::zero(), T::zero());
    let mut iterations = 0;
    for it in 0..MAX_ITER {
        iterations = it + 1;
        let (mut g0, mut g1) = (T::zero(), T::zero());
        let (mut h00, mut h01, mut h11) = (T::zero(), T::zero(), T::zero());
        for (xi, yi) in x.iter().zip(labels) {
            let p = T::one() / (T::one() + (-(b0 + b1 * *xi)).exp());
            let y = if *yi { T::one() } else { T::zero() };
            let w = p * (T::one() - p);
            g0 = g0 + (y - p);
            g1 = g1 + (y - p) * *xi;
            h00 = h00 + w;
            h01 = h01 + w * *xi;
            h11 = h11 + w * *xi * *xi;
        }
        let det = h00 * h11 - h01 * h01;
        if !(det.abs() > T::lit(1e-300)) || !det.is_finite() {
            break;
        }
        let d0 = (h11 * g0 - h01 * g1) / det;
        let d1 = (h00 * g1 - h01 * g0) / det;
        if !(d0.is_finite() && d1.is_finite()) {
            break;
        }
        b0 = b0 + d0;
        b1 = b1 + d1;
        if d0.abs() < T::lit(1e-10) && d1.abs() < T::lit(1e-10) {
            break;
        }
    }
    LogisticFit {
        intercept: b0,
        slope: b1,
        iterations,
    }
}

/// `TP/n − FP/n · pt/(1 − pt)` for calls at probability ≥ `pt`.
pub fn net_benefit<T: Scalar>(labels: &[bool], probabilities: &[T], pt: T) -> T {
    let n = T::from_usize_lossy(labels.len());
    let (mut tp, mut fp) = (0usize, 0usize);
    for (y, p) in labels.iter().zip(probabilities) {
        if *p >= pt {
            if *y {
                tp += 1;
            } else {
                fp += 1;
            }
        }
    }
    T::from_usize_lossy(tp) / n - T::from_usize_lossy(fp) / n * pt / (T::one() - pt)
}

pub fn treat_all_net_benefit<T: Scalar>(prevalence: T, pt: T) -> T {
    prevalence - (T::one() - prevalence) * pt / (T::one() - pt)
}

/// 0.20, 0.21, …, 0.70.
pub fn default_threshold_grid<T: Scalar>() -> Vec<T> {
    (20..=70).map(|i| T::lit(i as f64 / 100.0)).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct NetBenefitPoint<T> {
    pub threshold: T,
    pub model: T,
    pub treat_all: T,
    pub treat_none: T,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct DecisionCurve<T> {
    pub probability_mapping: String,
    pub fit: LogisticFit<T>,
    pub prevalence: T,
    pub points: Vec<NetBenefitPoint<T>>,
}

pub fn decision_curve<T: Scalar>(
    pairs: &[PairedObservation<T>],
    thresholds: &[T],
) -> Result<DecisionCurve<T>, StatsError> {
    let labels: Vec<bool> = pairs.iter().map(|p| p.is_ischaemic()).collect();
    let positives = labels.iter().filter(|l| **l).count();
    if positives == 0 {
        return Err(StatsError::DegenerateLabels("negative"));
    }
    if positives == labels.len() {
        return Err(StatsError::DegenerateLabels("positive"));
    }
    let scores: Vec<T> = pairs.iter().map(|p| p.score()).collect();
    let fit = fit_logistic(&scores, &labels);
    let probs: Vec<T> = scores.iter().map(|s| fit.probability(*s)).collect();
    let prevalence = T::from_usize_lossy(positives) / T::from_usize_lossy(labels.len());
    let points = thresholds
        .iter()
        .map(|&pt| NetBenefitPoint {
            threshold: pt,
            model: net_benefit(&labels, &probs, pt),
            treat_all: treat_all_net_benefit(prevalence, pt),
            treat_none: T::zero(),
        })
        .collect();
    Ok(DecisionCurve {
        probability_mapping: PROBABILITY_MAPPING.to_string(),
        fit,
        prevalence,
        points,
    })
}
