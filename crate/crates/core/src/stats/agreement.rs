use serde::{Deserialize, Serialize};

use super::{mean, PairedObservation, StatsError, LOA_MULTIPLIER, Z_95};
use crate::Scalar;

/// Agreement of model QFR with FFR; differences are `qfr − ffr`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct AgreementReport<T> {
    pub n: usize,
    pub r: T,
    /// Fisher-z 95% interval; absent below 3 pairs.
    pub r_ci: Option<(T, T)>,
    pub mae: T,
    pub rmse: T,
    pub bias: T,
    pub sd_diff: T,
    pub loa: (T, T),
    /// OLS of qfr on ffr.
    pub slope: T,
    pub intercept: T,
}

pub fn agreement_stats<T: Scalar>(
    pairs: &[PairedObservation<T>],
) -> Result<AgreementReport<T>, StatsError> {
    let n = pairs.len();
    if n < 2 {
        return Err(StatsError::InsufficientData { needed: 2, got: n });
    }
    let nt = T::from_usize_lossy(n);
    let x_mean = mean(pairs.iter().map(|p| p.ffr));
    let y_mean = mean(pairs.iter().map(|p| p.qfr));
    let (mut sxx, mut syy, mut sxy) = (T::zero(), T::zero(), T::zero());
    for p in pairs {
        let dx = p.ffr - x_mean;
        let dy = p.qfr - y_mean;
        sxx = sxx + dx * dx;
        syy = syy + dy * dy;
        sxy = sxy + dx * dy;
    }
    if sxx == T::zero() || pairs.iter().all(|p| p.ffr == pairs[0].ffr) {
        return Err(StatsError::ZeroVariance("ffr"));
    }
    if syy == T::zero() || pairs.iter().all(|p| p.qfr == pairs[0].qfr) {
        return Err(StatsError::ZeroVariance("qfr"));
    }
    let r = (sxy / (sxx.sqrt() * syy.sqrt()))
        .max(-T::one())
        .min(T::one());
    let r_ci = (n >= 3).then(|| fisher_interval(r, n));

    let diffs: Vec<T> = pairs.iter().map(|p| p.qfr - p.ffr).collect();
    let bias = mean(diffs.iter().copied());
    let mae = mean(diffs.iter().map(|d| d.abs()));
    let rmse = mean(diffs.iter().map(|d| *d * *d)).sqrt();
    let ss = diffs
        .iter()
        .fold(T::zero(), |a, d| a + (*d - bias) * (*d - bias));
    let sd_diff = (ss / (nt - T::one())).sqrt();
    let half = T::lit(LOA_MULTIPLIER) * sd_diff;

    let slope = sxy / sxx;
    let intercept = y_mean - slope * x_mean;
    Ok(AgreementReport {
        n,
        r,
        r_ci,
        mae,
        rmse,
        bias,
        sd_diff,
        loa: (bias - half, bias + half),
        slope,
        intercept,
    })
}

fn fisher_interval<T: Scalar>(r: T, n: usize) -> (T, T) {
    if r.abs() >= T::one() {
        return (r, r);
    }
    let z = ((T::one() + r) / (T::one() - r)).ln() * T::lit(0.5);
    let se = T::one() / T::from_usize_lossy(n - 3).sqrt();
    let h = T::lit(Z_95) * se;
    ((z - h).tanh(), (z + h).tanh())
}
