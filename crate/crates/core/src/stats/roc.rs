//! ROC analysis: Mann–Whitney AUROC with DeLong variance, confusion-table metrics at a fixed
//! QFR cut-off, and the Youden-optimal cut-off.

use serde::{Deserialize, Serialize};

use super::{PairedObservation, StatsError, DEFAULT_CLINICAL_THRESHOLD, Z_95};
use crate::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionCounts {
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    pub fn_: usize,
}

impl ConfusionCounts {
    pub fn total(&self) -> usize {
        self.tp + self.fp + self.tn + self.fn_
    }
}

/// A proportion with its Wilson 95% interval; `None` when the denominator is zero.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct Proportion<T> {
    pub estimate: T,
    pub ci: (T, T),
    pub numerator: usize,
    pub denominator: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct RocReport<T> {
    pub n_positive: usize,
    pub n_negative: usize,
    pub auroc: T,
    pub auroc_se: T,
    pub auroc_ci: (T, T),
    pub clinical_threshold: T,
    pub counts: ConfusionCounts,
    pub sensitivity: Option<Proportion<T>>,
    pub specificity: Option<Proportion<T>>,
    pub ppv: Option<Proportion<T>>,
    pub npv: Option<Proportion<T>>,
    pub accuracy: T,
    pub prevalence: T,
    pub youden_optimal_threshold: T,
    pub youden_j: T,
}

pub fn wilson_interval<T: Scalar>(successes: usize, n: usize) -> Option<(T, T)> {
    if n == 0 {
        return None;
    }
    let z = T::lit(Z_95);
    let nt = T::from_usize_lossy(n);
    let p = T::from_usize_lossy(successes) / nt;
    let z2 = z * z;
    let denom = T::one() + z2 / nt;
    let centre = (p + z2 / (T::lit(2.0) * nt)) / denom;
    let half = z * (p * (T::one() - p) / nt + z2 / (T::lit(4.0) * nt * nt)).sqrt() / denom;
    Some((
        (centre - half).max(T::zero()),
        (centre + half).min(T::one()),
    ))
}

fn proportion<T: Scalar>(num: usize, den: usize) -> Option<Proportion<T>> {
    wilson_interval(num, den).map(|ci| Proportion {
        estimate: T::from_usize_lossy(num) / T::from_usize_lossy(den),
        ci,
        numerator: num,
        denominator: den,
    })
}

/// Mid-ranks (1-based) of `values`.
fn midranks<T: Scalar>(values: &[T]) -> Vec<T> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].partial_cmp(&values[b]).expect("finite scores"));
    let mut ranks = vec![T::zero(); values.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && values[order[j + 1]] == values[order[i]] {
            j += 1;
        }
        let r = T::from_usize_lossy(i + j + 2) * T::lit(0.5);
        for &k in &order[i..=j] {
            ranks[k] = r;
        }
        i = j + 1;
    }
    ranks
}

/// DeLong structural components via mid-ranks: returns (AUC, V10 per positive, V01 per
/// negative).
pub(crate) fn delong_components<T: Scalar>(pos: &[T], neg: &[T]) -> (T, Vec<T>, Vec<T>) {
    let m = pos.len();
    let n = neg.len();
    let mut all = pos.to_vec();
    all.extend_from_slice(neg);
    let r_all = midranks(&all);
    let r_pos = midranks(pos);
    let r_neg = midranks(neg);
    let mt = T::from_usize_lossy(m);
    let nt = T::from_usize_lossy(n);
    let v10: Vec<T> = (0..m).map(|i| (r_all[i] - r_pos[i]) / nt).collect();
    let v01: Vec<T> = (0..n)
        .map(|j| T::one() - (r_all[m + j] - r_neg[j]) / mt)
        .collect();
    let auc = v10.iter().fold(T::zero(), |a, v| a + *v) / mt;
    (auc, v10, v01)
}

fn sample_variance<T: Scalar>(v: &[T], mean: T) -> T {
    if v.len() < 2 {
        return T::zero();
    }
    let ss = v
        .iter()
        .fold(T::zero(), |a, x| a + (*x - mean) * (*x - mean));
    ss / T::from_usize_lossy(v.len() - 1)
}

fn confusion<T: Scalar>(pairs: &[PairedObservation<T>], cut: T) -> ConfusionCounts {
    let mut c = ConfusionCounts {
        tp: 0,
        fp: 0,
        tn: 0,
        fn_: 0,
    };
    for p in pairs {
        match (p.qfr <= cut, p.is_ischaemic()) {
            (true, true) => c.tp += 1,
            (true, false) => c.fp += 1,
            (false, false) => c.tn += 1,
            (false, true) => c.fn_ += 1,
        }
    }
    c
}

/// Positive class is FFR ≤ 0.80, score is `1 − qfr`, and a test call is `qfr ≤ clinical_threshold`.
pub fn roc_analysis<T: Scalar>(
    pairs: &[PairedObservation<T>],
    clinical_threshold: T,
) -> Result<RocReport<T>, StatsError> {
    let pos: Vec<T> = pairs
        .iter()
        .filter(|p| p.is_ischaemic())
        .map(|p| p.score())
        .collect();
    let neg: Vec<T> = pairs
        .iter()
        .filter(|p| !p.is_ischaemic())
        .map(|p| p.score())
        .collect();
    if pos.is_empty() {
        return Err(StatsError::DegenerateLabels("negative"));
    }
    if neg.is_empty() {
        return Err(StatsError::DegenerateLabels("positive"));
    }
    let (auroc, v10, v01) = delong_components(&pos, &neg);
    let var = sample_variance(&v10, auroc) / T::from_usize_lossy(pos.len())
        + sample_variance(&v01, auroc) / T::from_usize_lossy(neg.len());
    let se = var.sqrt();
    let h = T::lit(Z_95) * se;
    let auroc_ci = ((auroc - h).max(T::zero()), (auroc + h).min(T::one()));

    let counts = confusion(pairs, clinical_threshold);
    let n = T::from_usize_lossy(pairs.len());

    let (youden_optimal_threshold, youden_j) = youden(pairs, T::lit(DEFAULT_CLINICAL_THRESHOLD));

    Ok(RocReport {
        n_positive: pos.len(),
        n_negative: neg.len(),
        auroc,
        auroc_se: se,
        auroc_ci,
        clinical_threshold,
        counts,
        sensitivity: proportion(counts.tp, counts.tp + counts.fn_),
        specificity: proportion(counts.tn, counts.tn + counts.fp),
        ppv: proportion(counts.tp, counts.tp + counts.fp),
        npv: proportion(counts.tn, counts.tn + counts.fn_),
        accuracy: T::from_usize_lossy(counts.tp + counts.tn) / n,
        prevalence: T::from_usize_lossy(pos.len()) / n,
        youden_optimal_threshold,
        youden_j,
    })
}

/// Cut-off on QFR maximising sensitivity + specificity − 1 over the observed QFR values;
/// ties go to the cut-off nearest `anchor`, then the lower one.
fn youden<T: Scalar>(pairs: &[PairedObservation<T>], anchor: T) -> (T, T) {
    let mut cuts: Vec<T> = pairs.iter().map(|p| p.qfr).collect();
    cuts.sort_by(|a, b| a.partial_cmp(b).expect("finite qfr"));
    cuts.dedup();
    let eps = T::lit(1e-12);
    let mut best = (cuts[0], T::neg_infinity());
    for cut in cuts {
        let c = confusion(pairs, cut);
        let sens = T::from_usize_lossy(c.tp) / T::from_usize_lossy(c.tp + c.fn_);
        let spec = T::from_usize_lossy(c.tn) / T::from_usize_lossy(c.tn + c.fp);
        let j = sens + spec - T::one();
        let better = j > best.1 + eps
            || ((j - best.1).abs() <= eps && (cut - anchor).abs() < (best.0 - anchor).abs());
        if better {
            best = (cut, j);
        }
    }
    best
}
