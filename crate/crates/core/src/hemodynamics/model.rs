use std::collections::BTreeSet;

use super::{
    BranchNode, FlowEstimate, Geometry1D, HemoError, HemoParams, QfrResult, QualityFlag, Segment,
};
use crate::geometry::DiameterProfile;
use crate::units::mm_to_m;
use crate::Scalar;

/// One segment per sample interval, radius from the interval's mean diameter. A single-sample
/// profile yields one zero-length-free segment of length `step`.
pub fn discretize<T: Scalar>(profile: &DiameterProfile<T>) -> Result<Geometry1D<T>, HemoError> {
    if profile.is_empty() {
        return Err(HemoError::EmptyProfile);
    }
    if let Some(index) = profile.samples.iter().position(|d| !(*d > T::zero())) {
        return Err(HemoError::NonPositiveDiameter { index });
    }
    let dx = mm_to_m(profile.step);
    let half = T::lit(0.5);
    let segments = if profile.len() == 1 {
        vec![Segment::new(mm_to_m(profile.samples[0]) * half, dx)]
    } else {
        profile
            .samples
            .windows(2)
            .map(|w| {
                let d_mid = (w[0] + w[1]) * half;
                Segment::new(mm_to_m(d_mid) * half, dx)
            })
            .collect()
    };
    Ok(Geometry1D {
        segments,
        branch_nodes: Vec::new(),
    })
}

/// Local loss coefficient for an area change `A_n / A_{n−1}`: Borda–Carnot `(1 − 1/ratio)²`
/// on expansion, `0.5·(1 − ratio)` on contraction.
pub fn loss_coefficient<T: Scalar>(area_ratio: T) -> Result<T, HemoError> {
    if !(area_ratio > T::zero()) {
        return Err(HemoError::NonPositiveRatio(area_ratio.to_f64_lossy()));
    }
    let one = T::one();
    Ok(if area_ratio > one {
        let k = one - one / area_ratio;
        k * k
    } else if area_ratio < one {
        T::lit(0.5) * (one - area_ratio)
    } else {
        T::zero()
    })
}

/// Murray's-law split: `Q_i = Q·r_i³ / Σ r_j³`.
pub fn split_flow<T: Scalar>(q_parent: T, daughter_radii: &[T]) -> Result<Vec<T>, HemoError> {
    if daughter_radii.is_empty() {
        return Err(HemoError::EmptyDaughters);
    }
    if !(q_parent >= T::zero()) {
        return Err(HemoError::NegativeFlow(q_parent.to_f64_lossy()));
    }
    if let Some(r) = daughter_radii.iter().find(|r| !(**r > T::zero())) {
        return Err(HemoError::NonPositiveRadius(r.to_f64_lossy()));
    }
    let cubes: Vec<T> = daughter_radii.iter().map(|r| *r * *r * *r).collect();
    let total = cubes.iter().fold(T::zero(), |a, c| a + *c);
    Ok(cubes.iter().map(|c| q_parent * *c / total).collect())
}

/// Flow continuing along the main path after the take-offs at `node`.
fn main_path_flow<T: Scalar>(q: T, main_radius: T, node: &BranchNode<T>) -> T {
    let mut radii = Vec::with_capacity(node.daughter_radii.len() + 1);
    radii.push(main_radius);
    radii.extend(node.daughter_radii.iter().copied());
    split_flow(q, &radii).map(|s| s[0]).unwrap_or(q)
}

/// Pressure drop along the main path and the resulting QFR.
pub fn compute_qfr<T: Scalar>(
    geom: &Geometry1D<T>,
    flow: &FlowEstimate<T>,
    params: &HemoParams<T>,
) -> QfrResult<T> {
    evaluate(geom, flow.q_hyp, params, true)
}

/// Viscous term only (all `K_n = 0`).
pub fn compute_qfr_viscous<T: Scalar>(
    geom: &Geometry1D<T>,
    flow: &FlowEstimate<T>,
    params: &HemoParams<T>,
) -> QfrResult<T> {
    evaluate(geom, flow.q_hyp, params, false)
}

fn evaluate<T: Scalar>(
    geom: &Geometry1D<T>,
    q_hyp: T,
    params: &HemoParams<T>,
    local_losses: bool,
) -> QfrResult<T> {
    let n = geom.segments.len();
    let mut dp_visc = Vec::with_capacity(n);
    let mut dp_loc = Vec::with_capacity(n);
    let eight_mu_over_pi = T::lit(8.0) * params.mu / T::PI();
    let half_rho = params.rho * T::lit(0.5);
    let mut q = q_hyp;
    let mut dp_total = T::zero();
    for (i, seg) in geom.segments.iter().enumerate() {
        for node in geom.branch_nodes.iter().filter(|b| b.segment_index == i) {
            q = main_path_flow(q, seg.radius, node);
        }
        let r2 = seg.radius * seg.radius;
        let visc = eight_mu_over_pi * q * seg.length / (r2 * r2);
        let loc = if local_losses && i > 0 {
            let k = loss_coefficient(seg.area / geom.segments[i - 1].area).unwrap_or(T::zero());
            let v = q / seg.area;
            k * half_rho * v * v
        } else {
            T::zero()
        };
        dp_total = dp_total + (visc + loc);
        dp_visc.push(visc);
        dp_loc.push(loc);
    }
    let p_dist = params.p_prox - dp_total;
    let mut flags = BTreeSet::new();
    let qfr = if p_dist < T::zero() {
        flags.insert(QualityFlag::LowQuality);
        T::zero()
    } else {
        p_dist / params.p_prox
    };
    QfrResult {
        dp_visc,
        dp_loc,
        dp_total,
        p_prox: params.p_prox,
        p_dist,
        qfr,
        flags,
    }
}
