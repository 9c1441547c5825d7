//! Contrast-transit flow estimation and the 1D viscous + local-loss pressure model.

mod model;
mod transit;

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::units::mmhg_to_pa;
use crate::Scalar;

pub use model::{compute_qfr, compute_qfr_viscous, discretize, loss_coefficient, split_flow};
pub use transit::{
    estimate_flow, reference_area, ContrastPolarity, DISTAL_REFERENCE_FRACTION, OPACIFICATION_RATIO,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum HemoError {
    #[error("diameter must be positive (sample {index})")]
    NonPositiveDiameter { index: usize },
    #[error("diameter profile is empty")]
    EmptyProfile,
    #[error("area ratio must be positive, got {0}")]
    NonPositiveRatio(f64),
    #[error("no daughter branches to split flow between")]
    EmptyDaughters,
    #[error("daughter radius must be positive, got {0}")]
    NonPositiveRadius(f64),
    #[error("parent flow must be non-negative, got {0}")]
    NegativeFlow(f64),
    #[error("need at least 2 frames, got {0}")]
    TooFewFrames(usize),
    #[error("frame interval must be positive")]
    NonPositiveFrameInterval,
    #[error("frame {index} is {actual:?}, mask is {expected:?}")]
    FrameSizeMismatch {
        index: usize,
        expected: (usize, usize),
        actual: (usize, usize),
    },
    #[error("contrast front never reaches the distal reference point")]
    NoArrival,
    #[error("contrast front regresses by {regress_mm:.2} mm (> 10% of vessel length)")]
    NonMonotoneFront { regress_mm: f64 },
    #[error("proximal and distal arrival times coincide")]
    NonPositiveTransitTime,
}

/// Piecewise-constant segment; SI units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct Segment<T> {
    pub radius: T,
    pub area: T,
    pub length: T,
}

impl<T: Scalar> Segment<T> {
    pub fn new(radius: T, length: T) -> Self {
        Self {
            radius,
            area: T::PI() * radius * radius,
            length,
        }
    }
}

/// Side-branch take-off at the inlet of `segment_index`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct BranchNode<T> {
    pub segment_index: usize,
    pub daughter_radii: Vec<T>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct Geometry1D<T> {
    pub segments: Vec<Segment<T>>,
    pub branch_nodes: Vec<BranchNode<T>>,
}

impl<T: Scalar> Geometry1D<T> {
    pub fn len(&self) -> usize {
        self.segments.len()
    }

    pub fn is_empty(&self) -> bool {
        self.segments.is_empty()
    }

    /// Total length, m.
    pub fn length(&self) -> T {
        self.segments
            .iter()
            .fold(T::zero(), |acc, s| acc + s.length)
    }

    pub fn with_branches(mut self, nodes: Vec<BranchNode<T>>) -> Self {
        self.branch_nodes = nodes;
        self
    }
}

/// Physical constants and the hyperaemic scaling.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct HemoParams<T> {
    /// Blood viscosity, Pa·s.
    pub mu: T,
    /// Blood density, kg/m³.
    pub rho: T,
    pub kappa: T,
    /// Aortic (proximal) pressure, Pa.
    pub p_prox: T,
}

pub const DEFAULT_MU: f64 = 3.5e-3;
pub const DEFAULT_RHO: f64 = 1060.0;
pub const DEFAULT_KAPPA: f64 = 2.0;
pub const DEFAULT_P_PROX_MMHG: f64 = 90.0;

impl<T: Scalar> Default for HemoParams<T> {
    fn default() -> Self {
        Self {
            mu: T::lit(DEFAULT_MU),
            rho: T::lit(DEFAULT_RHO),
            kappa: T::lit(DEFAULT_KAPPA),
            p_prox: mmhg_to_pa(T::lit(DEFAULT_P_PROX_MMHG)),
        }
    }
}

impl<T: Scalar> HemoParams<T> {
    pub fn validate(&self) -> Result<(), String> {
        for (name, v) in [
            ("mu", self.mu),
            ("rho", self.rho),
            ("kappa", self.kappa),
            ("p_prox", self.p_prox),
        ] {
            if !(v > T::zero() && v.is_finite()) {
                return Err(format!("{name} must be positive and finite"));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct TransitEstimate<T> {
    pub t_proximal: T,
    pub t_distal: T,
    pub dt: T,
    /// m
    pub path_length: T,
    /// m/s
    pub v_rest: T,
    /// Smoothed front arclength per frame (m); `None` before contrast arrives.
    pub front_positions: Vec<Option<T>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct FlowEstimate<T> {
    /// m²
    pub a_ref: T,
    /// m³/s
    pub q_rest: T,
    /// m³/s
    pub q_hyp: T,
    pub kappa: T,
}

impl<T: Scalar> FlowEstimate<T> {
    pub fn new(a_ref: T, q_rest: T, kappa: T) -> Self {
        Self {
            a_ref,
            q_rest,
            q_hyp: kappa * q_rest,
            kappa,
        }
    }

    /// Same resting flow under a different hyperaemic factor.
    pub fn with_kappa(&self, kappa: T) -> Self {
        Self::new(self.a_ref, self.q_rest, kappa)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum QualityFlag {
    LimitedAccuracyBranch,
    LowQuality,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct QfrResult<T> {
    /// Per-segment viscous loss, Pa.
    pub dp_visc: Vec<T>,
    /// Per-segment local loss, Pa.
    pub dp_loc: Vec<T>,
    pub dp_total: T,
    pub p_prox: T,
    pub p_dist: T,
    pub qfr: T,
    pub flags: BTreeSet<QualityFlag>,
}
