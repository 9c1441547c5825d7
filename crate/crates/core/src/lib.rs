//! Angiography-derived physiology: centreline and diameter profiling, relative flow capacity,
//! a one-dimensional pressure-loss model for QFR, virtual stenting, and validation statistics.
//!
//! Numerical code is generic over [`Scalar`] (`f32` or `f64`); the aliases below fix `f64`.

// `!(x > 0)` is used on purpose so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cases;
pub mod geometry;
pub mod hemodynamics;
pub mod rfc;
pub mod scalar;
pub mod stats;
pub mod stenting;
pub mod units;

pub use scalar::Scalar;

pub type Profile = geometry::DiameterProfile<f64>;
pub type Rfc = rfc::RfcProfile<f64>;
pub type Geometry = hemodynamics::Geometry1D<f64>;
pub type Params = hemodynamics::HemoParams<f64>;
pub type Flow = hemodynamics::FlowEstimate<f64>;
pub type Qfr = hemodynamics::QfrResult<f64>;
pub type Plan = stenting::StentPlan<f64>;
pub type Snapshot = stenting::CaseSnapshot<f64>;
pub type SimResult = stenting::StentSimResult<f64>;
pub type Report = cases::AnalysisReport<f64>;
pub type Analysis = cases::CaseAnalysis<f64>;
pub type Options = cases::PipelineOptions<f64>;
pub type Pair = stats::PairedObservation<f64>;
