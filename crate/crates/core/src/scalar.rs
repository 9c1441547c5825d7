//! Floating-point scalar abstraction shared by the numeric modules.

use std::fmt::Debug;

use num_traits::{Float, FloatConst, FromPrimitive, ToPrimitive};
use serde::de::DeserializeOwned;
use serde::Serialize;

/// Floating point: f32 or f64.
pub trait Scalar:
    Float
    + FloatConst
    + FromPrimitive
    + ToPrimitive
    + Debug
    + Default
    + Send
    + Sync
    + Serialize
    + DeserializeOwned
    + 'static
{
    /// Converts a literal constant. Every `f64` is representable (possibly rounded) in the
    /// supported types, so this never fails.
    #[inline]
    fn lit(v: f64) -> Self {
        Self::from_f64(v).expect("f64 literal representable")
    }

    #[inline]
    fn from_usize_lossy(v: usize) -> Self {
        Self::from_usize(v).expect("usize representable")
    }

    #[inline]
    fn to_f64_lossy(self) -> f64 {
        self.to_f64().expect("float converts to f64")
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}

/// Linear-interpolated percentile (`q` in [0, 100]) of an unsorted slice, matching the
/// usual "linear" definition: rank = q/100·(n−1).
pub fn percentile<T: Scalar>(values: &[T], q: T) -> Option<T> {
    if values.is_empty() {
        return None;
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("no NaN in percentile input"));
    let rank = q / T::lit(100.0) * T::from_usize_lossy(sorted.len() - 1);
    let lo = rank.floor();
    let lo_idx = lo.to_usize().unwrap_or(0).min(sorted.len() - 1);
    let hi_idx = (lo_idx + 1).min(sorted.len() - 1);
    let frac = rank - lo;
    Some(sorted[lo_idx] + (sorted[hi_idx] - sorted[lo_idx]) * frac)
}
