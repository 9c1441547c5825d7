//! Unit conversions. Everything inside the physiology model is SI; mmHg and mm only appear at
//! the serialisation boundaries.

use crate::Scalar;

pub const PA_PER_MMHG: f64 = 133.322;

#[inline]
pub fn mmhg_to_pa<T: Scalar>(mmhg: T) -> T {
    mmhg * T::lit(PA_PER_MMHG)
}

#[inline]
pub fn pa_to_mmhg<T: Scalar>(pa: T) -> T {
    pa / T::lit(PA_PER_MMHG)
}

#[inline]
pub fn mm_to_m<T: Scalar>(mm: T) -> T {
    mm * T::lit(1e-3)
}

#[inline]
pub fn m_to_mm<T: Scalar>(m: T) -> T {
    m * T::lit(1e3)
}
