//! The scalar abstraction every kernel is written against.

use std::fmt::Debug;
use std::ops::{AddAssign, Neg, SubAssign};

use num_traits::{Num, NumCast};

use crate::lanes::Lane4;

/// Element type of the dense operands `X`, `Y` and `b`.
///
/// Kernels only ever add, subtract and (for PReLU) multiply values of this
/// type, so anything that behaves like an IEEE float under those operations
/// qualifies. `f32` is the production type; `f64` and the op-counting
/// [`Counted`](crate::instrument::Counted) wrapper are also provided.
pub trait Scalar:
    Num
    + NumCast
    + Copy
    + PartialOrd
    + AddAssign
    + SubAssign
    + Neg<Output = Self>
    + Debug
    + Send
    + Sync
    + 'static
{
    /// Storage size in bytes, used for operational-intensity accounting.
    const BYTES: usize;

    /// 4-lane vector used by the data-parallel kernels.
    type Lanes: Lane4<Self>;

    fn is_finite(self) -> bool;

    /// Bit pattern widened to 64 bits; used for exact comparisons.
    fn to_bits_u64(self) -> u64;

    fn from_i64(v: i64) -> Self {
        <Self as NumCast>::from(v).expect("integer representable in scalar type")
    }

    fn from_f64(v: f64) -> Self {
        <Self as NumCast>::from(v).expect("value representable in scalar type")
    }

    fn as_f64(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl Scalar for f32 {
    const BYTES: usize = 4;
    type Lanes = crate::lanes::NativeF32x4;

    #[inline(always)]
    fn is_finite(self) -> bool {
        f32::is_finite(self)
    }

    fn to_bits_u64(self) -> u64 {
        self.to_bits() as u64
    }
}

impl Scalar for f64 {
    const BYTES: usize = 8;
    type Lanes = crate::lanes::Portable4<f64>;

    #[inline(always)]
    fn is_finite(self) -> bool {
        f64::is_finite(self)
    }

    fn to_bits_u64(self) -> u64 {
        self.to_bits()
    }
}

/// Elementwise parametric ReLU: `v` when positive, `alpha * v` otherwise.
#[inline(always)]
pub fn prelu<T: Scalar>(v: T, alpha: T) -> T {
    if v > T::zero() {
        v
    } else {
        alpha * v
    }
}
