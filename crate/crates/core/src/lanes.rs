//! Four-lane vectors for the data-parallel kernels.
//!
//! [`Portable4`] is a plain array implementation that works for any
//! [`Scalar`]. [`NativeF32x4`] maps onto 128-bit SSE registers on x86_64 and
//! NEON registers on aarch64, and falls back to `Portable4<f32>` elsewhere.
//! Both must produce bit-identical results: every lane operation is a single
//! IEEE add, subtract or multiply, and the horizontal sum uses the fixed
//! pairwise order `(l0 + l1) + (l2 + l3)`.

use crate::scalar::Scalar;

pub trait Lane4<T: Scalar>: Copy {
    fn splat(v: T) -> Self;
    fn from_array(a: [T; 4]) -> Self;
    fn to_array(self) -> [T; 4];
    fn add(self, rhs: Self) -> Self;
    fn sub(self, rhs: Self) -> Self;
    /// Lanewise PReLU with slope `alpha`.
    fn prelu(self, alpha: T) -> Self;

    #[inline(always)]
    fn hsum(self) -> T {
        let [a, b, c, d] = self.to_array();
        (a + b) + (c + d)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Portable4<T>(pub [T; 4]);

impl<T: Scalar> Lane4<T> for Portable4<T> {
    #[inline(always)]
    fn splat(v: T) -> Self {
        Portable4([v; 4])
    }

    #[inline(always)]
    fn from_array(a: [T; 4]) -> Self {
        Portable4(a)
    }

    #[inline(always)]
    fn to_array(self) -> [T; 4] {
        self.0
    }

    #[inline(always)]
    fn add(self, rhs: Self) -> Self {
        let (a, b) = (self.0, rhs.0);
        Portable4([a[0] + b[0], a[1] + b[1], a[2] + b[2], a[3] + b[3]])
    }

    #[inline(always)]
    fn sub(self, rhs: Self) -> Self {
        let (a, b) = (self.0, rhs.0);
        Portable4([a[0] - b[0], a[1] - b[1], a[2] - b[2], a[3] - b[3]])
    }

    #[inline(always)]
    fn prelu(self, alpha: T) -> Self {
        Portable4(self.0.map(|v| crate::scalar::prelu(v, alpha)))
    }
}

#[cfg(target_arch = "x86_64")]
mod native {
    use super::Lane4;
    use std::arch::x86_64::*;

    /// `f32x4` in an SSE register. SSE2 is part of the x86_64 baseline.
    #[derive(Clone, Copy, Debug)]
    pub struct NativeF32x4(__m128);

    #[allow(unused_unsafe)]
    impl Lane4<f32> for NativeF32x4 {
        #[inline(always)]
        fn splat(v: f32) -> Self {
            unsafe { NativeF32x4(_mm_set1_ps(v)) }
        }

        #[inline(always)]
        fn from_array(a: [f32; 4]) -> Self {
            // SAFETY: `a` holds exactly four contiguous f32 values.
            unsafe { NativeF32x4(_mm_loadu_ps(a.as_ptr())) }
        }

        #[inline(always)]
        fn to_array(self) -> [f32; 4] {
            let mut out = [0.0f32; 4];
            // SAFETY: `out` has room for four f32 values.
            unsafe { _mm_storeu_ps(out.as_mut_ptr(), self.0) };
            out
        }

        #[inline(always)]
        fn add(self, rhs: Self) -> Self {
            unsafe { NativeF32x4(_mm_add_ps(self.0, rhs.0)) }
        }

        #[inline(always)]
        fn sub(self, rhs: Self) -> Self {
            unsafe { NativeF32x4(_mm_sub_ps(self.0, rhs.0)) }
        }

        #[inline(always)]
        fn prelu(self, alpha: f32) -> Self {
            unsafe {
                let positive = _mm_cmpgt_ps(self.0, _mm_setzero_ps());
                let scaled = _mm_mul_ps(self.0, _mm_set1_ps(alpha));
                NativeF32x4(_mm_or_ps(
                    _mm_and_ps(positive, self.0),
                    _mm_andnot_ps(positive, scaled),
                ))
            }
        }
    }
}

#[cfg(target_arch = "aarch64")]
mod native {
    use super::Lane4;
    use std::arch::aarch64::*;

    /// `f32x4` in a NEON register.
    #[derive(Clone, Copy, Debug)]
    pub struct NativeF32x4(float32x4_t);

    #[allow(unused_unsafe)]
    impl Lane4<f32> for NativeF32x4 {
        #[inline(always)]
        fn splat(v: f32) -> Self {
            unsafe { NativeF32x4(vdupq_n_f32(v)) }
        }

        #[inline(always)]
        fn from_array(a: [f32; 4]) -> Self {
            // SAFETY: `a` holds exactly four contiguous f32 values.
            unsafe { NativeF32x4(vld1q_f32(a.as_ptr())) }
        }

        #[inline(always)]
        fn to_array(self) -> [f32; 4] {
            let mut out = [0.0f32; 4];
            // SAFETY: `out` has room for four f32 values.
            unsafe { vst1q_f32(out.as_mut_ptr(), self.0) };
            out
        }

        #[inline(always)]
        fn add(self, rhs: Self) -> Self {
            unsafe { NativeF32x4(vaddq_f32(self.0, rhs.0)) }
        }

        #[inline(always)]
        fn sub(self, rhs: Self) -> Self {
            unsafe { NativeF32x4(vsubq_f32(self.0, rhs.0)) }
        }

        #[inline(always)]
        fn prelu(self, alpha: f32) -> Self {
            unsafe {
                let positive = vcgtq_f32(self.0, vdupq_n_f32(0.0));
                let scaled = vmulq_n_f32(self.0, alpha);
                NativeF32x4(vbslq_f32(positive, self.0, scaled))
            }
        }
    }
}

#[cfg(any(target_arch = "x86_64", target_arch = "aarch64"))]
pub use native::NativeF32x4;

#[cfg(not(any(target_arch = "x86_64", target_arch = "aarch64")))]
pub type NativeF32x4 = Portable4<f32>;

/// Whether [`NativeF32x4`] is backed by hardware registers on this target.
pub const HAS_NATIVE_F32X4: bool = cfg!(any(target_arch = "x86_64", target_arch = "aarch64"));

#[cfg(test)]
mod tests {
    use super::*;

    fn check_same(a: [f32; 4], b: [f32; 4], alpha: f32) {
        let (pa, pb) = (Portable4::from_array(a), Portable4::from_array(b));
        let (na, nb) = (NativeF32x4::from_array(a), NativeF32x4::from_array(b));
        let bits = |v: [f32; 4]| v.map(f32::to_bits);
        assert_eq!(bits(pa.add(pb).to_array()), bits(na.add(nb).to_array()));
        assert_eq!(bits(pa.sub(pb).to_array()), bits(na.sub(nb).to_array()));
        assert_eq!(
            bits(pa.prelu(alpha).to_array()),
            bits(na.prelu(alpha).to_array())
        );
        assert_eq!(pa.hsum().to_bits(), na.hsum().to_bits());
    }

    #[test]
    fn native_matches_portable() {
        check_same([1.0, -2.0, 0.0, 3.5], [0.5, 0.5, -7.0, 1e-3], 0.25);
        check_same([-1.0, -0.0, 1e30, -1e-30], [1.0, 2.0, 3.0, 4.0], 0.5);
        check_same([0.1, 0.2, 0.3, 0.4], [0.7, -0.2, 0.9, 1e7], 0.1);
    }

    #[test]
    fn hsum_is_pairwise() {
        let v = Portable4::from_array([1.0f32, 1e8, -1e8, 1.0]);
        assert_eq!(v.hsum(), (1.0f32 + 1e8) + (-1e8 + 1.0));
    }
}
