//! Op-counting scalar for flop accounting.
//!
//! [`Counted<T>`] wraps a scalar and bumps thread-local counters on every
//! addition, subtraction and multiplication. Running a kernel over `Counted`
//! inputs inside [`count_ops`] therefore measures exactly the floating-point
//! work the kernel performs, with no changes to kernel code.

use std::cell::Cell;
use std::fmt;
use std::ops::{Add, AddAssign, Div, Mul, Neg, Rem, Sub, SubAssign};

use num_traits::{Num, NumCast, One, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::lanes::Portable4;
use crate::scalar::Scalar;

thread_local! {
    static ADDS: Cell<u64> = const { Cell::new(0) };
    static MULTS: Cell<u64> = const { Cell::new(0) };
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct OpCounts {
    /// Additions and subtractions.
    pub adds: u64,
    pub mults: u64,
}

/// Runs `f` with fresh counters and returns its result with the ops it performed
/// on [`Counted`] values.
pub fn count_ops<R>(f: impl FnOnce() -> R) -> (R, OpCounts) {
    ADDS.with(|c| c.set(0));
    MULTS.with(|c| c.set(0));
    let out = f();
    let counts = OpCounts {
        adds: ADDS.with(Cell::get),
        mults: MULTS.with(Cell::get),
    };
    (out, counts)
}

#[inline(always)]
fn bump_add() {
    ADDS.with(|c| c.set(c.get() + 1));
}

#[inline(always)]
fn bump_mul() {
    MULTS.with(|c| c.set(c.get() + 1));
}

#[derive(Clone, Copy, Default, PartialEq, PartialOrd)]
pub struct Counted<T>(pub T);

impl<T: Scalar> Counted<T> {
    pub fn get(self) -> T {
        self.0
    }
}

impl<T: fmt::Debug> fmt::Debug for Counted<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

impl<T: Scalar> Add for Counted<T> {
    type Output = Self;
    #[inline(always)]
    fn add(self, rhs: Self) -> Self {
        bump_add();
        Counted(self.0 + rhs.0)
    }
}

impl<T: Scalar> Sub for Counted<T> {
    type Output = Self;
    #[inline(always)]
    fn sub(self, rhs: Self) -> Self {
        bump_add();
        Counted(self.0 - rhs.0)
    }
}

impl<T: Scalar> Mul for Counted<T> {
    type Output = Self;
    #[inline(always)]
    fn mul(self, rhs: Self) -> Self {
        bump_mul();
        Counted(self.0 * rhs.0)
    }
}

impl<T: Scalar> Div for Counted<T> {
    type Output = Self;
    fn div(self, rhs: Self) -> Self {
        bump_mul();
        Counted(self.0 / rhs.0)
    }
}

impl<T: Scalar> Rem for Counted<T> {
    type Output = Self;
    fn rem(self, rhs: Self) -> Self {
        Counted(self.0 % rhs.0)
    }
}

impl<T: Scalar> Neg for Counted<T> {
    type Output = Self;
    fn neg(self) -> Self {
        Counted(-self.0)
    }
}

impl<T: Scalar> AddAssign for Counted<T> {
    #[inline(always)]
    fn add_assign(&mut self, rhs: Self) {
        *self = *self + rhs;
    }
}

impl<T: Scalar> SubAssign for Counted<T> {
    #[inline(always)]
    fn sub_assign(&mut self, rhs: Self) {
        *self = *self - rhs;
    }
}

impl<T: Scalar> Zero for Counted<T> {
    fn zero() -> Self {
        Counted(T::zero())
    }
    fn is_zero(&self) -> bool {
        self.0.is_zero()
    }
}

impl<T: Scalar> One for Counted<T> {
    fn one() -> Self {
        Counted(T::one())
    }
}

impl<T: Scalar> Num for Counted<T> {
    type FromStrRadixErr = T::FromStrRadixErr;
    fn from_str_radix(s: &str, radix: u32) -> Result<Self, Self::FromStrRadixErr> {
        T::from_str_radix(s, radix).map(Counted)
    }
}

impl<T: Scalar> ToPrimitive for Counted<T> {
    fn to_i64(&self) -> Option<i64> {
        self.0.to_i64()
    }
    fn to_u64(&self) -> Option<u64> {
        self.0.to_u64()
    }
    fn to_f64(&self) -> Option<f64> {
        self.0.to_f64()
    }
}

impl<T: Scalar> NumCast for Counted<T> {
    fn from<N: ToPrimitive>(n: N) -> Option<Self> {
        <T as NumCast>::from(n).map(Counted)
    }
}

impl<T: Scalar> Scalar for Counted<T> {
    const BYTES: usize = T::BYTES;
    type Lanes = Portable4<Counted<T>>;

    fn is_finite(self) -> bool {
        self.0.is_finite()
    }

    fn to_bits_u64(self) -> u64 {
        self.0.to_bits_u64()
    }
}
