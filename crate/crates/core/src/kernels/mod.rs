//! GEMM kernels and the variant/config plumbing that selects between them.

mod scalar;
mod simd;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub use scalar::{
    gemm_base, gemm_blocked, gemm_compressed, gemm_interleaved_blocked, gemm_inverted,
    gemm_unrolled,
};
pub use simd::{
    gemm_horizontal, gemm_horizontal_with, gemm_vectorized_optimal, gemm_vectorized_optimal_with,
    gemm_vertical, gemm_vertical_with, PaddedInput,
};

use crate::dense::{BiasVector, DenseMatrix, TernaryDense};
use crate::error::{Error, Result};
use crate::formats::{
    default_block_size, BlockedTcsc, CompressedTcsc, InterleavedBlockedTcsc, InvertedTcsc,
    SymmetricInterleavedTcsc, DEFAULT_SCALAR_GROUP, DEFAULT_SIMD_GROUP,
};
use crate::scalar::Scalar;
use crate::tcsc::Tcsc;

/// Every kernel the crate provides.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Variant {
    Base,
    Unrolled,
    Blocked,
    InterleavedBlocked,
    Inverted,
    Compressed,
    Vertical,
    Horizontal,
    VectorizedOptimal,
}

impl Variant {
    pub const ALL: [Variant; 9] = [
        Variant::Base,
        Variant::Unrolled,
        Variant::Blocked,
        Variant::InterleavedBlocked,
        Variant::Inverted,
        Variant::Compressed,
        Variant::Vertical,
        Variant::Horizontal,
        Variant::VectorizedOptimal,
    ];

    pub const SCALAR: [Variant; 6] = [
        Variant::Base,
        Variant::Unrolled,
        Variant::Blocked,
        Variant::InterleavedBlocked,
        Variant::Inverted,
        Variant::Compressed,
    ];

    pub const SIMD: [Variant; 3] = [
        Variant::Vertical,
        Variant::Horizontal,
        Variant::VectorizedOptimal,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Variant::Base => "base",
            Variant::Unrolled => "unrolled",
            Variant::Blocked => "blocked",
            Variant::InterleavedBlocked => "interleaved-blocked",
            Variant::Inverted => "inverted",
            Variant::Compressed => "compressed",
            Variant::Vertical => "vertical",
            Variant::Horizontal => "horizontal",
            Variant::VectorizedOptimal => "vectorized-optimal",
        }
    }

    /// 4-lane kernels: require `N % 4 == 0` and fuse PReLU.
    pub fn is_simd(self) -> bool {
        matches!(
            self,
            Variant::Vertical | Variant::Horizontal | Variant::VectorizedOptimal
        )
    }

    /// Variants whose inner loop honours `inner_unroll`.
    pub fn uses_inner_unroll(self) -> bool {
        matches!(self, Variant::Unrolled | Variant::Blocked)
    }

    /// Variants that tile over `outer_rows x outer_cols`.
    pub fn uses_outer_unroll(self) -> bool {
        matches!(
            self,
            Variant::Unrolled | Variant::Blocked | Variant::InterleavedBlocked
        )
    }

    pub fn uses_block_size(self) -> bool {
        matches!(
            self,
            Variant::Blocked | Variant::InterleavedBlocked | Variant::VectorizedOptimal
        )
    }

    pub fn uses_group(self) -> bool {
        matches!(
            self,
            Variant::InterleavedBlocked
                | Variant::Vertical
                | Variant::Horizontal
                | Variant::VectorizedOptimal
        )
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let norm = s.trim().to_ascii_lowercase().replace('_', "-");
        Variant::ALL
            .into_iter()
            .find(|v| v.name() == norm)
            .ok_or_else(|| Error::param(format!("unknown variant '{s}'")))
    }
}

/// Kernel tunables.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GemmConfig {
    /// Independent accumulators in the inner loop.
    pub inner_unroll: usize,
    /// Rows of X processed per outer iteration (1, 2 or 4).
    pub outer_rows: usize,
    /// Output columns processed per outer iteration (1, 2 or 4).
    pub outer_cols: usize,
    /// Row-block size; `None` means `min(K, 4096)`.
    pub block_size: Option<usize>,
    /// Interleave group size; `None` picks 4 for scalar and 2 for 4-lane kernels.
    pub group: Option<usize>,
    /// PReLU slope, applied by the 4-lane kernels only.
    pub alpha: Option<f64>,
}

impl Default for GemmConfig {
    fn default() -> Self {
        GemmConfig {
            inner_unroll: 12,
            outer_rows: 4,
            outer_cols: 4,
            block_size: None,
            group: None,
            alpha: Some(0.25),
        }
    }
}

impl GemmConfig {
    pub fn validate(&self) -> Result<()> {
        if self.inner_unroll == 0 {
            return Err(Error::param("inner unroll factor must be at least 1"));
        }
        for (name, v) in [
            ("outer rows", self.outer_rows),
            ("outer cols", self.outer_cols),
        ] {
            if ![1, 2, 4].contains(&v) {
                return Err(Error::param(format!("{name} must be 1, 2 or 4 (got {v})")));
            }
        }
        if self.block_size == Some(0) {
            return Err(Error::param("block size must be at least 1"));
        }
        if self.group == Some(0) {
            return Err(Error::param("group size must be at least 1"));
        }
        Ok(())
    }

    pub fn block_size_for(&self, k: usize) -> usize {
        self.block_size.unwrap_or_else(|| default_block_size(k))
    }

    pub fn group_for(&self, variant: Variant) -> usize {
        self.group.unwrap_or(if variant.is_simd() {
            DEFAULT_SIMD_GROUP
        } else {
            DEFAULT_SCALAR_GROUP
        })
    }

    /// The slope `variant` actually applies; scalar kernels never fuse PReLU.
    pub fn alpha_for(&self, variant: Variant) -> Option<f64> {
        if variant.is_simd() {
            self.alpha
        } else {
            None
        }
    }
}

/// W encoded in the layout a particular variant consumes.
#[derive(Debug, Clone)]
pub enum SparseOperand {
    Tcsc(Tcsc),
    Blocked(BlockedTcsc),
    InterleavedBlocked(InterleavedBlockedTcsc),
    Inverted(InvertedTcsc),
    Compressed(CompressedTcsc),
    Symmetric(SymmetricInterleavedTcsc),
}

impl SparseOperand {
    pub fn format_bytes(&self) -> usize {
        match self {
            SparseOperand::Tcsc(t) => t.format_bytes(),
            SparseOperand::Blocked(t) => t.format_bytes(),
            SparseOperand::InterleavedBlocked(t) => t.format_bytes(),
            SparseOperand::Inverted(t) => t.format_bytes(),
            SparseOperand::Compressed(t) => t.format_bytes(),
            SparseOperand::Symmetric(t) => t.format_bytes(),
        }
    }
}

/// Builds the sparse layout `variant` runs on.
pub fn prepare(variant: Variant, w: &TernaryDense, cfg: &GemmConfig) -> Result<SparseOperand> {
    cfg.validate()?;
    if variant.is_simd() && !w.cols().is_multiple_of(4) {
        return Err(Error::param(format!(
            "N must be divisible by 4 (got N={})",
            w.cols()
        )));
    }
    let b = cfg.block_size_for(w.rows());
    let g = cfg.group_for(variant);
    Ok(match variant {
        Variant::Base | Variant::Unrolled => SparseOperand::Tcsc(Tcsc::from_dense(w)),
        Variant::Blocked => SparseOperand::Blocked(BlockedTcsc::from_dense(w, b)?),
        Variant::InterleavedBlocked | Variant::VectorizedOptimal => {
            SparseOperand::InterleavedBlocked(InterleavedBlockedTcsc::from_dense(w, b, g)?)
        }
        Variant::Inverted => SparseOperand::Inverted(InvertedTcsc::from_dense(w)?),
        Variant::Compressed => SparseOperand::Compressed(CompressedTcsc::from_dense(w)),
        Variant::Vertical | Variant::Horizontal => {
            SparseOperand::Symmetric(SymmetricInterleavedTcsc::from_dense(w, g)?)
        }
    })
}

/// Dense input in both plain and zero-padded layouts.
#[derive(Debug, Clone)]
pub struct InputOperand<T> {
    pub plain: DenseMatrix<T>,
    pub padded: PaddedInput<T>,
}

impl<T: Scalar> InputOperand<T> {
    pub fn new(x: DenseMatrix<T>) -> Self {
        let padded = PaddedInput::from_dense(&x);
        InputOperand { plain: x, padded }
    }
}

/// Runs `variant` on an operand built by [`prepare`] with the same config.
pub fn execute<T: Scalar>(
    variant: Variant,
    w: &SparseOperand,
    x: &InputOperand<T>,
    bias: &BiasVector<T>,
    cfg: &GemmConfig,
) -> Result<DenseMatrix<T>> {
    let alpha = cfg.alpha_for(variant).map(T::from_f64);
    match (variant, w) {
        (Variant::Base, SparseOperand::Tcsc(t)) => gemm_base(&x.plain, t, bias),
        (Variant::Unrolled, SparseOperand::Tcsc(t)) => gemm_unrolled(&x.plain, t, bias, cfg),
        (Variant::Blocked, SparseOperand::Blocked(t)) => gemm_blocked(&x.plain, t, bias, cfg),
        (Variant::InterleavedBlocked, SparseOperand::InterleavedBlocked(t)) => {
            gemm_interleaved_blocked(&x.plain, t, bias, cfg)
        }
        (Variant::Inverted, SparseOperand::Inverted(t)) => gemm_inverted(&x.plain, t, bias),
        (Variant::Compressed, SparseOperand::Compressed(t)) => gemm_compressed(&x.plain, t, bias),
        (Variant::Vertical, SparseOperand::Symmetric(t)) => {
            gemm_vertical(&x.padded, t, bias, alpha)
        }
        (Variant::Horizontal, SparseOperand::Symmetric(t)) => {
            gemm_horizontal(&x.padded, t, bias, alpha)
        }
        (Variant::VectorizedOptimal, SparseOperand::InterleavedBlocked(t)) => {
            gemm_vectorized_optimal(&x.padded, t, bias, alpha)
        }
        (v, _) => Err(Error::param(format!(
            "operand layout does not match variant {v}"
        ))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn variant_names_round_trip() {
        for v in Variant::ALL {
            assert_eq!(v.name().parse::<Variant>().unwrap(), v);
        }
        assert_eq!(
            "Interleaved_Blocked".parse::<Variant>().unwrap(),
            Variant::InterleavedBlocked
        );
        assert!("fast".parse::<Variant>().is_err());
    }

    #[test]
    fn config_validation() {
        assert!(GemmConfig::default().validate().is_ok());
        assert!(GemmConfig {
            inner_unroll: 0,
            ..Default::default()
        }
        .validate()
        .is_err());
        assert!(GemmConfig {
            outer_rows: 3,
            ..Default::default()
        }
        .validate()
        .is_err());
        assert!(GemmConfig {
            outer_cols: 8,
            ..Default::default()
        }
        .validate()
        .is_err());
        assert!(GemmConfig {
            block_size: Some(0),
            ..Default::default()
        }
        .validate()
        .is_err());
    }

    #[test]
    fn defaults_by_variant() {
        let cfg = GemmConfig::default();
        assert_eq!(cfg.group_for(Variant::InterleavedBlocked), 4);
        assert_eq!(cfg.group_for(Variant::Vertical), 2);
        assert_eq!(cfg.block_size_for(16384), 4096);
        assert_eq!(cfg.alpha_for(Variant::Base), None);
        assert_eq!(cfg.alpha_for(Variant::Horizontal), Some(0.25));
    }

    #[test]
    fn simd_prepare_rejects_ragged_n() {
        let w = TernaryDense::zeros(8, 6).unwrap();
        let err = prepare(Variant::Vertical, &w, &GemmConfig::default()).unwrap_err();
        assert!(err.to_string().contains("N must be divisible by 4"));
    }
}
