//! Sparse ternary GEMM: `Y = XW + b` with `W` in {-1, 0, +1}.
//!
//! The crate provides the ternary compressed sparse column family of formats
//! ([`Tcsc`] and the encodings in [`formats`]), scalar and 4-lane kernels
//! over them, a dense reference implementation for validation, and a
//! benchmark harness with flop and operational-intensity accounting.
//!
//! Kernels are generic over [`Scalar`]; `f32` is the production element type
//! and the `*F32` aliases below name the common instantiations.

pub mod bench;
pub mod dense;
pub mod error;
pub mod formats;
pub mod instrument;
pub mod io;
pub mod kernels;
pub mod lanes;
pub mod scalar;
pub mod tcsc;

pub use dense::{
    first_mismatch, first_mismatch_within, gen_bias, gen_input, gen_input_real, gen_ternary,
    oracle_gemm, BiasVector, DenseMatrix, Mismatch, SparsityLevel, TernaryDense,
};
pub use error::{Error, Result};
pub use formats::{
    BlockedTcsc, CompressedTcsc, InterleavedBlockedTcsc, InterleavedTcsc, InvertedTcsc,
    SymmetricInterleavedTcsc,
};
pub use kernels::{GemmConfig, PaddedInput, Variant};
pub use scalar::{prelu, Scalar};
pub use tcsc::Tcsc;

pub type DenseMatrixF32 = DenseMatrix<f32>;
pub type DenseMatrixF64 = DenseMatrix<f64>;
pub type BiasVectorF32 = BiasVector<f32>;
pub type BiasVectorF64 = BiasVector<f64>;
pub type PaddedInputF32 = PaddedInput<f32>;
pub type PaddedInputF64 = PaddedInput<f64>;
