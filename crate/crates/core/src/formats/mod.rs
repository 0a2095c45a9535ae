//! Derived sparse encodings of a ternary matrix.
//!
//! Each format is built from a [`TernaryDense`](crate::TernaryDense), is
//! immutable afterwards, and decodes back to exactly the matrix it came from.

mod blocked;
mod compressed;
mod interleaved;
mod inverted;
mod symmetric;

pub use blocked::{default_block_size, BlockedTcsc, DEFAULT_MAX_BLOCK};
pub use compressed::{compress5, decompress5, CompressedTcsc, CODES, DECODE_LUT, TRITS_PER_CODE};
pub use interleaved::{
    interleave_column, ColumnSegments, InterleavedBlockedTcsc, InterleavedTcsc,
    DEFAULT_SCALAR_GROUP, DEFAULT_SIMD_GROUP,
};
pub use inverted::{decode_inverted, encode_inverted, InvertedTcsc};
pub use symmetric::{SymmetricInterleavedTcsc, LANES};
