//! Scalar kernels. Every kernel adds or subtracts X entries selected by the
//! sparse structure; the only other flop is the bias add.

use std::ops::Range;

use crate::dense::{check_dims, BiasVector, DenseMatrix};
use crate::error::{Error, Result};
use crate::formats::decode_inverted;
use crate::formats::{
    BlockedTcsc, ColumnSegments, CompressedTcsc, InterleavedBlockedTcsc, InvertedTcsc, CODES,
    DECODE_LUT, TRITS_PER_CODE,
};
use crate::scalar::Scalar;
use crate::tcsc::Tcsc;

use super::GemmConfig;

/// Straightforward TCSC kernel: one accumulator per output, positives then
/// negatives, bias added last.
pub fn gemm_base<T: Scalar>(
    x: &DenseMatrix<T>,
    t: &Tcsc,
    bias: &BiasVector<T>,
) -> Result<DenseMatrix<T>> {
    check_dims(x, t.k(), t.n(), bias)?;
    let (m, n) = (x.rows(), t.n());
    let mut y = Vec::with_capacity(m * n);
    for row in 0..m {
        let xr = x.row(row);
        for (col, &b) in bias.as_slice().iter().enumerate() {
            let mut acc = T::zero();
            for &r in t.pos_rows(col) {
                acc += xr[r as usize];
            }
            for &r in t.neg_rows(col) {
                acc -= xr[r as usize];
            }
            y.push(acc + b);
        }
    }
    Ok(DenseMatrix::from_raw(m, n, y))
}

/// Accumulates `MR` rows of X at the positions in `idx` into `UF` rotating
/// accumulators per row.
#[inline(always)]
fn accumulate<T: Scalar, const UF: usize, const MR: usize, const NEG: bool>(
    rows: &[&[T]; MR],
    idx: &[u32],
    acc: &mut [[T; UF]; MR],
) {
    let mut chunks = idx.chunks_exact(UF);
    for chunk in &mut chunks {
        for u in 0..UF {
            let i = chunk[u] as usize;
            for r in 0..MR {
                if NEG {
                    acc[r][u] -= rows[r][i];
                } else {
                    acc[r][u] += rows[r][i];
                }
            }
        }
    }
    for (u, &i) in chunks.remainder().iter().enumerate() {
        for r in 0..MR {
            if NEG {
                acc[r][u] -= rows[r][i as usize];
            } else {
                acc[r][u] += rows[r][i as usize];
            }
        }
    }
}

#[inline(always)]
fn reduce<T: Scalar>(acc: &[T]) -> T {
    acc[1..].iter().fold(acc[0], |s, &v| s + v)
}

/// Partial dot products of one sparse column with `MR` rows of X.
trait ColumnDot<T: Scalar> {
    fn dot<const MR: usize>(&self, rows: &[&[T]; MR], col: usize) -> [T; MR];
}

struct TcscDot<'a, const UF: usize>(&'a Tcsc);

impl<T: Scalar, const UF: usize> ColumnDot<T> for TcscDot<'_, UF> {
    #[inline(always)]
    fn dot<const MR: usize>(&self, rows: &[&[T]; MR], col: usize) -> [T; MR] {
        let mut acc = [[T::zero(); UF]; MR];
        accumulate::<T, UF, MR, false>(rows, self.0.pos_rows(col), &mut acc);
        accumulate::<T, UF, MR, true>(rows, self.0.neg_rows(col), &mut acc);
        acc.map(|a| reduce(&a))
    }
}

/// Unroll factors without a specialised instantiation.
struct TcscDotDyn<'a>(&'a Tcsc, usize);

impl<T: Scalar> ColumnDot<T> for TcscDotDyn<'_> {
    fn dot<const MR: usize>(&self, rows: &[&[T]; MR], col: usize) -> [T; MR] {
        let uf = self.1;
        std::array::from_fn(|r| {
            let mut acc = vec![T::zero(); uf];
            for (i, &k) in self.0.pos_rows(col).iter().enumerate() {
                acc[i % uf] += rows[r][k as usize];
            }
            for (i, &k) in self.0.neg_rows(col).iter().enumerate() {
                acc[i % uf] -= rows[r][k as usize];
            }
            reduce(&acc)
        })
    }
}

/// Interleaved runs of `G` per sign, one accumulator per run position.
struct InterleavedDot<'a, const G: usize>(&'a InterleavedBlockedTcsc, usize);

#[inline(always)]
fn interleaved_accumulate<T: Scalar, const G: usize, const MR: usize>(
    rows: &[&[T]; MR],
    seg: ColumnSegments<'_>,
) -> [T; MR] {
    let mut acc = [[T::zero(); G]; MR];
    for chunk in seg.interleaved.chunks_exact(2 * G) {
        for j in 0..G {
            let i = chunk[j] as usize;
            for r in 0..MR {
                acc[r][j] += rows[r][i];
            }
        }
        for j in 0..G {
            let i = chunk[G + j] as usize;
            for r in 0..MR {
                acc[r][j] -= rows[r][i];
            }
        }
    }
    accumulate::<T, G, MR, false>(rows, seg.pos, &mut acc);
    accumulate::<T, G, MR, true>(rows, seg.neg, &mut acc);
    acc.map(|a| reduce(&a))
}

impl<T: Scalar, const G: usize> ColumnDot<T> for InterleavedDot<'_, G> {
    #[inline(always)]
    fn dot<const MR: usize>(&self, rows: &[&[T]; MR], col: usize) -> [T; MR] {
        interleaved_accumulate::<T, G, MR>(rows, self.0.column(self.1, col))
    }
}

/// Scalar dot over one interleaved column for a single row, any group size.
pub(super) fn interleaved_dot_row<T: Scalar>(
    row: &[T],
    seg: ColumnSegments<'_>,
    group: usize,
) -> T {
    let mut acc = T::zero();
    for (i, &k) in seg.interleaved.iter().enumerate() {
        if (i / group).is_multiple_of(2) {
            acc += row[k as usize];
        } else {
            acc -= row[k as usize];
        }
    }
    for &k in seg.pos {
        acc += row[k as usize];
    }
    for &k in seg.neg {
        acc -= row[k as usize];
    }
    acc
}

struct InterleavedDotDyn<'a>(&'a InterleavedBlockedTcsc, usize);

impl<T: Scalar> ColumnDot<T> for InterleavedDotDyn<'_> {
    fn dot<const MR: usize>(&self, rows: &[&[T]; MR], col: usize) -> [T; MR] {
        let seg = self.0.column(self.1, col);
        std::array::from_fn(|r| interleaved_dot_row(rows[r], seg, self.0.group()))
    }
}

/// `y[m][n] += dot(m, n)` over `rows`, in tiles of `MR` rows by `nr` columns,
/// with single-row cleanup for the leftover rows.
fn sweep<T: Scalar, const MR: usize, D: ColumnDot<T>>(
    x: &DenseMatrix<T>,
    n: usize,
    nr: usize,
    rows: Range<usize>,
    y: &mut [T],
    dot: &D,
) {
    let mut m0 = rows.start;
    while m0 + MR <= rows.end {
        let xr: [&[T]; MR] = std::array::from_fn(|r| x.row(m0 + r));
        for c0 in (0..n).step_by(nr) {
            for col in c0..(c0 + nr).min(n) {
                let sums = dot.dot(&xr, col);
                for (r, s) in sums.into_iter().enumerate() {
                    let slot = &mut y[(m0 + r) * n + col];
                    *slot += s;
                }
            }
        }
        m0 += MR;
    }
    if m0 < rows.end {
        sweep::<T, 1, D>(x, n, nr, m0..rows.end, y, dot);
    }
}

fn sweep_rows<T: Scalar, D: ColumnDot<T>>(
    x: &DenseMatrix<T>,
    n: usize,
    cfg: &GemmConfig,
    y: &mut [T],
    dot: &D,
) {
    let rows = 0..x.rows();
    match cfg.outer_rows {
        4 => sweep::<T, 4, D>(x, n, cfg.outer_cols, rows, y, dot),
        2 => sweep::<T, 2, D>(x, n, cfg.outer_cols, rows, y, dot),
        _ => sweep::<T, 1, D>(x, n, cfg.outer_cols, rows, y, dot),
    }
}

/// Adds `X * t` into `y` with the unroll settings of `cfg`.
fn tcsc_accumulate<T: Scalar>(x: &DenseMatrix<T>, t: &Tcsc, cfg: &GemmConfig, y: &mut [T]) {
    let n = t.n();
    match cfg.inner_unroll {
        1 => sweep_rows(x, n, cfg, y, &TcscDot::<1>(t)),
        2 => sweep_rows(x, n, cfg, y, &TcscDot::<2>(t)),
        4 => sweep_rows(x, n, cfg, y, &TcscDot::<4>(t)),
        8 => sweep_rows(x, n, cfg, y, &TcscDot::<8>(t)),
        12 => sweep_rows(x, n, cfg, y, &TcscDot::<12>(t)),
        16 => sweep_rows(x, n, cfg, y, &TcscDot::<16>(t)),
        uf => sweep_rows(x, n, cfg, y, &TcscDotDyn(t, uf)),
    }
}

/// TCSC kernel with `inner_unroll` independent accumulators and an
/// `outer_rows x outer_cols` output tile. Unroll factors 1, 2, 4, 8, 12 and
/// 16 are specialised; others take a generic path.
pub fn gemm_unrolled<T: Scalar>(
    x: &DenseMatrix<T>,
    t: &Tcsc,
    bias: &BiasVector<T>,
    cfg: &GemmConfig,
) -> Result<DenseMatrix<T>> {
    cfg.validate()?;
    check_dims(x, t.k(), t.n(), bias)?;
    let mut y = DenseMatrix::broadcast_rows(x.rows(), bias);
    tcsc_accumulate(x, t, cfg, y.as_mut_slice());
    Ok(y)
}

/// Row-blocked TCSC: Y starts at the bias and collects one partial sum per
/// block, so each block only touches `block_size` entries of every X row.
pub fn gemm_blocked<T: Scalar>(
    x: &DenseMatrix<T>,
    t: &BlockedTcsc,
    bias: &BiasVector<T>,
    cfg: &GemmConfig,
) -> Result<DenseMatrix<T>> {
    cfg.validate()?;
    check_dims(x, t.k(), t.n(), bias)?;
    let mut y = DenseMatrix::broadcast_rows(x.rows(), bias);
    for block in t.blocks() {
        tcsc_accumulate(x, block, cfg, y.as_mut_slice());
    }
    Ok(y)
}

/// Blocked and interleaved: per (block, column) the interleaved runs are
/// consumed first, then the leftover positives, then the leftover negatives.
/// Group sizes 1, 2, 4 and 8 are specialised.
pub fn gemm_interleaved_blocked<T: Scalar>(
    x: &DenseMatrix<T>,
    t: &InterleavedBlockedTcsc,
    bias: &BiasVector<T>,
    cfg: &GemmConfig,
) -> Result<DenseMatrix<T>> {
    cfg.validate()?;
    check_dims(x, t.k(), t.n(), bias)?;
    let n = t.n();
    let mut y = DenseMatrix::broadcast_rows(x.rows(), bias);
    let out = y.as_mut_slice();
    for b in 0..t.num_blocks() {
        match t.group() {
            1 => sweep_rows(x, n, cfg, out, &InterleavedDot::<1>(t, b)),
            2 => sweep_rows(x, n, cfg, out, &InterleavedDot::<2>(t, b)),
            4 => sweep_rows(x, n, cfg, out, &InterleavedDot::<4>(t, b)),
            8 => sweep_rows(x, n, cfg, out, &InterleavedDot::<8>(t, b)),
            _ => sweep_rows(x, n, cfg, out, &InterleavedDotDyn(t, b)),
        }
    }
    Ok(y)
}

/// Single merged loop per column; the sign comes from the index's sign bit.
pub fn gemm_inverted<T: Scalar>(
    x: &DenseMatrix<T>,
    t: &InvertedTcsc,
    bias: &BiasVector<T>,
) -> Result<DenseMatrix<T>> {
    check_dims(x, t.k(), t.n(), bias)?;
    let (m, n) = (x.rows(), t.n());
    let mut y = Vec::with_capacity(m * n);
    for row in 0..m {
        let xr = x.row(row);
        for (col, &b) in bias.as_slice().iter().enumerate() {
            let mut acc = T::zero();
            for &v in t.column(col) {
                let (r, sign) = decode_inverted(v);
                if sign > 0 {
                    acc += xr[r as usize];
                } else {
                    acc -= xr[r as usize];
                }
            }
            y.push(acc + b);
        }
    }
    Ok(DenseMatrix::from_raw(m, n, y))
}

/// Rejects codes the decode table cannot map and nonzero padding rows.
fn check_codes(t: &CompressedTcsc) -> Result<()> {
    if let Some(&bad) = t.codes().iter().find(|&&c| c as usize >= CODES) {
        return Err(Error::InvalidCode(bad));
    }
    let tail = t.k() % TRITS_PER_CODE;
    if tail != 0 {
        for col in 0..t.n() {
            let last = *t
                .column(col)
                .last()
                .expect("K >= 1 means at least one code");
            if DECODE_LUT[last as usize][tail..].iter().any(|&v| v != 0) {
                return Err(Error::corrupt(format!("nonzero padding in column {col}")));
            }
        }
    }
    Ok(())
}

/// Base-3 packed columns decoded through the 243-entry table; zero entries
/// are skipped.
pub fn gemm_compressed<T: Scalar>(
    x: &DenseMatrix<T>,
    t: &CompressedTcsc,
    bias: &BiasVector<T>,
) -> Result<DenseMatrix<T>> {
    check_dims(x, t.k(), t.n(), bias)?;
    check_codes(t)?;
    let (m, n) = (x.rows(), t.n());
    let mut y = Vec::with_capacity(m * n);
    for row in 0..m {
        let xr = x.row(row);
        for (col, &b) in bias.as_slice().iter().enumerate() {
            let mut acc = T::zero();
            for (chunk, &code) in t.column(col).iter().enumerate() {
                let base = chunk * TRITS_PER_CODE;
                for (i, &v) in DECODE_LUT[code as usize].iter().enumerate() {
                    match v {
                        1 => acc += xr[base + i],
                        -1 => acc -= xr[base + i],
                        _ => {}
                    }
                }
            }
            y.push(acc + b);
        }
    }
    Ok(DenseMatrix::from_raw(m, n, y))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dense::{
        gen_bias, gen_input, gen_ternary, oracle_gemm, SparsityLevel, TernaryDense,
    };
    use crate::formats::{default_block_size, InterleavedBlockedTcsc};
    use crate::instrument::{count_ops, Counted};

    fn worked() -> (DenseMatrix<f32>, TernaryDense, BiasVector<f32>) {
        (
            DenseMatrix::from_rows(&[[1.0f32, 2.0, 3.0, 4.0]]).unwrap(),
            TernaryDense::from_columns(&[vec![1, 0, -1, 1], vec![0, -1, 0, 0]]).unwrap(),
            BiasVector::new(vec![10.0, 20.0]).unwrap(),
        )
    }

    fn all_kernels(
        x: &DenseMatrix<f32>,
        w: &TernaryDense,
        b: &BiasVector<f32>,
        cfg: &GemmConfig,
    ) -> Vec<DenseMatrix<f32>> {
        let t = Tcsc::from_dense(w);
        let bs = cfg.block_size_for(w.rows());
        vec![
            gemm_base(x, &t, b).unwrap(),
            gemm_unrolled(x, &t, b, cfg).unwrap(),
            gemm_blocked(x, &BlockedTcsc::from_dense(w, bs).unwrap(), b, cfg).unwrap(),
            gemm_interleaved_blocked(
                x,
                &InterleavedBlockedTcsc::from_dense(w, bs, cfg.group.unwrap_or(4)).unwrap(),
                b,
                cfg,
            )
            .unwrap(),
            gemm_inverted(x, &InvertedTcsc::from_dense(w).unwrap(), b).unwrap(),
            gemm_compressed(x, &CompressedTcsc::from_dense(w), b).unwrap(),
        ]
    }

    #[test]
    fn worked_example_every_kernel() {
        let (x, w, b) = worked();
        for cfg in [
            GemmConfig::default(),
            GemmConfig {
                inner_unroll: 1,
                outer_rows: 1,
                outer_cols: 1,
                block_size: Some(2),
                group: Some(1),
                alpha: None,
            },
        ] {
            for y in all_kernels(&x, &w, &b, &cfg) {
                assert_eq!(y.as_slice(), &[12.0, 18.0]);
            }
        }
    }

    #[test]
    fn zero_w_gives_bias_rows() {
        let w = TernaryDense::zeros(7, 3).unwrap();
        let x: DenseMatrix<f32> = gen_input(5, 7, 1, 9).unwrap();
        let b: BiasVector<f32> = gen_bias(3, 1, 9).unwrap();
        for y in all_kernels(&x, &w, &b, &GemmConfig::default()) {
            assert_eq!(y, DenseMatrix::broadcast_rows(5, &b));
        }
    }

    #[test]
    fn cleanup_paths_match_oracle() {
        // M=5 with MR=4, nnz not a multiple of UF, K not a multiple of 5 or B.
        let w = gen_ternary(53, 9, SparsityLevel::QUARTER, 4).unwrap();
        let x: DenseMatrix<f32> = gen_input(5, 53, 4, 50).unwrap();
        let b: BiasVector<f32> = gen_bias(9, 4, 50).unwrap();
        let expect = oracle_gemm(&x, &w, &b, None).unwrap();
        for uf in [1, 2, 3, 4, 5, 8, 12, 16, 17] {
            for mr in [1, 2, 4] {
                for nr in [1, 2, 4] {
                    for g in [1, 2, 3, 4, 8] {
                        let cfg = GemmConfig {
                            inner_unroll: uf,
                            outer_rows: mr,
                            outer_cols: nr,
                            block_size: Some(16),
                            group: Some(g),
                            alpha: None,
                        };
                        for y in all_kernels(&x, &w, &b, &cfg) {
                            assert_eq!(y, expect, "uf={uf} mr={mr} nr={nr} g={g}");
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn column_without_negatives_has_empty_interleaved_phase() {
        let w = TernaryDense::from_columns(&[vec![1, 1, 0, 1, 1, 0]]).unwrap();
        let t = InterleavedBlockedTcsc::from_dense(&w, 6, 2).unwrap();
        assert!(t.column(0, 0).interleaved.is_empty());
        let x: DenseMatrix<f32> = gen_input(3, 6, 2, 10).unwrap();
        let b = BiasVector::new(vec![1.0]).unwrap();
        let y = gemm_interleaved_blocked(&x, &t, &b, &GemmConfig::default()).unwrap();
        assert_eq!(y, oracle_gemm(&x, &w, &b, None).unwrap());
    }

    #[test]
    fn all_negative_column_inverted() {
        let w = TernaryDense::from_columns(&[vec![-1, -1, -1, 0, -1]]).unwrap();
        let x: DenseMatrix<f32> = gen_input(2, 5, 3, 10).unwrap();
        let b = BiasVector::new(vec![0.5]).unwrap();
        let y = gemm_inverted(&x, &InvertedTcsc::from_dense(&w).unwrap(), &b).unwrap();
        assert_eq!(y, oracle_gemm(&x, &w, &b, None).unwrap());
    }

    #[test]
    fn blocked_with_one_block_equals_unrolled() {
        let w = gen_ternary(300, 12, SparsityLevel::HALF, 6).unwrap();
        let x: DenseMatrix<f32> = crate::dense::gen_input_real(6, 300, 6).unwrap();
        let b: BiasVector<f32> = gen_bias(12, 6, 3).unwrap();
        let cfg = GemmConfig::default();
        let unrolled = gemm_unrolled(&x, &Tcsc::from_dense(&w), &b, &cfg).unwrap();
        let blocked =
            gemm_blocked(&x, &BlockedTcsc::from_dense(&w, 512).unwrap(), &b, &cfg).unwrap();
        assert_eq!(crate::dense::first_mismatch(&unrolled, &blocked), None);
        let oracle = oracle_gemm(&x, &w, &b, None).unwrap();
        assert_eq!(
            crate::dense::first_mismatch_within(&oracle, &unrolled, 1e-5),
            None
        );
    }

    #[test]
    fn large_k_blocked_matches_oracle() {
        let k = 16384;
        let w = gen_ternary(k, 4, SparsityLevel::EIGHTH, 12).unwrap();
        let x: DenseMatrix<f32> = gen_input(3, k, 12, 8).unwrap();
        let b: BiasVector<f32> = gen_bias(4, 12, 8).unwrap();
        let bt = BlockedTcsc::from_dense(&w, default_block_size(k)).unwrap();
        assert_eq!(bt.blocks().len(), 4);
        let y = gemm_blocked(&x, &bt, &b, &GemmConfig::default()).unwrap();
        assert_eq!(y, oracle_gemm(&x, &w, &b, None).unwrap());
    }

    #[test]
    fn dimension_mismatch_is_rejected() {
        let (_, w, b) = worked();
        let x: DenseMatrix<f32> = DenseMatrix::zeros(1, 5);
        let t = Tcsc::from_dense(&w);
        assert!(matches!(gemm_base(&x, &t, &b), Err(Error::Dimension(_))));
        assert!(gemm_unrolled(&x, &t, &b, &GemmConfig::default()).is_err());
        assert!(gemm_inverted(&x, &InvertedTcsc::from_dense(&w).unwrap(), &b).is_err());
    }

    #[test]
    fn invalid_code_is_corruption() {
        let t = CompressedTcsc::from_parts_unchecked(5, 1, vec![250]).unwrap();
        let x: DenseMatrix<f32> = DenseMatrix::zeros(1, 5);
        let b = BiasVector::zeros(1);
        assert!(matches!(
            gemm_compressed(&x, &t, &b),
            Err(Error::InvalidCode(250))
        ));
        let t = CompressedTcsc::from_parts_unchecked(3, 1, vec![242]).unwrap();
        let x: DenseMatrix<f32> = DenseMatrix::zeros(1, 3);
        assert!(matches!(
            gemm_compressed(&x, &t, &b),
            Err(Error::Corrupt(_))
        ));
    }

    #[test]
    fn base_flop_count_is_exact() {
        let (m, k, n) = (3, 40, 5);
        let w = gen_ternary(k, n, SparsityLevel::QUARTER, 2).unwrap();
        let x: DenseMatrix<Counted<f32>> = gen_input(m, k, 2, 5).unwrap();
        let b: BiasVector<Counted<f32>> = gen_bias(n, 2, 5).unwrap();
        let t = Tcsc::from_dense(&w);
        let (_, ops) = count_ops(|| gemm_base(&x, &t, &b).unwrap());
        assert_eq!(ops.adds, (m * n + m * w.nnz()) as u64);
        assert_eq!(ops.mults, 0);
    }
}
