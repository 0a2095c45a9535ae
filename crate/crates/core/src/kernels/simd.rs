//! 4-lane kernels with fused bias and PReLU.
//!
//! X rows carry one extra zero element at index `K` so that the dummy index
//! padding of [`SymmetricInterleavedTcsc`] reads a zero and contributes
//! nothing. Gathers are emulated by loading the four lanes one at a time.
//!
//! Each kernel has a `_with` form generic over the lane implementation; the
//! plain form uses `T::Lanes` (hardware registers for `f32` where available).

use crate::dense::{BiasVector, DenseMatrix};
use crate::error::{Error, Result};
use crate::formats::{InterleavedBlockedTcsc, SymmetricInterleavedTcsc, LANES};
use crate::lanes::Lane4;
use crate::scalar::{prelu, Scalar};

use super::scalar::interleaved_dot_row;

/// Row-major copy of X with row stride `K + 1`; element `[m][K]` is the
/// zero slot dummy indices point at.
#[derive(Debug, Clone, PartialEq)]
pub struct PaddedInput<T> {
    m: usize,
    k: usize,
    data: Vec<T>,
}

impl<T: Scalar> PaddedInput<T> {
    pub fn from_dense(x: &DenseMatrix<T>) -> Self {
        let (m, k) = (x.rows(), x.cols());
        let mut data = Vec::with_capacity(m * (k + 1));
        for r in 0..m {
            data.extend_from_slice(x.row(r));
            data.push(T::zero());
        }
        PaddedInput { m, k, data }
    }

    /// Wraps raw padded storage. The padding slots are taken as given, so a
    /// nonzero slot can be planted deliberately; see [`Self::dummy_slots_zero`].
    pub fn from_raw(m: usize, k: usize, data: Vec<T>) -> Result<Self> {
        if data.len() != m * (k + 1) {
            return Err(Error::dims(format!(
                "padded {m}x{k} input needs {} values, got {}",
                m * (k + 1),
                data.len()
            )));
        }
        Ok(PaddedInput { m, k, data })
    }

    pub fn rows(&self) -> usize {
        self.m
    }

    /// Logical column count (excluding the padding slot).
    pub fn cols(&self) -> usize {
        self.k
    }

    pub fn stride(&self) -> usize {
        self.k + 1
    }

    /// Row `r` including its padding slot.
    #[inline]
    pub fn row(&self, r: usize) -> &[T] {
        &self.data[r * (self.k + 1)..(r + 1) * (self.k + 1)]
    }

    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    pub fn dummy_slots_zero(&self) -> bool {
        (0..self.m).all(|r| self.row(r)[self.k] == T::zero())
    }

    pub fn to_dense(&self) -> DenseMatrix<T> {
        let data = (0..self.m)
            .flat_map(|r| self.row(r)[..self.k].iter().copied())
            .collect();
        DenseMatrix::from_raw(self.m, self.k, data)
    }
}

fn check_simd_dims<T: Scalar>(
    x: &PaddedInput<T>,
    k: usize,
    n: usize,
    bias: &BiasVector<T>,
) -> Result<()> {
    if !n.is_multiple_of(LANES) {
        return Err(Error::param(format!(
            "N must be divisible by 4 (got N={n})"
        )));
    }
    if x.cols() != k {
        return Err(Error::dims(format!(
            "X has {} columns but W has {k} rows",
            x.cols()
        )));
    }
    if bias.len() != n {
        return Err(Error::dims(format!(
            "bias has length {} but W has {n} columns",
            bias.len()
        )));
    }
    Ok(())
}

#[inline(always)]
fn finish<T: Scalar, V: Lane4<T>>(v: V, alpha: Option<T>) -> V {
    match alpha {
        Some(a) => v.prelu(a),
        None => v,
    }
}

/// One lane per output column: each iteration consumes one run of `g`
/// positives and `g` negatives from each of the four columns, summing into a
/// positive and a negative lane vector. Output is `bias + pos - neg`.
pub fn gemm_vertical_with<T: Scalar, V: Lane4<T>>(
    x: &PaddedInput<T>,
    t: &SymmetricInterleavedTcsc,
    bias: &BiasVector<T>,
    alpha: Option<T>,
) -> Result<DenseMatrix<T>> {
    check_simd_dims(x, t.k(), t.n(), bias)?;
    let (m, n, g) = (x.rows(), t.n(), t.group());
    let mut y = Vec::with_capacity(m * n);
    for row in 0..m {
        let xr = x.row(row);
        for gi in 0..n / LANES {
            let cols = t.group_columns(gi);
            let len = 2 * t.pairs_in_group(gi);
            let mut pos = V::splat(T::zero());
            let mut neg = V::splat(T::zero());
            for base in (0..len).step_by(2 * g) {
                for j in 0..g {
                    pos = pos.add(V::from_array(std::array::from_fn(|c| {
                        xr[cols[c][base + j] as usize]
                    })));
                }
                for j in 0..g {
                    neg = neg.add(V::from_array(std::array::from_fn(|c| {
                        xr[cols[c][base + g + j] as usize]
                    })));
                }
            }
            let b = V::from_array(std::array::from_fn(|c| bias.as_slice()[gi * LANES + c]));
            y.extend(finish(b.add(pos).sub(neg), alpha).to_array());
        }
    }
    Ok(DenseMatrix::from_raw(m, n, y))
}

/// Positions of the positive and negative entries within a window of eight
/// stream entries (four pairs) for group size `g`.
fn window_slots(g: usize) -> ([usize; 4], [usize; 4]) {
    let mut pos = [0; 4];
    let mut neg = [0; 4];
    let (mut p, mut q) = (0, 0);
    for i in 0..2 * LANES {
        if (i / g).is_multiple_of(2) {
            pos[p] = i;
            p += 1;
        } else {
            neg[q] = i;
            q += 1;
        }
    }
    (pos, neg)
}

/// One accumulator vector per output column holding four partial sums, all
/// four columns of a group advanced together; a pairwise horizontal add
/// produces each output.
pub fn gemm_horizontal_with<T: Scalar, V: Lane4<T>>(
    x: &PaddedInput<T>,
    t: &SymmetricInterleavedTcsc,
    bias: &BiasVector<T>,
    alpha: Option<T>,
) -> Result<DenseMatrix<T>> {
    check_simd_dims(x, t.k(), t.n(), bias)?;
    let (m, n) = (x.rows(), t.n());
    let (ps, ns) = window_slots(t.group());
    let mut y = Vec::with_capacity(m * n);
    for row in 0..m {
        let xr = x.row(row);
        for gi in 0..n / LANES {
            let cols = t.group_columns(gi);
            let len = 2 * t.pairs_in_group(gi);
            let mut acc = [V::splat(T::zero()); LANES];
            for base in (0..len).step_by(2 * LANES) {
                for c in 0..LANES {
                    let w = &cols[c][base..base + 2 * LANES];
                    let pv = V::from_array(ps.map(|i| xr[w[i] as usize]));
                    let nv = V::from_array(ns.map(|i| xr[w[i] as usize]));
                    acc[c] = acc[c].add(pv).sub(nv);
                }
            }
            for (c, a) in acc.into_iter().enumerate() {
                let v = a.hsum() + bias.as_slice()[gi * LANES + c];
                y.push(match alpha {
                    Some(al) => prelu(v, al),
                    None => v,
                });
            }
        }
    }
    Ok(DenseMatrix::from_raw(m, n, y))
}

/// Lanes map to four rows of X; four accumulator vectors cover four output
/// columns. Runs over the blocked interleaved layout: the interleaved
/// segments go through the vector path, leftover positives/negatives and the
/// `M % 4` tail rows through scalar code.
pub fn gemm_vectorized_optimal_with<T: Scalar, V: Lane4<T>>(
    x: &PaddedInput<T>,
    t: &InterleavedBlockedTcsc,
    bias: &BiasVector<T>,
    alpha: Option<T>,
) -> Result<DenseMatrix<T>> {
    check_simd_dims(x, t.k(), t.n(), bias)?;
    let (m, n, g) = (x.rows(), t.n(), t.group());
    let mut y = DenseMatrix::broadcast_rows(m, bias);
    let out = y.as_mut_slice();
    let full = m - m % LANES;
    for b in 0..t.num_blocks() {
        for n0 in (0..n).step_by(LANES) {
            let segs: [_; LANES] = std::array::from_fn(|c| t.column(b, n0 + c));
            let common = segs.iter().map(|s| s.interleaved.len()).min().unwrap_or(0);
            for m0 in (0..full).step_by(LANES) {
                let rows: [&[T]; LANES] = std::array::from_fn(|l| x.row(m0 + l));
                let gather = |i: u32| V::from_array(rows.map(|r| r[i as usize]));
                let mut acc: [V; LANES] = std::array::from_fn(|c| {
                    V::from_array(std::array::from_fn(|l| out[(m0 + l) * n + n0 + c]))
                });
                for base in (0..common).step_by(2 * g) {
                    for c in 0..LANES {
                        let run = &segs[c].interleaved[base..base + 2 * g];
                        for &i in &run[..g] {
                            acc[c] = acc[c].add(gather(i));
                        }
                        for &i in &run[g..] {
                            acc[c] = acc[c].sub(gather(i));
                        }
                    }
                }
                for c in 0..LANES {
                    let tail = &segs[c].interleaved[common..];
                    for run in tail.chunks_exact(2 * g) {
                        for &i in &run[..g] {
                            acc[c] = acc[c].add(gather(i));
                        }
                        for &i in &run[g..] {
                            acc[c] = acc[c].sub(gather(i));
                        }
                    }
                    for (l, v) in acc[c].to_array().into_iter().enumerate() {
                        let mut s = v;
                        for &i in segs[c].pos {
                            s += rows[l][i as usize];
                        }
                        for &i in segs[c].neg {
                            s -= rows[l][i as usize];
                        }
                        out[(m0 + l) * n + n0 + c] = s;
                    }
                }
            }
            for row in full..m {
                let xr = x.row(row);
                for (c, seg) in segs.iter().enumerate() {
                    let slot = &mut out[row * n + n0 + c];
                    *slot += interleaved_dot_row(xr, *seg, g);
                }
            }
        }
    }
    if let Some(a) = alpha {
        for v in out.iter_mut() {
            *v = prelu(*v, a);
        }
    }
    Ok(y)
}

pub fn gemm_vertical<T: Scalar>(
    x: &PaddedInput<T>,
    t: &SymmetricInterleavedTcsc,
    bias: &BiasVector<T>,
    alpha: Option<T>,
) -> Result<DenseMatrix<T>> {
    gemm_vertical_with::<T, T::Lanes>(x, t, bias, alpha)
}

pub fn gemm_horizontal<T: Scalar>(
    x: &PaddedInput<T>,
    t: &SymmetricInterleavedTcsc,
    bias: &BiasVector<T>,
    alpha: Option<T>,
) -> Result<DenseMatrix<T>> {
    gemm_horizontal_with::<T, T::Lanes>(x, t, bias, alpha)
}

pub fn gemm_vectorized_optimal<T: Scalar>(
    x: &PaddedInput<T>,
    t: &InterleavedBlockedTcsc,
    bias: &BiasVector<T>,
    alpha: Option<T>,
) -> Result<DenseMatrix<T>> {
    gemm_vectorized_optimal_with::<T, T::Lanes>(x, t, bias, alpha)
}
