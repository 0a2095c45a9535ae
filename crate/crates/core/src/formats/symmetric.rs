//! Interleaved format made uniform across groups of four columns for the
//! 4-lane kernels.
//!
//! Every nonzero goes into the interleaved region. Within a 4-column group
//! each column holds the same number `P` of (+, -) index pairs, `P` a
//! multiple of four; the deficit sign of a column and all columns shorter
//! than the group maximum are filled with the dummy index `K`, which kernels
//! resolve to a zero slot appended to every row of X.

use crate::dense::TernaryDense;
use crate::error::{Error, Result};
use crate::tcsc::INDEX_BYTES;

/// Vector width the format is laid out for.
pub const LANES: usize = 4;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SymmetricInterleavedTcsc {
    k: usize,
    n: usize,
    group: usize,
    /// Start of each 4-column group in `indices`, plus an end offset.
    group_ptr: Vec<u32>,
    indices: Vec<u32>,
}

fn check_shape(n: usize, group: usize) -> Result<()> {
    if !n.is_multiple_of(LANES) {
        return Err(Error::param(format!(
            "N must be divisible by 4 (got N={n})"
        )));
    }
    if group == 0 || !LANES.is_multiple_of(group) {
        return Err(Error::param(format!(
            "group size must divide 4 (got {group})"
        )));
    }
    Ok(())
}

impl SymmetricInterleavedTcsc {
    pub fn from_dense(w: &TernaryDense, group: usize) -> Result<Self> {
        let (k, n) = (w.rows(), w.cols());
        check_shape(n, group)?;
        if k >= u32::MAX as usize {
            return Err(Error::param("K too large for 32-bit dummy index"));
        }
        let dummy = k as u32;
        let mut group_ptr = Vec::with_capacity(n / LANES + 1);
        let mut indices = Vec::new();
        group_ptr.push(0);
        for g0 in (0..n).step_by(LANES) {
            let cols: Vec<(Vec<u32>, Vec<u32>)> =
                (g0..g0 + LANES).map(|c| w.signed_rows(c, 0..k)).collect();
            let widest = cols
                .iter()
                .map(|(p, q)| p.len().max(q.len()))
                .max()
                .unwrap_or(0);
            let pairs = widest.next_multiple_of(LANES);
            for (mut pos, mut neg) in cols {
                pos.resize(pairs, dummy);
                neg.resize(pairs, dummy);
                super::interleave_column(&pos, &neg, group, &mut indices);
            }
            group_ptr.push(indices.len() as u32);
        }
        Ok(SymmetricInterleavedTcsc {
            k,
            n,
            group,
            group_ptr,
            indices,
        })
    }

    pub fn from_parts(
        k: usize,
        n: usize,
        group: usize,
        group_ptr: Vec<u32>,
        indices: Vec<u32>,
    ) -> Result<Self> {
        check_shape(n, group)?;
        let t = SymmetricInterleavedTcsc {
            k,
            n,
            group,
            group_ptr,
            indices,
        };
        t.check().map_err(Error::Corrupt)?;
        Ok(t)
    }

    fn check(&self) -> std::result::Result<(), String> {
        let groups = self.n / LANES;
        if self.group_ptr.len() != groups + 1 || self.group_ptr[0] != 0 {
            return Err("malformed group pointers".into());
        }
        if *self.group_ptr.last().unwrap() as usize != self.indices.len() {
            return Err("final group pointer does not match index count".into());
        }
        for gi in 0..groups {
            let (a, b) = (self.group_ptr[gi], self.group_ptr[gi + 1]);
            if b < a || !((b - a) as usize).is_multiple_of(2 * LANES * LANES) {
                return Err(format!(
                    "group {gi}: length {} is not 4 columns of 4k pairs",
                    b.wrapping_sub(a)
                ));
            }
        }
        if let Some(&r) = self.indices.iter().find(|&&r| r as usize > self.k) {
            return Err(format!("index {r} exceeds dummy index {}", self.k));
        }
        for col in 0..self.n {
            let (pos, neg) = self.real_rows(col);
            for list in [&pos, &neg] {
                if list.windows(2).any(|w| w[0] >= w[1]) {
                    return Err(format!("column {col}: row indices not strictly increasing"));
                }
            }
            if let Some(r) = crate::tcsc::first_common(&pos, &neg) {
                return Err(format!("column {col}: row {r} stored with both signs"));
            }
        }
        Ok(())
    }

    /// Number of (+, -) pairs every column of 4-column group `gi` stores.
    #[inline]
    pub fn pairs_in_group(&self, gi: usize) -> usize {
        (self.group_ptr[gi + 1] - self.group_ptr[gi]) as usize / (2 * LANES)
    }

    /// The interleaved stream of column `col`, dummies included.
    #[inline]
    pub fn column(&self, col: usize) -> &[u32] {
        let gi = col / LANES;
        let len = 2 * self.pairs_in_group(gi);
        let start = self.group_ptr[gi] as usize + (col % LANES) * len;
        &self.indices[start..start + len]
    }

    /// The four column streams of group `gi`.
    #[inline]
    pub fn group_columns(&self, gi: usize) -> [&[u32]; LANES] {
        std::array::from_fn(|c| self.column(gi * LANES + c))
    }

    /// Ascending +1 and -1 rows of `col`, with dummies dropped.
    fn real_rows(&self, col: usize) -> (Vec<u32>, Vec<u32>) {
        let (mut pos, mut neg) = (Vec::new(), Vec::new());
        for (i, &r) in self.column(col).iter().enumerate() {
            if r as usize == self.k {
                continue;
            }
            if (i / self.group).is_multiple_of(2) {
                pos.push(r);
            } else {
                neg.push(r);
            }
        }
        (pos, neg)
    }

    pub fn to_dense(&self) -> Result<TernaryDense> {
        let mut values = vec![0i8; self.k * self.n];
        for col in 0..self.n {
            let (pos, neg) = self.real_rows(col);
            for r in pos {
                values[r as usize * self.n + col] = 1;
            }
            for r in neg {
                values[r as usize * self.n + col] = -1;
            }
        }
        TernaryDense::new(self.k, self.n, values)
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn group(&self) -> usize {
        self.group
    }

    /// The sentinel row index used for padding.
    pub fn dummy_index(&self) -> u32 {
        self.k as u32
    }

    pub fn group_ptr(&self) -> &[u32] {
        &self.group_ptr
    }

    pub fn indices(&self) -> &[u32] {
        &self.indices
    }

    pub fn dummy_count(&self) -> usize {
        self.indices
            .iter()
            .filter(|&&r| r as usize == self.k)
            .count()
    }

    /// Fraction of stored entries that are padding.
    pub fn pad_overhead(&self) -> f64 {
        if self.indices.is_empty() {
            0.0
        } else {
            self.dummy_count() as f64 / self.indices.len() as f64
        }
    }

    pub fn format_bytes(&self) -> usize {
        INDEX_BYTES * (self.group_ptr.len() + self.indices.len())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dense::{gen_ternary, SparsityLevel};

    fn column(pos: &[usize], neg: &[usize], k: usize) -> Vec<i8> {
        let mut c = vec![0i8; k];
        for &p in pos {
            c[p] = 1;
        }
        for &q in neg {
            c[q] = -1;
        }
        c
    }

    #[test]
    fn balanced_group_needs_no_dummies() {
        let cols: Vec<Vec<i8>> = (0..4)
            .map(|c| {
                column(
                    &[c, c + 4, c + 8, c + 12],
                    &[c + 16, c + 20, c + 24, c + 28],
                    32,
                )
            })
            .collect();
        let w = TernaryDense::from_columns(&cols).unwrap();
        let t = SymmetricInterleavedTcsc::from_dense(&w, 2).unwrap();
        assert_eq!(t.dummy_count(), 0);
        assert_eq!(t.pairs_in_group(0), 4);
        assert_eq!(t.column(0), &[0, 4, 16, 20, 8, 12, 24, 28]);
        assert_eq!(t.to_dense().unwrap(), w);
    }

    #[test]
    fn one_short_column_gets_padding() {
        let mut cols: Vec<Vec<i8>> = (0..4)
            .map(|c| {
                column(
                    &[c, c + 4, c + 8, c + 12],
                    &[c + 16, c + 20, c + 24, c + 28],
                    32,
                )
            })
            .collect();
        cols[2][26] = 0; // column 2 loses one -1
        let w = TernaryDense::from_columns(&cols).unwrap();
        let t = SymmetricInterleavedTcsc::from_dense(&w, 2).unwrap();
        assert_eq!(t.pairs_in_group(0), 4);
        assert_eq!(t.dummy_count(), 1);
        assert_eq!(*t.column(2).last().unwrap(), 32);
        for c in 0..4 {
            assert_eq!(t.column(c).len(), 8);
        }
        assert_eq!(t.to_dense().unwrap(), w);
    }

    #[test]
    fn pair_counts_round_up_to_four() {
        let cols = vec![
            column(&[0, 1, 2, 3, 4], &[5], 8),
            column(&[], &[], 8),
            column(&[7], &[], 8),
            column(&[], &[6], 8),
        ];
        let w = TernaryDense::from_columns(&cols).unwrap();
        let t = SymmetricInterleavedTcsc::from_dense(&w, 2).unwrap();
        assert_eq!(t.pairs_in_group(0), 8);
        assert_eq!(t.indices().len(), 4 * 16);
        assert_eq!(t.dummy_count(), 64 - 8);
        assert!((t.pad_overhead() - 56.0 / 64.0).abs() < 1e-12);
        assert_eq!(t.to_dense().unwrap(), w);
    }

    #[test]
    fn all_zero_groups_are_empty() {
        let w = TernaryDense::zeros(10, 8).unwrap();
        let t = SymmetricInterleavedTcsc::from_dense(&w, 2).unwrap();
        assert!(t.indices().is_empty());
        assert_eq!(t.group_ptr(), &[0, 0, 0]);
        assert_eq!(t.pad_overhead(), 0.0);
        assert_eq!(t.to_dense().unwrap(), w);
    }

    #[test]
    fn rejects_bad_shapes() {
        let w = TernaryDense::zeros(4, 6).unwrap();
        let err = SymmetricInterleavedTcsc::from_dense(&w, 2).unwrap_err();
        assert!(err.to_string().contains("N must be divisible by 4"));
        let w = TernaryDense::zeros(4, 4).unwrap();
        assert!(SymmetricInterleavedTcsc::from_dense(&w, 3).is_err());
    }

    #[test]
    fn random_round_trip_and_parts() {
        for g in [1, 2, 4] {
            let w = gen_ternary(45, 12, SparsityLevel::QUARTER, g as u64).unwrap();
            let t = SymmetricInterleavedTcsc::from_dense(&w, g).unwrap();
            assert_eq!(t.to_dense().unwrap(), w);
            let back = SymmetricInterleavedTcsc::from_parts(
                45,
                12,
                g,
                t.group_ptr().to_vec(),
                t.indices().to_vec(),
            )
            .unwrap();
            assert_eq!(back, t);
        }
    }

    #[test]
    fn from_parts_rejects_index_past_dummy() {
        let err = SymmetricInterleavedTcsc::from_parts(4, 4, 2, vec![0, 32], vec![5; 32]);
        assert!(matches!(err, Err(Error::Corrupt(_))));
    }
}
