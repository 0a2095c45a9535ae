//! Interleaved storage: each column keeps alternating runs of `g` positive
//! and `g` negative row indices, followed by the unmatched positives and then
//! the unmatched negatives.

use crate::dense::TernaryDense;
use crate::error::{Error, Result};
use crate::tcsc::INDEX_BYTES;

use super::blocked::default_block_size;

/// Group size for the scalar interleaved kernels.
pub const DEFAULT_SCALAR_GROUP: usize = 4;
/// Group size for the data-parallel kernels.
pub const DEFAULT_SIMD_GROUP: usize = 2;

/// Appends the interleaved layout of one column to `out` and returns the
/// lengths of its three segments: interleaved, remaining +1, remaining -1.
pub fn interleave_column(pos: &[u32], neg: &[u32], group: usize, out: &mut Vec<u32>) -> [usize; 3] {
    let matched = group * (pos.len().min(neg.len()) / group);
    for (p, n) in pos[..matched]
        .chunks(group)
        .zip(neg[..matched].chunks(group))
    {
        out.extend_from_slice(p);
        out.extend_from_slice(n);
    }
    out.extend_from_slice(&pos[matched..]);
    out.extend_from_slice(&neg[matched..]);
    [2 * matched, pos.len() - matched, neg.len() - matched]
}

/// The three index segments of one stored column.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ColumnSegments<'a> {
    /// Alternating runs of `g` positive then `g` negative indices.
    pub interleaved: &'a [u32],
    pub pos: &'a [u32],
    pub neg: &'a [u32],
}

impl ColumnSegments<'_> {
    /// Splits the column back into ascending +1 and -1 row lists.
    pub fn signed_rows(&self, group: usize) -> (Vec<u32>, Vec<u32>) {
        let (mut pos, mut neg) = (Vec::new(), Vec::new());
        for (i, &row) in self.interleaved.iter().enumerate() {
            if (i / group).is_multiple_of(2) {
                pos.push(row);
            } else {
                neg.push(row);
            }
        }
        pos.extend_from_slice(self.pos);
        neg.extend_from_slice(self.neg);
        (pos, neg)
    }
}

/// Index storage shared by the plain and blocked interleaved formats:
/// `seg_ptr` holds three boundaries per slot plus a final end offset.
#[derive(Debug, Clone, PartialEq, Eq)]
struct Segments {
    indices: Vec<u32>,
    seg_ptr: Vec<u32>,
}

impl Segments {
    fn with_capacity(slots: usize) -> Self {
        let mut seg_ptr = Vec::with_capacity(3 * slots + 1);
        seg_ptr.push(0);
        Segments {
            indices: Vec::new(),
            seg_ptr,
        }
    }

    fn push_column(&mut self, pos: &[u32], neg: &[u32], group: usize) {
        let [a, b, c] = interleave_column(pos, neg, group, &mut self.indices);
        let start = *self.seg_ptr.last().unwrap();
        self.seg_ptr.push(start + a as u32);
        self.seg_ptr.push(start + (a + b) as u32);
        self.seg_ptr.push(start + (a + b + c) as u32);
    }

    #[inline]
    fn slot(&self, slot: usize) -> ColumnSegments<'_> {
        let s = &self.seg_ptr[3 * slot..3 * slot + 4];
        ColumnSegments {
            interleaved: &self.indices[s[0] as usize..s[1] as usize],
            pos: &self.indices[s[1] as usize..s[2] as usize],
            neg: &self.indices[s[2] as usize..s[3] as usize],
        }
    }

    /// Structural check for `slots` slots; `rows_of(slot)` is the legal row range.
    fn validate(
        &self,
        slots: usize,
        group: usize,
        rows_of: impl Fn(usize) -> std::ops::Range<usize>,
    ) -> std::result::Result<(), String> {
        if self.seg_ptr.len() != 3 * slots + 1 {
            return Err(format!(
                "segment pointer length {}, expected {}",
                self.seg_ptr.len(),
                3 * slots + 1
            ));
        }
        if self.seg_ptr[0] != 0 {
            return Err("segment pointers do not start at 0".into());
        }
        if let Some(i) = self.seg_ptr.windows(2).position(|w| w[1] < w[0]) {
            return Err(format!("segment pointers decrease at position {i}"));
        }
        if *self.seg_ptr.last().unwrap() as usize != self.indices.len() {
            return Err("final segment pointer does not match index count".into());
        }
        for slot in 0..slots {
            let seg = self.slot(slot);
            if !seg.interleaved.len().is_multiple_of(2 * group) {
                return Err(format!(
                    "slot {slot}: interleaved length {} not a multiple of {}",
                    seg.interleaved.len(),
                    2 * group
                ));
            }
            let rows = rows_of(slot);
            let (pos, neg) = seg.signed_rows(group);
            for list in [&pos, &neg] {
                if let Some(&r) = list.iter().find(|&&r| !rows.contains(&(r as usize))) {
                    return Err(format!("slot {slot}: row {r} outside {rows:?}"));
                }
                if list.windows(2).any(|w| w[0] >= w[1]) {
                    return Err(format!("slot {slot}: row indices not strictly increasing"));
                }
            }
            if let Some(r) = crate::tcsc::first_common(&pos, &neg) {
                return Err(format!("slot {slot}: row {r} stored with both signs"));
            }
        }
        Ok(())
    }

    fn scatter(
        &self,
        slots: impl Iterator<Item = (usize, usize)>,
        n: usize,
        group: usize,
        values: &mut [i8],
    ) {
        for (slot, col) in slots {
            let (pos, neg) = self.slot(slot).signed_rows(group);
            for r in pos {
                values[r as usize * n + col] = 1;
            }
            for r in neg {
                values[r as usize * n + col] = -1;
            }
        }
    }

    fn bytes(&self) -> usize {
        INDEX_BYTES * (self.indices.len() + self.seg_ptr.len())
    }
}

fn check_group(group: usize) -> Result<()> {
    if group == 0 {
        return Err(Error::param("group size must be at least 1"));
    }
    Ok(())
}

/// Interleaved TCSC over the full row range.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InterleavedTcsc {
    k: usize,
    n: usize,
    group: usize,
    segments: Segments,
}

impl InterleavedTcsc {
    pub fn from_dense(w: &TernaryDense, group: usize) -> Result<Self> {
        check_group(group)?;
        let mut segments = Segments::with_capacity(w.cols());
        for col in 0..w.cols() {
            let (pos, neg) = w.signed_rows(col, 0..w.rows());
            segments.push_column(&pos, &neg, group);
        }
        Ok(InterleavedTcsc {
            k: w.rows(),
            n: w.cols(),
            group,
            segments,
        })
    }

    pub fn from_parts(
        k: usize,
        n: usize,
        group: usize,
        indices: Vec<u32>,
        seg_ptr: Vec<u32>,
    ) -> Result<Self> {
        check_group(group)?;
        let t = InterleavedTcsc {
            k,
            n,
            group,
            segments: Segments { indices, seg_ptr },
        };
        t.segments
            .validate(n, group, |_| 0..k)
            .map_err(Error::Corrupt)?;
        Ok(t)
    }

    pub fn column(&self, col: usize) -> ColumnSegments<'_> {
        self.segments.slot(col)
    }

    pub fn to_dense(&self) -> Result<TernaryDense> {
        let mut values = vec![0i8; self.k * self.n];
        self.segments
            .scatter((0..self.n).map(|c| (c, c)), self.n, self.group, &mut values);
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

    pub fn indices(&self) -> &[u32] {
        &self.segments.indices
    }

    pub fn segment_ptr(&self) -> &[u32] {
        &self.segments.seg_ptr
    }

    pub fn format_bytes(&self) -> usize {
        self.segments.bytes()
    }
}

/// Interleaved storage inside row blocks: one `all_indices` array, and
/// `col_segment_ptr` marking the three segments of every (block, column).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InterleavedBlockedTcsc {
    k: usize,
    n: usize,
    block_size: usize,
    group: usize,
    segments: Segments,
}

impl InterleavedBlockedTcsc {
    pub fn from_dense(w: &TernaryDense, block_size: usize, group: usize) -> Result<Self> {
        if block_size == 0 {
            return Err(Error::param("block size must be at least 1"));
        }
        check_group(group)?;
        let (k, n) = (w.rows(), w.cols());
        let num_blocks = k.div_ceil(block_size);
        let mut segments = Segments::with_capacity(num_blocks * n);
        for b in 0..num_blocks {
            let rows = b * block_size..((b + 1) * block_size).min(k);
            for col in 0..n {
                let (pos, neg) = w.signed_rows(col, rows.clone());
                segments.push_column(&pos, &neg, group);
            }
        }
        Ok(InterleavedBlockedTcsc {
            k,
            n,
            block_size,
            group,
            segments,
        })
    }

    /// Default layout: `B = min(K, 4096)`, groups of two per sign.
    pub fn with_defaults(w: &TernaryDense) -> Result<Self> {
        Self::from_dense(w, default_block_size(w.rows()), super::DEFAULT_SIMD_GROUP)
    }

    pub fn from_parts(
        k: usize,
        n: usize,
        block_size: usize,
        group: usize,
        all_indices: Vec<u32>,
        col_segment_ptr: Vec<u32>,
    ) -> Result<Self> {
        if block_size == 0 {
            return Err(Error::corrupt("block size 0"));
        }
        check_group(group)?;
        let t = InterleavedBlockedTcsc {
            k,
            n,
            block_size,
            group,
            segments: Segments {
                indices: all_indices,
                seg_ptr: col_segment_ptr,
            },
        };
        t.segments
            .validate(t.num_blocks() * n, group, |slot| {
                t.block_rows(slot / n.max(1))
            })
            .map_err(Error::Corrupt)?;
        Ok(t)
    }

    #[inline]
    pub fn column(&self, block: usize, col: usize) -> ColumnSegments<'_> {
        self.segments.slot(block * self.n + col)
    }

    pub fn block_rows(&self, b: usize) -> std::ops::Range<usize> {
        b * self.block_size..((b + 1) * self.block_size).min(self.k)
    }

    pub fn to_dense(&self) -> Result<TernaryDense> {
        let mut values = vec![0i8; self.k * self.n];
        let slots = (0..self.num_blocks() * self.n).map(|s| (s, s % self.n));
        self.segments
            .scatter(slots, self.n, self.group, &mut values);
        TernaryDense::new(self.k, self.n, values)
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn block_size(&self) -> usize {
        self.block_size
    }

    pub fn group(&self) -> usize {
        self.group
    }

    pub fn num_blocks(&self) -> usize {
        self.k.div_ceil(self.block_size)
    }

    pub fn all_indices(&self) -> &[u32] {
        &self.segments.indices
    }

    pub fn col_segment_ptr(&self) -> &[u32] {
        &self.segments.seg_ptr
    }

    pub fn format_bytes(&self) -> usize {
        self.segments.bytes()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dense::{gen_ternary, SparsityLevel};

    fn worked_w() -> TernaryDense {
        TernaryDense::from_columns(&[vec![1, 0, -1, 1], vec![0, -1, 0, 0]]).unwrap()
    }

    #[test]
    fn single_group_interleave() {
        let mut out = Vec::new();
        assert_eq!(interleave_column(&[0, 3], &[2], 1, &mut out), [2, 1, 0]);
        assert_eq!(out, vec![0, 2, 3]);
    }

    #[test]
    fn four_and_four_with_group_four() {
        let mut out = Vec::new();
        let lens = interleave_column(&[1, 3, 5, 7], &[0, 2, 4, 6], 4, &mut out);
        assert_eq!(lens, [8, 0, 0]);
        assert_eq!(out, vec![1, 3, 5, 7, 0, 2, 4, 6]);
    }

    #[test]
    fn runs_alternate_and_remainders_follow() {
        let mut out = Vec::new();
        let lens = interleave_column(&[0, 1, 2, 3, 4], &[10, 11, 12], 2, &mut out);
        assert_eq!(lens, [4, 3, 1]);
        assert_eq!(out, vec![0, 1, 10, 11, 2, 3, 4, 12]);
    }

    #[test]
    fn empty_column() {
        let mut out = Vec::new();
        assert_eq!(interleave_column(&[], &[], 4, &mut out), [0, 0, 0]);
        assert!(out.is_empty());
    }

    #[test]
    fn worked_example_blocked_group_one() {
        let t = InterleavedBlockedTcsc::from_dense(&worked_w(), 2, 1).unwrap();
        let seg = t.column(1, 0);
        assert_eq!(seg.interleaved, &[3, 2]);
        assert!(seg.pos.is_empty() && seg.neg.is_empty());
        assert_eq!(t.column(0, 0).pos, &[0]);
        assert_eq!(t.column(0, 1).neg, &[1]);
        assert_eq!(t.to_dense().unwrap(), worked_w());
    }

    #[test]
    fn oversized_block_matches_unblocked() {
        let w = gen_ternary(40, 6, SparsityLevel::HALF, 5).unwrap();
        let plain = InterleavedTcsc::from_dense(&w, 4).unwrap();
        let blocked = InterleavedBlockedTcsc::from_dense(&w, 100, 4).unwrap();
        assert_eq!(plain.indices(), blocked.all_indices());
        assert_eq!(plain.segment_ptr(), blocked.col_segment_ptr());
    }

    #[test]
    fn round_trips_and_validates() {
        for (seed, s) in SparsityLevel::STANDARD.into_iter().enumerate() {
            let w = gen_ternary(77, 9, s, seed as u64).unwrap();
            for g in 1..=5 {
                let t = InterleavedBlockedTcsc::from_dense(&w, 16, g).unwrap();
                assert_eq!(t.to_dense().unwrap(), w);
                let again = InterleavedBlockedTcsc::from_parts(
                    77,
                    9,
                    16,
                    g,
                    t.all_indices().to_vec(),
                    t.col_segment_ptr().to_vec(),
                )
                .unwrap();
                assert_eq!(again, t);
                assert_eq!(
                    InterleavedTcsc::from_dense(&w, g)
                        .unwrap()
                        .to_dense()
                        .unwrap(),
                    w
                );
            }
        }
    }

    #[test]
    fn from_parts_rejects_cross_block_index() {
        // Row 3 lives in block 1, not block 0.
        let err =
            InterleavedBlockedTcsc::from_parts(4, 1, 2, 1, vec![3], vec![0, 0, 1, 1, 1, 1, 1]);
        assert!(matches!(err, Err(Error::Corrupt(_))));
    }

    #[test]
    fn zero_parameters_rejected() {
        assert!(InterleavedTcsc::from_dense(&worked_w(), 0).is_err());
        assert!(InterleavedBlockedTcsc::from_dense(&worked_w(), 0, 2).is_err());
        assert!(InterleavedBlockedTcsc::from_dense(&worked_w(), 2, 0).is_err());
    }
}
