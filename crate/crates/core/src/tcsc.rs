//! Ternary Compressed Sparse Column format.
//!
//! A ternary matrix stores no values: the +1 and -1 entries live in two
//! separate CSC index structures, and the sign is implied by which one an
//! index sits in.

use std::fmt;

use crate::dense::TernaryDense;
use crate::error::{Error, Result};

/// Bytes per stored index or offset.
pub const INDEX_BYTES: usize = 4;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Tcsc {
    k: usize,
    n: usize,
    col_start_pos: Vec<u32>,
    row_index_pos: Vec<u32>,
    col_start_neg: Vec<u32>,
    row_index_neg: Vec<u32>,
}

/// One broken structural invariant, as reported by [`Tcsc::validate`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Violation {
    OffsetsLength {
        array: &'static str,
        expected: usize,
        actual: usize,
    },
    OffsetsStart {
        array: &'static str,
        first: u32,
    },
    NonMonotonicOffsets {
        array: &'static str,
        col: usize,
    },
    OffsetsEnd {
        array: &'static str,
        last: u32,
        indices: usize,
    },
    IndexOutOfRange {
        array: &'static str,
        position: usize,
        row: u32,
    },
    UnsortedColumn {
        array: &'static str,
        col: usize,
    },
    OverlappingSigns {
        col: usize,
        row: u32,
    },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::OffsetsLength {
                array,
                expected,
                actual,
            } => {
                write!(f, "{array}: offsets length {actual}, expected {expected}")
            }
            Violation::OffsetsStart { array, first } => {
                write!(f, "{array}: offsets start at {first}, not 0")
            }
            Violation::NonMonotonicOffsets { array, col } => {
                write!(f, "{array}: non-monotonic offsets at column {col}")
            }
            Violation::OffsetsEnd {
                array,
                last,
                indices,
            } => {
                write!(
                    f,
                    "{array}: final offset {last} does not match {indices} indices"
                )
            }
            Violation::IndexOutOfRange {
                array,
                position,
                row,
            } => {
                write!(
                    f,
                    "{array}: index out of range ({row} at position {position})"
                )
            }
            Violation::UnsortedColumn { array, col } => {
                write!(
                    f,
                    "{array}: row indices not strictly increasing in column {col}"
                )
            }
            Violation::OverlappingSigns { col, row } => {
                write!(f, "row {row} of column {col} is stored as both +1 and -1")
            }
        }
    }
}

/// Checks one CSC half (offsets plus indices) against its invariants.
pub(crate) fn validate_csc(
    array: &'static str,
    offsets: &[u32],
    indices: &[u32],
    n: usize,
    rows: std::ops::Range<usize>,
    out: &mut Vec<Violation>,
) -> bool {
    let before = out.len();
    if offsets.len() != n + 1 {
        out.push(Violation::OffsetsLength {
            array,
            expected: n + 1,
            actual: offsets.len(),
        });
        return false;
    }
    if offsets[0] != 0 {
        out.push(Violation::OffsetsStart {
            array,
            first: offsets[0],
        });
    }
    for col in 0..n {
        if offsets[col + 1] < offsets[col] {
            out.push(Violation::NonMonotonicOffsets { array, col });
        }
    }
    if offsets[n] as usize != indices.len() {
        out.push(Violation::OffsetsEnd {
            array,
            last: offsets[n],
            indices: indices.len(),
        });
    }
    for (position, &row) in indices.iter().enumerate() {
        if !rows.contains(&(row as usize)) {
            out.push(Violation::IndexOutOfRange {
                array,
                position,
                row,
            });
        }
    }
    if out.len() > before {
        return false;
    }
    for col in 0..n {
        let slice = &indices[offsets[col] as usize..offsets[col + 1] as usize];
        if slice.windows(2).any(|w| w[0] >= w[1]) {
            out.push(Violation::UnsortedColumn { array, col });
        }
    }
    out.len() == before
}

/// Sorted-merge check that two strictly increasing slices share no row.
pub(crate) fn first_common(a: &[u32], b: &[u32]) -> Option<u32> {
    let (mut i, mut j) = (0, 0);
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => return Some(a[i]),
        }
    }
    None
}

impl Tcsc {
    pub fn from_dense(w: &TernaryDense) -> Self {
        Self::from_dense_rows(w, 0..w.rows())
    }

    /// TCSC of the rows `rows` of `w`; row indices stay global.
    pub(crate) fn from_dense_rows(w: &TernaryDense, rows: std::ops::Range<usize>) -> Self {
        let n = w.cols();
        let mut t = Tcsc {
            k: w.rows(),
            n,
            col_start_pos: Vec::with_capacity(n + 1),
            row_index_pos: Vec::new(),
            col_start_neg: Vec::with_capacity(n + 1),
            row_index_neg: Vec::new(),
        };
        t.col_start_pos.push(0);
        t.col_start_neg.push(0);
        for col in 0..n {
            let (pos, neg) = w.signed_rows(col, rows.clone());
            t.row_index_pos.extend(pos);
            t.row_index_neg.extend(neg);
            t.col_start_pos.push(t.row_index_pos.len() as u32);
            t.col_start_neg.push(t.row_index_neg.len() as u32);
        }
        t
    }

    /// Assembles a TCSC from raw arrays, rejecting any that violate the format.
    pub fn from_parts(
        k: usize,
        n: usize,
        col_start_pos: Vec<u32>,
        row_index_pos: Vec<u32>,
        col_start_neg: Vec<u32>,
        row_index_neg: Vec<u32>,
    ) -> Result<Self> {
        let t = Self::from_parts_unchecked(
            k,
            n,
            col_start_pos,
            row_index_pos,
            col_start_neg,
            row_index_neg,
        );
        let report = t.validate();
        if let Some(first) = report.first() {
            return Err(Error::corrupt(format!(
                "{first} ({} violation(s))",
                report.len()
            )));
        }
        Ok(t)
    }

    /// Assembles a TCSC without checking it. Kernels may panic on an invalid one.
    pub fn from_parts_unchecked(
        k: usize,
        n: usize,
        col_start_pos: Vec<u32>,
        row_index_pos: Vec<u32>,
        col_start_neg: Vec<u32>,
        row_index_neg: Vec<u32>,
    ) -> Self {
        Tcsc {
            k,
            n,
            col_start_pos,
            row_index_pos,
            col_start_neg,
            row_index_neg,
        }
    }

    pub fn validate(&self) -> Vec<Violation> {
        self.validate_rows(0..self.k)
    }

    pub(crate) fn validate_rows(&self, rows: std::ops::Range<usize>) -> Vec<Violation> {
        let mut out = Vec::new();
        let pos_ok = validate_csc(
            "pos",
            &self.col_start_pos,
            &self.row_index_pos,
            self.n,
            rows.clone(),
            &mut out,
        );
        let neg_ok = validate_csc(
            "neg",
            &self.col_start_neg,
            &self.row_index_neg,
            self.n,
            rows,
            &mut out,
        );
        if pos_ok && neg_ok {
            for col in 0..self.n {
                if let Some(row) = first_common(self.pos_rows(col), self.neg_rows(col)) {
                    out.push(Violation::OverlappingSigns { col, row });
                }
            }
        }
        out
    }

    pub fn to_dense(&self) -> Result<TernaryDense> {
        let mut values = vec![0i8; self.k * self.n];
        self.scatter_into(&mut values)?;
        TernaryDense::new(self.k, self.n, values)
    }

    /// Writes this structure's entries into a row-major `k x n` buffer that
    /// must hold zeros at every touched position.
    pub(crate) fn scatter_into(&self, values: &mut [i8]) -> Result<()> {
        for col in 0..self.n {
            for (rows, sign) in [(self.pos_rows(col), 1i8), (self.neg_rows(col), -1i8)] {
                for &row in rows {
                    let row = row as usize;
                    if row >= self.k {
                        return Err(Error::corrupt(format!(
                            "row {row} out of range in column {col}"
                        )));
                    }
                    let slot = &mut values[row * self.n + col];
                    if *slot != 0 {
                        return Err(Error::corrupt(format!("entry ({row}, {col}) stored twice")));
                    }
                    *slot = sign;
                }
            }
        }
        Ok(())
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn pos_rows(&self, col: usize) -> &[u32] {
        &self.row_index_pos[self.col_start_pos[col] as usize..self.col_start_pos[col + 1] as usize]
    }

    #[inline]
    pub fn neg_rows(&self, col: usize) -> &[u32] {
        &self.row_index_neg[self.col_start_neg[col] as usize..self.col_start_neg[col + 1] as usize]
    }

    pub fn col_start_pos(&self) -> &[u32] {
        &self.col_start_pos
    }

    pub fn row_index_pos(&self) -> &[u32] {
        &self.row_index_pos
    }

    pub fn col_start_neg(&self) -> &[u32] {
        &self.col_start_neg
    }

    pub fn row_index_neg(&self) -> &[u32] {
        &self.row_index_neg
    }

    pub fn nnz(&self) -> usize {
        self.row_index_pos.len() + self.row_index_neg.len()
    }

    /// Exact in-memory size of the four arrays.
    pub fn format_bytes(&self) -> usize {
        INDEX_BYTES
            * (self.col_start_pos.len()
                + self.col_start_neg.len()
                + self.row_index_pos.len()
                + self.row_index_neg.len())
    }

    /// Size a TCSC with `n` columns and `nnz` nonzeros occupies.
    pub fn bytes_for(n: usize, nnz: usize) -> usize {
        INDEX_BYTES * (2 * (n + 1) + nnz)
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
    fn worked_example_arrays() {
        let t = Tcsc::from_dense(&worked_w());
        assert_eq!(t.col_start_pos(), &[0, 2, 2]);
        assert_eq!(t.row_index_pos(), &[0, 3]);
        assert_eq!(t.col_start_neg(), &[0, 1, 2]);
        assert_eq!(t.row_index_neg(), &[2, 1]);
        assert_eq!(t.to_dense().unwrap(), worked_w());
        assert_eq!(t.format_bytes(), 40);
        assert!(t.validate().is_empty());
    }

    #[test]
    fn all_zero_matrix() {
        let t = Tcsc::from_dense(&TernaryDense::zeros(3, 2).unwrap());
        assert_eq!(t.col_start_pos(), &[0, 0, 0]);
        assert!(t.row_index_pos().is_empty() && t.row_index_neg().is_empty());
        assert_eq!(t.format_bytes(), 24);
        assert_eq!(t.to_dense().unwrap(), TernaryDense::zeros(3, 2).unwrap());
    }

    #[test]
    fn format_bytes_large_half_density() {
        let w = gen_ternary(1024, 1024, SparsityLevel::HALF, 1).unwrap();
        let t = Tcsc::from_dense(&w);
        assert_eq!(t.format_bytes(), 2_105_352);
        assert_eq!(Tcsc::bytes_for(1024, 1024 * 512), 2_105_352);
    }

    #[test]
    fn validate_flags_non_monotonic_offsets() {
        let t =
            Tcsc::from_parts_unchecked(4, 2, vec![0, 2, 1], vec![0, 3], vec![0, 1, 2], vec![2, 1]);
        let report = t.validate();
        assert!(report.iter().any(|v| matches!(
            v,
            Violation::NonMonotonicOffsets {
                array: "pos",
                col: 1
            }
        )));
        assert!(report
            .iter()
            .any(|v| v.to_string().contains("non-monotonic offsets")));
    }

    #[test]
    fn validate_flags_out_of_range_index() {
        let t =
            Tcsc::from_parts_unchecked(4, 2, vec![0, 2, 2], vec![0, 4], vec![0, 1, 2], vec![2, 1]);
        let report = t.validate();
        assert!(report
            .iter()
            .any(|v| v.to_string().contains("index out of range")));
        assert!(
            Tcsc::from_parts(4, 2, vec![0, 2, 2], vec![0, 4], vec![0, 1, 2], vec![2, 1]).is_err()
        );
    }

    #[test]
    fn overlap_is_corruption() {
        let t = Tcsc::from_parts_unchecked(4, 1, vec![0, 1], vec![2], vec![0, 1], vec![2]);
        assert!(matches!(
            t.validate()[..],
            [Violation::OverlappingSigns { col: 0, row: 2 }]
        ));
        assert!(matches!(t.to_dense(), Err(Error::Corrupt(_))));
    }

    #[test]
    fn unsorted_column_is_reported() {
        let t = Tcsc::from_parts_unchecked(4, 1, vec![0, 2], vec![3, 0], vec![0, 0], vec![]);
        assert_eq!(
            t.validate(),
            vec![Violation::UnsortedColumn {
                array: "pos",
                col: 0
            }]
        );
    }
}
