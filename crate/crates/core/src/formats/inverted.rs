//! Sign-in-index format: a +1 at row `i` is stored as `i`, a -1 as `!i`.

use crate::dense::TernaryDense;
use crate::error::{Error, Result};
use crate::tcsc::{validate_csc, INDEX_BYTES};

#[inline(always)]
pub fn encode_inverted(row: u32, sign: i8) -> i32 {
    let v = row as i32;
    if sign < 0 {
        !v
    } else {
        v
    }
}

/// Returns `(row, sign)`.
#[inline(always)]
pub fn decode_inverted(v: i32) -> (u32, i8) {
    if v < 0 {
        ((!v) as u32, -1)
    } else {
        (v as u32, 1)
    }
}

/// One merged, row-ordered index run per column.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InvertedTcsc {
    k: usize,
    n: usize,
    col_start: Vec<u32>,
    merged: Vec<i32>,
}

impl InvertedTcsc {
    pub fn from_dense(w: &TernaryDense) -> Result<Self> {
        let (k, n) = (w.rows(), w.cols());
        if k > i32::MAX as usize {
            return Err(Error::param(format!(
                "K={k} does not fit a signed 32-bit index"
            )));
        }
        let mut col_start = Vec::with_capacity(n + 1);
        let mut merged = Vec::new();
        col_start.push(0);
        for col in 0..n {
            for row in 0..k {
                let v = w.get(row, col);
                if v != 0 {
                    merged.push(encode_inverted(row as u32, v));
                }
            }
            col_start.push(merged.len() as u32);
        }
        Ok(InvertedTcsc {
            k,
            n,
            col_start,
            merged,
        })
    }

    pub fn from_parts(k: usize, n: usize, col_start: Vec<u32>, merged: Vec<i32>) -> Result<Self> {
        let t = InvertedTcsc {
            k,
            n,
            col_start,
            merged,
        };
        let rows: Vec<u32> = t.merged.iter().map(|&v| decode_inverted(v).0).collect();
        let mut report = Vec::new();
        validate_csc("merged", &t.col_start, &rows, n, 0..k, &mut report);
        if let Some(v) = report.first() {
            return Err(Error::corrupt(v.to_string()));
        }
        Ok(t)
    }

    #[inline]
    pub fn column(&self, col: usize) -> &[i32] {
        &self.merged[self.col_start[col] as usize..self.col_start[col + 1] as usize]
    }

    pub fn to_dense(&self) -> Result<TernaryDense> {
        let mut values = vec![0i8; self.k * self.n];
        for col in 0..self.n {
            for &v in self.column(col) {
                let (row, sign) = decode_inverted(v);
                if row as usize >= self.k {
                    return Err(Error::corrupt(format!(
                        "row {row} out of range in column {col}"
                    )));
                }
                values[row as usize * self.n + col] = sign;
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

    pub fn col_start(&self) -> &[u32] {
        &self.col_start
    }

    pub fn merged_indices(&self) -> &[i32] {
        &self.merged
    }

    pub fn format_bytes(&self) -> usize {
        INDEX_BYTES * (self.col_start.len() + self.merged.len())
    }
}
