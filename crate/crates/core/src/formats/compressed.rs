//! Base-3 value compression: five ternary entries per byte.
//!
//! A 5-tuple `(v0..v4)` maps to `sum((v_i + 1) * 3^i)`, so all -1 is code 0
//! and all +1 is code 242. Codes 243..=255 are unused (5.08% of the byte).

use crate::dense::TernaryDense;
use crate::error::{Error, Result};

pub const TRITS_PER_CODE: usize = 5;
/// Number of valid codes, `3^5`.
pub const CODES: usize = 243;

const fn build_lut() -> [[i8; TRITS_PER_CODE]; CODES] {
    let mut lut = [[0i8; TRITS_PER_CODE]; CODES];
    let mut code = 0;
    while code < CODES {
        let mut rest = code;
        let mut i = 0;
        while i < TRITS_PER_CODE {
            lut[code][i] = (rest % 3) as i8 - 1;
            rest /= 3;
            i += 1;
        }
        code += 1;
    }
    lut
}

/// Code to 5-tuple decode table.
pub static DECODE_LUT: [[i8; TRITS_PER_CODE]; CODES] = build_lut();

pub fn compress5(vals: [i8; TRITS_PER_CODE]) -> Result<u8> {
    let mut code = 0u32;
    for &v in vals.iter().rev() {
        if !(-1..=1).contains(&v) {
            return Err(Error::param(format!("{v} is not a ternary value")));
        }
        code = code * 3 + (v + 1) as u32;
    }
    Ok(code as u8)
}

pub fn decompress5(code: u8) -> Result<[i8; TRITS_PER_CODE]> {
    DECODE_LUT
        .get(code as usize)
        .copied()
        .ok_or(Error::InvalidCode(code))
}

/// Column-major codes, `ceil(K / 5)` per column, each column zero-padded to a
/// multiple of five rows.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CompressedTcsc {
    k: usize,
    n: usize,
    codes: Vec<u8>,
}

impl CompressedTcsc {
    pub fn from_dense(w: &TernaryDense) -> Self {
        let (k, n) = (w.rows(), w.cols());
        let per_col = k.div_ceil(TRITS_PER_CODE);
        let mut codes = Vec::with_capacity(per_col * n);
        for col in 0..n {
            for chunk in 0..per_col {
                let mut tuple = [0i8; TRITS_PER_CODE];
                for (i, t) in tuple.iter_mut().enumerate() {
                    let row = chunk * TRITS_PER_CODE + i;
                    if row < k {
                        *t = w.get(row, col);
                    }
                }
                codes.push(compress5(tuple).expect("ternary matrix holds only ternary values"));
            }
        }
        CompressedTcsc { k, n, codes }
    }

    /// Rejects codes >= 243 and nonzero padding beyond row `k`.
    pub fn from_parts(k: usize, n: usize, codes: Vec<u8>) -> Result<Self> {
        let t = Self::from_parts_unchecked(k, n, codes)?;
        t.to_dense()?;
        Ok(t)
    }

    /// Checks only the code count; kernels report invalid codes at run time.
    pub fn from_parts_unchecked(k: usize, n: usize, codes: Vec<u8>) -> Result<Self> {
        if codes.len() != k.div_ceil(TRITS_PER_CODE) * n {
            return Err(Error::corrupt(format!(
                "{} codes for a {k}x{n} matrix, expected {}",
                codes.len(),
                k.div_ceil(TRITS_PER_CODE) * n
            )));
        }
        Ok(CompressedTcsc { k, n, codes })
    }

    pub fn codes_per_column(&self) -> usize {
        self.k.div_ceil(TRITS_PER_CODE)
    }

    #[inline]
    pub fn column(&self, col: usize) -> &[u8] {
        let per = self.codes_per_column();
        &self.codes[col * per..(col + 1) * per]
    }

    pub fn to_dense(&self) -> Result<TernaryDense> {
        let mut values = vec![0i8; self.k * self.n];
        for col in 0..self.n {
            for (chunk, &code) in self.column(col).iter().enumerate() {
                for (i, v) in decompress5(code)?.into_iter().enumerate() {
                    let row = chunk * TRITS_PER_CODE + i;
                    if row < self.k {
                        values[row * self.n + col] = v;
                    } else if v != 0 {
                        return Err(Error::corrupt(format!("nonzero padding in column {col}")));
                    }
                }
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

    pub fn codes(&self) -> &[u8] {
        &self.codes
    }

    /// Code bytes only; the shared decode table is not counted.
    pub fn format_bytes(&self) -> usize {
        self.codes.len()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dense::{gen_ternary, SparsityLevel};

    #[test]
    fn anchor_codes() {
        assert_eq!(compress5([-1; 5]).unwrap(), 0);
        assert_eq!(compress5([1; 5]).unwrap(), 242);
        assert_eq!(compress5([0; 5]).unwrap(), 121);
        assert_eq!(compress5([1, 0, -1, 0, 1]).unwrap(), 194);
    }

    #[test]
    fn exhaustive_inverse() {
        for code in 0..=255u8 {
            match decompress5(code) {
                Ok(t) => assert_eq!(compress5(t).unwrap(), code),
                Err(Error::InvalidCode(c)) => assert!(c >= 243 && c == code),
                Err(e) => panic!("unexpected error {e}"),
            }
        }
    }

    #[test]
    fn wasted_fraction() {
        let waste = (256.0 - CODES as f64) / 256.0;
        assert!((waste - 0.0508).abs() < 5e-5);
    }

    #[test]
    fn padding_examples() {
        let w = TernaryDense::from_columns(&[vec![1, 0, -1, 0, 1]]).unwrap();
        assert_eq!(CompressedTcsc::from_dense(&w).codes(), &[194]);
        let w = TernaryDense::zeros(3, 1).unwrap();
        assert_eq!(CompressedTcsc::from_dense(&w).codes(), &[121]);
    }

    #[test]
    fn round_trip_k_not_multiple_of_five() {
        for k in [1, 4, 6, 13, 99] {
            let w = gen_ternary(k, 7, SparsityLevel::HALF, k as u64).unwrap();
            let t = CompressedTcsc::from_dense(&w);
            assert_eq!(t.codes().len(), k.div_ceil(5) * 7);
            assert_eq!(t.to_dense().unwrap(), w);
        }
    }

    #[test]
    fn from_parts_rejects_bad_codes_and_padding() {
        assert!(matches!(
            CompressedTcsc::from_parts(5, 1, vec![243]),
            Err(Error::InvalidCode(243))
        ));
        // K=3: rows 3 and 4 are padding and must decode to zero.
        assert!(CompressedTcsc::from_parts(3, 1, vec![242]).is_err());
        assert!(CompressedTcsc::from_parts(3, 1, vec![121, 121]).is_err());
    }
}
