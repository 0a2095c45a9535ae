//! Dense operands, deterministic generators and the reference GEMM.

use std::fmt;
use std::str::FromStr;

use num_rational::Ratio;
use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::scalar::{prelu, Scalar};

// Independent ChaCha streams so W, X and b never share random draws for a seed.
const STREAM_TERNARY: u64 = 1;
const STREAM_INPUT: u64 = 2;
const STREAM_BIAS: u64 = 3;

fn rng_for(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Dense `K x N` matrix over {-1, 0, +1}, row-major.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct TernaryDense {
    rows: usize,
    cols: usize,
    values: Vec<i8>,
}

impl TernaryDense {
    pub fn new(rows: usize, cols: usize, values: Vec<i8>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::param(format!(
                "ternary matrix must be non-empty, got {rows}x{cols}"
            )));
        }
        if values.len() != rows * cols {
            return Err(Error::dims(format!(
                "{rows}x{cols} ternary matrix needs {} values, got {}",
                rows * cols,
                values.len()
            )));
        }
        if let Some(pos) = values.iter().position(|v| !(-1..=1).contains(v)) {
            return Err(Error::param(format!(
                "entry {} at ({}, {}) is not ternary",
                values[pos],
                pos / cols,
                pos % cols
            )));
        }
        Ok(TernaryDense { rows, cols, values })
    }

    pub fn zeros(rows: usize, cols: usize) -> Result<Self> {
        Self::new(rows, cols, vec![0; rows * cols])
    }

    /// Builds a matrix from its columns, each of length `rows`.
    pub fn from_columns(columns: &[Vec<i8>]) -> Result<Self> {
        let cols = columns.len();
        let rows = columns.first().map_or(0, Vec::len);
        if columns.iter().any(|c| c.len() != rows) {
            return Err(Error::dims("columns have differing lengths"));
        }
        let mut values = vec![0; rows * cols];
        for (j, col) in columns.iter().enumerate() {
            for (i, &v) in col.iter().enumerate() {
                values[i * cols + j] = v;
            }
        }
        Self::new(rows, cols, values)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> i8 {
        self.values[row * self.cols + col]
    }

    pub fn values(&self) -> &[i8] {
        &self.values
    }

    pub fn column(&self, col: usize) -> impl Iterator<Item = i8> + '_ {
        (0..self.rows).map(move |r| self.get(r, col))
    }

    /// Ascending row indices of the +1 and -1 entries of `col` within `rows`.
    pub(crate) fn signed_rows(
        &self,
        col: usize,
        rows: std::ops::Range<usize>,
    ) -> (Vec<u32>, Vec<u32>) {
        let mut pos = Vec::new();
        let mut neg = Vec::new();
        for r in rows {
            match self.get(r, col) {
                1 => pos.push(r as u32),
                -1 => neg.push(r as u32),
                _ => {}
            }
        }
        (pos, neg)
    }

    pub fn nnz(&self) -> usize {
        self.values.iter().filter(|&&v| v != 0).count()
    }
}

/// Row-major dense matrix of scalars.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseMatrix<T> {
    rows: usize,
    cols: usize,
    data: Vec<T>,
}

impl<T: Scalar> DenseMatrix<T> {
    pub fn new(rows: usize, cols: usize, data: Vec<T>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::dims(format!(
                "{rows}x{cols} matrix needs {} values, got {}",
                rows * cols,
                data.len()
            )));
        }
        if let Some(pos) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::param(format!(
                "non-finite value at flat index {pos}"
            )));
        }
        Ok(DenseMatrix { rows, cols, data })
    }

    /// Wraps kernel output without the finiteness scan.
    pub(crate) fn from_raw(rows: usize, cols: usize, data: Vec<T>) -> Self {
        debug_assert_eq!(data.len(), rows * cols);
        DenseMatrix { rows, cols, data }
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        DenseMatrix {
            rows,
            cols,
            data: vec![T::zero(); rows * cols],
        }
    }

    pub fn from_rows<R: AsRef<[T]>>(rows: &[R]) -> Result<Self> {
        let cols = rows.first().map_or(0, |r| r.as_ref().len());
        if rows.iter().any(|r| r.as_ref().len() != cols) {
            return Err(Error::dims("rows have differing lengths"));
        }
        let data = rows
            .iter()
            .flat_map(|r| r.as_ref().iter().copied())
            .collect();
        Self::new(rows.len(), cols, data)
    }

    /// Each row is a copy of `bias`.
    pub fn broadcast_rows(rows: usize, bias: &BiasVector<T>) -> Self {
        let mut data = Vec::with_capacity(rows * bias.len());
        for _ in 0..rows {
            data.extend_from_slice(bias.as_slice());
        }
        DenseMatrix {
            rows,
            cols: bias.len(),
            data,
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> T {
        self.data[row * self.cols + col]
    }

    #[inline]
    pub fn row(&self, row: usize) -> &[T] {
        &self.data[row * self.cols..(row + 1) * self.cols]
    }

    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    pub(crate) fn as_mut_slice(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn map<U: Scalar>(&self, f: impl Fn(T) -> U) -> DenseMatrix<U> {
        DenseMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn into_vec(self) -> Vec<T> {
        self.data
    }
}

/// Bias added to every row of `XW`.
#[derive(Debug, Clone, PartialEq)]
pub struct BiasVector<T>(Vec<T>);

impl<T: Scalar> BiasVector<T> {
    pub fn new(values: Vec<T>) -> Result<Self> {
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::param("bias contains non-finite values"));
        }
        Ok(BiasVector(values))
    }

    pub fn zeros(len: usize) -> Self {
        BiasVector(vec![T::zero(); len])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[T] {
        &self.0
    }

    pub fn map<U: Scalar>(&self, f: impl Fn(T) -> U) -> BiasVector<U> {
        BiasVector(self.0.iter().map(|&v| f(v)).collect())
    }
}

/// Fraction of non-zero entries in W, kept as an exact rational.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct SparsityLevel(Ratio<u32>);

impl SparsityLevel {
    pub const HALF: SparsityLevel = SparsityLevel(Ratio::new_raw(1, 2));
    pub const QUARTER: SparsityLevel = SparsityLevel(Ratio::new_raw(1, 4));
    pub const EIGHTH: SparsityLevel = SparsityLevel(Ratio::new_raw(1, 8));
    pub const SIXTEENTH: SparsityLevel = SparsityLevel(Ratio::new_raw(1, 16));

    /// The four levels swept by the benchmark presets.
    pub const STANDARD: [SparsityLevel; 4] =
        [Self::HALF, Self::QUARTER, Self::EIGHTH, Self::SIXTEENTH];

    pub fn new(numer: u32, denom: u32) -> Result<Self> {
        if denom == 0 || numer == 0 || numer > denom {
            return Err(Error::param(format!(
                "sparsity {numer}/{denom} is outside (0, 1]"
            )));
        }
        Ok(SparsityLevel(Ratio::new(numer, denom)))
    }

    pub fn numer(&self) -> u32 {
        *self.0.numer()
    }

    pub fn denom(&self) -> u32 {
        *self.0.denom()
    }

    pub fn as_f64(&self) -> f64 {
        f64::from(self.numer()) / f64::from(self.denom())
    }

    /// `round(s * k)`, ties rounded up.
    pub fn nonzeros_per_column(&self, k: usize) -> usize {
        let scaled = Ratio::new(self.numer() as u64 * k as u64, self.denom() as u64);
        scaled.round().to_integer() as usize
    }
}

impl fmt::Display for SparsityLevel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.numer(), self.denom())
    }
}

impl FromStr for SparsityLevel {
    type Err = Error;

    /// Accepts `num/den` or a bare integer (`1`).
    fn from_str(s: &str) -> Result<Self> {
        let parse = |t: &str| {
            t.trim()
                .parse::<u32>()
                .map_err(|_| Error::param(format!("bad sparsity '{s}', expected num/den")))
        };
        match s.split_once('/') {
            Some((n, d)) => SparsityLevel::new(parse(n)?, parse(d)?),
            None => SparsityLevel::new(parse(s)?, 1),
        }
    }
}

/// Random `k x n` ternary matrix with exactly `round(s * k)` nonzeros per
/// column, `ceil(nz / 2)` of them +1 and the rest -1, at distinct rows.
pub fn gen_ternary(k: usize, n: usize, s: SparsityLevel, seed: u64) -> Result<TernaryDense> {
    if k == 0 || n == 0 {
        return Err(Error::param(format!(
            "dimensions must be positive, got K={k} N={n}"
        )));
    }
    let mut rng = rng_for(seed, STREAM_TERNARY);
    let nz = s.nonzeros_per_column(k);
    let n_pos = nz.div_ceil(2);
    let mut values = vec![0i8; k * n];
    for col in 0..n {
        for (i, row) in index::sample(&mut rng, k, nz).into_iter().enumerate() {
            values[row * n + col] = if i < n_pos { 1 } else { -1 };
        }
    }
    TernaryDense::new(k, n, values)
}

/// `m x k` matrix of integers drawn uniformly from `[-int_range, int_range]`.
///
/// Integer-valued inputs keep every kernel's sum exact as long as
/// `k * int_range < 2^24` (f32), so differently ordered kernels agree bit for bit.
pub fn gen_input<T: Scalar>(
    m: usize,
    k: usize,
    seed: u64,
    int_range: u32,
) -> Result<DenseMatrix<T>> {
    if int_range < 1 {
        return Err(Error::param("int_range must be at least 1"));
    }
    let mut rng = rng_for(seed, STREAM_INPUT);
    let r = i64::from(int_range);
    let data = (0..m * k)
        .map(|_| T::from_i64(rng.gen_range(-r..=r)))
        .collect();
    DenseMatrix::new(m, k, data)
}

/// `m x k` matrix drawn uniformly from `[-1, 1)`.
pub fn gen_input_real<T: Scalar>(m: usize, k: usize, seed: u64) -> Result<DenseMatrix<T>> {
    let mut rng = rng_for(seed, STREAM_INPUT);
    let data = (0..m * k)
        .map(|_| T::from_f64(rng.gen_range(-1.0..1.0)))
        .collect();
    DenseMatrix::new(m, k, data)
}

/// Integer-valued bias drawn from `[-int_range, int_range]`.
pub fn gen_bias<T: Scalar>(n: usize, seed: u64, int_range: u32) -> Result<BiasVector<T>> {
    let mut rng = rng_for(seed, STREAM_BIAS);
    let r = i64::from(int_range);
    BiasVector::new((0..n).map(|_| T::from_i64(rng.gen_range(-r..=r))).collect())
}

pub(crate) fn check_dims<T: Scalar>(
    x: &DenseMatrix<T>,
    k: usize,
    n: usize,
    bias: &BiasVector<T>,
) -> Result<()> {
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

/// Reference `Y = XW + b`, optionally followed by PReLU with slope `alpha`.
///
/// Walks the dense W and only ever adds or subtracts X entries, so it shares
/// no code or data layout with the sparse kernels it validates.
pub fn oracle_gemm<T: Scalar>(
    x: &DenseMatrix<T>,
    w: &TernaryDense,
    bias: &BiasVector<T>,
    alpha: Option<T>,
) -> Result<DenseMatrix<T>> {
    check_dims(x, w.rows(), w.cols(), bias)?;
    let (m, k, n) = (x.rows(), w.rows(), w.cols());
    let mut y = DenseMatrix::zeros(m, n);
    let mut acc = vec![T::zero(); n];
    for row in 0..m {
        acc.fill(T::zero());
        let xr = x.row(row);
        for (kk, &xv) in xr.iter().enumerate().take(k) {
            let wrow = &w.values()[kk * n..(kk + 1) * n];
            for (a, &wv) in acc.iter_mut().zip(wrow) {
                match wv {
                    1 => *a += xv,
                    -1 => *a -= xv,
                    _ => {}
                }
            }
        }
        let out = &mut y.as_mut_slice()[row * n..(row + 1) * n];
        for ((o, &a), &b) in out.iter_mut().zip(&acc).zip(bias.as_slice()) {
            let v = a + b;
            *o = match alpha {
                Some(al) => prelu(v, al),
                None => v,
            };
        }
    }
    Ok(y)
}

/// First disagreement between an expected and an actual result.
#[derive(Debug, Clone, PartialEq)]
pub enum Mismatch {
    Shape {
        expected: (usize, usize),
        actual: (usize, usize),
    },
    Value {
        row: usize,
        col: usize,
        expected: f64,
        actual: f64,
    },
}

impl fmt::Display for Mismatch {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Mismatch::Shape { expected, actual } => write!(
                f,
                "shape {}x{} expected, got {}x{}",
                expected.0, expected.1, actual.0, actual.1
            ),
            Mismatch::Value {
                row,
                col,
                expected,
                actual,
            } => {
                write!(
                    f,
                    "first difference at (m={row}, n={col}): expected {expected}, got {actual}"
                )
            }
        }
    }
}

fn first_mismatch_by<T: Scalar>(
    expected: &DenseMatrix<T>,
    actual: &DenseMatrix<T>,
    same: impl Fn(T, T) -> bool,
) -> Option<Mismatch> {
    if (expected.rows(), expected.cols()) != (actual.rows(), actual.cols()) {
        return Some(Mismatch::Shape {
            expected: (expected.rows(), expected.cols()),
            actual: (actual.rows(), actual.cols()),
        });
    }
    let cols = expected.cols().max(1);
    expected
        .as_slice()
        .iter()
        .zip(actual.as_slice())
        .position(|(&e, &a)| !same(e, a))
        .map(|i| Mismatch::Value {
            row: i / cols,
            col: i % cols,
            expected: expected.as_slice()[i].as_f64(),
            actual: actual.as_slice()[i].as_f64(),
        })
}

/// Bit-for-bit comparison.
pub fn first_mismatch<T: Scalar>(
    expected: &DenseMatrix<T>,
    actual: &DenseMatrix<T>,
) -> Option<Mismatch> {
    first_mismatch_by(expected, actual, |e, a| e.to_bits_u64() == a.to_bits_u64())
}

/// Comparison under a relative tolerance, for real-valued inputs where
/// kernels sum in different orders.
pub fn first_mismatch_within<T: Scalar>(
    expected: &DenseMatrix<T>,
    actual: &DenseMatrix<T>,
    rel_tol: f64,
) -> Option<Mismatch> {
    first_mismatch_by(expected, actual, |e, a| {
        let (e, a) = (e.as_f64(), a.as_f64());
        (e - a).abs() <= rel_tol * e.abs().max(a.abs()).max(1.0)
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn worked_w() -> TernaryDense {
        TernaryDense::from_columns(&[vec![1, 0, -1, 1], vec![0, -1, 0, 0]]).unwrap()
    }

    #[test]
    fn gen_ternary_small_cases() {
        for seed in 0..20 {
            let w = gen_ternary(4, 1, SparsityLevel::HALF, seed).unwrap();
            let col: Vec<i8> = w.column(0).collect();
            assert_eq!(col.iter().filter(|&&v| v == 1).count(), 1);
            assert_eq!(col.iter().filter(|&&v| v == -1).count(), 1);
        }
        let w = gen_ternary(8, 3, SparsityLevel::QUARTER, 7).unwrap();
        assert_eq!(w.nnz(), 6);
        for c in 0..3 {
            let col: Vec<i8> = w.column(c).collect();
            assert_eq!(col.iter().filter(|&&v| v == 1).count(), 1);
            assert_eq!(col.iter().filter(|&&v| v == -1).count(), 1);
        }
        let one = SparsityLevel::new(1, 1).unwrap();
        let w = gen_ternary(2, 5, one, 3).unwrap();
        for c in 0..5 {
            let mut col: Vec<i8> = w.column(c).collect();
            col.sort();
            assert_eq!(col, vec![-1, 1]);
        }
    }

    #[test]
    fn gen_ternary_is_deterministic() {
        let a = gen_ternary(64, 16, SparsityLevel::EIGHTH, 42).unwrap();
        let b = gen_ternary(64, 16, SparsityLevel::EIGHTH, 42).unwrap();
        let c = gen_ternary(64, 16, SparsityLevel::EIGHTH, 43).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn sparsity_rejects_out_of_range() {
        assert!(SparsityLevel::new(0, 4).is_err());
        assert!(SparsityLevel::new(5, 4).is_err());
        assert!(SparsityLevel::new(1, 0).is_err());
        assert!("3/2".parse::<SparsityLevel>().is_err());
        assert_eq!(
            "2/8".parse::<SparsityLevel>().unwrap(),
            SparsityLevel::QUARTER
        );
        assert_eq!(SparsityLevel::QUARTER.to_string(), "1/4");
    }

    #[test]
    fn nonzero_count_rounds_to_nearest() {
        assert_eq!(SparsityLevel::QUARTER.nonzeros_per_column(10), 3); // 2.5 -> 3
        assert_eq!(SparsityLevel::EIGHTH.nonzeros_per_column(11), 1); // 1.375 -> 1
        assert_eq!(SparsityLevel::SIXTEENTH.nonzeros_per_column(4), 0);
    }

    #[test]
    fn gen_input_contract() {
        let x: DenseMatrix<f32> = gen_input(1, 1, 0, 1).unwrap();
        assert!([-1.0, 0.0, 1.0].contains(&x.get(0, 0)));
        let x: DenseMatrix<f32> = gen_input(2, 3, 9, 8).unwrap();
        assert!(x
            .as_slice()
            .iter()
            .all(|v| v.fract() == 0.0 && v.abs() <= 8.0));
        let y: DenseMatrix<f32> = gen_input(2, 3, 9, 8).unwrap();
        assert_eq!(x, y);
        assert!(gen_input::<f32>(2, 2, 0, 0).is_err());
    }

    #[test]
    fn oracle_worked_example() {
        let x = DenseMatrix::from_rows(&[[1.0f32, 2.0, 3.0, 4.0]]).unwrap();
        let b = BiasVector::new(vec![10.0, 20.0]).unwrap();
        let y = oracle_gemm(&x, &worked_w(), &b, None).unwrap();
        assert_eq!(y.as_slice(), &[12.0, 18.0]);

        let b = BiasVector::new(vec![10.0, 0.0]).unwrap();
        let y = oracle_gemm(&x, &worked_w(), &b, Some(0.5)).unwrap();
        assert_eq!(y.as_slice(), &[12.0, -1.0]);
    }

    #[test]
    fn oracle_zero_w_broadcasts_bias() {
        let x: DenseMatrix<f64> = gen_input(3, 5, 1, 4).unwrap();
        let b = BiasVector::new(vec![1.5, -2.0]).unwrap();
        let y = oracle_gemm(&x, &TernaryDense::zeros(5, 2).unwrap(), &b, None).unwrap();
        assert_eq!(y, DenseMatrix::broadcast_rows(3, &b));
    }

    #[test]
    fn oracle_identity_column_selects_row() {
        let x: DenseMatrix<f32> = gen_input(4, 6, 5, 100).unwrap();
        let mut cols = vec![vec![0i8; 6]; 6];
        for (r, col) in cols.iter_mut().enumerate() {
            col[(r * 5) % 6] = 1;
        }
        let w = TernaryDense::from_columns(&cols).unwrap();
        let y = oracle_gemm(&x, &w, &BiasVector::zeros(6), None).unwrap();
        for m in 0..4 {
            for n in 0..6 {
                assert_eq!(y.get(m, n), x.get(m, (n * 5) % 6));
            }
        }
    }

    #[test]
    fn oracle_rejects_bad_dims() {
        let x: DenseMatrix<f32> = DenseMatrix::zeros(1, 3);
        assert!(matches!(
            oracle_gemm(&x, &worked_w(), &BiasVector::zeros(2), None),
            Err(Error::Dimension(_))
        ));
        let x: DenseMatrix<f32> = DenseMatrix::zeros(1, 4);
        assert!(oracle_gemm(&x, &worked_w(), &BiasVector::zeros(3), None).is_err());
    }

    #[test]
    fn ternary_rejects_out_of_set_values() {
        assert!(TernaryDense::new(1, 2, vec![1, 2]).is_err());
        assert!(TernaryDense::new(0, 2, vec![]).is_err());
    }

    #[test]
    fn mismatch_reports_position() {
        let a = DenseMatrix::from_rows(&[[1.0f32, 2.0], [3.0, 4.0]]).unwrap();
        let b = DenseMatrix::from_rows(&[[1.0f32, 2.0], [3.0, 5.0]]).unwrap();
        assert_eq!(
            first_mismatch(&a, &b),
            Some(Mismatch::Value {
                row: 1,
                col: 1,
                expected: 4.0,
                actual: 5.0
            })
        );
        assert_eq!(first_mismatch(&a, &a), None);
        assert_eq!(first_mismatch_within(&a, &b, 0.3), None);
    }
}
