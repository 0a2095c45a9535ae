//! Cost model, operational intensity, timing harness and grid search.
//!
//! Every benchmarked point is checked against the oracle before it is timed;
//! a wrong kernel aborts the run with [`Error::Correctness`] instead of
//! producing a number.

use std::hint::black_box;
use std::io::{Read, Write};
use std::str::FromStr;
use std::time::Instant;

use num_rational::Ratio;
use serde::{Deserialize, Serialize};

use crate::dense::{
    first_mismatch, gen_bias, gen_input, gen_ternary, oracle_gemm, BiasVector, DenseMatrix,
    Mismatch, SparsityLevel, TernaryDense,
};
use crate::error::{Error, Result};
use crate::instrument::{count_ops, Counted, OpCounts};
use crate::kernels::{execute, prepare, GemmConfig, InputOperand, SparseOperand, Variant};
use crate::scalar::Scalar;
use crate::tcsc::Tcsc;

/// Peak scalar throughput of the reference core, flops/cycle.
pub const SCALAR_PEAK_FLOPS_PER_CYCLE: f64 = 4.0;
/// Peak 4-lane throughput of the reference core, flops/cycle.
pub const VECTOR_PEAK_FLOPS_PER_CYCLE: f64 = 16.0;

/// Additions performed by the baseline kernel: one per stored nonzero per
/// row of X, plus the bias add per output.
pub fn flop_count(m: u64, n: u64, nnz: u64) -> u64 {
    m * n + m * nnz
}

/// Closed-form `M * N * (1 + s * K)`; `None` when it is not an integer.
pub fn model_cost(m: u64, k: u64, n: u64, s: SparsityLevel) -> Option<u64> {
    let s = Ratio::new(u64::from(s.numer()), u64::from(s.denom()));
    let cost = (Ratio::from_integer(1) + s * k) * (m * n);
    cost.is_integer().then(|| cost.to_integer())
}

/// Flops per byte of the sparse format plus X, Y and b, each counted once.
pub fn operational_intensity<T: Scalar>(
    m: usize,
    k: usize,
    n: usize,
    nnz: usize,
    format_bytes: usize,
) -> f64 {
    let flops = flop_count(m as u64, n as u64, nnz as u64) as f64;
    let bytes = format_bytes + T::BYTES * (m * k + m * n + n);
    flops / bytes as f64
}

/// One row of the operational-intensity table for the TCSC baseline.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OiRow {
    #[serde(rename = "M")]
    pub m: usize,
    #[serde(rename = "K")]
    pub k: usize,
    #[serde(rename = "N")]
    pub n: usize,
    pub sparsity_num: u32,
    pub sparsity_den: u32,
    pub flops: u64,
    pub format_bytes: usize,
    pub oi: f64,
}

/// TCSC operational intensity over a K x sparsity grid, using exact per-column
/// nonzero counts `round(s * K)`.
pub fn oi_table(m: usize, n: usize, ks: &[usize], sparsities: &[SparsityLevel]) -> Vec<OiRow> {
    let mut rows = Vec::with_capacity(ks.len() * sparsities.len());
    for &s in sparsities {
        for &k in ks {
            let nnz = n * s.nonzeros_per_column(k);
            let format_bytes = Tcsc::bytes_for(n, nnz);
            rows.push(OiRow {
                m,
                k,
                n,
                sparsity_num: s.numer(),
                sparsity_den: s.denom(),
                flops: flop_count(m as u64, n as u64, nnz as u64),
                format_bytes,
                oi: operational_intensity::<f32>(m, k, n, nnz, format_bytes),
            });
        }
    }
    rows
}

pub fn write_oi_csv<W: Write>(out: W, rows: &[OiRow]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

/// A single (variant, shape, sparsity, config) measurement request.
#[derive(Debug, Clone, PartialEq)]
pub struct BenchPoint {
    pub variant: Variant,
    pub m: usize,
    pub k: usize,
    pub n: usize,
    pub sparsity: SparsityLevel,
    pub cfg: GemmConfig,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchPlan {
    pub points: Vec<BenchPoint>,
    pub warmup: usize,
    pub reps: usize,
    pub seed: u64,
    /// X and b are integers in `[-int_range, int_range]`.
    pub int_range: u32,
    /// Nominal clock for deriving flops/cycle.
    pub freq_ghz: Option<f64>,
    /// Also run each point once over op-counting scalars.
    pub instrument: bool,
}

impl BenchPlan {
    pub fn new(points: Vec<BenchPoint>) -> Self {
        BenchPlan {
            points,
            warmup: 2,
            reps: 5,
            seed: 0,
            int_range: 8,
            freq_ghz: None,
            instrument: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.reps < 3 {
            return Err(Error::param(format!(
                "need at least 3 repetitions, got {}",
                self.reps
            )));
        }
        if self.int_range == 0 {
            return Err(Error::param("int_range must be at least 1"));
        }
        if let Some(f) = self.freq_ghz {
            if !(f.is_finite() && f > 0.0) {
                return Err(Error::param(format!("frequency must be positive, got {f}")));
            }
        }
        for p in &self.points {
            if p.m == 0 || p.k == 0 || p.n == 0 {
                return Err(Error::param("benchmark dimensions must be positive"));
            }
            p.cfg.validate()?;
        }
        Ok(())
    }
}

/// One CSV row of benchmark output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchRecord {
    pub variant: Variant,
    #[serde(rename = "M")]
    pub m: usize,
    #[serde(rename = "K")]
    pub k: usize,
    #[serde(rename = "N")]
    pub n: usize,
    pub sparsity_num: u32,
    pub sparsity_den: u32,
    #[serde(rename = "UF")]
    pub uf: Option<usize>,
    #[serde(rename = "MR")]
    pub mr: Option<usize>,
    #[serde(rename = "NR")]
    pub nr: Option<usize>,
    #[serde(rename = "B")]
    pub block_size: Option<usize>,
    pub g: Option<usize>,
    pub reps: usize,
    pub median_ns: u64,
    pub flops: u64,
    pub flops_per_sec: f64,
    pub flops_per_cycle: Option<f64>,
    pub adds: Option<u64>,
    pub mults: Option<u64>,
}

pub const CSV_HEADER: &str =
    "variant,M,K,N,sparsity_num,sparsity_den,UF,MR,NR,B,g,reps,median_ns,flops,flops_per_sec,flops_per_cycle,adds,mults";

impl BenchRecord {
    /// Record for `point` with the given timing; derived throughput fields
    /// are filled in from the cost model.
    pub fn new(
        point: &BenchPoint,
        nnz: usize,
        reps: usize,
        median_ns: u64,
        freq_ghz: Option<f64>,
    ) -> Self {
        let v = point.variant;
        let cfg = &point.cfg;
        let flops = flop_count(point.m as u64, point.n as u64, nnz as u64);
        let flops_per_sec = flops as f64 / (median_ns.max(1) as f64 * 1e-9);
        BenchRecord {
            variant: v,
            m: point.m,
            k: point.k,
            n: point.n,
            sparsity_num: point.sparsity.numer(),
            sparsity_den: point.sparsity.denom(),
            uf: v.uses_inner_unroll().then_some(cfg.inner_unroll),
            mr: v.uses_outer_unroll().then_some(cfg.outer_rows),
            nr: v.uses_outer_unroll().then_some(cfg.outer_cols),
            block_size: v.uses_block_size().then(|| cfg.block_size_for(point.k)),
            g: v.uses_group().then(|| cfg.group_for(v)),
            reps,
            median_ns,
            flops,
            flops_per_sec,
            flops_per_cycle: freq_ghz.map(|f| flops_per_sec / (f * 1e9)),
            adds: None,
            mults: None,
        }
    }
}

pub fn write_csv<W: Write>(out: W, records: &[BenchRecord]) -> Result<()> {
    let mut w = csv::WriterBuilder::new()
        .has_headers(false)
        .from_writer(out);
    w.write_record(CSV_HEADER.split(','))?;
    for r in records {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_csv<R: Read>(input: R) -> Result<Vec<BenchRecord>> {
    let mut r = csv::Reader::from_reader(input);
    let header: Vec<String> = r.headers()?.iter().map(str::to_owned).collect();
    if header.join(",") != CSV_HEADER {
        return Err(Error::Parse {
            offset: 0,
            msg: format!("unexpected CSV header '{}'", header.join(",")),
        });
    }
    r.deserialize()
        .map(|rec| rec.map_err(Error::from))
        .collect()
}

/// Middle sample; the mean of the two middle samples for even counts.
pub fn median_ns(samples: &mut [u64]) -> u64 {
    assert!(!samples.is_empty(), "median of no samples");
    samples.sort_unstable();
    let mid = samples.len() / 2;
    if samples.len() % 2 == 1 {
        samples[mid]
    } else {
        (samples[mid - 1] + samples[mid]) / 2
    }
}

/// Signature of a kernel runner, replaceable for testing the harness itself.
pub type KernelFn<'a> = dyn Fn(
        Variant,
        &SparseOperand,
        &InputOperand<f32>,
        &BiasVector<f32>,
        &GemmConfig,
    ) -> Result<DenseMatrix<f32>>
    + 'a;

pub fn run_bench(plan: &BenchPlan) -> Result<Vec<BenchRecord>> {
    run_bench_with(plan, &execute::<f32>)
}

/// [`run_bench`] with a caller-supplied kernel runner.
pub fn run_bench_with(plan: &BenchPlan, kernel: &KernelFn<'_>) -> Result<Vec<BenchRecord>> {
    plan.validate()?;
    plan.points
        .iter()
        .map(|p| run_point(plan, p, kernel))
        .collect()
}

/// Builds the inputs of `point` from `seed`, runs `kernel` once and compares
/// it with the oracle. `Ok(None)` means the outputs are bit-identical.
pub fn verify_point(
    point: &BenchPoint,
    seed: u64,
    int_range: u32,
    kernel: &KernelFn<'_>,
) -> Result<Option<Mismatch>> {
    let fixture = Fixture::new(point, seed, int_range)?;
    fixture.check(point, kernel)
}

/// Runs the real kernel, then perturbs one output entry. Lets callers
/// exercise the failure path of verification end to end.
pub fn execute_with_fault(
    variant: Variant,
    w: &SparseOperand,
    x: &InputOperand<f32>,
    bias: &BiasVector<f32>,
    cfg: &GemmConfig,
) -> Result<DenseMatrix<f32>> {
    let mut y = execute(variant, w, x, bias, cfg)?;
    let (m, n) = (y.rows(), y.cols());
    let i = (m / 2) * n + n / 2;
    y.as_mut_slice()[i] += 1.0;
    Ok(y)
}

struct Fixture {
    w: TernaryDense,
    operand: SparseOperand,
    input: InputOperand<f32>,
    bias: BiasVector<f32>,
}

impl Fixture {
    fn new(point: &BenchPoint, seed: u64, int_range: u32) -> Result<Self> {
        let w = gen_ternary(point.k, point.n, point.sparsity, seed)?;
        let x: DenseMatrix<f32> = gen_input(point.m, point.k, seed, int_range)?;
        let bias: BiasVector<f32> = gen_bias(point.n, seed, int_range)?;
        let operand = prepare(point.variant, &w, &point.cfg)?;
        Ok(Fixture {
            w,
            operand,
            input: InputOperand::new(x),
            bias,
        })
    }

    fn check(&self, point: &BenchPoint, kernel: &KernelFn<'_>) -> Result<Option<Mismatch>> {
        let alpha = point.cfg.alpha_for(point.variant).map(|a| a as f32);
        let expected = oracle_gemm(&self.input.plain, &self.w, &self.bias, alpha)?;
        let actual = kernel(
            point.variant,
            &self.operand,
            &self.input,
            &self.bias,
            &point.cfg,
        )?;
        Ok(first_mismatch(&expected, &actual))
    }
}

fn run_point(plan: &BenchPlan, point: &BenchPoint, kernel: &KernelFn<'_>) -> Result<BenchRecord> {
    let fixture = Fixture::new(point, plan.seed, plan.int_range)?;
    if let Some(mismatch) = fixture.check(point, kernel)? {
        return Err(Error::Correctness {
            variant: point.variant.to_string(),
            mismatch,
        });
    }
    let Fixture {
        w,
        operand,
        input,
        bias,
    } = fixture;

    for _ in 0..plan.warmup {
        black_box(kernel(point.variant, &operand, &input, &bias, &point.cfg)?);
    }
    let mut samples = Vec::with_capacity(plan.reps);
    for _ in 0..plan.reps {
        let start = Instant::now();
        let y = kernel(
            point.variant,
            black_box(&operand),
            black_box(&input),
            &bias,
            &point.cfg,
        )?;
        samples.push(start.elapsed().as_nanos() as u64);
        black_box(y);
    }
    let mut record = BenchRecord::new(
        point,
        w.nnz(),
        plan.reps,
        median_ns(&mut samples),
        plan.freq_ghz,
    );

    if plan.instrument {
        let counts = count_point(point, &operand, &input, &bias)?;
        record.adds = Some(counts.adds);
        record.mults = Some(counts.mults);
    }
    Ok(record)
}

fn count_point(
    point: &BenchPoint,
    operand: &SparseOperand,
    input: &InputOperand<f32>,
    bias: &BiasVector<f32>,
) -> Result<OpCounts> {
    let x = InputOperand::new(input.plain.map(Counted));
    let b = bias.map(Counted);
    let (y, counts) = count_ops(|| execute(point.variant, operand, &x, &b, &point.cfg));
    y?;
    Ok(counts)
}

/// Parameters of an unroll-factor grid search over the unrolled TCSC kernel.
#[derive(Debug, Clone, PartialEq)]
pub struct GridSpec {
    pub ks: Vec<usize>,
    pub unroll_factors: Vec<usize>,
    pub outer_rows: Vec<usize>,
    pub outer_cols: usize,
    pub m: usize,
    pub n: usize,
    pub sparsity: SparsityLevel,
}

/// `K = 1024 .. 16384` in powers of two.
pub fn standard_k_sweep() -> Vec<usize> {
    (10..=14).map(|e| 1usize << e).collect()
}

impl Default for GridSpec {
    /// 25% nonzeros, M=32, N=1024, K from 1024 to 16384.
    fn default() -> Self {
        GridSpec {
            ks: standard_k_sweep(),
            unroll_factors: vec![1, 2, 4, 8, 12, 16],
            outer_rows: vec![1, 2, 4],
            outer_cols: 4,
            m: 32,
            n: 1024,
            sparsity: SparsityLevel::QUARTER,
        }
    }
}

impl GridSpec {
    pub fn points(&self) -> Result<Vec<BenchPoint>> {
        if self.ks.is_empty() || self.unroll_factors.is_empty() || self.outer_rows.is_empty() {
            return Err(Error::param(
                "grid search needs at least one K, unroll factor and row count",
            ));
        }
        let mut points = Vec::new();
        for &k in &self.ks {
            for &uf in &self.unroll_factors {
                for &mr in &self.outer_rows {
                    points.push(BenchPoint {
                        variant: Variant::Unrolled,
                        m: self.m,
                        k,
                        n: self.n,
                        sparsity: self.sparsity,
                        cfg: GemmConfig {
                            inner_unroll: uf,
                            outer_rows: mr,
                            outer_cols: self.outer_cols,
                            ..GemmConfig::default()
                        },
                    });
                }
            }
        }
        Ok(points)
    }
}

/// Fastest configuration found for one K.
#[derive(Debug, Clone, PartialEq)]
pub struct GridBest {
    pub k: usize,
    pub uf: usize,
    pub mr: usize,
    pub flops_per_sec: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridResult {
    pub records: Vec<BenchRecord>,
    pub best: Vec<GridBest>,
}

/// Highest-throughput (UF, MR) per K, in order of first appearance; the
/// earlier record wins ties.
pub fn select_best(records: &[BenchRecord]) -> Vec<GridBest> {
    let mut best: Vec<GridBest> = Vec::new();
    for r in records {
        let cand = GridBest {
            k: r.k,
            uf: r.uf.unwrap_or(1),
            mr: r.mr.unwrap_or(1),
            flops_per_sec: r.flops_per_sec,
        };
        match best.iter_mut().find(|b| b.k == r.k) {
            Some(b) if cand.flops_per_sec > b.flops_per_sec => *b = cand,
            Some(_) => {}
            None => best.push(cand),
        }
    }
    best
}

/// Runs every cell of `spec` with the timing settings of `base` (its points
/// are ignored) and picks the best configuration per K.
pub fn grid_search(spec: &GridSpec, base: &BenchPlan) -> Result<GridResult> {
    let plan = BenchPlan {
        points: spec.points()?,
        ..base.clone()
    };
    let records = run_bench(&plan)?;
    let best = select_best(&records);
    Ok(GridResult { records, best })
}

/// Canned benchmark setups.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Preset {
    /// Scalar variants over K at 50% nonzeros (M=32, N=1024).
    Fig6,
    /// Baseline against the blocked+interleaved kernel over K at each of the
    /// four sparsities (M=64, N=4096).
    Fig8,
    /// Vectorized kernels against the baseline over K at 25% (M=N=1024).
    Fig10,
    /// The unroll-factor grid of [`GridSpec::default`].
    Grid,
}

impl FromStr for Preset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "fig6" => Ok(Preset::Fig6),
            "fig8" => Ok(Preset::Fig8),
            "fig10" => Ok(Preset::Fig10),
            "grid" => Ok(Preset::Grid),
            _ => Err(Error::param(format!(
                "unknown preset '{s}' (expected fig6, fig8, fig10 or grid)"
            ))),
        }
    }
}

impl Preset {
    pub fn points(self) -> Vec<BenchPoint> {
        let point = |variant, m, k, n, sparsity| BenchPoint {
            variant,
            m,
            k,
            n,
            sparsity,
            cfg: GemmConfig::default(),
        };
        match self {
            Preset::Fig6 => standard_k_sweep()
                .into_iter()
                .flat_map(|k| {
                    [
                        Variant::Base,
                        Variant::Unrolled,
                        Variant::Blocked,
                        Variant::InterleavedBlocked,
                    ]
                    .map(|v| point(v, 32, k, 1024, SparsityLevel::HALF))
                })
                .collect(),
            Preset::Fig8 => SparsityLevel::STANDARD
                .into_iter()
                .flat_map(|s| {
                    standard_k_sweep().into_iter().flat_map(move |k| {
                        [Variant::Base, Variant::InterleavedBlocked]
                            .map(|v| point(v, 64, k, 4096, s))
                    })
                })
                .collect(),
            Preset::Fig10 => std::iter::once(512)
                .chain(standard_k_sweep())
                .flat_map(|k| {
                    [
                        Variant::Base,
                        Variant::InterleavedBlocked,
                        Variant::Vertical,
                        Variant::Horizontal,
                        Variant::VectorizedOptimal,
                    ]
                    .map(|v| point(v, 1024, k, 1024, SparsityLevel::QUARTER))
                })
                .collect(),
            Preset::Grid => GridSpec::default()
                .points()
                .expect("default grid is non-empty"),
        }
    }
}
