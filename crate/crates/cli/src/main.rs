//! `tgemm`: generate, convert, verify and benchmark sparse ternary GEMM.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use ternary_gemm::bench::{
    execute_with_fault, grid_search, oi_table, run_bench, select_best, standard_k_sweep,
    verify_point, write_csv, write_oi_csv, BenchPlan, BenchPoint, GridSpec, KernelFn, Preset,
};
use ternary_gemm::io::{FileFormat, MatrixFile};
use ternary_gemm::kernels::execute;
use ternary_gemm::{gen_ternary, Error, GemmConfig, SparsityLevel, Variant};

const EXIT_VERIFY: u8 = 1;
const EXIT_USAGE: u8 = 2;
const EXIT_IO: u8 = 3;

#[derive(Parser)]
#[command(name = "tgemm", version, about = "Sparse ternary GEMM toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a random K x N ternary matrix.
    Gen(GenArgs),
    /// Re-encode a matrix file in another format.
    Convert(ConvertArgs),
    /// Check kernels against the dense oracle.
    Verify(VerifyArgs),
    /// Time kernels and write CSV.
    Bench(BenchArgs),
    /// Search unroll factors of the unrolled kernel.
    Gridsearch(GridArgs),
    /// Print the operational-intensity table of the base format.
    Oi(OiArgs),
}

#[derive(Args)]
struct GenArgs {
    #[arg(long = "K")]
    k: usize,
    #[arg(long = "N")]
    n: usize,
    /// Fraction of nonzeros, as `num/den`.
    #[arg(long, default_value = "1/4")]
    s: SparsityLevel,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output format; see `convert --to`.
    #[arg(long, default_value = "dense")]
    format: FileFormat,
    #[arg(long = "B")]
    block_size: Option<usize>,
    #[arg(long)]
    g: Option<usize>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct ConvertArgs {
    #[arg(long = "in")]
    input: PathBuf,
    /// dense, tcsc, blocked, interleaved, interleaved-blocked, inverted, compressed or symmetric.
    #[arg(long)]
    to: FileFormat,
    #[arg(long = "B")]
    block_size: Option<usize>,
    #[arg(long)]
    g: Option<usize>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct Tunables {
    /// Inner-loop unroll factor.
    #[arg(long = "UF", default_value_t = 12)]
    uf: usize,
    /// Rows of X per outer iteration.
    #[arg(long = "MR", default_value_t = 4)]
    mr: usize,
    /// Output columns per outer iteration.
    #[arg(long = "NR", default_value_t = 4)]
    nr: usize,
    /// Row-block size [default: min(K, 4096)].
    #[arg(long = "B")]
    block_size: Option<usize>,
    /// Interleave group size [default: 4 scalar, 2 vectorized].
    #[arg(long)]
    g: Option<usize>,
    /// PReLU slope for the vectorized kernels.
    #[arg(long, default_value_t = 0.25, conflicts_with = "no_prelu")]
    alpha: f64,
    /// Run the vectorized kernels without PReLU.
    #[arg(long)]
    no_prelu: bool,
}

impl Tunables {
    fn config(&self) -> GemmConfig {
        GemmConfig {
            inner_unroll: self.uf,
            outer_rows: self.mr,
            outer_cols: self.nr,
            block_size: self.block_size,
            group: self.g,
            alpha: (!self.no_prelu).then_some(self.alpha),
        }
    }
}

#[derive(Args)]
struct VerifyArgs {
    #[arg(long = "M", default_value_t = 13)]
    m: usize,
    #[arg(long = "K", default_value_t = 67)]
    k: usize,
    #[arg(long = "N", default_value_t = 12)]
    n: usize,
    #[arg(long, default_value = "1/4")]
    s: SparsityLevel,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Kernel to check; repeat for several [default: all].
    #[arg(long)]
    variant: Vec<Variant>,
    #[command(flatten)]
    tune: Tunables,
    #[arg(long, hide = true)]
    inject_fault: bool,
}

#[derive(Args)]
struct TimingArgs {
    #[arg(long, default_value_t = 5)]
    reps: usize,
    #[arg(long, default_value_t = 2)]
    warmup: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Nominal clock, used to report flops/cycle.
    #[arg(long)]
    freq_ghz: Option<f64>,
    /// Also count additions and multiplications.
    #[arg(long)]
    instrument: bool,
    /// CSV destination [default: stdout].
    #[arg(long)]
    out: Option<PathBuf>,
}

impl TimingArgs {
    fn plan(&self, points: Vec<BenchPoint>) -> BenchPlan {
        BenchPlan {
            warmup: self.warmup,
            reps: self.reps,
            seed: self.seed,
            freq_ghz: self.freq_ghz,
            instrument: self.instrument,
            ..BenchPlan::new(points)
        }
    }
}

#[derive(Args)]
struct BenchArgs {
    /// fig6, fig8, fig10 or grid; overrides the shape and variant flags.
    #[arg(long)]
    preset: Option<Preset>,
    #[arg(long = "M", default_value_t = 32)]
    m: usize,
    #[arg(long = "K", default_value_t = 1024)]
    k: usize,
    #[arg(long = "N", default_value_t = 1024)]
    n: usize,
    #[arg(long, default_value = "1/4")]
    s: SparsityLevel,
    /// Kernel to time; repeat for several.
    #[arg(long, default_value = "interleaved-blocked")]
    variant: Vec<Variant>,
    #[command(flatten)]
    tune: Tunables,
    #[command(flatten)]
    timing: TimingArgs,
}

#[derive(Args)]
struct GridArgs {
    /// Only `grid` is accepted; it is also the default.
    #[arg(long)]
    preset: Option<Preset>,
    #[arg(long = "M", default_value_t = 32)]
    m: usize,
    /// Comma-separated K values [default: 1024,2048,4096,8192,16384].
    #[arg(long = "K", value_delimiter = ',')]
    k: Vec<usize>,
    #[arg(long = "N", default_value_t = 1024)]
    n: usize,
    #[arg(long, default_value = "1/4")]
    s: SparsityLevel,
    /// Comma-separated unroll factors.
    #[arg(long = "UF", value_delimiter = ',', default_value = "1,2,4,8,12,16")]
    uf: Vec<usize>,
    /// Comma-separated outer row counts.
    #[arg(long = "MR", value_delimiter = ',', default_value = "1,2,4")]
    mr: Vec<usize>,
    #[arg(long = "NR", default_value_t = 4)]
    nr: usize,
    #[command(flatten)]
    timing: TimingArgs,
}

#[derive(Args)]
struct OiArgs {
    #[arg(long = "M", default_value_t = 64)]
    m: usize,
    #[arg(long = "N", default_value_t = 1024)]
    n: usize,
    /// Comma-separated K values [default: 1024,2048,4096,8192,16384].
    #[arg(long = "K", value_delimiter = ',')]
    k: Vec<usize>,
    /// Comma-separated sparsities [default: 1/2,1/4,1/8,1/16].
    #[arg(long, value_delimiter = ',')]
    s: Vec<SparsityLevel>,
    /// Write CSV instead of a table.
    #[arg(long)]
    out: Option<PathBuf>,
}

/// Failure with the process exit status it maps to.
struct Failure {
    code: u8,
    msg: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::Parameter(_) | Error::Dimension(_) => EXIT_USAGE,
            Error::Correctness { .. } => EXIT_VERIFY,
            Error::Corrupt(_)
            | Error::InvalidCode(_)
            | Error::Parse { .. }
            | Error::Csv(_)
            | Error::Io(_) => EXIT_IO,
        };
        Failure {
            code,
            msg: e.to_string(),
        }
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Error::from(e).into()
    }
}

type CmdResult = Result<(), Failure>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Gen(a) => cmd_gen(a),
        Command::Convert(a) => cmd_convert(a),
        Command::Verify(a) => cmd_verify(a),
        Command::Bench(a) => cmd_bench(a),
        Command::Gridsearch(a) => cmd_gridsearch(a),
        Command::Oi(a) => cmd_oi(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            if !f.msg.is_empty() {
                eprintln!("tgemm: {}", f.msg);
            }
            ExitCode::from(f.code)
        }
    }
}

fn usage(msg: impl Into<String>) -> Failure {
    Failure {
        code: EXIT_USAGE,
        msg: msg.into(),
    }
}

fn cmd_gen(a: GenArgs) -> CmdResult {
    let w = gen_ternary(a.k, a.n, a.s, a.seed)?;
    MatrixFile::convert(&w, a.format, a.block_size, a.g)?.write(&a.out)?;
    Ok(())
}

fn cmd_convert(a: ConvertArgs) -> CmdResult {
    let w = MatrixFile::read(&a.input)?.to_dense()?;
    MatrixFile::convert(&w, a.to, a.block_size, a.g)?.write(&a.out)?;
    Ok(())
}

fn cmd_verify(a: VerifyArgs) -> CmdResult {
    let variants = if a.variant.is_empty() {
        Variant::ALL.to_vec()
    } else {
        a.variant
    };
    let cfg = a.tune.config();
    let kernel: &KernelFn<'_> = if a.inject_fault {
        &execute_with_fault
    } else {
        &execute::<f32>
    };
    let mut failed = 0;
    for variant in variants {
        let point = BenchPoint {
            variant,
            m: a.m,
            k: a.k,
            n: a.n,
            sparsity: a.s,
            cfg,
        };
        match verify_point(&point, a.seed, 8, kernel)? {
            None => println!("PASS {variant}"),
            Some(diff) => {
                println!("FAIL {variant}: {diff}");
                failed += 1;
            }
        }
    }
    if failed > 0 {
        return Err(Failure {
            code: EXIT_VERIFY,
            msg: format!("{failed} variant(s) disagree with the oracle"),
        });
    }
    Ok(())
}

fn csv_out(path: &Option<PathBuf>) -> io::Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(io::stdout().lock()),
    })
}

fn cmd_bench(a: BenchArgs) -> CmdResult {
    let points = match a.preset {
        Some(p) => p.points(),
        None => {
            let cfg = a.tune.config();
            a.variant
                .iter()
                .map(|&variant| BenchPoint {
                    variant,
                    m: a.m,
                    k: a.k,
                    n: a.n,
                    sparsity: a.s,
                    cfg,
                })
                .collect()
        }
    };
    let records = run_bench(&a.timing.plan(points))?;
    write_csv(csv_out(&a.timing.out)?, &records)?;
    Ok(())
}

fn cmd_gridsearch(a: GridArgs) -> CmdResult {
    let spec = match a.preset {
        Some(Preset::Grid) => GridSpec::default(),
        Some(p) => {
            return Err(usage(format!(
                "gridsearch only supports --preset grid (got {p:?})"
            )))
        }
        None => GridSpec {
            ks: if a.k.is_empty() {
                standard_k_sweep()
            } else {
                a.k
            },
            unroll_factors: a.uf,
            outer_rows: a.mr,
            outer_cols: a.nr,
            m: a.m,
            n: a.n,
            sparsity: a.s,
        },
    };
    let result = grid_search(&spec, &a.timing.plan(Vec::new()))?;
    write_csv(csv_out(&a.timing.out)?, &result.records)?;
    for best in select_best(&result.records) {
        eprintln!(
            "K={}: best UF={} MR={} ({:.3e} flops/s)",
            best.k, best.uf, best.mr, best.flops_per_sec
        );
    }
    Ok(())
}

fn cmd_oi(a: OiArgs) -> CmdResult {
    let ks = if a.k.is_empty() {
        standard_k_sweep()
    } else {
        a.k
    };
    let sparsities = if a.s.is_empty() {
        SparsityLevel::STANDARD.to_vec()
    } else {
        a.s
    };
    if a.m == 0 || a.n == 0 || ks.contains(&0) {
        return Err(usage("dimensions must be positive"));
    }
    let rows = oi_table(a.m, a.n, &ks, &sparsities);

    if a.out.is_some() {
        write_oi_csv(csv_out(&a.out)?, &rows)?;
        return Ok(());
    }

    let mut out = io::stdout().lock();
    write!(out, "{:>8}", "s \\ K")?;
    for k in &ks {
        write!(out, "{k:>9}")?;
    }
    writeln!(out)?;
    for s in &sparsities {
        write!(out, "{:>8}", s.to_string())?;
        for k in &ks {
            let r = rows
                .iter()
                .find(|r| r.k == *k && r.sparsity_num == s.numer() && r.sparsity_den == s.denom());
            write!(out, "{:>9.2}", r.map_or(f64::NAN, |r| r.oi))?;
        }
        writeln!(out)?;
    }
    Ok(())
}
