//! Command-line front end.
//!
//! Exit codes: 0 success, 1 I/O or other failure, 2 usage error, 3 data
//! error, 4 work budget exceeded. Null tables are cached in the directory
//! named by `CINDEP_CACHE_DIR` (default `~/.cache/cindep`).

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::causal::{pc, CiOracle, OracleKind, PartialCorrelationOracle, RhoOracle};
use crate::citest::{run_test, transform_dataset, TestSpec, DEFAULT_MIN_N, DEFAULT_NULL_SEED, DEFAULT_REPS};
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::kernels::{BandwidthPolicy, KernelFamily, KernelSpec};
use crate::nulldist::{NullCache, NullKey, StatisticKind, CACHE_DIR_ENV};
use crate::rng::fresh_seed;
use crate::simbench::{
    bandwidth_sweep, dag_study, null_study, parse_models, size_power_run, BenchOptions, DagStudyConfig, Ingredient,
    Noise,
};

pub const EXIT_OK: i32 = 0;
pub const EXIT_OTHER: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_DATA: i32 = 3;
pub const EXIT_BUDGET: i32 = 4;

const AFTER_HELP: &str = "\
Exit codes: 0 success, 1 I/O or other failure, 2 usage error, 3 data error, 4 work budget exceeded.
Null tables are cached under $CINDEP_CACHE_DIR (default ~/.cache/cindep).";

#[derive(Debug, Parser)]
#[command(name = "cindep", version, about = "Distribution-free conditional independence testing", after_help = AFTER_HELP)]
struct Cli {
    #[command(flatten)]
    global: GlobalArgs,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Args, Serialize)]
struct GlobalArgs {
    /// Output document format.
    #[arg(long, value_enum, default_value_t = Format::Json, global = true)]
    format: Format,
    /// Write the output document here instead of stdout.
    #[arg(long, global = true)]
    output: Option<PathBuf>,
    /// Worker threads (default: all cores). Results do not depend on it.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Master seed; generated and echoed when omitted.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Suppress the row/column echo on stderr.
    #[arg(long, short, global = true)]
    quiet: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
enum Format {
    Json,
    Text,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Test x ⫫ y | z on columns of a CSV file.
    Test(TestArgs),
    /// Simulate (or load) a null table and write it out.
    Calibrate(CalibrateArgs),
    /// PC causal discovery over all columns of a CSV file.
    Pc(PcArgs),
    /// Simulation studies: size/power, bandwidth sweep, DAG recovery, null law.
    Bench(BenchArgs),
    /// Emit the (U, V, W) coordinates the test operates on.
    Transform(TransformArgs),
}

#[derive(Debug, Clone, Args, Serialize)]
struct DataArgs {
    /// CSV file with a header row.
    #[arg(long)]
    data: PathBuf,
    /// Columns holding discrete values.
    #[arg(long, value_delimiter = ',')]
    discrete: Vec<String>,
}

#[derive(Debug, Clone, Args, Serialize)]
struct MethodArgs {
    /// Significance level.
    #[arg(long, default_value_t = 0.05)]
    alpha: f64,
    /// Replicates in the null table.
    #[arg(long, default_value_t = DEFAULT_REPS)]
    reps: usize,
    /// Seed of the null table.
    #[arg(long, default_value_t = DEFAULT_NULL_SEED)]
    null_seed: u64,
    #[arg(long, value_enum, default_value_t = KernelArg::Gaussian)]
    kernel: KernelArg,
    /// Multiplier c of the rule-of-thumb bandwidth.
    #[arg(long, default_value_t = 1.0)]
    bandwidth_scale: f64,
    /// Fixed bandwidth for every conditioning coordinate (overrides the rule).
    #[arg(long)]
    bandwidth: Option<f64>,
    /// Smallest sample size accepted.
    #[arg(long, default_value_t = DEFAULT_MIN_N)]
    min_n: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
enum KernelArg {
    Gaussian,
    Epanechnikov,
}

impl MethodArgs {
    fn kernel(&self) -> KernelSpec {
        let family = match self.kernel {
            KernelArg::Gaussian => KernelFamily::Gaussian,
            KernelArg::Epanechnikov => KernelFamily::Epanechnikov,
        };
        KernelSpec::new(family, 2).expect("second-order kernels exist")
    }

    fn spec(&self, x: &[String], y: &[String], z: &[String], seed: u64) -> Result<TestSpec> {
        Ok(TestSpec::new(x.iter().cloned(), y.iter().cloned(), z.iter().cloned())
            .alpha(self.alpha)
            .kernel(self.kernel())
            .bandwidth(BandwidthPolicy::new(self.bandwidth_scale, self.bandwidth)?)
            .reps(self.reps)
            .seed(seed)
            .null_seed(self.null_seed)
            .min_n(self.min_n))
    }
}

#[derive(Debug, Clone, Args, Serialize)]
struct Selection {
    /// Columns of x.
    #[arg(long, value_delimiter = ',', required = true)]
    x: Vec<String>,
    /// Columns of y.
    #[arg(long, value_delimiter = ',', required = true)]
    y: Vec<String>,
    /// Conditioning columns; omit for the unconditional test.
    #[arg(long, value_delimiter = ',')]
    z: Vec<String>,
}

#[derive(Debug, Clone, Args, Serialize)]
struct TestArgs {
    #[command(flatten)]
    data: DataArgs,
    #[command(flatten)]
    select: Selection,
    #[command(flatten)]
    method: MethodArgs,
}

#[derive(Debug, Clone, Args, Serialize)]
struct TransformArgs {
    #[command(flatten)]
    data: DataArgs,
    #[command(flatten)]
    select: Selection,
    #[command(flatten)]
    method: MethodArgs,
}

#[derive(Debug, Clone, Args, Serialize)]
struct CalibrateArgs {
    /// Sample size.
    #[arg(long)]
    n: usize,
    /// Block dimensions p,q,r.
    #[arg(long, value_delimiter = ',', default_values_t = [1, 1, 1])]
    dims: Vec<usize>,
    /// Monte-Carlo replicates.
    #[arg(long, default_value_t = DEFAULT_REPS)]
    reps: usize,
    /// Statistic kind (default follows the dims).
    #[arg(long)]
    statistic: Option<String>,
}

#[derive(Debug, Clone, Args, Serialize)]
struct PcArgs {
    #[command(flatten)]
    data: DataArgs,
    #[command(flatten)]
    method: MethodArgs,
    /// Largest conditioning-set size.
    #[arg(long, default_value_t = 3)]
    max_depth: usize,
    /// Independence test: rho, or pcor (Fisher-z partial correlation).
    #[arg(long, default_value = "rho")]
    test: String,
    /// Also write a Graphviz rendering here.
    #[arg(long)]
    dot: Option<PathBuf>,
}

#[derive(Debug, Clone, Args, Serialize)]
struct BenchArgs {
    /// Models to run, e.g. M1,M2,M3.
    #[arg(long, default_value = "M1,M2,M3,M4,M5,M6")]
    models: String,
    /// Sample size of each dataset.
    #[arg(long, default_value_t = 100)]
    n: usize,
    /// Replicates per cell.
    #[arg(long, default_value_t = 500)]
    reps: usize,
    /// Levels at which rejection frequencies are reported.
    #[arg(long, value_delimiter = ',', default_values_t = [0.05, 0.10])]
    alphas: Vec<f64>,
    /// Bandwidth scales for a sweep, e.g. 0.5,1.0,1.5.
    #[arg(long, value_delimiter = ',')]
    sweep_c: Vec<f64>,
    /// Run the random-DAG recovery study instead.
    #[arg(long)]
    dag_study: bool,
    /// Nodes in the DAG study.
    #[arg(long, default_value_t = 5)]
    nodes: usize,
    /// Edge probability in the DAG study.
    #[arg(long, default_value_t = 0.4)]
    edge_prob: f64,
    /// Noise of the DAG study: normal or uniform.
    #[arg(long, default_value = "normal")]
    noise: String,
    /// Independence test of the DAG study: rho or pcor.
    #[arg(long, default_value = "rho")]
    test: String,
    /// Largest conditioning-set size in the DAG study.
    #[arg(long, default_value_t = 3)]
    max_depth: usize,
    /// Run the null-distribution study instead.
    #[arg(long)]
    null_study: bool,
    /// Statistic of the null study.
    #[arg(long, default_value = "rho_normalized")]
    statistic: String,
    /// Bandwidth scale of the null study.
    #[arg(long, default_value_t = 1.0)]
    bandwidth_scale: f64,
    /// Reference replicates of the null study.
    #[arg(long, default_value_t = 20_000)]
    reference_reps: usize,
    /// Replicates in each null table.
    #[arg(long, default_value_t = DEFAULT_REPS)]
    null_reps: usize,
    /// Seed of the null tables.
    #[arg(long, default_value_t = DEFAULT_NULL_SEED)]
    null_seed: u64,
    /// Include wall-clock timing (makes output run-dependent).
    #[arg(long)]
    timing: bool,
}

/// Output envelope shared by every subcommand.
#[derive(Serialize)]
struct Document<'a, C: Serialize, R: Serialize> {
    command: &'a str,
    version: &'a str,
    seed: u64,
    config: &'a C,
    result: R,
}

/// Reads a CSV file with a header row into a dataset. Row numbers in errors
/// count data rows from 1.
pub fn ingest_csv(path: &Path, discrete: &[String]) -> Result<Dataset> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .flexible(true)
        .from_path(path)?;
    let names: Vec<String> = reader.headers()?.iter().map(str::to_string).collect();
    if names.is_empty() || names.iter().all(String::is_empty) {
        return Err(Error::EmptyData);
    }
    let mut columns = vec![Vec::new(); names.len()];
    for (row, record) in reader.records().enumerate() {
        let record = record?;
        if let Some(extra) = record.get(names.len()) {
            return Err(Error::Parse {
                row: row + 1,
                column: format!("(cell {} beyond the header)", names.len() + 1),
                value: extra.to_string(),
            });
        }
        for (k, column) in columns.iter_mut().enumerate() {
            let cell = record.get(k).unwrap_or("");
            let value: f64 = cell.parse().map_err(|_| Error::Parse {
                row: row + 1,
                column: names[k].clone(),
                value: cell.to_string(),
            })?;
            if !value.is_finite() {
                return Err(Error::Parse {
                    row: row + 1,
                    column: names[k].clone(),
                    value: cell.to_string(),
                });
            }
            column.push(value);
        }
    }
    if columns[0].is_empty() {
        return Err(Error::EmptyData);
    }
    let kinds = vec![crate::data::ColumnKind::Continuous; names.len()];
    Dataset::new(names, columns, kinds)?.with_discrete(discrete)
}

/// Exit code for an error.
pub fn exit_code(err: &Error) -> i32 {
    match err.root() {
        Error::InvalidArgument(_) | Error::InvalidAlpha(_) | Error::DimensionMismatch(_) => EXIT_USAGE,
        Error::Budget { .. } => EXIT_BUDGET,
        Error::ConstantColumn(_)
        | Error::IsolatedPoint { .. }
        | Error::KindMismatch(_)
        | Error::MixedKinds(_)
        | Error::UnknownColumn(_)
        | Error::DuplicateColumn(_)
        | Error::InsufficientSample { .. }
        | Error::EmptyData
        | Error::Parse { .. }
        | Error::Csv(_)
        | Error::NodeMismatch(_) => EXIT_DATA,
        _ => EXIT_OTHER,
    }
}

/// Parses `args` (including the program name), runs the subcommand and
/// returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    let outcome = match cli.global.threads {
        Some(t) => match rayon::ThreadPoolBuilder::new().num_threads(t).build() {
            Ok(pool) => pool.install(|| dispatch(&cli)),
            Err(e) => Err(Error::InvalidArgument(format!("cannot start {t} worker threads: {e}"))),
        },
        None => dispatch(&cli),
    };
    match outcome {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("cindep: error: {e}");
            exit_code(&e)
        }
    }
}

fn dispatch(cli: &Cli) -> Result<()> {
    let g = &cli.global;
    let seed = g.seed.unwrap_or_else(fresh_seed);
    if g.seed.is_none() && !g.quiet {
        eprintln!("cindep: seed {seed}");
    }
    let cache = NullCache::from_env();
    match &cli.command {
        Command::Test(a) => cmd_test(g, seed, a, &cache),
        Command::Calibrate(a) => cmd_calibrate(g, seed, a, &cache),
        Command::Pc(a) => cmd_pc(g, seed, a, &cache),
        Command::Bench(a) => cmd_bench(g, seed, a, &cache),
        Command::Transform(a) => cmd_transform(g, seed, a),
    }
}

fn load(g: &GlobalArgs, a: &DataArgs) -> Result<Dataset> {
    let data = ingest_csv(&a.data, &a.discrete)?;
    if !g.quiet {
        eprintln!("cindep: read {} rows, {} columns from {}", data.n(), data.n_cols(), a.data.display());
    }
    Ok(data)
}

fn write_output(g: &GlobalArgs, text: &str) -> Result<()> {
    match &g.output {
        Some(path) => fs::write(path, text).map_err(|source| Error::Write {
            path: path.clone(),
            source,
        }),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn emit<C: Serialize, R: Serialize>(
    g: &GlobalArgs,
    command: &str,
    seed: u64,
    config: &C,
    result: R,
    text: impl FnOnce(&R) -> String,
) -> Result<()> {
    let body = match g.format {
        Format::Json => {
            let doc = Document {
                command,
                version: env!("CARGO_PKG_VERSION"),
                seed,
                config,
                result,
            };
            let mut s = serde_json::to_string_pretty(&doc)?;
            s.push('\n');
            s
        }
        Format::Text => format!("# {command}, seed {seed}\n{}", text(&result)),
    };
    write_output(g, &body)
}

fn cmd_test(g: &GlobalArgs, seed: u64, a: &TestArgs, cache: &NullCache) -> Result<()> {
    let data = load(g, &a.data)?;
    let s = &a.select;
    let spec = a.method.spec(&s.x, &s.y, &s.z, seed)?;
    let result = run_test(&data, &spec, cache)?;
    emit(g, "test", seed, a, result, |r| {
        let mut out = format!(
            "x: {}\ny: {}\nz: {}\nn: {}\nstatistic ({}): {:.6e}\np_value: {:.6}\nalpha: {}\nreject: {}\n",
            r.x_cols.join(","),
            r.y_cols.join(","),
            r.z_cols.join(","),
            r.n,
            r.statistic_kind,
            r.statistic.value,
            r.p_value,
            r.alpha,
            r.reject
        );
        for c in &r.critical_values {
            out += &format!("critical_value@{}: {:.6e}\n", c.alpha, c.value);
        }
        out
    })
}

fn cmd_transform(g: &GlobalArgs, seed: u64, a: &TransformArgs) -> Result<()> {
    let data = load(g, &a.data)?;
    let s = &a.select;
    let spec = a.method.spec(&s.x, &s.y, &s.z, seed)?;
    let (ts, kind) = transform_dataset(&data, &spec)?;
    #[derive(Serialize)]
    struct Out {
        data_kind: crate::data::ColumnKind,
        columns: Vec<String>,
        rows: Vec<Vec<f64>>,
        meta: crate::transforms::TransformMeta,
    }
    let mut columns = Vec::new();
    columns.extend((1..=ts.u.ncols()).map(|k| format!("u{k}")));
    columns.extend((1..=ts.v.ncols()).map(|k| format!("v{k}")));
    columns.extend((1..=ts.w.ncols()).map(|k| format!("w{k}")));
    let rows: Vec<Vec<f64>> = (0..ts.n())
        .map(|i| ts.u.row(i).iter().chain(ts.v.row(i).iter()).chain(ts.w.row(i).iter()).copied().collect())
        .collect();
    let out = Out {
        data_kind: kind,
        columns,
        rows,
        meta: ts.meta,
    };
    emit(g, "transform", seed, a, out, |o| {
        let mut text = o.columns.join(",") + "\n";
        for r in &o.rows {
            text += &r.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(",");
            text.push('\n');
        }
        text
    })
}

fn cmd_calibrate(g: &GlobalArgs, seed: u64, a: &CalibrateArgs, cache: &NullCache) -> Result<()> {
    let [p, q, r] = a.dims[..] else {
        return Err(Error::InvalidArgument(format!("--dims takes p,q,r, got {} values", a.dims.len())));
    };
    let dims = (p, q, r);
    let kind = match &a.statistic {
        Some(s) => s.parse()?,
        None => StatisticKind::for_dims(dims),
    };
    let table = cache.get_or_build(NullKey::new(a.n, dims, a.reps, seed, kind))?;
    if !g.quiet {
        if let Some(path) = cache.path_for(&table.key()) {
            eprintln!("cindep: table cached at {} (override with {CACHE_DIR_ENV})", path.display());
        }
    }
    let body = match g.format {
        Format::Json => table.to_json()? + "\n",
        Format::Text => {
            let q = |p: f64| table.stats[((p * table.stats.len() as f64).ceil() as usize).clamp(1, table.stats.len()) - 1];
            format!(
                "# calibrate, seed {seed}\nstatistic: {}\nn: {}\ndims: {},{},{}\nB: {}\nq50: {:.6e}\nq90: {:.6e}\nq95: {:.6e}\nq99: {:.6e}\n",
                table.statistic_kind, table.n, table.p, table.q, table.r, table.reps, q(0.5), q(0.9), q(0.95), q(0.99)
            )
        }
    };
    write_output(g, &body)
}

fn cmd_pc(g: &GlobalArgs, seed: u64, a: &PcArgs, cache: &NullCache) -> Result<()> {
    let data = load(g, &a.data)?;
    let names = data.names();
    let base = a.method.spec(&names[..1], &names[1..2.min(names.len())], &[], seed)?;
    let rho = RhoOracle::new(base, cache);
    let oracle: &dyn CiOracle = match a.test.parse::<OracleKind>()? {
        OracleKind::Rho => &rho,
        OracleKind::Pcor => &PartialCorrelationOracle,
    };
    let graph = pc(&data, a.method.alpha, a.max_depth, oracle)?;
    if let Some(path) = &a.dot {
        fs::write(path, graph.to_dot()).map_err(|source| Error::Write {
            path: path.clone(),
            source,
        })?;
    }
    let text = graph.to_adjacency_text();
    emit(g, "pc", seed, a, graph.to_document(), |_| text)
}

fn cmd_bench(g: &GlobalArgs, seed: u64, a: &BenchArgs, cache: &NullCache) -> Result<()> {
    let opts = BenchOptions {
        null_reps: a.null_reps,
        null_seed: a.null_seed,
        kernel: KernelSpec::default(),
        timing: a.timing,
    };
    if a.dag_study {
        let config = DagStudyConfig {
            nodes: a.nodes,
            edge_prob: a.edge_prob,
            n: a.n,
            noise: a.noise.parse::<Noise>()?,
            reps: a.reps,
            alpha: a.alphas.first().copied().unwrap_or(0.05),
            max_depth: a.max_depth,
            oracle: a.test.parse()?,
            seed,
            check_order: true,
        };
        let report = dag_study(&config, &opts, cache)?;
        return emit(g, "bench", seed, a, report, |r| r.to_text());
    }
    if a.null_study {
        let kind: StatisticKind = a.statistic.parse()?;
        let report = null_study(a.n, a.reps, &Ingredient::ALL, kind, a.bandwidth_scale, seed, a.reference_reps, cache)?;
        return emit(g, "bench", seed, a, report, |r| r.to_text());
    }
    let models = parse_models(&a.models)?;
    let report = if a.sweep_c.is_empty() {
        size_power_run(&models, a.n, &a.alphas, a.reps, seed, &opts, cache)?
    } else {
        bandwidth_sweep(&models, a.n, &a.sweep_c, &a.alphas, a.reps, seed, &opts, cache)?
    };
    emit(g, "bench", seed, a, report, |r| r.to_text())
}
