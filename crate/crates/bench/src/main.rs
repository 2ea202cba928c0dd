use std::fs;
use std::io::{self, BufReader, BufWriter, Write};
use std::path::PathBuf;
use std::process;

use clap::{Args, Parser, Subcommand};

use fagp::datagen::{load_csv, read_inputs_csv, Domain, DEFAULT_NOISE_STD};
use fagp::posterior::{PriorMean, WoodburyPath};
use fagp::GpModel;
use fagp_bench::bench::run_bench;
use fagp_bench::config::{parse_bytes, parse_eigen_counts, BackendSpec, BenchConfig};
use fagp_bench::error::{BenchError, ExitCode, Result};
use fagp_bench::generate_datasets;
use fagp_bench::plotdata::{aggregate, plot_file_name, write_plot};
use fagp_bench::predict::{predict, write_predictions, Method};
use fagp_bench::verify::{run_verify, Level, VerifyOptions};

/// Mercer-expansion Gaussian process: data generation, timing sweeps, verification.
#[derive(Parser, Debug)]
#[command(name = "fagp-bench", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Write synthetic training datasets.
    Generate(GenerateArgs),
    /// Time eigensystem and posterior-mean phases over a (backend, p, n) sweep.
    Bench(BenchArgs),
    /// Run the numerical self-checks.
    Verify(VerifyArgs),
    /// Fit on a training CSV and predict at the inputs of another CSV.
    Predict(PredictArgs),
    /// Aggregate a results CSV into one table per input dimension.
    Plotdata(PlotArgs),
}

#[derive(Args, Debug)]
struct GenerateArgs {
    #[arg(long, default_value_t = 10_000, value_parser = clap::value_parser!(u64).range(1..))]
    n_samples: u64,
    /// Input dimensions, comma separated.
    #[arg(long, value_delimiter = ',', default_value = "1", value_parser = clap::value_parser!(u64).range(1..))]
    dim: Vec<u64>,
    /// First seed.
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Number of consecutive seeds per dimension.
    #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u64).range(1..))]
    seeds: u64,
    #[arg(long, default_value_t = DEFAULT_NOISE_STD)]
    noise_std: f64,
    /// Sampling interval `lo,hi` for every dimension.
    #[arg(long, default_value = "-1,1")]
    domain: String,
    #[arg(long, default_value = ".")]
    out_dir: PathBuf,
}

#[derive(Args, Debug)]
struct BenchArgs {
    /// `key = value` file; flags given on the command line override it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    n_train: Option<usize>,
    #[arg(long)]
    n_test: Option<usize>,
    #[arg(long, value_delimiter = ',')]
    dims: Option<Vec<usize>>,
    /// Per-dimension eigenvalue counts, e.g. `1:8,16;2:3,5`.
    #[arg(long)]
    eigen_counts: Option<String>,
    #[arg(long)]
    reps: Option<usize>,
    /// e.g. `serial,parallel:8`.
    #[arg(long)]
    backends: Option<String>,
    #[arg(long, value_delimiter = ',')]
    epsilon: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',')]
    rho: Option<Vec<f64>>,
    #[arg(long)]
    noise_var: Option<f64>,
    #[arg(long)]
    seed_base: Option<u64>,
    /// Bytes, or with KiB/MiB/GiB suffix.
    #[arg(long)]
    memory_cap: Option<String>,
    #[arg(long, default_value = "bench_results.csv")]
    out: PathBuf,
    #[arg(long)]
    quiet: bool,
}

#[derive(Args, Debug)]
struct VerifyArgs {
    #[arg(long, default_value = "fast")]
    level: String,
    #[arg(long, hide = true)]
    inject_fault: bool,
}

#[derive(Args, Debug)]
struct PredictArgs {
    #[arg(long)]
    train: PathBuf,
    /// CSV with header `x1,...,xp` (a trailing `y` column is ignored).
    #[arg(long)]
    test: PathBuf,
    /// Output CSV; standard output when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_delimiter = ',', default_value = "1.0")]
    epsilon: Vec<f64>,
    #[arg(long, value_delimiter = ',', default_value = "1.0")]
    rho: Vec<f64>,
    #[arg(long, default_value_t = 0.0025)]
    noise_var: f64,
    #[arg(long, default_value_t = 10)]
    n_eigen: usize,
    /// Constant prior mean.
    #[arg(long)]
    prior_mean: Option<f64>,
    #[arg(long, default_value = "serial")]
    backend: String,
    /// Use the exact O(N³) posterior instead of the expansion.
    #[arg(long)]
    exact: bool,
    /// Solve through Λ⁻¹ + ΦᵀΦ/σ² instead of scaled features.
    #[arg(long)]
    literal: bool,
    /// Also write the posterior variance.
    #[arg(long)]
    variance: bool,
}

#[derive(Args, Debug)]
struct PlotArgs {
    /// Results CSV written by `bench`.
    #[arg(long)]
    input: PathBuf,
    #[arg(long, default_value = ".")]
    out_dir: PathBuf,
}

fn main() {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() {
                ExitCode::Usage
            } else {
                ExitCode::Success
            };
            let _ = e.print();
            process::exit(code as i32);
        }
    };
    let result = match cli.command {
        Command::Generate(a) => cmd_generate(a),
        Command::Bench(a) => cmd_bench(a),
        Command::Verify(a) => cmd_verify(a),
        Command::Predict(a) => cmd_predict(a),
        Command::Plotdata(a) => cmd_plotdata(a),
    };
    if let Err(e) = result {
        eprintln!("error: {e}");
        process::exit(e.exit_code() as i32);
    }
}

fn parse_domain(s: &str) -> Result<Domain> {
    let (lo, hi) = s
        .split_once(',')
        .ok_or_else(|| BenchError::usage(format!("domain `{s}` is not `lo,hi`")))?;
    let num = |v: &str| {
        v.trim()
            .parse::<f64>()
            .map_err(|_| BenchError::usage(format!("bad domain bound `{v}`")))
    };
    Ok(Domain::new(num(lo)?, num(hi)?)?)
}

fn cmd_generate(a: GenerateArgs) -> Result<()> {
    let domain = parse_domain(&a.domain)?;
    let dims: Vec<usize> = a.dim.iter().map(|&d| d as usize).collect();
    let paths = generate_datasets(
        &a.out_dir,
        a.n_samples as usize,
        &dims,
        a.seed,
        a.seeds,
        a.noise_std,
        domain,
    )?;
    for p in paths {
        println!("{}", p.display());
    }
    Ok(())
}

fn bench_config(a: &BenchArgs) -> Result<BenchConfig> {
    let mut cfg = BenchConfig::default();
    if let Some(path) = &a.config {
        let text = fs::read_to_string(path).map_err(|e| BenchError::io(format!("reading {}", path.display()), e))?;
        cfg.apply_text(&text)?;
    }
    if let Some(v) = a.n_train {
        cfg.n_train = v;
    }
    if let Some(v) = a.n_test {
        cfg.n_test = v;
    }
    if let Some(v) = &a.dims {
        cfg.dims = v.clone();
    }
    if let Some(v) = &a.eigen_counts {
        cfg.eigen_counts = parse_eigen_counts(v)?;
    }
    if let Some(v) = a.reps {
        cfg.reps = v;
    }
    if let Some(v) = &a.backends {
        cfg.backends = v.split(',').map(str::parse).collect::<Result<_>>()?;
    }
    if let Some(v) = &a.epsilon {
        cfg.epsilon = v.clone();
    }
    if let Some(v) = &a.rho {
        cfg.rho = v.clone();
    }
    if let Some(v) = a.noise_var {
        cfg.noise_var = v;
    }
    if let Some(v) = a.seed_base {
        cfg.seed_base = v;
    }
    if let Some(v) = &a.memory_cap {
        cfg.memory_cap = parse_bytes(v)?;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn cmd_bench(a: BenchArgs) -> Result<()> {
    let cfg = bench_config(&a)?;
    let file = fs::File::create(&a.out).map_err(|e| BenchError::io(format!("creating {}", a.out.display()), e))?;
    let quiet = a.quiet;
    let summary = run_bench(&cfg, BufWriter::new(file), |run| {
        if !quiet {
            eprintln!(
                "{:<12} p={} n={:<4} rep={:<3} total {:.4}s",
                run.backend,
                run.p,
                run.n,
                run.rep,
                run.record.total()
            );
        }
    })?;
    for (backend, p, n) in &summary.skipped {
        eprintln!("skipped {backend} p={p} n={n}: over memory cap");
    }
    for (p, n, label, s) in summary.speedups() {
        println!("speedup p={p} n={n} {label} vs serial: {s:.2}x");
    }
    println!("wrote {} rows to {}", summary.rows_written, a.out.display());
    Ok(())
}

fn cmd_verify(a: VerifyArgs) -> Result<()> {
    let level: Level = a.level.parse()?;
    let results = run_verify(
        level,
        &VerifyOptions {
            inject_fault: a.inject_fault,
        },
    );
    println!("{:<22} {:<4}  {:>8}  detail", "check", "", "time");
    for r in &results {
        println!("{r}");
    }
    let failed: Vec<&str> = results.iter().filter(|r| !r.passed).map(|r| r.name).collect();
    if failed.is_empty() {
        Ok(())
    } else {
        Err(BenchError::Verification(failed.join(", ")))
    }
}

fn cmd_predict(a: PredictArgs) -> Result<()> {
    let train = load_csv(&a.train).map_err(|e| match e {
        fagp::Error::Io(io) => BenchError::io(format!("reading {}", a.train.display()), io),
        other => other.into(),
    })?;
    let file = fs::File::open(&a.test).map_err(|e| BenchError::io(format!("opening {}", a.test.display()), e))?;
    let xstar = read_inputs_csv(BufReader::new(file))?;
    let p = train.dim();
    let cfg = BenchConfig {
        epsilon: a.epsilon.clone(),
        rho: a.rho.clone(),
        ..BenchConfig::default()
    };
    let mut model = GpModel::new(cfg.kernel(p)?, a.noise_var, a.n_eigen)?;
    if let Some(c) = a.prior_mean {
        model = model.with_mean(PriorMean::Constant(c));
    }
    if a.literal {
        model = model.with_path(WoodburyPath::Literal);
    }
    let backend = a.backend.parse::<BackendSpec>()?.build()?;
    let method = if a.exact { Method::Exact } else { Method::Fagp };
    let result = predict(&train, &xstar, &model, &backend, method, a.variance)?;

    let io_err = |e| BenchError::io("writing predictions", e);
    match &a.out {
        Some(path) => {
            let f = fs::File::create(path).map_err(|e| BenchError::io(format!("creating {}", path.display()), e))?;
            write_predictions(&xstar, &result, BufWriter::new(f)).map_err(io_err)
        }
        None => match write_predictions(&xstar, &result, io::stdout().lock()) {
            Err(e) if e.kind() == io::ErrorKind::BrokenPipe => Ok(()),
            other => other.map_err(io_err),
        },
    }
}

fn cmd_plotdata(a: PlotArgs) -> Result<()> {
    let file = fs::File::open(&a.input).map_err(|e| BenchError::io(format!("opening {}", a.input.display()), e))?;
    let agg = aggregate(BufReader::new(file))?;
    fs::create_dir_all(&a.out_dir).map_err(|e| BenchError::io(format!("creating {}", a.out_dir.display()), e))?;
    for (p, rows) in &agg {
        let path = a.out_dir.join(plot_file_name(*p));
        let f = fs::File::create(&path).map_err(|e| BenchError::io(format!("creating {}", path.display()), e))?;
        let mut w = BufWriter::new(f);
        write_plot(rows, &mut w)
            .and_then(|_| w.flush())
            .map_err(|e| BenchError::io(format!("writing {}", path.display()), e))?;
        println!("{}", path.display());
    }
    Ok(())
}
