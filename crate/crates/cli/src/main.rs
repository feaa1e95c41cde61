//! `embedcap`: batch front end emitting CSV.

use std::fmt::Write as _;
use std::io::Write as _;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use embedcap::capacity::build_system_matrix;
use embedcap::ordering::{convex_order_check, default_x_grid, predict_capacity_order, CapacityRelation};
use embedcap::traces::{
    capacity_error_table, parse_trace, scramble, select_tranches, write_capacity_csv, DEFAULT_OBSERVATION_LIMIT,
};
use embedcap::{rng_from_seed, MethodSpec, ModelSpec};
use rayon::prelude::*;

/// Seed used when neither `--seed` nor `EMBEDCAP_SEED` is given.
const DEFAULT_SEED: u64 = 20_070_401;

#[derive(Parser)]
#[command(name = "embedcap", version, about = "Embedding capacity of renewal traffic under bounded-delay matching")]
struct Cli {
    /// Seed for Monte Carlo methods and trace scrambling.
    #[arg(long, global = true, env = "EMBEDCAP_SEED", default_value_t = DEFAULT_SEED)]
    seed: u64,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Capacity at one delay.
    Capacity(CapacityArgs),
    /// Capacity over a grid of delays for one or more methods.
    Sweep(SweepArgs),
    /// Variability order of two models and the implied capacity relation.
    Order(OrderArgs),
    /// Entries of the linear system.
    Matrix(MatrixArgs),
    /// Empirical vs theoretical capacity on a pair of packet traces.
    Trace(TraceArgs),
}

#[derive(Args)]
struct Output {
    /// Write CSV here instead of standard output.
    #[arg(long, short)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct CapacityArgs {
    /// Model descriptor, e.g. `erlang:xi=2` or `weibull:b=0.6@100`.
    #[arg(long)]
    model: ModelSpec,
    /// Normalized delay δ = λΔ.
    #[arg(long, conflicts_with = "max_delay", required_unless_present = "max_delay")]
    delta: Option<f64>,
    /// Maximum delay Δ in time units; δ = rate · Δ.
    #[arg(long)]
    max_delay: Option<f64>,
    /// Packet rate λ (defaults to the model's `@rate`).
    #[arg(long, requires = "max_delay")]
    rate: Option<f64>,
    /// zero | linear:N | mc-chain:STEPS | mc-bgm:POINTS
    #[arg(long, default_value = "zero")]
    method: MethodSpec,
    #[command(flatten)]
    out: Output,
}

#[derive(Args)]
struct SweepArgs {
    #[arg(long)]
    model: ModelSpec,
    #[arg(long)]
    delta_min: f64,
    #[arg(long)]
    delta_max: f64,
    #[arg(long, default_value_t = 20)]
    points: usize,
    /// Log-spaced grid instead of linear.
    #[arg(long)]
    log: bool,
    /// Comma-separated methods.
    #[arg(long, value_delimiter = ',', default_value = "zero")]
    methods: Vec<MethodSpec>,
    #[command(flatten)]
    out: Output,
}

#[derive(Args)]
struct OrderArgs {
    model1: ModelSpec,
    model2: ModelSpec,
}

#[derive(Args)]
struct MatrixArgs {
    #[arg(long)]
    model: ModelSpec,
    #[arg(long)]
    delta: f64,
    /// System order N (matrix is (2N+1)×(2N+1)).
    #[arg(long, short = 'n', default_value_t = 1)]
    order: usize,
    #[command(flatten)]
    out: Output,
}

#[derive(Args)]
struct TraceArgs {
    #[arg(long)]
    source: PathBuf,
    #[arg(long)]
    relay: PathBuf,
    /// 1-based timestamp column.
    #[arg(long, default_value_t = 1)]
    column: usize,
    /// Packets per tranche.
    #[arg(long, short = 'n', default_value_t = 10_000)]
    n: usize,
    /// Moving-average window for rate matching (defaults to n).
    #[arg(long)]
    window: Option<usize>,
    /// Comma-separated normalized delays.
    #[arg(long, value_delimiter = ',', default_value = "0.25,0.5,1,2,4,8")]
    deltas: Vec<f64>,
    /// Permute interarrivals within each tranche.
    #[arg(long)]
    scramble: bool,
    /// Observation limit in normalized time.
    #[arg(long, default_value_t = DEFAULT_OBSERVATION_LIMIT)]
    observation_limit: f64,
    #[command(flatten)]
    out: Output,
}

fn emit(out: &Output, text: &str) -> Result<()> {
    match &out.output {
        Some(p) => std::fs::write(p, text).with_context(|| format!("cannot write {}", p.display())),
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout.write_all(text.as_bytes())?;
            stdout.flush()?;
            Ok(())
        }
    }
}

fn header(methods: &[MethodSpec]) -> &'static str {
    if methods.iter().any(MethodSpec::is_monte_carlo) {
        "delta,method,capacity,stderr"
    } else {
        "delta,method,capacity"
    }
}

fn row(buf: &mut String, delta: f64, method: MethodSpec, value: f64, stderr: Option<f64>, with_stderr: bool) {
    write!(buf, "{delta:?},{method},{value:?}").unwrap();
    if with_stderr {
        buf.push(',');
        if let Some(se) = stderr {
            write!(buf, "{se:?}").unwrap();
        }
    }
    buf.push('\n');
}

fn cmd_capacity(a: CapacityArgs, seed: u64) -> Result<()> {
    let model = a.model.model();
    let delta = match (a.delta, a.max_delay) {
        (Some(d), _) => d,
        (None, Some(dmax)) => a.rate.unwrap_or(model.rate()) * dmax,
        (None, None) => bail!("give --delta or --max-delay"),
    };
    let est = a.method.evaluate(&model, delta, seed)?;
    let mut buf = String::new();
    let methods = [a.method];
    buf.push_str(header(&methods));
    buf.push('\n');
    row(&mut buf, delta, a.method, est.value(), est.stderr(), a.method.is_monte_carlo());
    emit(&a.out, &buf)
}

fn delta_grid(min: f64, max: f64, points: usize, log: bool) -> Result<Vec<f64>> {
    if !(min.is_finite() && max.is_finite() && min > 0.0 && min < max) {
        bail!("need 0 < delta-min < delta-max, got {min} and {max}");
    }
    if points < 2 {
        bail!("need at least 2 points, got {points}");
    }
    let last = (points - 1) as f64;
    Ok((0..points)
        .map(|i| {
            let f = i as f64 / last;
            if log {
                (min.ln() + f * (max.ln() - min.ln())).exp()
            } else {
                min + f * (max - min)
            }
        })
        .collect())
}

fn cmd_sweep(a: SweepArgs, seed: u64) -> Result<()> {
    let model = a.model.model();
    let grid = delta_grid(a.delta_min, a.delta_max, a.points, a.log)?;
    let methods = a.methods;
    let rows: Vec<Vec<_>> = grid
        .par_iter()
        .map(|&d| methods.iter().map(|m| m.evaluate(&model, d, seed).map(|e| (d, *m, e))).collect())
        .collect();
    let with_stderr = methods.iter().any(MethodSpec::is_monte_carlo);
    let mut buf = String::new();
    buf.push_str(header(&methods));
    buf.push('\n');
    for r in rows.into_iter().flatten() {
        let (d, m, e) = r?;
        row(&mut buf, d, m, e.value(), e.stderr(), with_stderr);
    }
    emit(&a.out, &buf)
}

fn cmd_order(a: OrderArgs) -> Result<()> {
    let (m1, m2) = (a.model1.model(), a.model2.model());
    let verdict = convex_order_check(&m1, &m2, &default_x_grid());
    let prediction = predict_capacity_order(&m1, &m2);
    let line = if verdict.tight {
        format!("equal,{}", CapacityRelation::Equal)
    } else {
        format!("{},{prediction}", verdict.relation)
    };
    println!("{line}");
    Ok(())
}

fn cmd_matrix(a: MatrixArgs) -> Result<()> {
    let m = build_system_matrix(&a.model.model(), a.delta, a.order)?;
    let n = a.order as i64;
    let mut buf = String::from("h,k,value\n");
    for h in -n..=n {
        for k in -n..=n {
            writeln!(buf, "{h},{k},{:?}", m.get(h, k)).unwrap();
        }
    }
    eprintln!("condition number {:e}", m.condition_number());
    emit(&a.out, &buf)
}

fn cmd_trace(a: TraceArgs, seed: u64) -> Result<()> {
    let source = parse_trace(&a.source, a.column)?;
    let relay = parse_trace(&a.relay, a.column)?;
    let mut pair = select_tranches(&source, &relay, a.n, a.window.unwrap_or(a.n))?;
    if a.scramble {
        let mut rng = rng_from_seed(seed);
        pair.source = scramble(&pair.source, &mut rng)?;
        pair.relay = scramble(&pair.relay, &mut rng)?;
    }
    let table = capacity_error_table(&pair, &a.deltas, a.observation_limit)?;
    eprintln!(
        "weibull shape {:.6} (log-likelihood {:.6}{})",
        table.fit.shape,
        table.fit.log_likelihood,
        if table.fit.at_bound { ", at search bound" } else { "" }
    );
    let mut buf = Vec::new();
    write_capacity_csv(&table.rows, &mut buf)?;
    emit(&a.out, &String::from_utf8(buf)?)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Capacity(a) => cmd_capacity(a, cli.seed),
        Command::Sweep(a) => cmd_sweep(a, cli.seed),
        Command::Order(a) => cmd_order(a),
        Command::Matrix(a) => cmd_matrix(a),
        Command::Trace(a) => cmd_trace(a, cli.seed),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
