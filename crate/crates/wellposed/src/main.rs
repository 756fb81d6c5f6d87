use std::path::PathBuf;

use clap::{ArgGroup, Args, Parser, Subcommand};

use wellposed::config::CONFIG_KEYS;
use wellposed::metrics::MetricKind;
use wellposed::runner::{self, RunOptions, EXPERIMENTS};

fn experiments_help() -> String {
    let mut s = String::from("experiments (for --experiment):\n");
    for (name, desc) in EXPERIMENTS {
        s.push_str(&format!("  {name:<20} {desc}\n"));
    }
    s
}

fn config_keys_help() -> String {
    let mut s = String::from("config keys (for --config files, key = value per line):\n");
    for (key, doc) in CONFIG_KEYS {
        s.push_str(&format!("  {key:<28} {doc}\n"));
    }
    s
}

fn run_after_help() -> String {
    format!(
        "{}\n{}\nexit codes: 0 success, 2 bad flags or config schema, 3 numerical failure, 4 i/o",
        experiments_help(),
        config_keys_help()
    )
}

#[derive(Parser)]
#[command(
    name = "wellposed",
    about = "posterior stability sweeps and distances for 1-d Bayesian inverse problems",
    after_help = run_after_help()
)]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run a named experiment or a config-file sweep; writes CSV (and
    /// optionally SVG) files into the output directory
    #[command(after_help = run_after_help())]
    Run(RunArgs),
    /// Compute distances between two serialized grid measures and print one
    /// CSV header + row to stdout
    Eval(EvalArgs),
}

#[derive(Args)]
#[command(group(ArgGroup::new("source").required(true).args(["experiment", "config"])))]
struct RunArgs {
    /// Named experiment to reproduce (see list below)
    #[arg(long)]
    experiment: Option<String>,
    /// Path to a key = value experiment config file
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory, created if missing
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Quadrature nodes for named experiments (config files set grid.n themselves)
    #[arg(long = "grid-n", default_value_t = 2001)]
    grid_n: usize,
    /// Base seed for replicate noise in fig6-gp
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Comma-separated metric columns for sweeps: hellinger,tv,prokhorov,wasserstein,kl
    /// (default: hellinger)
    #[arg(long)]
    metrics: Option<String>,
    /// Wasserstein order (>= 1)
    #[arg(long, default_value_t = 1.0)]
    p: f64,
    /// Prokhorov bisection tolerance
    #[arg(long, default_value_t = 1e-6)]
    tol: f64,
    /// Also write an SVG line chart next to each sweep CSV
    #[arg(long = "emit-svg")]
    emit_svg: bool,
    /// Image side length for fig6-gp
    #[arg(long = "image-n", default_value_t = 32)]
    image_n: usize,
    /// Observation stride for fig6-gp
    #[arg(long, default_value_t = 4)]
    stride: usize,
    /// Noise replicates per sigma for fig6-gp
    #[arg(long, default_value_t = 20)]
    replicates: usize,
}

#[derive(Args)]
struct EvalArgs {
    /// First measure (CSV with x,density header)
    file_a: PathBuf,
    /// Second measure on the same grid
    file_b: PathBuf,
    /// Comma-separated metrics to compute; prokhorov is costly on fine grids,
    /// so it must be requested explicitly
    #[arg(long, default_value = "hellinger,tv,wasserstein,kl")]
    metrics: String,
    /// Wasserstein order (>= 1)
    #[arg(long, default_value_t = 1.0)]
    p: f64,
    /// Prokhorov bisection tolerance
    #[arg(long, default_value_t = 1e-6)]
    tol: f64,
}

fn fail2(msg: &str) -> i32 {
    eprintln!("error: {msg}");
    2
}

fn validate_p_tol(p: f64, tol: f64) -> Option<i32> {
    if !(p.is_finite() && p >= 1.0) {
        return Some(fail2(&format!("--p must be a finite real >= 1, got {p}")));
    }
    if !(tol.is_finite() && tol > 0.0) {
        return Some(fail2(&format!("--tol must be a finite real > 0, got {tol}")));
    }
    None
}

fn do_run(args: RunArgs) -> i32 {
    if let Some(code) = validate_p_tol(args.p, args.tol) {
        return code;
    }
    if args.grid_n < 2 {
        return fail2("--grid-n must be at least 2");
    }
    if args.image_n < 1 {
        return fail2("--image-n must be at least 1");
    }
    if args.stride < 1 {
        return fail2("--stride must be at least 1");
    }
    if args.replicates < 1 {
        return fail2("--replicates must be at least 1");
    }
    let metrics = match &args.metrics {
        None => None,
        Some(s) => match MetricKind::parse_list(s) {
            Ok(list) => Some(list),
            Err(msg) => return fail2(&msg),
        },
    };
    let opts = RunOptions {
        out_dir: args.out,
        grid_n: args.grid_n,
        seed: args.seed,
        metrics,
        p: args.p,
        tol: args.tol,
        emit_svg: args.emit_svg,
        image_n: args.image_n,
        stride: args.stride,
        replicates: args.replicates,
    };
    let result = match (&args.experiment, &args.config) {
        (Some(name), None) => runner::run_named(name, &opts),
        (None, Some(path)) => runner::run_config(path, &opts),
        _ => unreachable!("clap group enforces exactly one source"),
    };
    match result {
        Ok(summary) => {
            for f in &summary.files {
                println!("wrote {}", f.display());
            }
            0
        }
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn do_eval(args: EvalArgs) -> i32 {
    if let Some(code) = validate_p_tol(args.p, args.tol) {
        return code;
    }
    let metrics = match MetricKind::parse_list(&args.metrics) {
        Ok(list) => list,
        Err(msg) => return fail2(&msg),
    };
    match runner::metrics_eval(&args.file_a, &args.file_b, &metrics, args.p, args.tol) {
        Ok(out) => {
            print!("{out}");
            0
        }
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn main() {
    let cli = Cli::parse();
    let code = match cli.command {
        Cmd::Run(args) => do_run(args),
        Cmd::Eval(args) => do_eval(args),
    };
    std::process::exit(code);
}
