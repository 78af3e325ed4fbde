use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use subsel_core::experiment::{
    run_experiment, Algorithm, ExperimentSpec, OracleKind, ParamRequest, ReportFormat,
};
use subsel_core::Error;

/// Select a small subset of data points whose span approximates the best
/// k-dimensional l_p subspace.
#[derive(Debug, Parser)]
#[command(name = "subsel", version)]
struct Args {
    /// CSV file, one point per line.
    #[arg(long)]
    input: PathBuf,

    /// mcmc-one-pass, exact-adaptive or squared-length.
    #[arg(long, default_value = "mcmc-one-pass")]
    algo: Algorithm,

    /// Target subspace dimension.
    #[arg(long)]
    k: usize,

    /// Error exponent (>= 1).
    #[arg(long, default_value_t = 2.0)]
    p: f64,

    /// Additive accuracy in (0, 1); derives t, l, m and the repetition count.
    #[arg(long)]
    delta: Option<f64>,

    /// Points per round (overrides the derived value).
    #[arg(long)]
    t: Option<usize>,

    /// Rounds (defaults to k).
    #[arg(long)]
    l: Option<usize>,

    /// Walk length.
    #[arg(long)]
    m: Option<usize>,

    /// Independent repetitions; the best is reported.
    #[arg(long)]
    reps: Option<usize>,

    #[arg(long, env = "SUBSEL_SEED", default_value_t = 0)]
    seed: u64,

    /// json or csv.
    #[arg(long, default_value = "json")]
    report: ReportFormat,

    /// Write the report here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,

    /// svd (p = 2 optimum), bruteforce (best k-subset span) or none.
    #[arg(long, default_value = "none")]
    oracle: OracleKind,

    /// Skip the first line of the input.
    #[arg(long)]
    header: bool,
}

fn run(args: Args) -> Result<(), Error> {
    let config = ParamRequest {
        k: args.k,
        p: args.p,
        delta: args.delta,
        t: args.t,
        l: args.l,
        m: args.m,
        repetitions: args.reps,
        seed: args.seed,
    }
    .resolve()?;
    let spec = ExperimentSpec {
        input: args.input,
        has_header: args.header,
        algorithm: args.algo,
        config,
        oracle: args.oracle,
    };
    let report = run_experiment(&spec)?;
    let rendered = report.render(args.report)?;
    match args.out {
        Some(path) => fs::write(&path, rendered).map_err(|e| Error::Stream {
            path,
            message: e.to_string(),
        }),
        None => {
            print!("{rendered}");
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let args = Args::parse();
    match run(args) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("subsel: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
