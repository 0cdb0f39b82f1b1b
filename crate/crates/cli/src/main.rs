mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use config::RunConfig;

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Core(funflow::Error),
}

impl CliError {
    fn code(&self) -> &'static str {
        match self {
            CliError::Usage(_) => "E_USAGE",
            CliError::Core(e) => e.code(),
        }
    }

    fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Core(_) => 1,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(m) => f.write_str(m),
            CliError::Core(e) => write!(f, "{e}"),
        }
    }
}

impl From<funflow::Error> for CliError {
    fn from(e: funflow::Error) -> Self {
        CliError::Core(e)
    }
}

/// Recursive kernel regression on curves.
#[derive(Parser, Debug)]
#[command(name = "funflow", version, about)]
struct Cli {
    /// Plain-text key=value settings; flags override its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Simulate Brownian curves with responses ∫χ² + noise.
    Simulate(SimulateArgs),
    /// Fit on a training sample and predict at query curves.
    Predict(PredictArgs),
    /// Feed new observations to a saved estimator state.
    Update(UpdateArgs),
    /// Leave-one-out scores over a (C, ν) grid.
    Cv(CvArgs),
    /// Asymptotic constants for a kernel and small-ball exponent.
    Constants(ConstantsArgs),
    /// Monte Carlo studies.
    Experiment(ExperimentArgs),
    /// Cumulative time of recursive updating against refitting.
    Bench(BenchArgs),
}

#[derive(Args, Debug)]
struct DataFlags {
    /// CSV of training curves, one per row.
    #[arg(long)]
    curves: Option<String>,
    /// Single-column CSV of responses.
    #[arg(long)]
    responses: Option<String>,
}

#[derive(Args, Debug)]
struct EstimatorFlags {
    /// Order ℓ of the small-ball weights, in [0, 1].
    #[arg(long)]
    l: Option<String>,
    /// quadratic or uniform.
    #[arg(long)]
    kernel: Option<String>,
    /// pca:q, fou:b, deriv:k or pls:K (append :centered for pca/pls).
    #[arg(long)]
    seminorm: Option<String>,
}

#[derive(Args, Debug)]
struct BandwidthFlags {
    #[arg(long = "C")]
    c: Option<String>,
    #[arg(long)]
    nu: Option<String>,
}

#[derive(Args, Debug)]
struct GridFlags {
    /// Comma-separated C values for cross-validation.
    #[arg(long = "grid-C")]
    grid_c: Option<String>,
    /// Comma-separated ν values; fractions like 1/3 are accepted.
    #[arg(long = "grid-nu")]
    grid_nu: Option<String>,
}

#[derive(Args, Debug)]
#[command(allow_negative_numbers = true)]
struct SimulateArgs {
    #[arg(long)]
    n: Option<String>,
    #[arg(long)]
    p: Option<String>,
    #[arg(long)]
    noise: Option<String>,
    #[arg(long)]
    seed: Option<String>,
    /// Output directory.
    #[arg(long)]
    out: Option<String>,
}

#[derive(Args, Debug)]
#[command(allow_negative_numbers = true)]
struct PredictArgs {
    #[command(flatten)]
    data: DataFlags,
    /// CSV of query curves.
    #[arg(long)]
    query: Option<String>,
    #[command(flatten)]
    est: EstimatorFlags,
    #[command(flatten)]
    bw: BandwidthFlags,
    /// Choose (C, ν) by leave-one-out cross-validation.
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    cv: Option<String>,
    #[command(flatten)]
    grid: GridFlags,
    /// Report a 1 − α confidence band (requires l = 0).
    #[arg(long)]
    alpha: Option<String>,
    /// Save the estimator state here (single query only).
    #[arg(long)]
    snapshot: Option<String>,
}

#[derive(Args, Debug)]
#[command(allow_negative_numbers = true)]
struct UpdateArgs {
    #[arg(long)]
    snapshot: Option<String>,
    #[command(flatten)]
    data: DataFlags,
    #[arg(long)]
    alpha: Option<String>,
    /// Where to write the advanced state; defaults to overwriting the snapshot.
    #[arg(long)]
    out: Option<String>,
}

#[derive(Args, Debug)]
#[command(allow_negative_numbers = true)]
struct CvArgs {
    #[command(flatten)]
    data: DataFlags,
    #[command(flatten)]
    est: EstimatorFlags,
    #[command(flatten)]
    grid: GridFlags,
    #[arg(long)]
    out: Option<String>,
}

#[derive(Args, Debug)]
#[command(allow_negative_numbers = true)]
struct ConstantsArgs {
    #[arg(long)]
    kernel: Option<String>,
    #[arg(long)]
    kappa: Option<String>,
    /// Bandwidth decay δ for β and α.
    #[arg(long)]
    delta: Option<String>,
    /// Comma-separated r values for β_[r].
    #[arg(long)]
    r: Option<String>,
    /// Comma-separated ℓ values for α_[ℓ].
    #[arg(long)]
    l: Option<String>,
    #[arg(long)]
    out: Option<String>,
}

#[derive(Args, Debug)]
#[command(allow_negative_numbers = true)]
struct ExperimentArgs {
    /// table1, table3, cv, coverage or rate.
    #[arg(long)]
    study: Option<String>,
    #[arg(long)]
    reps: Option<String>,
    #[arg(long)]
    seed: Option<String>,
    #[arg(long)]
    n: Option<String>,
    /// Sample sizes for table1 and rate.
    #[arg(long)]
    ns: Option<String>,
    /// Orders ℓ for table3.
    #[arg(long)]
    ells: Option<String>,
    #[arg(long)]
    p: Option<String>,
    #[arg(long)]
    noise: Option<String>,
    /// brownian or cube:k.
    #[arg(long)]
    design: Option<String>,
    #[command(flatten)]
    est: EstimatorFlags,
    #[command(flatten)]
    bw: BandwidthFlags,
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    cv: Option<String>,
    #[command(flatten)]
    grid: GridFlags,
    #[arg(long)]
    alpha: Option<String>,
    #[arg(long)]
    out: Option<String>,
}

#[derive(Args, Debug)]
#[command(allow_negative_numbers = true)]
struct BenchArgs {
    #[arg(long)]
    n0: Option<String>,
    /// Number of arrivals after the initial sample.
    #[arg(long = "N")]
    big_n: Option<String>,
    #[arg(long)]
    checkpoints: Option<String>,
    #[arg(long)]
    repeats: Option<String>,
    #[arg(long)]
    seed: Option<String>,
    #[arg(long)]
    p: Option<String>,
    #[command(flatten)]
    est: EstimatorFlags,
    #[command(flatten)]
    bw: BandwidthFlags,
    #[command(flatten)]
    grid: GridFlags,
    #[arg(long)]
    out: Option<String>,
}

impl DataFlags {
    fn pairs(&self) -> Vec<(&'static str, Option<String>)> {
        vec![("curves", self.curves.clone()), ("responses", self.responses.clone())]
    }
}

impl EstimatorFlags {
    fn pairs(&self) -> Vec<(&'static str, Option<String>)> {
        vec![
            ("l", self.l.clone()),
            ("kernel", self.kernel.clone()),
            ("seminorm", self.seminorm.clone()),
        ]
    }
}

impl BandwidthFlags {
    fn pairs(&self) -> Vec<(&'static str, Option<String>)> {
        vec![("C", self.c.clone()), ("nu", self.nu.clone())]
    }
}

impl GridFlags {
    fn pairs(&self) -> Vec<(&'static str, Option<String>)> {
        vec![("grid_C", self.grid_c.clone()), ("grid_nu", self.grid_nu.clone())]
    }
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Simulate(_) => "simulate",
            Command::Predict(_) => "predict",
            Command::Update(_) => "update",
            Command::Cv(_) => "cv",
            Command::Constants(_) => "constants",
            Command::Experiment(_) => "experiment",
            Command::Bench(_) => "bench",
        }
    }

    fn flags(&self) -> Vec<(&'static str, Option<String>)> {
        match self {
            Command::Simulate(a) => vec![
                ("n", a.n.clone()),
                ("p", a.p.clone()),
                ("noise", a.noise.clone()),
                ("seed", a.seed.clone()),
                ("out", a.out.clone()),
            ],
            Command::Predict(a) => {
                let mut v = a.data.pairs();
                v.extend(a.est.pairs());
                v.extend(a.bw.pairs());
                v.extend(a.grid.pairs());
                v.extend([
                    ("query", a.query.clone()),
                    ("cv", a.cv.clone()),
                    ("alpha", a.alpha.clone()),
                    ("snapshot", a.snapshot.clone()),
                ]);
                v
            }
            Command::Update(a) => {
                let mut v = a.data.pairs();
                v.extend([
                    ("snapshot", a.snapshot.clone()),
                    ("alpha", a.alpha.clone()),
                    ("out", a.out.clone()),
                ]);
                v
            }
            Command::Cv(a) => {
                let mut v = a.data.pairs();
                v.extend(a.est.pairs());
                v.extend(a.grid.pairs());
                v.push(("out", a.out.clone()));
                v
            }
            Command::Constants(a) => vec![
                ("kernel", a.kernel.clone()),
                ("kappa", a.kappa.clone()),
                ("delta", a.delta.clone()),
                ("r", a.r.clone()),
                ("l", a.l.clone()),
                ("out", a.out.clone()),
            ],
            Command::Experiment(a) => {
                let mut v = a.est.pairs();
                v.extend(a.bw.pairs());
                v.extend(a.grid.pairs());
                v.extend([
                    ("study", a.study.clone()),
                    ("reps", a.reps.clone()),
                    ("seed", a.seed.clone()),
                    ("n", a.n.clone()),
                    ("ns", a.ns.clone()),
                    ("ells", a.ells.clone()),
                    ("p", a.p.clone()),
                    ("noise", a.noise.clone()),
                    ("design", a.design.clone()),
                    ("cv", a.cv.clone()),
                    ("alpha", a.alpha.clone()),
                    ("out", a.out.clone()),
                ]);
                v
            }
            Command::Bench(a) => {
                let mut v = a.est.pairs();
                v.extend(a.bw.pairs());
                v.extend(a.grid.pairs());
                v.extend([
                    ("n0", a.n0.clone()),
                    ("N", a.big_n.clone()),
                    ("checkpoints", a.checkpoints.clone()),
                    ("repeats", a.repeats.clone()),
                    ("seed", a.seed.clone()),
                    ("p", a.p.clone()),
                    ("out", a.out.clone()),
                ]);
                v
            }
        }
    }
}

fn configure_threads() -> Result<(), CliError> {
    let Ok(raw) = std::env::var("FUNFLOW_THREADS") else {
        return Ok(());
    };
    let threads: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|&t| t > 0)
        .ok_or_else(|| CliError::Usage(format!("FUNFLOW_THREADS must be a positive integer, got {raw:?}")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .map_err(|e| CliError::Usage(format!("cannot configure {threads} threads: {e}")))
}

fn run(cli: Cli) -> Result<(), CliError> {
    configure_threads()?;
    let mut cfg = RunConfig::load(cli.config.as_deref())?;
    cfg.overlay(cli.command.flags());
    let name = cli.command.name();
    match cli.command {
        Command::Simulate(_) => commands::simulate(&cfg),
        Command::Predict(_) => commands::predict(&cfg),
        Command::Update(_) => commands::update(&cfg),
        Command::Cv(_) => commands::cv(&cfg),
        Command::Constants(_) => commands::constants(&cfg),
        Command::Experiment(_) => commands::experiment(&cfg),
        Command::Bench(_) => commands::bench(&cfg),
    }
    .inspect_err(|_| eprintln!("{}", cfg.header(name)))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("funflow: error[{}]: {e}", e.code());
            ExitCode::from(e.exit_code())
        }
    }
}
