//! `ecap` command-line interface.

mod commands;
mod config;
mod report;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use ecap::EcapError;

use config::{parse_grid, parse_lambda, resolve, GridSpec, Overrides, RunConfig};

#[derive(Debug)]
pub enum CliError {
    Core(EcapError),
    Usage(String),
    Config(String),
    Io(String),
}

impl CliError {
    fn kind(&self) -> &'static str {
        match self {
            CliError::Core(e) => e.kind(),
            CliError::Usage(_) => "UsageError",
            CliError::Config(_) => "ConfigError",
            CliError::Io(_) => "IoError",
        }
    }

    fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) | CliError::Config(_) => 2,
            _ => 1,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Core(e) => write!(f, "{e}"),
            CliError::Usage(m) | CliError::Config(m) | CliError::Io(m) => f.write_str(m),
        }
    }
}

impl From<EcapError> for CliError {
    fn from(e: EcapError) -> Self {
        CliError::Core(e)
    }
}

#[derive(Parser, Debug)]
#[command(name = "ecap", version, about = "Bayesian variable selection with a correlation-adaptive conjugate prior")]
struct Cli {
    #[command(flatten)]
    global: GlobalArgs,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct GlobalArgs {
    /// Design matrix, comma separated.
    #[arg(long, global = true)]
    x: Option<PathBuf>,
    /// Response, one value per line.
    #[arg(long, global = true)]
    y: Option<PathBuf>,
    /// Take the response from this column of the design file (name or 0-based index).
    #[arg(long, global = true)]
    y_column: Option<String>,
    /// Input files start with a header row.
    #[arg(long, global = true)]
    header: bool,
    /// TOML run configuration; flags override it.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Search iterations per chain.
    #[arg(long, global = true)]
    iters: Option<usize>,
    #[arg(long, global = true)]
    restarts: Option<usize>,
    /// Candidates kept per neighborhood by residual screening.
    #[arg(long, global = true)]
    screen_k: Option<usize>,
    /// `auto` or a fixed value.
    #[arg(long, global = true, value_parser = parse_lambda)]
    lambda: Option<ecap::LambdaChoice>,
    /// `lo:hi:step` or a comma list.
    #[arg(long, global = true, value_parser = parse_grid, allow_hyphen_values = true)]
    lambda_grid: Option<GridSpec>,
    #[arg(long, global = true)]
    top_k: Option<usize>,
    /// Output file; stdout when absent.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads; defaults to the available cores.
    #[arg(long, global = true)]
    threads: Option<usize>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Tune, search, and report the median probability model as JSON.
    Select {
        /// Keep only the K columns most correlated with the response before tuning.
        #[arg(long, value_name = "K")]
        prescreen: Option<usize>,
    },
    /// Estimate the hyperparameters and print the λ objective as CSV.
    Tune,
    /// Run a built-in simulation case and print selection metrics as CSV.
    Simulate {
        #[arg(long, value_parser = clap::value_parser!(u32).range(1..=5))]
        case: u32,
        #[arg(long, default_value_t = 100)]
        reps: usize,
        /// Add lasso and adaptive-lasso rows.
        #[arg(long)]
        baselines: bool,
    },
    /// Predict new responses from the median probability model.
    Predict {
        /// A document written by `select`; without it, select runs first.
        #[arg(long)]
        fit: Option<PathBuf>,
        #[arg(long)]
        x_new: PathBuf,
    },
    /// Rank columns by absolute marginal correlation with the response.
    Screen,
    /// Score every configuration exactly (p <= 20).
    Enumerate,
    /// Score fixed configurations across a λ grid.
    Curve {
        /// Configurations as `0,1;0;` (`;` between, `,` within; empty is the null model).
        #[arg(long, allow_hyphen_values = true)]
        configs: String,
    },
}

fn run(cli: Cli) -> Result<(), CliError> {
    let g = &cli.global;
    if let Some(t) = g.threads {
        if t == 0 {
            return Err(CliError::Usage("--threads must be >= 1".into()));
        }
        rayon::ThreadPoolBuilder::new().num_threads(t).build_global().map_err(|e| CliError::Usage(e.to_string()))?;
    }
    let cfg = match &g.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    let overrides = Overrides {
        seed: g.seed,
        iters: g.iters,
        restarts: g.restarts,
        screen_k: g.screen_k,
        lambda: g.lambda,
        lambda_grid: g.lambda_grid.clone(),
        top_k: g.top_k,
        x: g.x.clone(),
        y: g.y.clone(),
        out: g.out.clone(),
        header: g.header,
    };
    let r = resolve(&cfg, &overrides)?;
    let yc = g.y_column.as_deref();
    match &cli.command {
        Command::Select { prescreen } => commands::cmd_select(&r, yc, *prescreen),
        Command::Tune => commands::cmd_tune(&r, yc),
        Command::Simulate { case, reps, baselines } => commands::cmd_simulate(&r, *case, *reps, *baselines),
        Command::Predict { fit, x_new } => commands::cmd_predict(&r, yc, fit.as_deref(), x_new),
        Command::Screen => commands::cmd_screen(&r, yc),
        Command::Enumerate => commands::cmd_enumerate(&r, yc),
        Command::Curve { configs } => {
            if r.tuning.lambda_grid.is_empty() {
                return Err(CliError::Usage("the lambda grid is empty".into()));
            }
            commands::cmd_curve(&r, yc, configs)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error[{}]: {e}", e.kind());
            ExitCode::from(e.exit_code())
        }
    }
}
