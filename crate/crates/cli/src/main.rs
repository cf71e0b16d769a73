//! `gsqg`: spectrum, search, continuation, construction, verification and regimes.

mod commands;
mod config;
mod error;
mod output;

use clap::{Parser, Subcommand};
use config::{Overrides, RunConfig};
use error::CliError;
use output::Context;
use std::path::PathBuf;

#[derive(Parser, Debug)]
#[command(name = "gsqg", version, about = "Self-similar instability and nonuniqueness for the (α, β)-SQG family")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// TOML configuration file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// Worker threads for the parallel loops (defaults to all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Treat slope, envelope, persistence and energy misses as failures.
    #[arg(long, global = true)]
    strict: bool,
    /// Use the opposite sign of the identity shift ν(α/β − 1).
    #[arg(long, global = true)]
    flip_shift_sign: bool,
    /// Override a config key, e.g. `--set grid.N=128`; repeatable.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    set: Vec<String>,
    #[arg(long, global = true, allow_hyphen_values = true)]
    alpha: Option<f64>,
    #[arg(long, global = true, allow_hyphen_values = true)]
    beta: Option<f64>,
    /// Azimuthal harmonic of the perturbation.
    #[arg(long, global = true, allow_hyphen_values = true)]
    n: Option<i32>,
    #[arg(long, global = true, allow_hyphen_values = true)]
    nu: Option<f64>,
}

#[derive(Subcommand, Debug, Clone, Copy)]
enum Command {
    /// Leading eigenvalues of L_ν about the configured vortex.
    Spectrum,
    /// Search the vortex family for the largest ν = 0 growth rate.
    Search,
    /// Continue the searched branch in ν and store the eigenpair at ν.
    Continue,
    /// Build θ±, f from the stored eigenpair.
    Construct,
    /// Check the stored system: residual, separation rates, energy identities.
    Verify,
    /// Regime verdicts and named classes at (α, β).
    Regimes,
}

impl Command {
    fn name(self) -> &'static str {
        match self {
            Command::Spectrum => "spectrum",
            Command::Search => "search",
            Command::Continue => "continue",
            Command::Construct => "construct",
            Command::Verify => "verify",
            Command::Regimes => "regimes",
        }
    }
}

fn run(cli: &Cli) -> Result<(), CliError> {
    if let Some(k) = cli.threads {
        if k == 0 {
            return Err(CliError::Validation("--threads must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new().num_threads(k).build_global().map_err(|e| CliError::Io(e.to_string()))?;
    }
    let overrides = Overrides {
        set: cli.set.clone(),
        alpha: cli.alpha,
        beta: cli.beta,
        n: cli.n,
        nu: cli.nu,
        flip_shift_sign: cli.flip_shift_sign,
    };
    let cfg = RunConfig::load(cli.config.as_deref(), &overrides)?;
    let cache_dir = std::env::var_os("GSQG_CACHE_DIR").map(PathBuf::from);
    let mut ctx = Context::new(cfg, cli.out.clone(), cli.strict, cache_dir);
    log::info!("config hash {}", ctx.hash);
    let outcome = match cli.command {
        Command::Spectrum => commands::spectrum(&mut ctx),
        Command::Search => commands::search(&mut ctx),
        Command::Continue => commands::continuation(&mut ctx),
        Command::Construct => commands::construct(&mut ctx),
        Command::Verify => commands::verify(&mut ctx),
        Command::Regimes => commands::regimes(&mut ctx),
    };
    output::update_manifest(&ctx, cli.command.name(), &outcome)?;
    outcome
}

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    faer::set_global_parallelism(faer::Par::Seq);
    let cli = Cli::parse();
    if let Err(e) = run(&cli) {
        eprintln!("{}", e.to_json(cli.command.name()));
        std::process::exit(e.exit_code());
    }
}
