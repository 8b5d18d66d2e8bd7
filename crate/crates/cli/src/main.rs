use anyhow::{bail, Result};
use clap::{Args, Parser, Subcommand};
use lcfuse_core::config::{ConfigError, ScenarioConfig};
use lcfuse_core::io::{cmd_eval, cmd_pipeline, cmd_run, cmd_simulate, files, RunMode};
use lcfuse_core::pipeline::PipelineError;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

/// Simulate a 5G + IMU + odometer drive, run the standalone and fused estimators, and
/// compare them against truth.
#[derive(Parser)]
#[command(name = "lcfuse", version)]
struct Cli {
    /// Log verbosity: -v info, -vv debug.
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct ConfigArgs {
    /// Scenario config (TOML). Without it the built-in defaults are used and --seed is required.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Overrides the seed of the config.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Generate truth, sites, visibility and sensor streams into a data directory.
    Simulate {
        #[command(flatten)]
        cfg: ConfigArgs,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run estimators on a data directory.
    Run {
        #[command(flatten)]
        cfg: ConfigArgs,
        /// 5g-sa, ins-sa, fused or all. fused reads the 5G-SA solution from --out.
        #[arg(long, default_value = "all")]
        mode: RunMode,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Evaluate solution files against truth.
    Eval {
        #[command(flatten)]
        cfg: ConfigArgs,
        /// Data directory holding trajectory.csv and, optionally, connectivity.json.
        #[arg(long, required_unless_present = "truth")]
        data: Option<PathBuf>,
        /// Truth trajectory CSV; defaults to <data>/trajectory.csv.
        #[arg(long)]
        truth: Option<PathBuf>,
        /// Connectivity JSON for outage statistics; defaults to <data>/connectivity.json when present.
        #[arg(long)]
        connectivity: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        /// Solution CSVs (nav solution or fused format).
        #[arg(required = true)]
        solutions: Vec<PathBuf>,
    },
    /// simulate, run all and eval under <out>/data, <out>/run and <out>/eval.
    Pipeline {
        #[command(flatten)]
        cfg: ConfigArgs,
        #[arg(long)]
        out: PathBuf,
    },
    /// Config utilities.
    Config {
        #[command(subcommand)]
        action: ConfigAction,
    },
}

#[derive(Subcommand)]
enum ConfigAction {
    /// Print the complete default config.
    PrintDefaults {
        #[arg(long, default_value_t = 1)]
        seed: u64,
    },
}

/// Resolved config and the directory relative paths inside it refer to.
fn load(args: &ConfigArgs, seed_required: bool) -> Result<(ScenarioConfig, Option<PathBuf>)> {
    let (mut cfg, base) = match &args.config {
        Some(p) => (ScenarioConfig::load(p)?, p.parent().map(Path::to_path_buf)),
        None => match args.seed {
            Some(s) => (ScenarioConfig::with_seed(s), None),
            None if !seed_required => (ScenarioConfig::with_seed(0), None),
            None => {
                return Err(ConfigError::Invalid { key: "seed".into(), message: "pass --config or --seed".into() }.into());
            }
        },
    };
    if let Some(s) = args.seed {
        cfg.seed = s;
    }
    Ok((cfg, base))
}

const DEFAULTS_PREAMBLE: &str = "\
# lcfuse scenario config. Units: metres, seconds, radians unless a key says _deg,
# _hz, _ms (m/s), _dbm or _db. `seed` is mandatory; every other key may be omitted.
";

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Simulate { cfg, out } => {
            let (cfg, base) = load(&cfg, true)?;
            let m = cmd_simulate(&cfg, base.as_deref(), &out)?;
            println!("wrote {} files to {} (config {})", m.files.len() + 1, out.display(), &m.config_sha256[..12]);
        }
        Command::Run { cfg, mode, data, out } => {
            let (cfg, _) = load(&cfg, true)?;
            for p in cmd_run(&cfg, mode, &data, &out)? {
                println!("wrote {}", p.display());
            }
        }
        Command::Eval { cfg, data, truth, connectivity, out, solutions } => {
            let (cfg, _) = load(&cfg, false)?;
            let truth = match (truth, &data) {
                (Some(t), _) => t,
                (None, Some(d)) => d.join(files::TRAJECTORY),
                (None, None) => bail!("pass --truth or --data"),
            };
            let connectivity = connectivity.or_else(|| data.map(|d| d.join(files::CONNECTIVITY)).filter(|p| p.exists()));
            let ev = cmd_eval(&cfg, &truth, connectivity.as_deref(), &solutions, &out)?;
            print!("{}", ev.table);
        }
        Command::Pipeline { cfg, out } => {
            let (cfg, base) = load(&cfg, true)?;
            let ev = cmd_pipeline(&cfg, base.as_deref(), &out)?;
            print!("{}", ev.table);
        }
        Command::Config { action: ConfigAction::PrintDefaults { seed } } => {
            print!("{DEFAULTS_PREAMBLE}\n{}", ScenarioConfig::with_seed(seed).to_toml_string());
        }
    }
    Ok(())
}

fn exit_code(err: &anyhow::Error) -> u8 {
    if let Some(e) = err.downcast_ref::<PipelineError>() {
        return e.exit_code() as u8;
    }
    if err.downcast_ref::<ConfigError>().is_some() {
        return 2;
    }
    3
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {:#}", e);
            ExitCode::from(exit_code(&e))
        }
    }
}
