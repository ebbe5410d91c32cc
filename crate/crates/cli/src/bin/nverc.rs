use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use log::{error, info};
use nverc_cli::commands::{self, RunOptions};
use nverc_cli::table::Table;
use nverc_cli::{CliError, Config};
use nverc_core::sequence::Method;

#[derive(Parser, Debug)]
#[command(name = "nverc", version, about = "NV-ERC pulse sweeps, gate synthesis and calibration")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// JSON run configuration
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output file (stdout when omitted)
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads (default: all cores)
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// analytic, rwa or lab
    #[arg(long, global = true)]
    method: Option<Method>,
    #[arg(long, global = true)]
    seed: Option<u64>,
}

#[derive(Subcommand, Debug, Clone, Copy)]
enum Command {
    /// Populations along the two-pulse NOT program
    Trace,
    /// Final |-1> population over pulse-timing errors
    Robustness,
    /// |0> population versus E_y and time
    EyMap,
    /// |0> population versus drive ratio and time
    RatioMap,
    /// Synthesize a DQ gate
    Synth,
    /// Simulated ODMR + Rabi calibration
    Calibrate,
}

fn write_output(out: Option<&Path>, text: &str) -> Result<(), CliError> {
    match out {
        Some(path) => std::fs::write(path, text)
            .map_err(|source| CliError::Output { path: path.display().to_string(), source }),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn emit_table(cli: &Cli, cfg: &Config, table: &Table) -> Result<(), CliError> {
    write_output(cli.out.as_deref(), &table.render())?;
    if let (true, Some(out)) = (cfg.plot, cli.out.as_deref()) {
        let name = out.file_name().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
        let script = out.with_extension("plot.py");
        write_output(Some(&script), &commands::plot_script(&name, &table.columns))?;
    }
    Ok(())
}

fn run(cli: &Cli) -> Result<(), CliError> {
    let path = cli
        .config
        .as_deref()
        .ok_or_else(|| nverc_cli::ConfigError::invalid("--config", "a configuration file is required"))?;
    let cfg = Config::from_path(path)?;
    let opts = RunOptions { method: cli.method, seed: cli.seed };
    info!("{:?} with {}", cli.command, path.display());
    match cli.command {
        Command::Trace => emit_table(cli, &cfg, &commands::cmd_trace(&cfg, &opts)?),
        Command::Robustness => emit_table(cli, &cfg, &commands::cmd_robustness(&cfg, &opts)?),
        Command::EyMap => emit_table(cli, &cfg, &commands::cmd_ey_map(&cfg, &opts)?),
        Command::RatioMap => emit_table(cli, &cfg, &commands::cmd_ratio_map(&cfg, &opts)?),
        Command::Synth => {
            let out = commands::cmd_synth(&cfg, &opts)?;
            let report = serde_json::to_string_pretty(&out.report).expect("report serializes");
            write_output(cli.out.as_deref(), &out.sequence_json)?;
            if cli.out.is_some() {
                println!("{report}");
            } else {
                eprintln!("{report}");
            }
            Ok(())
        }
        Command::Calibrate => write_output(cli.out.as_deref(), &(commands::cmd_calibrate(&cfg, &opts)? + "\n")),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().filter_or("NVERC_LOG", "warn")).init();
    let cli = Cli::parse();
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(j) = cli.jobs {
        pool = pool.num_threads(j.max(1));
    }
    let pool = match pool.build() {
        Ok(p) => p,
        Err(e) => {
            error!("thread pool: {e}");
            return ExitCode::from(4);
        }
    };
    match pool.install(|| run(&cli)) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", e.to_json());
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
