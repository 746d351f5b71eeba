use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use log::info;

use mbsat::bench::{compare_methods, export_report, run_benchmark, ExportFormat};
use mbsat::{Error, Method, PowerMode, ScenarioConfig};

/// Multi-beam satellite scheduling and power allocation benchmarks.
#[derive(Parser)]
#[command(name = "mbsat", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one method over one scheduling window.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        method: Method,
        #[arg(long, default_value = "fixed")]
        power: PowerMode,
        /// Overrides `rng_seed` from the config.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Fixed versus allocated power gains over several seeds.
    Compare {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, value_delimiter = ',', required = true)]
        methods: Vec<Method>,
        #[arg(long, value_delimiter = ',', required = true)]
        seeds: Vec<u64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Parse and check a config file, printing the resolved values.
    ValidateConfig { path: PathBuf },
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Config { .. } => 2,
        Error::Infeasible { .. } => 3,
        _ => 1,
    }
}

fn load(path: &Path, seed: Option<u64>) -> mbsat::Result<ScenarioConfig> {
    let mut config = ScenarioConfig::load(path)?;
    if let Some(s) = seed {
        config.rng_seed = s;
    }
    Ok(config)
}

fn execute(cmd: Command) -> mbsat::Result<()> {
    match cmd {
        Command::Run {
            config,
            method,
            power,
            seed,
            out,
        } => {
            let config = load(&config, seed)?;
            info!("running {method} ({power}) with seed {}", config.rng_seed);
            let report = run_benchmark(&config, method, power)?;
            export_report(&report, &out, &[ExportFormat::Csv, ExportFormat::Json])?;
            let s = &report.summary;
            println!(
                "{method} {power} seed={} sum={:.3} Mbps per_user={:.3} Mbps satisfaction={:.4} violations={:.4} wall={:.2}s",
                report.seed,
                s.mean_sum_mbps,
                s.mean_per_user_mbps,
                s.satisfaction_ratio,
                s.qos_violation_fraction,
                report.wall_clock_s
            );
        }
        Command::Compare {
            config,
            methods,
            seeds,
            out,
        } => {
            let config = load(&config, None)?;
            info!("comparing {} methods over {} seeds", methods.len(), seeds.len());
            let table = compare_methods(&config, &methods, &seeds)?;
            std::fs::create_dir_all(&out).map_err(|e| Error::io(&out, e))?;
            table.write_csv(&out.join("comparison.csv"))?;
            table.write_runs_csv(&out.join("runs.csv"))?;
            print!("{}", std::fs::read_to_string(out.join("comparison.csv")).map_err(|e| Error::io(&out, e))?);
        }
        Command::ValidateConfig { path } => {
            let config = ScenarioConfig::load(&path)?;
            print!("{}", config.to_toml_string());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match execute(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
