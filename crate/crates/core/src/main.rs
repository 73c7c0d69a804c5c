use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use thzmec::harness::{
    bound_grid, reference_ratios, run_algorithm, run_compare, run_sweep, table1_config, write_csv, write_sweep,
    Algorithm, BoundRatioSpec, ScenarioSource, SolverSettings, SweepSpec, BOUND_HEADER, REFERENCE_HEADER,
};
use thzmec::scenario::{save_scenario, ScenarioConfig};
use thzmec::Result;

#[derive(Parser)]
#[command(name = "thzmec", version, about = "Delay-minimizing offloading for THz multi-UAV relayed MEC")]
struct Cli {
    /// Worker threads (defaults to all cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one algorithm on one scenario and write its report as JSON.
    Run {
        /// Scenario file or generator config; Table I when omitted.
        #[arg(long)]
        scenario: Option<PathBuf>,
        #[arg(long)]
        algo: Algorithm,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        /// Solver settings JSON.
        #[arg(long)]
        spec: Option<PathBuf>,
        /// Report path; standard output when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run a parameter sweep and write tidy CSV into a directory.
    Sweep {
        #[arg(long)]
        spec: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Exact against upper-bound queueing delay, plus the ratio for reference runs.
    BoundRatio {
        #[arg(long)]
        spec: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Paired-seed comparison of several algorithms.
    Compare {
        #[arg(long)]
        scenario: Option<PathBuf>,
        #[arg(long, value_delimiter = ',', default_value = "1")]
        seeds: Vec<u64>,
        #[arg(long, value_delimiter = ',', default_value = "pdd,uo,uao,nr-sca,uo-guao,bcd-sca")]
        algo: Vec<Algorithm>,
        #[arg(long)]
        spec: Option<PathBuf>,
        /// Summary JSON path.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Draw a concrete scenario from a generator config.
    GenScenario {
        #[arg(long)]
        spec: Option<PathBuf>,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    Ok(serde_json::from_str(&std::fs::read_to_string(path)?)?)
}

fn settings(path: Option<&Path>) -> Result<SolverSettings> {
    path.map_or_else(|| Ok(SolverSettings::default()), read_json)
}

fn emit(text: &str, out: Option<&Path>) -> Result<()> {
    match out {
        Some(p) => std::fs::write(p, text)?,
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout.write_all(text.as_bytes())?;
            stdout.write_all(b"\n")?;
        }
    }
    Ok(())
}

fn execute(command: Command) -> Result<()> {
    match command {
        Command::Run { scenario, algo, seed, spec, out } => {
            let sc = ScenarioSource::load(scenario.as_deref())?.instantiate(seed)?;
            let report = run_algorithm(algo, &sc, &settings(spec.as_deref())?, seed)?;
            emit(&report.to_json()?, out.as_deref())
        }
        Command::Sweep { spec, out } => {
            let spec: SweepSpec = read_json(&spec)?;
            let outcome = run_sweep(&spec)?;
            for f in &outcome.failures {
                log::warn!("{}={} seed={} {}: {}", f.param, f.value, f.seed, f.algo, f.error);
            }
            write_sweep(&outcome, &out)
        }
        Command::BoundRatio { spec, out } => {
            let spec: BoundRatioSpec = spec.map_or_else(|| Ok(BoundRatioSpec::default()), |p| read_json(&p))?;
            std::fs::create_dir_all(&out)?;
            write_csv(&bound_grid(&spec)?, &out.join("bound_grid.csv"), &BOUND_HEADER)?;
            write_csv(&reference_ratios(&spec)?, &out.join("reference.csv"), &REFERENCE_HEADER)
        }
        Command::Compare { scenario, seeds, algo, spec, out } => {
            let source = ScenarioSource::load(scenario.as_deref())?;
            let summary = run_compare(&source, &seeds, &algo, &settings(spec.as_deref())?)?;
            println!("{:<12} {:>5} {:>14} {:>12} {:>10} {:>10}", "algo", "runs", "mean_delay_s", "std_err_s", "converged", "gap");
            for r in &summary.rows {
                let gap = r.gap_vs_exhaustive.map_or("-".to_string(), |g| format!("{:.2}%", 100.0 * g));
                println!(
                    "{:<12} {:>5} {:>14.6} {:>12.6} {:>10} {:>10}",
                    r.algo, r.runs, r.mean_delay_s, r.std_err_s, r.converged, gap
                );
            }
            for f in &summary.failures {
                eprintln!("seed {} {}: {}", f.seed, f.algo, f.error);
            }
            match out {
                Some(p) => emit(&serde_json::to_string_pretty(&summary)?, Some(&p)),
                None => Ok(()),
            }
        }
        Command::GenScenario { spec, seed, out } => {
            let config: ScenarioConfig = spec.map_or_else(|| Ok(table1_config()), |p| read_json(&p))?;
            save_scenario(&config.generate(seed)?, out)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    if let Some(n) = cli.jobs {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    }
    match execute(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
