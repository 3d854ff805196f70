use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use hcran::experiments::{
    generate_instance_topology, run_mse_sweep, run_se_sweep, run_tightness, schedule, solve_one, ExperimentConfig,
    Scheduler,
};
use hcran::pilot::sum_mse;
use hcran::scenario::{load_topology, write_topology};
use hcran::{Error, Result};

#[derive(Parser)]
#[command(name = "hcran", version, about = "Pilot scheduling and robust beamforming experiments")]
struct Cli {
    /// Log verbosity (-v info, -vv debug).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// TOML experiment configuration; defaults apply when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Master seed, overriding the configuration.
    #[arg(long)]
    seed: Option<u64>,
    /// Output CSV path; falls back to `output_path`, then stdout.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Number of realizations, overriding the configuration.
    #[arg(long)]
    realizations: Option<usize>,
    /// Worker threads (default: all cores).
    #[arg(long)]
    jobs: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Channel-estimation sum MSE versus pilot length or number of UEs.
    MseSweep(Common),
    /// Sum spectral efficiency after robust beamforming.
    SeSweep {
        #[command(flatten)]
        common: Common,
        /// Where to write averaged convergence traces (sweeps over num_rrh).
        #[arg(long)]
        traces: Option<PathBuf>,
    },
    /// Lower bound versus Monte Carlo rate sums.
    Tightness(Common),
    /// Pilot assignment for a saved topology.
    Schedule {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        topology: PathBuf,
        #[arg(long, value_enum, default_value = "psa")]
        scheduler: CliScheduler,
        /// Pilot length; defaults to the configured tau.
        #[arg(long)]
        tau: Option<usize>,
    },
    /// One realization: per-UE lower bounds and Monte Carlo rates.
    SolveOne {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum, default_value = "psa")]
        scheduler: CliScheduler,
        /// Where to write the per-iteration RTD trace.
        #[arg(long)]
        trace: Option<PathBuf>,
    },
    /// Draw a layout and save it in the topology text format.
    GenTopology(Common),
}

#[derive(Clone, Copy, ValueEnum)]
enum CliScheduler {
    Psa,
    Dsatur,
    Es,
    Orthogonal,
}

impl From<CliScheduler> for Scheduler {
    fn from(s: CliScheduler) -> Self {
        match s {
            CliScheduler::Psa => Scheduler::Psa,
            CliScheduler::Dsatur => Scheduler::DsaturRandom,
            CliScheduler::Es => Scheduler::Es,
            CliScheduler::Orthogonal => Scheduler::Orthogonal,
        }
    }
}

impl Common {
    fn load(&self) -> Result<ExperimentConfig> {
        let mut cfg = match &self.config {
            Some(path) => ExperimentConfig::load(path)?,
            None => ExperimentConfig::default(),
        };
        if let Some(seed) = self.seed {
            cfg.master_seed = seed;
        }
        if let Some(n) = self.realizations {
            cfg.num_realizations = n;
        }
        if let Some(out) = &self.out {
            cfg.output_path = Some(out.clone());
        }
        cfg.validate()?;
        if let Some(jobs) = self.jobs {
            rayon::ThreadPoolBuilder::new()
                .num_threads(jobs)
                .build_global()
                .map_err(|e| Error::Config(format!("cannot start {jobs} worker threads: {e}")))?;
        }
        Ok(cfg)
    }
}

fn emit(path: Option<&Path>, text: &str) -> Result<()> {
    match path {
        Some(p) => Ok(std::fs::write(p, text)?),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn first_point(cfg: &ExperimentConfig) -> Result<ExperimentConfig> {
    let (scenario, system) = cfg.point(cfg.sweep.values[0])?;
    Ok(ExperimentConfig {
        scenario,
        system,
        ..cfg.clone()
    })
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::MseSweep(common) => {
            let cfg = common.load()?;
            emit(cfg.output_path.as_deref(), &run_mse_sweep(&cfg)?.to_csv())
        }
        Command::SeSweep { common, traces } => {
            let cfg = common.load()?;
            let result = run_se_sweep(&cfg)?;
            if let Some(path) = traces {
                std::fs::write(path, result.traces_csv())?;
            }
            emit(cfg.output_path.as_deref(), &result.table.to_csv())
        }
        Command::Tightness(common) => {
            let cfg = common.load()?;
            emit(cfg.output_path.as_deref(), &run_tightness(&cfg)?.to_csv())
        }
        Command::Schedule {
            common,
            topology,
            scheduler,
            tau,
        } => {
            let cfg = first_point(&common.load()?)?;
            let topo = load_topology(&topology)?;
            let tau = tau.unwrap_or(cfg.system.tau);
            let assignment = schedule(&topo, &cfg.system, scheduler.into(), tau, cfg.master_seed)?;
            let tr = cfg.system.training(assignment.tau());
            let mse = sum_mse(&topo, &assignment, tr.pilot_power_rue, tr.pilot_power_bue, tr.noise_power)?;
            log::info!("tau = {}, sum MSE = {mse:e}", assignment.tau());
            emit(cfg.output_path.as_deref(), &assignment.to_csv())
        }
        Command::SolveOne {
            common,
            scheduler,
            trace,
        } => {
            let cfg = common.load()?;
            let (report, state) = solve_one(&cfg, scheduler.into())?;
            log::info!("RTD stopped after {} iterations (converged: {})", state.iterations, state.converged);
            if let Some(path) = trace {
                std::fs::write(path, state.trace_csv())?;
            }
            emit(cfg.output_path.as_deref(), &report.to_csv())
        }
        Command::GenTopology(common) => {
            let cfg = first_point(&common.load()?)?;
            let topo = generate_instance_topology(&cfg.scenario, cfg.master_seed)?;
            emit(cfg.output_path.as_deref(), &write_topology(&topo))
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => log::LevelFilter::Warn,
        1 => log::LevelFilter::Info,
        _ => log::LevelFilter::Debug,
    };
    env_logger::Builder::new().filter_level(level).parse_default_env().init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
