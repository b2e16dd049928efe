use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rescluster::LossKind;

use crate::config::{Experiment, ExperimentConfig, PenaltyChoice, RuntimeSweep};
use crate::{harness, ingest, output, SimError};

#[derive(Debug, Parser)]
#[command(name = "simlab", version, about = "Robust Bayesian cluster enumeration experiments")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Enumerate clusters in a CSV file (or in one generated benchmark draw).
    Enumerate {
        #[command(flatten)]
        common: CommonArgs,
        #[arg(long)]
        input: Option<PathBuf>,
        #[arg(long, default_value = ",")]
        delimiter: char,
        /// The first row holds column names.
        #[arg(long)]
        header: bool,
    },
    /// Detection probability against the fraction of replacement outliers.
    Breakdown {
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Detection probability for a single outlier swept over [-20, 20]^2.
    Sensitivity {
        #[command(flatten)]
        common: CommonArgs,
        #[arg(long, default_value_t = 5.0)]
        grid_step: f64,
    },
    /// All three criteria per candidate over a sweep of cluster sizes.
    Convergence {
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Runtime scaling over the sample size or the dimension.
    Runtime {
        #[command(flatten)]
        common: CommonArgs,
        #[arg(long, value_enum, default_value_t = SweepArg::N)]
        sweep: SweepArg,
        /// Sweep values (sample sizes or dimensions); repeatable.
        #[arg(long = "value")]
        values: Vec<usize>,
        #[arg(long, default_value_t = 3)]
        reps: usize,
    },
    /// Detection probability over a sweep of cluster sizes.
    Pdet {
        #[command(flatten)]
        common: CommonArgs,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SweepArg {
    N,
    R,
}

fn parse_loss(s: &str) -> Result<LossKind, String> {
    s.parse::<LossKind>().map_err(|e| e.to_string())
}

#[derive(Debug, Args)]
pub struct CommonArgs {
    #[arg(long, value_parser = parse_loss, default_value = "huber")]
    pub em_loss: LossKind,
    #[arg(long, value_parser = parse_loss, default_value = "tukey")]
    pub bic_loss: LossKind,
    #[arg(long, default_value = "finite")]
    pub penalty: PenaltyChoice,
    #[arg(long, default_value_t = 1)]
    pub lmin: usize,
    #[arg(long, default_value_t = 6)]
    pub lmax: usize,
    /// Points per cluster; repeatable for the sweeps of `pdet` and `convergence`.
    #[arg(long)]
    pub nk: Vec<usize>,
    /// Contamination fraction; repeatable.
    #[arg(long)]
    pub eps: Vec<f64>,
    #[arg(long)]
    pub mc: Option<usize>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = rescluster::losses::DEFAULT_HUBER_QH)]
    pub qh: f64,
    #[arg(long, default_value_t = rescluster::losses::DEFAULT_TUKEY_C)]
    pub tukey_c: f64,
    #[arg(long, default_value_t = rescluster::losses::DEFAULT_T_NU)]
    pub nu: f64,
    /// Record file; `.timing.jsonl` and `.summary.txt` sidecars are written next to it.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub workers: Option<usize>,
}

impl CommonArgs {
    fn into_config(self, experiment: Experiment) -> ExperimentConfig {
        let mut cfg = ExperimentConfig::new(experiment);
        cfg.em_loss = self.em_loss;
        cfg.bic_loss = self.bic_loss;
        cfg.penalty = self.penalty;
        cfg.l_min = self.lmin;
        cfg.l_max = self.lmax;
        if let Some(&first) = self.nk.first() {
            cfg.n_per_cluster = first;
            cfg.nk_grid = self.nk.clone();
        }
        if !self.eps.is_empty() {
            cfg.eps_grid = self.eps;
        }
        if let Some(mc) = self.mc {
            cfg.mc_runs = mc;
        }
        cfg.seed = self.seed;
        cfg.tuning.huber_qh = self.qh;
        cfg.tuning.tukey_c = self.tukey_c;
        cfg.tuning.nu = self.nu;
        cfg.output_path = Some(self.out.unwrap_or_else(|| PathBuf::from(format!("simlab-{experiment}.jsonl"))));
        cfg.workers = self.workers;
        cfg
    }
}

/// Builds the configuration and optional input path for a parsed command line.
pub fn build(cli: Cli) -> Result<(ExperimentConfig, Option<(PathBuf, u8, bool)>), SimError> {
    let (cfg, input) = match cli.command {
        Command::Enumerate { common, input, delimiter, header } => {
            if !delimiter.is_ascii() {
                return Err(SimError::Config(format!("delimiter '{delimiter}' is not a single byte")));
            }
            (common.into_config(Experiment::Enumerate), input.map(|p| (p, delimiter as u8, header)))
        }
        Command::Breakdown { common } => (common.into_config(Experiment::Breakdown), None),
        Command::Sensitivity { common, grid_step } => {
            let mut cfg = common.into_config(Experiment::Sensitivity);
            cfg.grid_step = grid_step;
            (cfg, None)
        }
        Command::Convergence { common } => (common.into_config(Experiment::Convergence), None),
        Command::Runtime { common, sweep, values, reps } => {
            let mut cfg = common.into_config(Experiment::Runtime);
            cfg.runtime_sweep = match sweep {
                SweepArg::N => RuntimeSweep::N,
                SweepArg::R => RuntimeSweep::R,
            };
            cfg.sweep_values = if values.is_empty() {
                match cfg.runtime_sweep {
                    RuntimeSweep::N => vec![600, 1200, 2400, 4800],
                    RuntimeSweep::R => vec![2, 4, 8],
                }
            } else {
                values
            };
            cfg.timing_reps = reps;
            (cfg, None)
        }
        Command::Pdet { common } => (common.into_config(Experiment::Pdet), None),
    };
    cfg.validate()?;
    Ok((cfg, input))
}

/// Runs one command line and returns the process exit status.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    match execute(cli) {
        Ok(summary) => {
            print!("{summary}");
            0
        }
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn execute(cli: Cli) -> Result<String, SimError> {
    let (cfg, input) = build(cli)?;
    let data = match input {
        Some((path, delimiter, header)) => Some(ingest::ingest_csv(&path, delimiter, header)?),
        None => None,
    };
    let out = harness::run(&cfg, data.as_ref())?;
    let path = cfg.output_path.clone().expect("output path is always set by the CLI");
    output::write_outputs(&cfg, &out, &path)
}
