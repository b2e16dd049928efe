use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use rescluster::losses::LossTuning;
use rescluster::seed::fnv1a;
use rescluster::{LossKind, LossModel, PenaltyKind};
use serde::{Deserialize, Serialize};

use crate::SimError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Experiment {
    Enumerate,
    Breakdown,
    Sensitivity,
    Convergence,
    Runtime,
    Pdet,
}

impl Experiment {
    pub fn name(self) -> &'static str {
        match self {
            Experiment::Enumerate => "enumerate",
            Experiment::Breakdown => "breakdown",
            Experiment::Sensitivity => "sensitivity",
            Experiment::Convergence => "convergence",
            Experiment::Runtime => "runtime",
            Experiment::Pdet => "pdet",
        }
    }
}

impl fmt::Display for Experiment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// A single penalty or all three evaluated on shared fits.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PenaltyChoice {
    Finite,
    Asymptotic,
    Schwarz,
    All,
}

impl PenaltyChoice {
    pub fn penalties(self) -> Vec<PenaltyKind> {
        match self {
            PenaltyChoice::Finite => vec![PenaltyKind::Finite],
            PenaltyChoice::Asymptotic => vec![PenaltyKind::Asymptotic],
            PenaltyChoice::Schwarz => vec![PenaltyKind::Schwarz],
            PenaltyChoice::All => PenaltyKind::ALL.to_vec(),
        }
    }
}

impl FromStr for PenaltyChoice {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s.to_ascii_lowercase().as_str() {
            "all" => Ok(PenaltyChoice::All),
            other => match other.parse::<PenaltyKind>().map_err(|e| e.to_string())? {
                PenaltyKind::Finite => Ok(PenaltyChoice::Finite),
                PenaltyKind::Asymptotic => Ok(PenaltyChoice::Asymptotic),
                PenaltyKind::Schwarz => Ok(PenaltyChoice::Schwarz),
            },
        }
    }
}

/// Which variable the runtime experiment sweeps.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RuntimeSweep {
    /// Total sample size of the three-blob data.
    N,
    /// Dimension of the two-cluster t₃ data.
    R,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub experiment: Experiment,
    pub em_loss: LossKind,
    pub bic_loss: LossKind,
    pub penalty: PenaltyChoice,
    pub n_per_cluster: usize,
    /// Per-cluster sizes swept by `pdet` and `convergence`.
    pub nk_grid: Vec<usize>,
    pub eps_grid: Vec<f64>,
    pub mc_runs: usize,
    pub seed: u64,
    pub l_min: usize,
    pub l_max: usize,
    pub grid_step: f64,
    pub tuning: LossTuning,
    pub runtime_sweep: RuntimeSweep,
    /// Sample sizes (`N`) or dimensions (`r`) of the runtime sweep.
    pub sweep_values: Vec<usize>,
    pub timing_reps: usize,
    #[serde(skip)]
    pub output_path: Option<PathBuf>,
    #[serde(skip)]
    pub workers: Option<usize>,
}

pub const DEFAULT_MC_RUNS: usize = 100;
pub const DEFAULT_SENSITIVITY_RUNS: usize = 50;
pub const DEFAULT_SENSITIVITY_NK: usize = 50;

impl ExperimentConfig {
    /// Desk-scale defaults for `experiment`.
    pub fn new(experiment: Experiment) -> Self {
        let (mc_runs, n_per_cluster) = match experiment {
            Experiment::Sensitivity => (DEFAULT_SENSITIVITY_RUNS, DEFAULT_SENSITIVITY_NK),
            Experiment::Convergence => (10, 250),
            Experiment::Runtime | Experiment::Enumerate => (1, 250),
            _ => (DEFAULT_MC_RUNS, 250),
        };
        let nk_grid = match experiment {
            Experiment::Convergence => vec![10, 50, 100, 250, 500],
            _ => vec![10, 20, 50, 100, 250],
        };
        Self {
            experiment,
            em_loss: LossKind::Huber,
            bic_loss: LossKind::Tukey,
            penalty: PenaltyChoice::Finite,
            n_per_cluster,
            nk_grid,
            eps_grid: if experiment == Experiment::Breakdown { vec![0.0, 0.05, 0.1, 0.15, 0.2] } else { vec![0.0] },
            mc_runs,
            seed: 0,
            l_min: 1,
            l_max: 6,
            grid_step: 5.0,
            tuning: LossTuning::default(),
            runtime_sweep: RuntimeSweep::N,
            sweep_values: vec![600, 1200, 2400, 4800],
            timing_reps: 3,
            output_path: None,
            workers: None,
        }
    }

    pub fn validate(&self) -> Result<(), SimError> {
        let bad = |msg: String| Err(SimError::Config(msg));
        if self.mc_runs == 0 {
            return bad("mc_runs must be at least 1".into());
        }
        if let Some(e) = self.eps_grid.iter().find(|e| !(0.0..1.0).contains(*e)) {
            return bad(format!("contamination fraction {e} outside [0, 1)"));
        }
        if self.l_min == 0 || self.l_min > self.l_max {
            return bad(format!("invalid candidate range {}..={}", self.l_min, self.l_max));
        }
        if self.em_loss == LossKind::Tukey {
            return bad("the Tukey loss has no density generator and cannot drive EM".into());
        }
        if self.n_per_cluster == 0 || self.nk_grid.contains(&0) {
            return bad("cluster sizes must be positive".into());
        }
        if !(self.grid_step > 0.0) {
            return bad("grid step must be positive".into());
        }
        if self.timing_reps == 0 || self.sweep_values.contains(&0) {
            return bad("runtime sweep needs positive values and repetitions".into());
        }
        if self.workers == Some(0) {
            return bad("workers must be positive".into());
        }
        // surface bad tuning constants early
        for kind in [self.em_loss, self.bic_loss] {
            LossModel::from_kind(kind, 2, &self.tuning).map_err(|e| SimError::Config(e.to_string()))?;
        }
        Ok(())
    }

    pub fn penalties(&self) -> Vec<PenaltyKind> {
        self.penalty.penalties()
    }

    pub fn losses(&self, r: usize) -> Result<(LossModel, LossModel), SimError> {
        let em = LossModel::from_kind(self.em_loss, r, &self.tuning).map_err(|e| SimError::Config(e.to_string()))?;
        let bic = LossModel::from_kind(self.bic_loss, r, &self.tuning).map_err(|e| SimError::Config(e.to_string()))?;
        Ok((em, bic))
    }

    /// Hash of every result-affecting field, as 16 hex digits.
    pub fn config_hash(&self) -> String {
        let json = serde_json::to_string(self).expect("config serializes");
        format!("{:016x}", fnv1a(json.as_bytes()))
    }

    /// Sensitivity grid coordinates along one axis of `[−20, 20]`.
    pub fn grid_axis(&self) -> Vec<f64> {
        let n = (40.0 / self.grid_step).floor() as usize + 1;
        let start = -((n - 1) as f64) * self.grid_step / 2.0;
        (0..n).map(|i| start + i as f64 * self.grid_step).collect()
    }
}
