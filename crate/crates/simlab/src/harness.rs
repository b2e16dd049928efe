//! Monte Carlo experiment recipes.
//!
//! Every replicate derives its own seed from `(master seed, experiment tag,
//! replicate index, condition index)`, so results do not depend on the
//! number of workers or on scheduling order.

use std::collections::BTreeMap;
use std::time::Instant;

use log::warn;
use nalgebra::DVector;
use rayon::prelude::*;
use rescluster::criteria::score_candidate;
use rescluster::datagen::{gen_blobs_sized, gen_t3_pair, gen_three_blobs, place_single_outlier, replace_outliers, ThreeBlobSpec};
use rescluster::em::em_fit;
use rescluster::enumerate::{candidate_seed, hard_cluster, score_candidates, CandidateTable};
use rescluster::seed::derive_seed;
use rescluster::{CandidateScore, Dataset, EmConfig, Error, PenaltyKind};
use serde::{Deserialize, Serialize};

use crate::config::{Experiment, ExperimentConfig, RuntimeSweep};
use crate::SimError;

/// Number of clusters in the synthetic benchmark.
pub const TRUE_K: usize = 3;
pub const OUTLIER_RANGE: (f64, f64) = (-20.0, 20.0);
/// Centroid offset of the second t₃ cluster in the dimension sweep.
pub const T3_SEPARATION: f64 = 15.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Condition {
    Eps { eps: f64 },
    Position { x: f64, y: f64 },
    Nk { n_per_cluster: usize, eps: f64 },
    N { n: usize },
    R { r: usize },
    Input,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicateRecord {
    pub condition_index: usize,
    pub condition: Condition,
    pub replicate: usize,
    pub seed: u64,
    /// Selected `l` per penalty; `None` when no candidate was valid.
    pub k_hat: BTreeMap<PenaltyKind, Option<usize>>,
    pub per_l_scores: Vec<CandidateScore>,
    pub error: Option<String>,
    #[serde(skip)]
    pub runtime_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectionRecord {
    pub condition: Condition,
    pub penalty: PenaltyKind,
    pub mc_runs: usize,
    pub p_detect: f64,
    /// Count of replicates per selected `l`; key 0 collects replicates without a valid candidate.
    pub k_hat_histogram: BTreeMap<usize, usize>,
    #[serde(skip)]
    pub mean_runtime_s: f64,
}

/// Mean criterion value per `(N_k, l, penalty)` over replicates where `l` was valid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceRow {
    pub n_per_cluster: usize,
    pub l: usize,
    pub penalty: PenaltyKind,
    pub mean_score: Option<f64>,
    pub valid_runs: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RuntimePoint {
    pub sweep: RuntimeSweep,
    pub value: usize,
    pub penalty: PenaltyKind,
    pub mean_seconds: f64,
    pub reps: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlopeRecord {
    pub sweep: RuntimeSweep,
    pub penalty: PenaltyKind,
    /// Least-squares slope of log runtime against log sweep value.
    pub slope: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ExperimentOutput {
    pub replicates: Vec<ReplicateRecord>,
    pub detections: Vec<DetectionRecord>,
    pub convergence: Vec<ConvergenceRow>,
    pub runtime: Vec<RuntimePoint>,
    pub slopes: Vec<SlopeRecord>,
}

impl ExperimentOutput {
    pub fn detection(&self, condition_index: usize, penalty: PenaltyKind) -> Option<&DetectionRecord> {
        let per = self.detections.iter().filter(|d| d.penalty == penalty);
        per.into_iter().nth(condition_index)
    }

    pub fn slope(&self, penalty: PenaltyKind) -> Option<f64> {
        self.slopes.iter().find(|s| s.penalty == penalty).map(|s| s.slope)
    }
}

/// Seed of replicate `replicate` under condition `condition`.
pub fn replicate_seed(master: u64, experiment: Experiment, replicate: usize, condition: usize) -> u64 {
    derive_seed(master, experiment.name(), &[replicate as u64, condition as u64])
}

fn em_config(seed: u64) -> EmConfig {
    EmConfig::default().with_seed(derive_seed(seed, "em", &[]))
}

/// Runs the candidate loop on one dataset and records the selection per penalty.
pub fn enumerate_replicate(
    cfg: &ExperimentConfig,
    data: &Dataset,
    condition_index: usize,
    condition: Condition,
    replicate: usize,
    seed: u64,
) -> ReplicateRecord {
    let penalties = cfg.penalties();
    let start = Instant::now();
    let outcome = cfg
        .losses(data.dim())
        .map_err(|e| e.to_string())
        .and_then(|(em, bic)| {
            score_candidates(data, cfg.l_min, cfg.l_max, &em, &bic, &penalties, &em_config(seed)).map_err(|e| e.to_string())
        });
    let runtime_s = start.elapsed().as_secs_f64();
    let (table, error) = match outcome {
        Ok(t) => (t, None),
        Err(e) => {
            warn!("replicate {replicate} of condition {condition_index} failed: {e}");
            (CandidateTable { candidates: Vec::new() }, Some(e))
        }
    };
    let k_hat = penalties.iter().map(|&p| (p, table.k_hat(p).ok())).collect();
    ReplicateRecord { condition_index, condition, replicate, seed, k_hat, per_l_scores: table.candidates, error, runtime_s }
}

fn with_workers<T: Send>(workers: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T, SimError> {
    match workers {
        None => Ok(f()),
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new().num_threads(n).build().map_err(|e| SimError::Config(e.to_string()))?;
            Ok(pool.install(f))
        }
    }
}

/// Runs `mc_runs` replicates per condition, in parallel, in a fixed output order.
fn monte_carlo<F>(cfg: &ExperimentConfig, conditions: &[Condition], make_data: F) -> Result<Vec<ReplicateRecord>, SimError>
where
    F: Fn(&Condition, u64) -> rescluster::Result<Dataset> + Sync,
{
    let jobs: Vec<(usize, usize)> = (0..conditions.len()).flat_map(|c| (0..cfg.mc_runs).map(move |i| (c, i))).collect();
    let records = with_workers(cfg.workers, || {
        jobs.par_iter()
            .map(|&(c, i)| {
                let seed = replicate_seed(cfg.seed, cfg.experiment, i, c);
                match make_data(&conditions[c], seed) {
                    Ok(data) => enumerate_replicate(cfg, &data, c, conditions[c], i, seed),
                    Err(e) => {
                        warn!("data generation for replicate {i} of condition {c} failed: {e}");
                        ReplicateRecord {
                            condition_index: c,
                            condition: conditions[c],
                            replicate: i,
                            seed,
                            k_hat: cfg.penalties().into_iter().map(|p| (p, None)).collect(),
                            per_l_scores: Vec::new(),
                            error: Some(e.to_string()),
                            runtime_s: 0.0,
                        }
                    }
                }
            })
            .collect::<Vec<_>>()
    })?;
    Ok(records)
}

/// Detection statistics per condition and penalty, in condition order.
pub fn aggregate(cfg: &ExperimentConfig, conditions: &[Condition], records: &[ReplicateRecord], true_k: usize) -> Vec<DetectionRecord> {
    let mut out = Vec::new();
    for &penalty in &cfg.penalties() {
        for (c, &condition) in conditions.iter().enumerate() {
            let reps: Vec<&ReplicateRecord> = records.iter().filter(|r| r.condition_index == c).collect();
            let mut hist = BTreeMap::new();
            for r in &reps {
                let k = r.k_hat.get(&penalty).copied().flatten().unwrap_or(0);
                *hist.entry(k).or_insert(0) += 1;
            }
            let n = reps.len();
            let hits = hist.get(&true_k).copied().unwrap_or(0);
            let mean_runtime_s = reps.iter().map(|r| r.runtime_s).sum::<f64>() / n.max(1) as f64;
            out.push(DetectionRecord {
                condition,
                penalty,
                mc_runs: n,
                p_detect: hits as f64 / n.max(1) as f64,
                k_hat_histogram: hist,
                mean_runtime_s,
            });
        }
    }
    out
}

fn contaminated_blobs(n_per_cluster: usize, eps: f64, seed: u64) -> rescluster::Result<Dataset> {
    let (data, _) = gen_three_blobs(&ThreeBlobSpec::new(n_per_cluster), derive_seed(seed, "data", &[]))?;
    if eps == 0.0 {
        return Ok(data);
    }
    let (lo, hi) = OUTLIER_RANGE;
    Ok(replace_outliers(&data, eps, lo, hi, derive_seed(seed, "outliers", &[]))?.0)
}

fn expect(cfg: &ExperimentConfig, experiment: Experiment) -> Result<(), SimError> {
    cfg.validate()?;
    if cfg.experiment != experiment {
        return Err(SimError::Config(format!("expected a {experiment} configuration, got {}", cfg.experiment)));
    }
    Ok(())
}

/// Detection probability over the contamination grid.
pub fn run_breakdown(cfg: &ExperimentConfig) -> Result<ExperimentOutput, SimError> {
    expect(cfg, Experiment::Breakdown)?;
    let conditions: Vec<Condition> = cfg.eps_grid.iter().map(|&eps| Condition::Eps { eps }).collect();
    let replicates = monte_carlo(cfg, &conditions, |c, seed| match *c {
        Condition::Eps { eps } => contaminated_blobs(cfg.n_per_cluster, eps, seed),
        _ => unreachable!(),
    })?;
    let detections = aggregate(cfg, &conditions, &replicates, TRUE_K);
    Ok(ExperimentOutput { replicates, detections, ..Default::default() })
}

/// Detection surface for a single outlier placed on a grid over `[−20, 20]²`.
pub fn run_sensitivity(cfg: &ExperimentConfig) -> Result<ExperimentOutput, SimError> {
    expect(cfg, Experiment::Sensitivity)?;
    let axis = cfg.grid_axis();
    let conditions: Vec<Condition> = axis.iter().flat_map(|&y| axis.iter().map(move |&x| Condition::Position { x, y })).collect();
    let replicates = monte_carlo(cfg, &conditions, |c, seed| match *c {
        Condition::Position { x, y } => {
            let (data, _) = gen_three_blobs(&ThreeBlobSpec::new(cfg.n_per_cluster), derive_seed(seed, "data", &[]))?;
            place_single_outlier(&data, &DVector::from_vec(vec![x, y]), derive_seed(seed, "outliers", &[]))
        }
        _ => unreachable!(),
    })?;
    let detections = aggregate(cfg, &conditions, &replicates, TRUE_K);
    Ok(ExperimentOutput { replicates, detections, ..Default::default() })
}

fn nk_conditions(cfg: &ExperimentConfig) -> Vec<Condition> {
    let eps = cfg.eps_grid.first().copied().unwrap_or(0.0);
    cfg.nk_grid.iter().map(|&n_per_cluster| Condition::Nk { n_per_cluster, eps }).collect()
}

fn nk_data(c: &Condition, seed: u64) -> rescluster::Result<Dataset> {
    match *c {
        Condition::Nk { n_per_cluster, eps } => contaminated_blobs(n_per_cluster, eps, seed),
        _ => unreachable!(),
    }
}

/// Detection probability over the per-cluster sample size sweep.
pub fn run_pdet_vs_n(cfg: &ExperimentConfig) -> Result<ExperimentOutput, SimError> {
    expect(cfg, Experiment::Pdet)?;
    let conditions = nk_conditions(cfg);
    let replicates = monte_carlo(cfg, &conditions, nk_data)?;
    let detections = aggregate(cfg, &conditions, &replicates, TRUE_K);
    Ok(ExperimentOutput { replicates, detections, ..Default::default() })
}

/// All three criteria per `l` over the per-cluster sample size sweep,
/// from one EM fit per `l` and replicate.
pub fn run_convergence(cfg: &ExperimentConfig) -> Result<ExperimentOutput, SimError> {
    expect(cfg, Experiment::Convergence)?;
    let mut cfg = cfg.clone();
    cfg.penalty = crate::config::PenaltyChoice::All;
    let conditions = nk_conditions(&cfg);
    let replicates = monte_carlo(&cfg, &conditions, nk_data)?;
    let detections = aggregate(&cfg, &conditions, &replicates, TRUE_K);
    let mut convergence = Vec::new();
    for (c, cond) in conditions.iter().enumerate() {
        let Condition::Nk { n_per_cluster, .. } = *cond else { unreachable!() };
        for l in cfg.l_min..=cfg.l_max {
            for penalty in PenaltyKind::ALL {
                let values: Vec<f64> = replicates
                    .iter()
                    .filter(|r| r.condition_index == c)
                    .filter_map(|r| r.per_l_scores.iter().find(|s| s.l == l))
                    .filter_map(|s| s.get(penalty))
                    .filter(|v| v.is_finite())
                    .collect();
                let mean_score = (!values.is_empty()).then(|| values.iter().sum::<f64>() / values.len() as f64);
                convergence.push(ConvergenceRow { n_per_cluster, l, penalty, mean_score, valid_runs: values.len() });
            }
        }
    }
    Ok(ExperimentOutput { replicates, detections, convergence, ..Default::default() })
}

fn sweep_data(cfg: &ExperimentConfig, value: usize, seed: u64) -> rescluster::Result<Dataset> {
    match cfg.runtime_sweep {
        RuntimeSweep::N => {
            let base = value / 3;
            let sizes = [base + usize::from(value % 3 > 0), base + usize::from(value % 3 > 1), base];
            Ok(gen_blobs_sized(&ThreeBlobSpec::new(base.max(1)), sizes, seed)?.0)
        }
        RuntimeSweep::R => Ok(gen_t3_pair(value, cfg.n_per_cluster, T3_SEPARATION, seed)?.0),
    }
}

/// Least-squares slope of `ln y` against `ln x`.
pub fn loglog_slope(points: &[(f64, f64)]) -> f64 {
    let n = points.len() as f64;
    let lx: Vec<f64> = points.iter().map(|p| p.0.ln()).collect();
    let ly: Vec<f64> = points.iter().map(|p| p.1.ln()).collect();
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = lx.iter().map(|x| (x - mx) * (x - mx)).sum();
    sxy / sxx
}

/// Wall-clock cost of enumeration per penalty over a sweep of `N` or `r`.
///
/// EM fits are shared by all penalties; the runtime of a penalty is the EM
/// time plus the time spent scoring under that penalty. Timings run
/// sequentially and average over `timing_reps` repetitions.
pub fn run_runtime(cfg: &ExperimentConfig) -> Result<ExperimentOutput, SimError> {
    expect(cfg, Experiment::Runtime)?;
    let penalties = cfg.penalties();
    let mut replicates = Vec::new();
    let mut runtime = Vec::new();
    for (c, &value) in cfg.sweep_values.iter().enumerate() {
        let seed = replicate_seed(cfg.seed, cfg.experiment, 0, c);
        let condition = match cfg.runtime_sweep {
            RuntimeSweep::N => Condition::N { n: value },
            RuntimeSweep::R => Condition::R { r: value },
        };
        let data = sweep_data(cfg, value, derive_seed(seed, "data", &[])).map_err(|e| SimError::Config(e.to_string()))?;
        let (em, bic) = cfg.losses(data.dim())?;
        let mut totals = vec![0.0; penalties.len()];
        let mut last = Vec::new();
        for _ in 0..cfg.timing_reps {
            let mut em_time = 0.0;
            let mut scores = Vec::new();
            let mut score_time = vec![0.0; penalties.len()];
            for l in cfg.l_min..=cfg.l_max.min(data.n()) {
                let ecfg = em_config(seed).with_seed(candidate_seed(derive_seed(seed, "em", &[]), l));
                let start = Instant::now();
                let fit = em_fit(&data, l, &em, &ecfg);
                let part = fit.as_ref().ok().map(|f| hard_cluster(&f.responsibilities));
                em_time += start.elapsed().as_secs_f64();
                let mut merged = CandidateScore::invalid(l, &penalties, "fit failed");
                for (k, &p) in penalties.iter().enumerate() {
                    let start = Instant::now();
                    let s = match (&fit, &part) {
                        (Ok(f), Some(part)) => score_candidate(&data, part, &f.clusters, &bic, &[p]),
                        (Err(e), _) => Ok(CandidateScore::invalid(l, &[p], e.to_string())),
                        _ => unreachable!(),
                    };
                    score_time[k] += start.elapsed().as_secs_f64();
                    match s {
                        Ok(s) => {
                            merged.valid = s.valid;
                            merged.reason = s.reason.clone();
                            match p {
                                PenaltyKind::Finite => merged.finite = s.finite,
                                PenaltyKind::Asymptotic => merged.asymptotic = s.asymptotic,
                                PenaltyKind::Schwarz => merged.schwarz = s.schwarz,
                            }
                        }
                        Err(e) if matches!(e, Error::DimensionMismatch { .. }) => return Err(SimError::Config(e.to_string())),
                        Err(e) => merged.reason = Some(e.to_string()),
                    }
                }
                scores.push(merged);
            }
            for k in 0..penalties.len() {
                totals[k] += em_time + score_time[k];
            }
            last = scores;
        }
        let table = CandidateTable { candidates: last };
        let k_hat = penalties.iter().map(|&p| (p, table.k_hat(p).ok())).collect();
        let per_rep = totals.iter().map(|t| t / cfg.timing_reps as f64).collect::<Vec<_>>();
        for (k, &p) in penalties.iter().enumerate() {
            runtime.push(RuntimePoint { sweep: cfg.runtime_sweep, value, penalty: p, mean_seconds: per_rep[k], reps: cfg.timing_reps });
        }
        replicates.push(ReplicateRecord {
            condition_index: c,
            condition,
            replicate: 0,
            seed,
            k_hat,
            per_l_scores: table.candidates,
            error: None,
            runtime_s: per_rep.iter().cloned().fold(0.0, f64::max),
        });
    }
    let slopes = if cfg.sweep_values.len() >= 2 {
        penalties
            .iter()
            .map(|&p| {
                let pts: Vec<(f64, f64)> =
                    runtime.iter().filter(|r| r.penalty == p).map(|r| (r.value as f64, r.mean_seconds)).collect();
                SlopeRecord { sweep: cfg.runtime_sweep, penalty: p, slope: loglog_slope(&pts) }
            })
            .collect()
    } else {
        Vec::new()
    };
    Ok(ExperimentOutput { replicates, runtime, slopes, ..Default::default() })
}

/// Enumeration on a single dataset (user data or one generated benchmark draw).
pub fn run_enumerate(cfg: &ExperimentConfig, data: &Dataset) -> Result<ExperimentOutput, SimError> {
    expect(cfg, Experiment::Enumerate)?;
    let (em, bic) = cfg.losses(data.dim())?;
    let seed = replicate_seed(cfg.seed, cfg.experiment, 0, 0);
    let start = Instant::now();
    let table = score_candidates(data, cfg.l_min, cfg.l_max, &em, &bic, &cfg.penalties(), &em_config(seed))
        .map_err(|e| SimError::Config(e.to_string()))?;
    let runtime_s = start.elapsed().as_secs_f64();
    let k_hat: BTreeMap<_, _> = cfg.penalties().iter().map(|&p| (p, table.k_hat(p).ok())).collect();
    if k_hat.values().all(Option::is_none) {
        return Err(SimError::AllInvalid);
    }
    let record = ReplicateRecord {
        condition_index: 0,
        condition: Condition::Input,
        replicate: 0,
        seed,
        k_hat,
        per_l_scores: table.candidates,
        error: None,
        runtime_s,
    };
    Ok(ExperimentOutput { replicates: vec![record], ..Default::default() })
}

/// Dispatches on `cfg.experiment`. `input` is only used by `enumerate`; without
/// it a single benchmark dataset is generated from the seed.
pub fn run(cfg: &ExperimentConfig, input: Option<&Dataset>) -> Result<ExperimentOutput, SimError> {
    match cfg.experiment {
        Experiment::Enumerate => match input {
            Some(d) => run_enumerate(cfg, d),
            None => {
                let eps = cfg.eps_grid.first().copied().unwrap_or(0.0);
                let seed = replicate_seed(cfg.seed, cfg.experiment, 0, 0);
                let d = contaminated_blobs(cfg.n_per_cluster, eps, seed).map_err(|e| SimError::Config(e.to_string()))?;
                run_enumerate(cfg, &d)
            }
        },
        Experiment::Breakdown => run_breakdown(cfg),
        Experiment::Sensitivity => run_sensitivity(cfg),
        Experiment::Convergence => run_convergence(cfg),
        Experiment::Runtime => run_runtime(cfg),
        Experiment::Pdet => run_pdet_vs_n(cfg),
    }
}
