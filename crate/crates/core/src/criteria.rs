//! Information criteria for a hard-clustered candidate model.
//!
//! Every criterion shares the data-fidelity term
//! `Σ_m [−Σ_{x∈X_m} ρ(t̂) + N_m ln N_m − (N_m/2) ln|Ŝ_m|]` and differs in the
//! penalty, with `q = r(r+3)/2` parameters per cluster:
//!
//! ```text
//! finite      −l ln l + (q l/2) ln 2π − ½ Σ_m ln|Ĵ_m|
//! asymptotic  −(q/2) Σ_m ln ε_m,   ε_m = max(|Σψ|, |Ση|, N_m)
//! schwarz     −(q l/2) ln N
//! ```

use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::data::{ClusterParams, Dataset, HardPartition, ScatterFactor};
use crate::fim::{fim_blocks, fim_logdet};
use crate::losses::LossModel;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PenaltyKind {
    Finite,
    Asymptotic,
    Schwarz,
}

impl PenaltyKind {
    pub const ALL: [PenaltyKind; 3] = [PenaltyKind::Finite, PenaltyKind::Asymptotic, PenaltyKind::Schwarz];

    pub fn name(self) -> &'static str {
        match self {
            PenaltyKind::Finite => "finite",
            PenaltyKind::Asymptotic => "asymptotic",
            PenaltyKind::Schwarz => "schwarz",
        }
    }
}

impl fmt::Display for PenaltyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for PenaltyKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "finite" | "f" => Ok(PenaltyKind::Finite),
            "asymptotic" | "a" => Ok(PenaltyKind::Asymptotic),
            "schwarz" | "s" | "bic" => Ok(PenaltyKind::Schwarz),
            other => Err(Error::InvalidParameter(format!("unknown penalty '{other}'"))),
        }
    }
}

/// Number of free parameters of one cluster, `r(r+3)/2`.
pub fn params_per_cluster(r: usize) -> usize {
    r * (r + 3) / 2
}

/// `−Σρ + N_m ln N_m − (N_m/2) ln|Ŝ_m|`, with `0 ln 0 = 0`.
pub fn cluster_datafit(sum_rho: f64, n_m: usize, log_det_s: f64) -> f64 {
    let n = n_m as f64;
    let nlogn = if n_m == 0 { 0.0 } else { n * n.ln() };
    -sum_rho + nlogn - 0.5 * n * log_det_s
}

/// `ε_m = max(|Σψ|, |Ση|, N_m)`.
pub fn epsilon_m(sum_psi: f64, sum_eta: f64, n_m: usize) -> f64 {
    sum_psi.abs().max(sum_eta.abs()).max(n_m as f64)
}

/// Per-cluster ingredients of the criteria.
#[derive(Debug, Clone, PartialEq)]
pub struct ClusterTerm {
    pub n_m: usize,
    pub sum_rho: f64,
    pub sum_psi: f64,
    pub sum_eta: f64,
    pub log_det_s: f64,
    /// `ln|Ĵ_m|`; `None` if not requested.
    pub log_det_j: Option<Result<f64>>,
}

impl ClusterTerm {
    /// Evaluates a cluster from its member points, optionally including the FIM log-determinant.
    pub fn compute(points: &DMatrix<f64>, params: &ClusterParams, loss: &LossModel, with_fim: bool) -> Result<Self> {
        let r = params.dim();
        if points.ncols() != r || loss.dim() != r {
            return Err(Error::DimensionMismatch { expected: r, found: points.ncols() });
        }
        let factor: &ScatterFactor = params.factor();
        let (mut sum_rho, mut sum_psi, mut sum_eta) = (0.0, 0.0, 0.0);
        for i in 0..points.nrows() {
            let t = params.mahalanobis_row(points, i).max(0.0);
            sum_rho += loss.rho_unchecked(t);
            sum_psi += loss.psi_unchecked(t);
            sum_eta += loss.eta_unchecked(t);
        }
        let log_det_j = with_fim.then(|| {
            let blocks = fim_blocks(points, params.mu(), params.scatter(), loss)?;
            Ok(fim_logdet(&blocks)?.value)
        });
        Ok(Self { n_m: points.nrows(), sum_rho, sum_psi, sum_eta, log_det_s: factor.log_det(), log_det_j })
    }

    pub fn datafit(&self) -> f64 {
        cluster_datafit(self.sum_rho, self.n_m, self.log_det_s)
    }

    pub fn epsilon(&self) -> f64 {
        epsilon_m(self.sum_psi, self.sum_eta, self.n_m)
    }
}

fn datafit(terms: &[ClusterTerm]) -> f64 {
    terms.iter().map(ClusterTerm::datafit).sum()
}

/// Finite-sample criterion. Fails if any cluster lacks a usable `ln|Ĵ_m|`.
pub fn bic_finite(terms: &[ClusterTerm], r: usize) -> Result<f64> {
    let l = terms.len() as f64;
    let q = params_per_cluster(r) as f64;
    let mut log_det_sum = 0.0;
    for (m, t) in terms.iter().enumerate() {
        match &t.log_det_j {
            Some(Ok(v)) => log_det_sum += v,
            Some(Err(e)) => return Err(e.clone()),
            None => return Err(Error::InvalidModel(format!("cluster {m} has no FIM determinant"))),
        }
    }
    Ok(datafit(terms) - l * l.ln() + q * l / 2.0 * (2.0 * std::f64::consts::PI).ln() - 0.5 * log_det_sum)
}

pub fn bic_asymptotic(terms: &[ClusterTerm], r: usize) -> f64 {
    let q = params_per_cluster(r) as f64;
    datafit(terms) - q / 2.0 * terms.iter().map(|t| t.epsilon().ln()).sum::<f64>()
}

pub fn bic_schwarz(terms: &[ClusterTerm], r: usize, n: usize) -> f64 {
    let q = params_per_cluster(r) as f64;
    let l = terms.len() as f64;
    datafit(terms) - q * l / 2.0 * (n as f64).ln()
}

/// Scores of one candidate `l`. Invalid candidates score `−∞`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateScore {
    pub l: usize,
    pub valid: bool,
    pub reason: Option<String>,
    pub finite: Option<f64>,
    pub asymptotic: Option<f64>,
    pub schwarz: Option<f64>,
}

impl CandidateScore {
    pub fn invalid(l: usize, penalties: &[PenaltyKind], reason: impl Into<String>) -> Self {
        let ninf = |k| penalties.contains(&k).then_some(f64::NEG_INFINITY);
        Self {
            l,
            valid: false,
            reason: Some(reason.into()),
            finite: ninf(PenaltyKind::Finite),
            asymptotic: ninf(PenaltyKind::Asymptotic),
            schwarz: ninf(PenaltyKind::Schwarz),
        }
    }

    /// Score under `kind`, if it was computed.
    pub fn get(&self, kind: PenaltyKind) -> Option<f64> {
        match kind {
            PenaltyKind::Finite => self.finite,
            PenaltyKind::Asymptotic => self.asymptotic,
            PenaltyKind::Schwarz => self.schwarz,
        }
    }
}

/// Scores a fitted candidate on its hard partition under `loss`.
///
/// A partition with a cluster of fewer than two points is invalid. A
/// singular FIM only invalidates the finite-sample score.
pub fn score_candidate(
    data: &Dataset,
    partition: &HardPartition,
    clusters: &[ClusterParams],
    loss: &LossModel,
    penalties: &[PenaltyKind],
) -> Result<CandidateScore> {
    let l = clusters.len();
    if partition.l() != l || partition.labels.len() != data.n() {
        return Err(Error::DimensionMismatch { expected: l, found: partition.l() });
    }
    if let Some(m) = partition.counts.iter().position(|&c| c < 2) {
        let reason = format!("cluster {m} has {} point(s)", partition.counts[m]);
        return Ok(CandidateScore::invalid(l, penalties, reason));
    }
    let with_fim = penalties.contains(&PenaltyKind::Finite);
    let mut terms = Vec::with_capacity(l);
    for (m, params) in clusters.iter().enumerate() {
        let pts = data.select(&partition.members(m));
        terms.push(ClusterTerm::compute(&pts, params, loss, with_fim)?);
    }
    let r = data.dim();
    let mut out = CandidateScore { l, valid: true, reason: None, finite: None, asymptotic: None, schwarz: None };
    for &k in penalties {
        match k {
            PenaltyKind::Finite => {
                out.finite = Some(match bic_finite(&terms, r) {
                    Ok(v) => v,
                    Err(e) => {
                        out.reason = Some(e.to_string());
                        f64::NEG_INFINITY
                    }
                })
            }
            PenaltyKind::Asymptotic => out.asymptotic = Some(bic_asymptotic(&terms, r)),
            PenaltyKind::Schwarz => out.schwarz = Some(bic_schwarz(&terms, r, data.n())),
        }
    }
    Ok(out)
}
