//! Cluster enumeration over a range of candidate cluster counts.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::criteria::{score_candidate, CandidateScore, PenaltyKind};
use crate::data::{Dataset, HardPartition};
use crate::em::{em_fit, EmConfig};
use crate::losses::LossModel;
use crate::seed::derive_seed;
use crate::{Error, Result};

/// Argmax of each responsibility row; ties go to the lower cluster index.
pub fn hard_cluster(resp: &DMatrix<f64>) -> HardPartition {
    let l = resp.ncols();
    let labels = (0..resp.nrows())
        .map(|i| {
            let mut best = 0;
            for m in 1..l {
                if resp[(i, m)] > resp[(i, best)] {
                    best = m;
                }
            }
            best
        })
        .collect();
    HardPartition::from_labels(labels, l).expect("labels are in range")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnumerationResult {
    pub penalty: PenaltyKind,
    pub k_hat: usize,
    /// One entry per candidate, in increasing `l`.
    pub candidates: Vec<CandidateScore>,
}

impl EnumerationResult {
    pub fn score(&self, l: usize) -> Option<f64> {
        self.candidates.iter().find(|c| c.l == l).and_then(|c| c.get(self.penalty))
    }
}

/// Candidate scores under several penalties from a single EM fit per `l`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateTable {
    pub candidates: Vec<CandidateScore>,
}

impl CandidateTable {
    /// Maximizing `l` under `penalty`; ties go to the smaller `l`.
    pub fn k_hat(&self, penalty: PenaltyKind) -> Result<usize> {
        let mut best: Option<(usize, f64)> = None;
        for c in &self.candidates {
            let Some(v) = c.get(penalty) else { continue };
            if !c.valid || !v.is_finite() {
                continue;
            }
            if best.is_none_or(|(_, b)| v > b) {
                best = Some((c.l, v));
            }
        }
        best.map(|(l, _)| l).ok_or(Error::AllCandidatesInvalid)
    }

    pub fn into_result(self, penalty: PenaltyKind) -> Result<EnumerationResult> {
        let k_hat = self.k_hat(penalty)?;
        Ok(EnumerationResult { penalty, k_hat, candidates: self.candidates })
    }
}

/// Seed used for the EM fit of candidate `l`.
pub fn candidate_seed(master: u64, l: usize) -> u64 {
    derive_seed(master, "candidate", &[l as u64])
}

fn check_range(data: &Dataset, l_min: usize, l_max: usize, em_loss: &LossModel, bic_loss: &LossModel) -> Result<()> {
    if l_min == 0 || l_min > l_max {
        return Err(Error::InvalidParameter(format!("invalid candidate range {l_min}..={l_max}")));
    }
    if !em_loss.has_density() {
        return Err(Error::NoDensityGenerator);
    }
    for loss in [em_loss, bic_loss] {
        if loss.dim() != data.dim() {
            return Err(Error::DimensionMismatch { expected: data.dim(), found: loss.dim() });
        }
    }
    Ok(())
}

/// Fits every `l` in `l_min..=l_max` once and scores it under each of `penalties`.
///
/// Candidates whose EM fit collapses, or that ask for more clusters than
/// points, are kept as invalid entries.
pub fn score_candidates(
    data: &Dataset,
    l_min: usize,
    l_max: usize,
    em_loss: &LossModel,
    bic_loss: &LossModel,
    penalties: &[PenaltyKind],
    cfg: &EmConfig,
) -> Result<CandidateTable> {
    check_range(data, l_min, l_max, em_loss, bic_loss)?;
    let mut candidates = Vec::with_capacity(l_max - l_min + 1);
    for l in l_min..=l_max {
        let sub = cfg.with_seed(candidate_seed(cfg.seed, l));
        let score = match em_fit(data, l, em_loss, &sub) {
            Ok(est) => {
                let part = hard_cluster(&est.responsibilities);
                score_candidate(data, &part, &est.clusters, bic_loss, penalties)?
            }
            Err(e @ (Error::DegenerateCluster { .. } | Error::TooManyClusters { .. } | Error::NotPositiveDefinite)) => {
                CandidateScore::invalid(l, penalties, e.to_string())
            }
            Err(e) => return Err(e),
        };
        candidates.push(score);
    }
    Ok(CandidateTable { candidates })
}

/// Estimates the number of clusters as the maximizer of the chosen criterion.
pub fn enumerate_clusters(
    data: &Dataset,
    l_min: usize,
    l_max: usize,
    em_loss: &LossModel,
    bic_loss: &LossModel,
    penalty: PenaltyKind,
    cfg: &EmConfig,
) -> Result<EnumerationResult> {
    score_candidates(data, l_min, l_max, em_loss, bic_loss, &[penalty], cfg)?.into_result(penalty)
}
