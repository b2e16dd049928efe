//! Robust M-estimation based Bayesian cluster enumeration for mixtures of
//! real elliptically symmetric (RES) distributions.
//!
//! The pipeline for a candidate number of clusters `l` is:
//!
//! 1. fit an `l`-component mixture with the EM algorithm under a loss model
//!    that has a density generator ([`em::em_fit`]),
//! 2. hard-assign every point to its most responsible component
//!    ([`enumerate::hard_cluster`]),
//! 3. score the candidate with one of the information criteria in
//!    [`criteria`] (finite-sample, asymptotic or Schwarz penalty), possibly
//!    under a different loss than the one used by EM.
//!
//! [`enumerate::enumerate_clusters`] runs this loop over a range of `l` and
//! returns the maximizing candidate.

pub mod criteria;
pub mod data;
pub mod datagen;
pub mod em;
pub mod enumerate;
mod error;
pub mod fim;
pub mod losses;
pub mod matcalc;
pub mod seed;
pub mod special;

pub use criteria::{CandidateScore, ClusterTerm, PenaltyKind};
pub use data::{ClusterParams, Dataset, HardPartition, MixtureEstimate, ScatterFactor};
pub use em::EmConfig;
pub use enumerate::EnumerationResult;
pub use error::{Error, Result};
pub use losses::{LossKind, LossModel};
