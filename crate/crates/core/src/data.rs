//! Validated containers for observations, cluster parameters and partitions.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use crate::{Error, Result};

/// `N` observations of dimension `r`, stored as the rows of a matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    points: DMatrix<f64>,
}

impl Dataset {
    /// Builds a dataset from row vectors, rejecting empty, ragged or non-finite input.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let first = rows.first().ok_or(Error::EmptyInput)?;
        let dim = first.len();
        if dim == 0 {
            return Err(Error::EmptyInput);
        }
        for (i, row) in rows.iter().enumerate() {
            if row.len() != dim {
                return Err(Error::DimensionMismatch { expected: dim, found: row.len() });
            }
            if let Some(j) = row.iter().position(|v| !v.is_finite()) {
                return Err(Error::NonFiniteEntry { row: i, col: j });
            }
        }
        let points = DMatrix::from_fn(rows.len(), dim, |i, j| rows[i][j]);
        Ok(Self { points })
    }

    pub fn from_matrix(points: DMatrix<f64>) -> Result<Self> {
        if points.nrows() == 0 || points.ncols() == 0 {
            return Err(Error::EmptyInput);
        }
        for i in 0..points.nrows() {
            for j in 0..points.ncols() {
                if !points[(i, j)].is_finite() {
                    return Err(Error::NonFiniteEntry { row: i, col: j });
                }
            }
        }
        Ok(Self { points })
    }

    pub fn n(&self) -> usize {
        self.points.nrows()
    }

    pub fn dim(&self) -> usize {
        self.points.ncols()
    }

    pub fn points(&self) -> &DMatrix<f64> {
        &self.points
    }

    pub fn point(&self, i: usize) -> DVector<f64> {
        self.points.row(i).transpose()
    }

    /// Rows selected by `indices`, in order.
    pub fn select(&self, indices: &[usize]) -> DMatrix<f64> {
        DMatrix::from_fn(indices.len(), self.dim(), |i, j| self.points[(indices[i], j)])
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.points
    }
}

/// Cholesky factor of a scatter matrix together with its log-determinant.
#[derive(Debug, Clone)]
pub struct ScatterFactor {
    chol: Cholesky<f64, Dyn>,
    log_det: f64,
}

impl ScatterFactor {
    pub fn new(scatter: &DMatrix<f64>) -> Result<Self> {
        let chol = Cholesky::new(scatter.clone()).ok_or(Error::NotPositiveDefinite)?;
        let l = chol.l_dirty();
        let mut log_det = 0.0;
        for i in 0..l.nrows() {
            let d = l[(i, i)];
            if !(d > 0.0) || !d.is_finite() {
                return Err(Error::NotPositiveDefinite);
            }
            log_det += 2.0 * d.ln();
        }
        Ok(Self { chol, log_det })
    }

    /// Factorizes `scatter`; on failure retries once with `scatter + λI`,
    /// `λ = ridge · trace(scatter) / r`.
    pub fn with_ridge(scatter: &DMatrix<f64>, ridge: f64) -> Result<(Self, DMatrix<f64>)> {
        match Self::new(scatter) {
            Ok(f) => Ok((f, scatter.clone())),
            Err(_) => {
                let r = scatter.nrows() as f64;
                let lambda = ridge * scatter.trace() / r;
                if !(lambda > 0.0) {
                    return Err(Error::NotPositiveDefinite);
                }
                let mut repaired = scatter.clone();
                for i in 0..scatter.nrows() {
                    repaired[(i, i)] += lambda;
                }
                Ok((Self::new(&repaired)?, repaired))
            }
        }
    }

    pub fn dim(&self) -> usize {
        self.chol.l_dirty().nrows()
    }

    /// `ln |S|`.
    pub fn log_det(&self) -> f64 {
        self.log_det
    }

    /// `S⁻¹ v`.
    pub fn solve(&self, v: &DVector<f64>) -> DVector<f64> {
        self.chol.solve(v)
    }

    pub fn inverse(&self) -> DMatrix<f64> {
        self.chol.inverse()
    }

    /// `dᵀ S⁻¹ d` via a forward substitution with the Cholesky factor.
    pub fn quad_form(&self, d: &DVector<f64>) -> f64 {
        self.quad_form_slice(d.as_slice())
    }

    pub(crate) fn quad_form_slice(&self, d: &[f64]) -> f64 {
        let l = self.chol.l_dirty();
        let n = d.len();
        let mut stack = [0.0f64; 16];
        let mut heap = Vec::new();
        let z: &mut [f64] = if n <= 16 {
            &mut stack[..n]
        } else {
            heap.resize(n, 0.0);
            &mut heap
        };
        let mut acc = 0.0;
        for i in 0..n {
            let mut s = d[i];
            for k in 0..i {
                s -= l[(i, k)] * z[k];
            }
            z[i] = s / l[(i, i)];
            acc += z[i] * z[i];
        }
        acc
    }
}

/// Parameters of one mixture component: centroid, scatter and mixing weight.
#[derive(Debug, Clone)]
pub struct ClusterParams {
    mu: DVector<f64>,
    scatter: DMatrix<f64>,
    weight: f64,
    factor: ScatterFactor,
}

impl PartialEq for ClusterParams {
    fn eq(&self, other: &Self) -> bool {
        self.mu == other.mu && self.scatter == other.scatter && self.weight == other.weight
    }
}

impl ClusterParams {
    pub fn new(mu: DVector<f64>, scatter: DMatrix<f64>, weight: f64) -> Result<Self> {
        let r = mu.len();
        if scatter.nrows() != r || scatter.ncols() != r {
            return Err(Error::DimensionMismatch { expected: r, found: scatter.nrows() });
        }
        if !(weight > 0.0 && weight <= 1.0) {
            return Err(Error::InvalidParameter(format!("mixing weight {weight} outside (0, 1]")));
        }
        let scale = scatter.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(f64::MIN_POSITIVE);
        for i in 0..r {
            for j in 0..i {
                if (scatter[(i, j)] - scatter[(j, i)]).abs() > 1e-12 * scale {
                    return Err(Error::NotSymmetric);
                }
            }
        }
        let factor = ScatterFactor::new(&scatter)?;
        Ok(Self { mu, scatter, weight, factor })
    }

    pub(crate) fn from_parts(mu: DVector<f64>, scatter: DMatrix<f64>, weight: f64, factor: ScatterFactor) -> Self {
        Self { mu, scatter, weight, factor }
    }

    pub fn mu(&self) -> &DVector<f64> {
        &self.mu
    }

    pub fn scatter(&self) -> &DMatrix<f64> {
        &self.scatter
    }

    pub fn weight(&self) -> f64 {
        self.weight
    }

    pub fn factor(&self) -> &ScatterFactor {
        &self.factor
    }

    pub fn dim(&self) -> usize {
        self.mu.len()
    }

    /// Same centroid and scatter with a different mixing weight.
    pub fn with_weight(&self, weight: f64) -> Result<Self> {
        if !(weight > 0.0 && weight <= 1.0) {
            return Err(Error::InvalidParameter(format!("mixing weight {weight} outside (0, 1]")));
        }
        Ok(Self { weight, ..self.clone() })
    }

    /// Squared Mahalanobis distance of a matrix row.
    pub(crate) fn mahalanobis_row(&self, points: &DMatrix<f64>, row: usize) -> f64 {
        let r = self.mu.len();
        if r <= 16 {
            let mut d = [0.0f64; 16];
            for j in 0..r {
                d[j] = points[(row, j)] - self.mu[j];
            }
            self.factor.quad_form_slice(&d[..r])
        } else {
            let diff = points.row(row).transpose() - &self.mu;
            self.factor.quad_form(&diff)
        }
    }
}

/// Squared Mahalanobis distance `(x − μ)ᵀ S⁻¹ (x − μ)`.
pub fn mahalanobis_sq(x: &DVector<f64>, params: &ClusterParams) -> Result<f64> {
    if x.len() != params.dim() {
        return Err(Error::DimensionMismatch { expected: params.dim(), found: x.len() });
    }
    let diff = x - params.mu();
    Ok(params.factor().quad_form(&diff).max(0.0))
}

/// Output of the EM algorithm for one candidate model.
#[derive(Debug, Clone)]
pub struct MixtureEstimate {
    pub clusters: Vec<ClusterParams>,
    /// `N × l` matrix of responsibilities.
    pub responsibilities: DMatrix<f64>,
    pub loglik: f64,
    pub iterations: usize,
    pub converged: bool,
}

impl MixtureEstimate {
    pub fn l(&self) -> usize {
        self.clusters.len()
    }
}

/// Hard assignment of observations to clusters (0-based labels).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HardPartition {
    pub labels: Vec<usize>,
    pub counts: Vec<usize>,
}

impl HardPartition {
    pub fn from_labels(labels: Vec<usize>, l: usize) -> Result<Self> {
        let mut counts = vec![0; l];
        for &lab in &labels {
            if lab >= l {
                return Err(Error::InvalidParameter(format!("label {lab} out of range for {l} clusters")));
            }
            counts[lab] += 1;
        }
        Ok(Self { labels, counts })
    }

    pub fn l(&self) -> usize {
        self.counts.len()
    }

    /// Indices of the members of cluster `m`.
    pub fn members(&self, m: usize) -> Vec<usize> {
        self.labels.iter().enumerate().filter(|(_, &lab)| lab == m).map(|(i, _)| i).collect()
    }
}
