//! Synthetic data: the three-component Gaussian benchmark, replacement
//! outliers and a two-cluster multivariate t₃ pair.
//!
//! Component `k` draws from stream `k` of a ChaCha20 generator seeded with
//! the caller's seed; normals come from the Box–Muller transform. Generated
//! truth labels are 1-based component ids.

use nalgebra::{dmatrix, dvector, DMatrix, DVector};
use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

use crate::data::Dataset;
use crate::seed::derive_seed;
use crate::{Error, Result};

const T_NU: usize = 3;

/// Box–Muller normal source that caches the second variate.
pub struct NormalSource<R> {
    rng: R,
    spare: Option<f64>,
}

impl<R: Rng> NormalSource<R> {
    pub fn new(rng: R) -> Self {
        Self { rng, spare: None }
    }

    pub fn next(&mut self) -> f64 {
        if let Some(z) = self.spare.take() {
            return z;
        }
        // u1 in (0, 1] keeps the log finite
        let u1 = 1.0 - self.rng.random::<f64>();
        let u2 = self.rng.random::<f64>();
        let radius = (-2.0 * u1.ln()).sqrt();
        let angle = 2.0 * std::f64::consts::PI * u2;
        self.spare = Some(radius * angle.sin());
        radius * angle.cos()
    }

    pub fn fill(&mut self, out: &mut DVector<f64>) {
        for v in out.iter_mut() {
            *v = self.next();
        }
    }
}

fn component_stream(seed: u64, k: usize) -> ChaCha20Rng {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(k as u64);
    rng
}

#[derive(Debug, Clone, PartialEq)]
pub struct ThreeBlobSpec {
    pub n_per_cluster: usize,
    pub means: [DVector<f64>; 3],
    pub covs: [DMatrix<f64>; 3],
}

impl ThreeBlobSpec {
    /// Benchmark centroids and covariances with `n_per_cluster` points each.
    pub fn new(n_per_cluster: usize) -> Self {
        Self {
            n_per_cluster,
            means: [dvector![0.0, 5.0], dvector![5.0, 0.0], dvector![-5.0, 0.0]],
            covs: [dmatrix![2.0, 0.5; 0.5, 0.5], dmatrix![1.0, 0.0; 0.0, 0.1], dmatrix![2.0, -0.5; -0.5, 0.5]],
        }
    }

    pub fn dim(&self) -> usize {
        self.means[0].len()
    }
}

impl Default for ThreeBlobSpec {
    fn default() -> Self {
        Self::new(250)
    }
}

/// Per-component sizes may differ; `sizes[k]` points for component `k`.
pub fn gen_blobs_sized(spec: &ThreeBlobSpec, sizes: [usize; 3], seed: u64) -> Result<(Dataset, Vec<usize>)> {
    let r = spec.dim();
    let total: usize = sizes.iter().sum();
    if total == 0 {
        return Err(Error::EmptyInput);
    }
    let mut points = DMatrix::zeros(total, r);
    let mut labels = Vec::with_capacity(total);
    let mut row = 0;
    let mut z = DVector::zeros(r);
    for k in 0..3 {
        if spec.means[k].len() != r || spec.covs[k].nrows() != r {
            return Err(Error::DimensionMismatch { expected: r, found: spec.covs[k].nrows() });
        }
        let chol = spec.covs[k].clone().cholesky().ok_or(Error::NotPositiveDefinite)?;
        let lower = chol.l();
        let mut normals = NormalSource::new(component_stream(seed, k));
        for _ in 0..sizes[k] {
            normals.fill(&mut z);
            let x = &spec.means[k] + &lower * &z;
            points.row_mut(row).copy_from(&x.transpose());
            labels.push(k + 1);
            row += 1;
        }
    }
    Ok((Dataset::from_matrix(points)?, labels))
}

/// `N_k` draws from each of the three Gaussian components, in component order.
pub fn gen_three_blobs(spec: &ThreeBlobSpec, seed: u64) -> Result<(Dataset, Vec<usize>)> {
    if spec.n_per_cluster == 0 {
        return Err(Error::InvalidParameter("n_per_cluster must be positive".into()));
    }
    let n = spec.n_per_cluster;
    gen_blobs_sized(spec, [n, n, n], seed)
}

/// Overwrites `floor(eps·N)` distinct, uniformly chosen rows with i.i.d.
/// `Uniform[lo, hi]` coordinates. Returns the data and the replacement mask.
pub fn replace_outliers(data: &Dataset, eps: f64, lo: f64, hi: f64, seed: u64) -> Result<(Dataset, Vec<bool>)> {
    if !(0.0..1.0).contains(&eps) {
        return Err(Error::InvalidParameter(format!("contamination fraction {eps} outside [0, 1)")));
    }
    if !(lo <= hi) {
        return Err(Error::InvalidParameter(format!("empty range [{lo}, {hi}]")));
    }
    let n = data.n();
    let count = (eps * n as f64).floor() as usize;
    let mut rng = ChaCha20Rng::seed_from_u64(derive_seed(seed, "outliers", &[]));
    let mut points = data.points().clone();
    let mut mask = vec![false; n];
    let mut chosen = index::sample(&mut rng, n, count).into_vec();
    chosen.sort_unstable();
    for i in chosen {
        mask[i] = true;
        for j in 0..data.dim() {
            points[(i, j)] = rng.random_range(lo..=hi);
        }
    }
    Ok((Dataset::from_matrix(points)?, mask))
}

/// Overwrites one uniformly chosen row with `position`.
pub fn place_single_outlier(data: &Dataset, position: &DVector<f64>, seed: u64) -> Result<Dataset> {
    if position.len() != data.dim() {
        return Err(Error::DimensionMismatch { expected: data.dim(), found: position.len() });
    }
    let mut rng = ChaCha20Rng::seed_from_u64(derive_seed(seed, "single-outlier", &[]));
    let i = rng.random_range(0..data.n());
    let mut points = data.points().clone();
    points.row_mut(i).copy_from(&position.transpose());
    Dataset::from_matrix(points)
}

/// Two clusters of `t₃(c·1, I_r)` samples with `c ∈ {0, separation}`, drawn
/// as `μ + z / sqrt(w/ν)` with `z ~ N(0, I)` and `w ~ χ²_ν`.
pub fn gen_t3_pair(r: usize, n_per_cluster: usize, separation: f64, seed: u64) -> Result<(Dataset, Vec<usize>)> {
    if r == 0 {
        return Err(Error::InvalidParameter("dimension must be positive".into()));
    }
    if n_per_cluster == 0 {
        return Err(Error::InvalidParameter("n_per_cluster must be positive".into()));
    }
    let mut points = DMatrix::zeros(2 * n_per_cluster, r);
    let mut labels = Vec::with_capacity(2 * n_per_cluster);
    for k in 0..2 {
        let centre = if k == 0 { 0.0 } else { separation };
        let mut normals = NormalSource::new(component_stream(seed, k));
        for i in 0..n_per_cluster {
            let w: f64 = (0..T_NU).map(|_| normals.next().powi(2)).sum();
            let scale = (w / T_NU as f64).sqrt().recip();
            let row = k * n_per_cluster + i;
            for j in 0..r {
                points[(row, j)] = centre + normals.next() * scale;
            }
            labels.push(k + 1);
        }
    }
    Ok((Dataset::from_matrix(points)?, labels))
}
