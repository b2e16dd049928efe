//! EM algorithm for mixtures of RES distributions, initialized by K-medoids.
//!
//! One iteration uses the squared Mahalanobis distances `t̂_nm` of the
//! previous parameters for both the responsibilities `v̂_nm` and the
//! M-step weights `v̂'_nm = v̂_nm ψ(t̂_nm)`:
//!
//! ```text
//! μ̂_m = Σ_n v̂'_nm x_n / Σ_n v̂'_nm
//! Ŝ_m = 2 Σ_n v̂'_nm (x_n − μ̂_m)(x_n − μ̂_m)ᵀ / Σ_n v̂_nm
//! γ̂_m = Σ_n v̂_nm / N
//! ```

use nalgebra::{DMatrix, DVector};
use rand::seq::index;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::data::{ClusterParams, Dataset, MixtureEstimate, ScatterFactor};
use crate::losses::LossModel;
use crate::seed::{derive_seed, rng_for};
use crate::{Error, Result};

/// Effective weight `Σ_n v̂'_nm` below which a component counts as collapsed.
const MIN_EFFECTIVE_WEIGHT: f64 = 1e-12;

/// K-medoids runs on at most this many points (CLARA-style); the remaining
/// points are only assigned to the resulting medoids.
const MEDOID_POOL: usize = 512;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EmConfig {
    pub max_iters: usize,
    /// Stop when the absolute change of the mixture log-likelihood drops below this.
    pub tol: f64,
    pub seed: u64,
    /// K-medoids alternation rounds.
    pub init_iters: usize,
    /// Independent K-medoids seedings; the one with the lowest summed distance is used.
    pub init_replicates: usize,
    /// Relative ridge for repairing numerically singular scatter matrices.
    pub ridge: f64,
    /// Independent initializations; the fit with the largest log-likelihood wins.
    pub restarts: usize,
}

impl Default for EmConfig {
    fn default() -> Self {
        Self { max_iters: 200, tol: 1e-6, seed: 0, init_iters: 10, init_replicates: 5, ridge: 1e-8, restarts: 1 }
    }
}

impl EmConfig {
    pub fn with_seed(self, seed: u64) -> Self {
        Self { seed, ..self }
    }
}

fn sq_dist(points: &DMatrix<f64>, a: usize, b: usize) -> f64 {
    let mut acc = 0.0;
    for j in 0..points.ncols() {
        let d = points[(a, j)] - points[(b, j)];
        acc += d * d;
    }
    acc
}

/// Index into `medoids` of the nearest one (ties to the lower index) and its squared distance.
fn nearest(points: &DMatrix<f64>, i: usize, medoids: &[usize]) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (m, &c) in medoids.iter().enumerate() {
        let d = sq_dist(points, i, c);
        if d < best.1 {
            best = (m, d);
        }
    }
    best
}

/// Greedy k-means++ seeding over `pool`: each step draws a few candidates
/// with probability proportional to the squared distance to the nearest
/// medoid and keeps the one with the lowest summed distance afterwards.
/// Returns distinct point indices.
fn seed_medoids<R: Rng>(points: &DMatrix<f64>, pool: &[usize], l: usize, rng: &mut R) -> Vec<usize> {
    let trials = 2 + (l as f64).ln().floor() as usize;
    let mut medoids = Vec::with_capacity(l);
    let mut chosen = vec![false; pool.len()];
    let first = rng.random_range(0..pool.len());
    medoids.push(pool[first]);
    chosen[first] = true;
    let mut d2: Vec<f64> = pool.iter().map(|&i| sq_dist(points, i, pool[first])).collect();
    let mut next = vec![0.0; pool.len()];
    while medoids.len() < l {
        let total: f64 = d2.iter().zip(&chosen).filter(|(_, &c)| !c).map(|(d, _)| *d).sum();
        let mut best: Option<(usize, f64)> = None;
        for _ in 0..trials {
            let pick = if total > 0.0 {
                let mut u = rng.random::<f64>() * total;
                let mut pick = None;
                for (k, (&d, &c)) in d2.iter().zip(&chosen).enumerate() {
                    if c || d == 0.0 {
                        continue;
                    }
                    pick = Some(k);
                    if u < d {
                        break;
                    }
                    u -= d;
                }
                pick.expect("positive mass implies a candidate")
            } else {
                // every remaining point coincides with a medoid
                let free: Vec<usize> = (0..pool.len()).filter(|&k| !chosen[k]).collect();
                free[rng.random_range(0..free.len())]
            };
            let cost: f64 = pool.iter().zip(&d2).map(|(&i, &d)| d.min(sq_dist(points, i, pool[pick])).sqrt()).sum();
            if best.is_none_or(|(_, c)| cost < c) {
                best = Some((pick, cost));
            }
        }
        let pick = best.expect("at least one trial").0;
        chosen[pick] = true;
        medoids.push(pool[pick]);
        for (k, &i) in pool.iter().enumerate() {
            next[k] = d2[k].min(sq_dist(points, i, pool[pick]));
        }
        std::mem::swap(&mut d2, &mut next);
    }
    medoids
}

/// Alternates assignment and medoid update on `pool`. Returns `true` if stable.
fn medoid_sweep(points: &DMatrix<f64>, pool: &[usize], medoids: &mut [usize]) -> bool {
    let l = medoids.len();
    let mut members: Vec<Vec<usize>> = vec![Vec::new(); l];
    let mut far = (0usize, -1.0f64);
    for &i in pool {
        let (m, d) = nearest(points, i, medoids);
        members[m].push(i);
        if d > far.1 && !medoids.contains(&i) {
            far = (i, d);
        }
    }
    let mut stable = true;
    for m in 0..l {
        if members[m].is_empty() {
            // reseed to the point farthest from its nearest medoid
            if far.1 >= 0.0 {
                medoids[m] = far.0;
                far.1 = -1.0;
                stable = false;
            }
            continue;
        }
        let mut best = (medoids[m], f64::INFINITY);
        for &cand in &members[m] {
            let cost: f64 = members[m].iter().map(|&o| sq_dist(points, cand, o).sqrt()).sum();
            if cost < best.1 || (cost == best.1 && cand < best.0) {
                best = (cand, cost);
            }
        }
        if best.0 != medoids[m] {
            medoids[m] = best.0;
            stable = false;
        }
    }
    stable
}

/// Medoid point indices found by seeded K-medoids; the lowest-cost of
/// `replicates` independent seedings wins.
pub fn kmedoids(data: &Dataset, l: usize, seed: u64, sweeps: usize, replicates: usize) -> Result<Vec<usize>> {
    let n = data.n();
    if l == 0 {
        return Err(Error::InvalidParameter("number of clusters must be positive".into()));
    }
    if l > n {
        return Err(Error::TooManyClusters { l, n });
    }
    let points = data.points();
    let mut rng = rng_for(seed);
    let pool_size = MEDOID_POOL.max(8 * l).min(n);
    let pool: Vec<usize> = if pool_size < n {
        let mut p = index::sample(&mut rng, n, pool_size).into_vec();
        p.sort_unstable();
        p
    } else {
        (0..n).collect()
    };
    let mut best: Option<(Vec<usize>, f64)> = None;
    for _ in 0..replicates.max(1) {
        let mut medoids = seed_medoids(points, &pool, l, &mut rng);
        for _ in 0..sweeps {
            if medoid_sweep(points, &pool, &mut medoids) {
                break;
            }
        }
        let cost: f64 = pool.iter().map(|&i| nearest(points, i, &medoids).1.sqrt()).sum();
        if best.as_ref().is_none_or(|(_, c)| cost < *c) {
            best = Some((medoids, cost));
        }
    }
    Ok(best.expect("at least one replicate").0)
}

/// Initial parameters: K-medoids centroids, per-cluster scatter around the
/// medoid of the nearest-assigned points, and weights `N_m / N`. A cluster
/// whose scatter is singular even after the ridge falls back to the pooled
/// within-cluster scatter, then to the overall sample covariance.
pub fn kmedoids_init(data: &Dataset, l: usize, seed: u64, sweeps: usize) -> Result<Vec<ClusterParams>> {
    let cfg = EmConfig { seed, init_iters: sweeps, ..EmConfig::default() };
    kmedoids_init_cfg(data, l, &cfg)
}

fn kmedoids_init_cfg(data: &Dataset, l: usize, cfg: &EmConfig) -> Result<Vec<ClusterParams>> {
    let ridge = cfg.ridge;
    let medoids = kmedoids(data, l, cfg.seed, cfg.init_iters, cfg.init_replicates)?;
    let points = data.points();
    let (n, r) = (data.n(), data.dim());
    let mut labels: Vec<usize> = (0..n).map(|i| nearest(points, i, &medoids).0).collect();
    for (m, &c) in medoids.iter().enumerate() {
        labels[c] = m;
    }
    let mut counts = vec![0usize; l];
    let mut scatters = vec![DMatrix::<f64>::zeros(r, r); l];
    let centers: Vec<DVector<f64>> = medoids.iter().map(|&c| data.point(c)).collect();
    for i in 0..n {
        let m = labels[i];
        counts[m] += 1;
        let d = points.row(i).transpose() - &centers[m];
        scatters[m].ger(1.0, &d, &d, 1.0);
    }
    let pooled = scatters.iter().fold(DMatrix::zeros(r, r), |acc, s| acc + s) / n as f64;
    let mean = points.row_mean().transpose();
    let mut global = DMatrix::zeros(r, r);
    for i in 0..n {
        let d = points.row(i).transpose() - &mean;
        global.ger(1.0 / n as f64, &d, &d, 1.0);
    }
    let mut out = Vec::with_capacity(l);
    for m in 0..l {
        let s = &scatters[m] / counts[m] as f64;
        let (factor, s) = match ScatterFactor::with_ridge(&s, ridge) {
            Ok(ok) => ok,
            // too few distinct members to define a scatter
            Err(_) => ScatterFactor::with_ridge(&pooled, ridge)
                .or_else(|_| ScatterFactor::with_ridge(&global, ridge))
                .map_err(|_| Error::DegenerateCluster { cluster: m })?,
        };
        let weight = counts[m] as f64 / n as f64;
        out.push(ClusterParams::from_parts(centers[m].clone(), s, weight, factor));
    }
    Ok(out)
}

/// Per-point quantities of a mixture: `t̂_nm` and the log of the weighted
/// component densities `ln γ_m − ½ ln|S_m| + ln g(t̂_nm)`.
struct Evaluation {
    t: DMatrix<f64>,
    log_joint: DMatrix<f64>,
    /// Per-row log-sum-exp of `log_joint`.
    log_norm: DVector<f64>,
    loglik: f64,
}

fn evaluate(data: &Dataset, clusters: &[ClusterParams], loss: &LossModel) -> Evaluation {
    let (n, l) = (data.n(), clusters.len());
    let points = data.points();
    let mut t = DMatrix::zeros(n, l);
    let mut log_joint = DMatrix::zeros(n, l);
    for (m, c) in clusters.iter().enumerate() {
        let base = c.weight().ln() - 0.5 * c.factor().log_det();
        for i in 0..n {
            let tm = c.mahalanobis_row(points, i).max(0.0);
            t[(i, m)] = tm;
            log_joint[(i, m)] = base - loss.rho_unchecked(tm);
        }
    }
    let mut log_norm = DVector::zeros(n);
    for i in 0..n {
        let row = log_joint.row(i);
        let hi = row.max();
        log_norm[i] = if hi.is_finite() { hi + row.iter().map(|v| (v - hi).exp()).sum::<f64>().ln() } else { hi };
    }
    let loglik = log_norm.sum();
    Evaluation { t, log_joint, log_norm, loglik }
}

fn responsibilities(eval: &Evaluation) -> DMatrix<f64> {
    let mut resp = eval.log_joint.clone();
    for i in 0..resp.nrows() {
        let z = eval.log_norm[i];
        resp.row_mut(i).apply(|v| *v = (*v - z).exp());
        let s = resp.row(i).sum();
        resp.row_mut(i).unscale_mut(s);
    }
    resp
}

fn require_density(loss: &LossModel) -> Result<()> {
    if loss.has_density() {
        Ok(())
    } else {
        Err(Error::NoDensityGenerator)
    }
}

/// Responsibilities `v̂_nm`, computed in log-space.
pub fn e_step(data: &Dataset, clusters: &[ClusterParams], loss: &LossModel) -> Result<DMatrix<f64>> {
    require_density(loss)?;
    check_dims(data, clusters)?;
    let eval = evaluate(data, clusters, loss);
    if !eval.loglik.is_finite() {
        return Err(Error::NotPositiveDefinite);
    }
    Ok(responsibilities(&eval))
}

fn check_dims(data: &Dataset, clusters: &[ClusterParams]) -> Result<()> {
    for c in clusters {
        if c.dim() != data.dim() {
            return Err(Error::DimensionMismatch { expected: data.dim(), found: c.dim() });
        }
    }
    Ok(())
}

/// M-step given responsibilities; `t̂_nm` are taken from `prev`.
pub fn m_step(
    data: &Dataset,
    resp: &DMatrix<f64>,
    loss: &LossModel,
    prev: &[ClusterParams],
    ridge: f64,
) -> Result<Vec<ClusterParams>> {
    check_dims(data, prev)?;
    if resp.nrows() != data.n() || resp.ncols() != prev.len() {
        return Err(Error::DimensionMismatch { expected: prev.len(), found: resp.ncols() });
    }
    let points = data.points();
    let t = DMatrix::from_fn(data.n(), prev.len(), |i, m| prev[m].mahalanobis_row(points, i).max(0.0));
    m_update(data, resp, &t, loss, ridge)
}

fn m_update(data: &Dataset, resp: &DMatrix<f64>, t: &DMatrix<f64>, loss: &LossModel, ridge: f64) -> Result<Vec<ClusterParams>> {
    let (n, r) = (data.n(), data.dim());
    let points = data.points();
    let mut out = Vec::with_capacity(resp.ncols());
    for m in 0..resp.ncols() {
        let weights: Vec<f64> = (0..n).map(|i| resp[(i, m)] * loss.psi_unchecked(t[(i, m)])).collect();
        let eff: f64 = weights.iter().sum();
        let mass: f64 = resp.column(m).sum();
        if !(eff >= MIN_EFFECTIVE_WEIGHT) || !(mass > 0.0) {
            return Err(Error::DegenerateCluster { cluster: m });
        }
        let mut mu = DVector::zeros(r);
        for j in 0..r {
            let col = points.column(j);
            mu[j] = weights.iter().zip(col.iter()).map(|(w, x)| w * x).sum::<f64>() / eff;
        }
        let mut s = DMatrix::zeros(r, r);
        let mut d = DVector::zeros(r);
        for i in 0..n {
            if weights[i] == 0.0 {
                continue;
            }
            for j in 0..r {
                d[j] = points[(i, j)] - mu[j];
            }
            for b in 0..r {
                for a in b..r {
                    s[(a, b)] += weights[i] * d[a] * d[b];
                }
            }
        }
        s *= 2.0 / mass;
        s.fill_upper_triangle_with_lower_triangle();
        let (factor, s) = ScatterFactor::with_ridge(&s, ridge).map_err(|_| Error::DegenerateCluster { cluster: m })?;
        let weight = (mass / n as f64).min(1.0);
        out.push(ClusterParams::from_parts(mu, s, weight, factor));
    }
    // renormalize away rounding drift
    let total: f64 = out.iter().map(|c| c.weight()).sum();
    for c in out.iter_mut() {
        *c = c.with_weight((c.weight() / total).min(1.0))?;
    }
    Ok(out)
}

/// Mixture log-likelihood `Σ_n ln Σ_m γ_m |S_m|^{−1/2} g(t_nm)`.
pub fn mixture_loglik(data: &Dataset, clusters: &[ClusterParams], loss: &LossModel) -> Result<f64> {
    require_density(loss)?;
    check_dims(data, clusters)?;
    Ok(evaluate(data, clusters, loss).loglik)
}

/// Fits an `l`-component mixture. Non-convergence within `max_iters` is
/// reported through `converged = false`, not as an error.
pub fn em_fit(data: &Dataset, l: usize, loss: &LossModel, cfg: &EmConfig) -> Result<MixtureEstimate> {
    require_density(loss)?;
    if l > data.n() {
        return Err(Error::TooManyClusters { l, n: data.n() });
    }
    let restarts = cfg.restarts.max(1);
    if restarts == 1 {
        return em_fit_traced(data, l, loss, cfg).map(|(est, _)| est);
    }
    let mut best: Option<MixtureEstimate> = None;
    let mut last_err = None;
    for k in 0..restarts {
        let sub = EmConfig { seed: derive_seed(cfg.seed, "em-restart", &[k as u64]), restarts: 1, ..*cfg };
        match em_fit_traced(data, l, loss, &sub) {
            Ok((est, _)) => {
                if best.as_ref().is_none_or(|b| est.loglik > b.loglik) {
                    best = Some(est);
                }
            }
            Err(e) => last_err = Some(e),
        }
    }
    best.ok_or_else(|| last_err.expect("at least one restart ran"))
}

/// Like [`em_fit`] with a single initialization, also returning the
/// log-likelihood after initialization and after every iteration.
pub fn em_fit_traced(data: &Dataset, l: usize, loss: &LossModel, cfg: &EmConfig) -> Result<(MixtureEstimate, Vec<f64>)> {
    require_density(loss)?;
    if l > data.n() {
        return Err(Error::TooManyClusters { l, n: data.n() });
    }
    let mut clusters = kmedoids_init_cfg(data, l, cfg)?;
    let mut eval = evaluate(data, &clusters, loss);
    let mut trace = vec![eval.loglik];
    let mut converged = false;
    let mut iterations = 0;
    for i in 1..=cfg.max_iters {
        let resp = responsibilities(&eval);
        clusters = m_update(data, &resp, &eval.t, loss, cfg.ridge)?;
        let next = evaluate(data, &clusters, loss);
        if !next.loglik.is_finite() {
            return Err(Error::DegenerateCluster { cluster: 0 });
        }
        iterations = i;
        let delta = (next.loglik - eval.loglik).abs();
        eval = next;
        trace.push(eval.loglik);
        if delta < cfg.tol {
            converged = true;
            break;
        }
    }
    let responsibilities = responsibilities(&eval);
    let est = MixtureEstimate { clusters, responsibilities, loglik: eval.loglik, iterations, converged };
    Ok((est, trace))
}
