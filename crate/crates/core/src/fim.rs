//! Per-cluster Fisher information blocks and the log-determinant of the
//! observed information `Ĵ_m = −F̂_m`.
//!
//! Parameters are ordered `(μ, vech S)`. With `x̃ = x − μ̂`, `a = Ŝ⁻¹x̃` and
//! `D` the duplication matrix:
//!
//! ```text
//! F̂_μμ = −4 Ŝ⁻¹ (Σ η x̃x̃ᵀ) Ŝ⁻¹ − 2 (Σ ψ) Ŝ⁻¹
//! F̂_μS = −2 Σ η a vec(aaᵀ)ᵀ D
//! F̂_SS = −Dᵀ (Σ η vec(aaᵀ) vec(aaᵀ)ᵀ) D − (N_m/2) Dᵀ(Ŝ⁻¹ ⊗ Ŝ⁻¹) D
//! ```

use nalgebra::{DMatrix, DVector};

use crate::data::ScatterFactor;
use crate::losses::LossModel;
use crate::matcalc::{vech_index, vech_len};
use crate::{Error, Result};

/// Condition number of `−F̂_μμ` above which the block counts as singular.
pub const MAX_CONDITION: f64 = 1e12;

#[derive(Debug, Clone, PartialEq)]
pub struct FimBlocks {
    pub mu_mu: DMatrix<f64>,
    /// `r × r(r+1)/2`; the `(S, μ)` block is its transpose.
    pub mu_s: DMatrix<f64>,
    pub s_s: DMatrix<f64>,
}

impl FimBlocks {
    pub fn dim(&self) -> usize {
        self.mu_mu.nrows()
    }

    /// The assembled square matrix `[[F_μμ, F_μS], [F_Sμ, F_SS]]`.
    pub fn full(&self) -> DMatrix<f64> {
        let r = self.dim();
        let p = r + self.s_s.nrows();
        let mut f = DMatrix::zeros(p, p);
        f.view_mut((0, 0), (r, r)).copy_from(&self.mu_mu);
        f.view_mut((0, r), (r, p - r)).copy_from(&self.mu_s);
        f.view_mut((r, 0), (p - r, r)).copy_from(&self.mu_s.transpose());
        f.view_mut((r, r), (p - r, p - r)).copy_from(&self.s_s);
        f
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FimLogDet {
    /// `ln |det Ĵ|`.
    pub value: f64,
    /// Whether both `−F̂_μμ` and its Schur complement are positive definite.
    pub positive_definite: bool,
}

/// `Dᵀ vec(A)` for symmetric `A`: diagonal entries once, off-diagonal twice.
fn dup_transpose_vec(a: &DMatrix<f64>, out: &mut DVector<f64>) {
    let r = a.nrows();
    for j in 0..r {
        for i in j..r {
            let k = vech_index(r, i, j);
            out[k] = if i == j { a[(i, i)] } else { a[(i, j)] + a[(j, i)] };
        }
    }
}

/// `Dᵀ (A ⊗ A) D` for symmetric `A`, entry by entry.
fn dup_sandwich_kron(a: &DMatrix<f64>) -> DMatrix<f64> {
    let r = a.nrows();
    let q = vech_len(r);
    let pairs: Vec<(usize, usize)> = (0..r).flat_map(|j| (j..r).map(move |i| (i, j))).collect();
    let mut out = DMatrix::zeros(q, q);
    for (p, &(i, j)) in pairs.iter().enumerate() {
        for (s, &(k, l)) in pairs.iter().enumerate() {
            // Σ over the index pairs represented by (i,j) and (k,l)
            let mut v = a[(i, k)] * a[(j, l)];
            if i != j {
                v += a[(j, k)] * a[(i, l)];
            }
            if k != l {
                v += a[(i, l)] * a[(j, k)];
            }
            if i != j && k != l {
                v += a[(j, l)] * a[(i, k)];
            }
            out[(p, s)] = v;
        }
    }
    out
}

/// FIM blocks of one cluster from its member points (rows of `points`).
pub fn fim_blocks(points: &DMatrix<f64>, mu: &DVector<f64>, scatter: &DMatrix<f64>, loss: &LossModel) -> Result<FimBlocks> {
    let r = mu.len();
    if points.ncols() != r || scatter.nrows() != r || scatter.ncols() != r {
        return Err(Error::DimensionMismatch { expected: r, found: points.ncols() });
    }
    if loss.dim() != r {
        return Err(Error::DimensionMismatch { expected: r, found: loss.dim() });
    }
    let factor = ScatterFactor::new(scatter)?;
    let s_inv = factor.inverse();
    let q = vech_len(r);
    let n_m = points.nrows() as f64;

    let mut sum_psi = 0.0;
    let mut eta_outer = DMatrix::zeros(r, r);
    let mut mu_s = DMatrix::zeros(r, q);
    let mut s_s = DMatrix::zeros(q, q);
    let mut xt = DVector::zeros(r);
    let mut daa = DVector::zeros(q);
    for i in 0..points.nrows() {
        for j in 0..r {
            xt[j] = points[(i, j)] - mu[j];
        }
        let a = &s_inv * &xt;
        let t = xt.dot(&a).max(0.0);
        sum_psi += loss.psi_unchecked(t);
        let eta = loss.eta_unchecked(t);
        if eta == 0.0 {
            continue;
        }
        eta_outer.ger(eta, &xt, &xt, 1.0);
        let aa = &a * a.transpose();
        dup_transpose_vec(&aa, &mut daa);
        mu_s.ger(-2.0 * eta, &a, &daa, 1.0);
        s_s.ger(-eta, &daa, &daa, 1.0);
    }
    let mu_mu = &s_inv * &eta_outer * &s_inv * -4.0 - &s_inv * (2.0 * sum_psi);
    s_s -= dup_sandwich_kron(&s_inv) * (n_m / 2.0);
    Ok(FimBlocks { mu_mu, mu_s, s_s })
}

fn log_abs_det(m: &DMatrix<f64>) -> f64 {
    let lu = m.clone().lu();
    let u = lu.u();
    (0..u.nrows()).map(|i| u[(i, i)].abs().ln()).sum()
}

fn symmetric_condition(m: &DMatrix<f64>) -> f64 {
    let sym = (m + m.transpose()) * 0.5;
    let eig = sym.symmetric_eigenvalues();
    let hi = eig.iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
    let lo = eig.iter().fold(f64::INFINITY, |acc, v| acc.min(v.abs()));
    if lo > 0.0 {
        hi / lo
    } else {
        f64::INFINITY
    }
}

/// `ln|Ĵ| = ln|−F̂_μμ| + ln|−F̂_SS + F̂_Sμ F̂_μμ⁻¹ F̂_μS|`.
pub fn fim_logdet(blocks: &FimBlocks) -> Result<FimLogDet> {
    let j_mu = -&blocks.mu_mu;
    let condition = symmetric_condition(&j_mu);
    if !(condition <= MAX_CONDITION) {
        return Err(Error::SingularBlock { condition });
    }
    let lu = j_mu.clone().lu();
    // F_Sμ F_μμ⁻¹ F_μS = −F_Sμ J_μμ⁻¹ F_μS
    let solved = lu.solve(&blocks.mu_s).ok_or(Error::SingularBlock { condition })?;
    let schur = -&blocks.s_s - blocks.mu_s.transpose() * solved;
    let value = log_abs_det(&j_mu) + log_abs_det(&schur);
    if !value.is_finite() {
        return Err(Error::SingularBlock { condition: f64::INFINITY });
    }
    let pd = j_mu.clone().cholesky().is_some() && ((&schur + schur.transpose()) * 0.5).cholesky().is_some();
    Ok(FimLogDet { value, positive_definite: pd })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matcalc::{duplication_matrix, kron};
    use approx::assert_relative_eq;
    use nalgebra::dmatrix;

    fn sample_points() -> DMatrix<f64> {
        dmatrix![
            0.3, -1.2;
            1.1, 0.4;
            -0.7, 0.9;
            2.0, 1.5;
            -1.4, -0.3;
            0.2, 0.1
        ]
    }

    #[test]
    fn gaussian_blocks_closed_form() {
        let pts = sample_points();
        let mu = DVector::from_vec(vec![0.1, 0.2]);
        let s = dmatrix![1.5, 0.3; 0.3, 0.8];
        let g = LossModel::gaussian(2).unwrap();
        let b = fim_blocks(&pts, &mu, &s, &g).unwrap();
        let s_inv = s.clone().try_inverse().unwrap();
        assert!((&b.mu_mu + &s_inv * 6.0).norm() < 1e-12);
        assert!(b.mu_s.norm() == 0.0);
        let d = duplication_matrix(2);
        let expected = d.matrix().transpose() * kron(&s_inv, &s_inv) * d.matrix() * -3.0;
        assert!((&b.s_s - expected).norm() < 1e-12);
    }

    #[test]
    fn blocks_match_kronecker_expressions() {
        let pts = sample_points();
        let mu = DVector::from_vec(vec![0.1, 0.2]);
        let s = dmatrix![1.5, 0.3; 0.3, 0.8];
        let loss = LossModel::t(2, 3.0).unwrap();
        let b = fim_blocks(&pts, &mu, &s, &loss).unwrap();
        let s_inv = s.clone().try_inverse().unwrap();
        let d = duplication_matrix(2);
        let dm = d.matrix();
        let si_k = kron(&s_inv, &s_inv);
        let mut sum_outer4 = DMatrix::zeros(4, 4);
        let mut mu_s = DMatrix::zeros(2, 3);
        let mut mu_mu_eta = DMatrix::zeros(2, 2);
        let mut sum_psi = 0.0;
        for i in 0..pts.nrows() {
            let x = pts.row(i).transpose() - &mu;
            let t = (x.transpose() * &s_inv * &x)[(0, 0)];
            let eta = loss.eta(t).unwrap();
            sum_psi += loss.psi(t).unwrap();
            let xx = &x * x.transpose();
            sum_outer4 += kron(&xx, &xx) * eta;
            mu_mu_eta += &xx * eta;
            let left = &s_inv * &xx * &s_inv;
            let right = (&s_inv * &x).transpose().resize(1, 2, 0.0);
            mu_s += kron(&left, &right) * dm * (-2.0 * eta);
        }
        let mu_mu = &s_inv * mu_mu_eta * &s_inv * -4.0 - &s_inv * (2.0 * sum_psi);
        let s_s = -(dm.transpose() * &si_k * sum_outer4 * &si_k * dm) - dm.transpose() * &si_k * dm * 3.0;
        assert!((&b.mu_mu - mu_mu).norm() < 1e-12);
        assert!((&b.mu_s - mu_s).norm() < 1e-12);
        assert!((&b.s_s - s_s).norm() < 1e-12);
    }

    #[test]
    fn logdet_equals_full_determinant() {
        let pts = sample_points();
        let mu = DVector::from_vec(vec![0.1, 0.2]);
        let s = dmatrix![1.5, 0.3; 0.3, 0.8];
        let loss = LossModel::huber(2, 0.8).unwrap();
        let b = fim_blocks(&pts, &mu, &s, &loss).unwrap();
        let full = -b.full();
        let ld = fim_logdet(&b).unwrap();
        assert_relative_eq!(ld.value, full.determinant().abs().ln(), epsilon = 1e-10);
    }

    #[test]
    fn gaussian_logdet_closed_form() {
        // ln|J| = r ln N + ln|S⁻¹| + q ln(N/2) + ln|Dᵀ(S⁻¹⊗S⁻¹)D|
        let pts = sample_points();
        let mu = DVector::from_vec(vec![0.0, 0.0]);
        let s = dmatrix![2.0, 0.0; 0.0, 0.5];
        let b = fim_blocks(&pts, &mu, &s, &LossModel::gaussian(2).unwrap()).unwrap();
        let ld = fim_logdet(&b).unwrap();
        assert!(ld.positive_definite);
        let n = 6.0f64;
        // |Dᵀ(A⊗A)D| = 2^{r(r-1)/2} |A|^{r+1}
        let expected = 2.0 * n.ln() + 3.0 * (n / 2.0).ln() + 2f64.ln();
        assert_relative_eq!(ld.value, expected, epsilon = 1e-12);
    }

    #[test]
    fn singular_block_detected() {
        // Tukey: every point rejected, ψ = η = 0
        let pts = dmatrix![100.0; 120.0; -90.0];
        let mu = DVector::from_vec(vec![0.0]);
        let s = dmatrix![1.0];
        let b = fim_blocks(&pts, &mu, &s, &LossModel::tukey(1, 4.685).unwrap()).unwrap();
        assert!(matches!(fim_logdet(&b), Err(Error::SingularBlock { .. })));
    }
}
