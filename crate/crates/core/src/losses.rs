//! Loss models `ρ(t)` of the squared Mahalanobis distance `t`, their
//! derivatives `ψ = ρ'` and `η = ψ'`, and the density generators of the
//! models that correspond to an elliptical distribution.
//!
//! All `ρ` keep their normalizing constants, so `ρ = −ln g` holds exactly for
//! the Gaussian, t and Huber models and criteria computed under different
//! losses stay on comparable scales.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::special::{chi2_cdf, chi2_quantile, gamma_p, ln_gamma};
use crate::{Error, Result};

pub const DEFAULT_HUBER_QH: f64 = 0.8;
pub const DEFAULT_TUKEY_C: f64 = 4.685;
pub const DEFAULT_T_NU: f64 = 3.0;

/// Threshold on `|c² − b·r|` below which the Huber normalization is rejected.
const POLE_GUARD: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LossKind {
    Gaussian,
    T,
    Huber,
    Tukey,
}

impl LossKind {
    pub fn name(self) -> &'static str {
        match self {
            LossKind::Gaussian => "gauss",
            LossKind::T => "t",
            LossKind::Huber => "huber",
            LossKind::Tukey => "tukey",
        }
    }
}

impl fmt::Display for LossKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for LossKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "gauss" | "gaussian" | "normal" => Ok(LossKind::Gaussian),
            "t" | "student" | "student-t" => Ok(LossKind::T),
            "huber" => Ok(LossKind::Huber),
            "tukey" => Ok(LossKind::Tukey),
            other => Err(Error::InvalidParameter(format!("unknown loss '{other}'"))),
        }
    }
}

/// Tuning knobs used when building a [`LossModel`] from a [`LossKind`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossTuning {
    pub nu: f64,
    pub huber_qh: f64,
    pub tukey_c: f64,
}

impl Default for LossTuning {
    fn default() -> Self {
        Self { nu: DEFAULT_T_NU, huber_qh: DEFAULT_HUBER_QH, tukey_c: DEFAULT_TUKEY_C }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Params {
    Gaussian {
        log_norm: f64,
    },
    T {
        nu: f64,
        log_norm: f64,
    },
    Huber {
        c2: f64,
        b: f64,
        log_ah: f64,
    },
    Tukey {
        c2: f64,
        c4: f64,
        log_norm: f64,
    },
}

/// A fully constructed loss model for data of dimension `r`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossModel {
    dim: usize,
    params: Params,
}

/// `c = sqrt(F⁻¹_{χ²_r}(q_H))`.
pub fn huber_c_from_quantile(r: usize, qh: f64) -> Result<f64> {
    Ok(chi2_quantile(r as f64, qh)?.sqrt())
}

/// Fisher-consistency constant `b = F_{χ²_{r+2}}(c²) + (c²/r)(1 − F_{χ²_r}(c²))`.
pub fn huber_consistency_b(r: usize, c: f64) -> f64 {
    let c2 = c * c;
    let r = r as f64;
    chi2_cdf(r + 2.0, c2) + c2 / r * (1.0 - chi2_cdf(r, c2))
}

/// `ln A_H` for the Huber density generator.
fn huber_log_ah(r: usize, c: f64, b: f64) -> Result<f64> {
    let rf = r as f64;
    let c2 = c * c;
    let pole = c2 - b * rf;
    if pole < POLE_GUARD {
        return Err(Error::PoleInNormalization(pole));
    }
    let half_r = rf / 2.0;
    let x = c2 / (2.0 * b);
    // (2b)^{r/2} (Γ(r/2) − Γ(r/2, x)) = (2b)^{r/2} Γ(r/2) P(r/2, x)
    let inner = half_r * (2.0 * b).ln() + ln_gamma(half_r) + gamma_p(half_r, x).ln();
    let tail = (2.0 * b).ln() + rf * c.ln() - x - pole.ln();
    let hi = inner.max(tail);
    let log_integral = hi + ((inner - hi).exp() + (tail - hi).exp()).ln();
    Ok(ln_gamma(half_r) - half_r * PI.ln() - log_integral)
}

fn check_dim(r: usize) -> Result<()> {
    if r == 0 {
        return Err(Error::InvalidParameter("dimension must be positive".into()));
    }
    Ok(())
}

impl LossModel {
    pub fn gaussian(r: usize) -> Result<Self> {
        check_dim(r)?;
        Ok(Self { dim: r, params: Params::Gaussian { log_norm: r as f64 / 2.0 * (2.0 * PI).ln() } })
    }

    pub fn t(r: usize, nu: f64) -> Result<Self> {
        check_dim(r)?;
        if !(nu > 0.0 && nu.is_finite()) {
            return Err(Error::InvalidParameter(format!("degrees of freedom {nu} must be positive")));
        }
        let rf = r as f64;
        let log_norm = ln_gamma((nu + rf) / 2.0) - ln_gamma(nu / 2.0) - rf / 2.0 * (PI * nu).ln();
        Ok(Self { dim: r, params: Params::T { nu, log_norm } })
    }

    /// Huber model with `c² = F⁻¹_{χ²_r}(q_H)`.
    pub fn huber(r: usize, qh: f64) -> Result<Self> {
        check_dim(r)?;
        let c = huber_c_from_quantile(r, qh)?;
        Self::huber_with_c(r, c)
    }

    pub fn huber_with_c(r: usize, c: f64) -> Result<Self> {
        check_dim(r)?;
        if !(c > 0.0 && c.is_finite()) {
            return Err(Error::InvalidParameter(format!("Huber threshold {c} must be positive")));
        }
        let b = huber_consistency_b(r, c);
        let log_ah = huber_log_ah(r, c, b)?;
        Ok(Self { dim: r, params: Params::Huber { c2: c * c, b, log_ah } })
    }

    pub fn tukey(r: usize, c: f64) -> Result<Self> {
        check_dim(r)?;
        if !(c > 0.0 && c.is_finite()) {
            return Err(Error::InvalidParameter(format!("Tukey threshold {c} must be positive")));
        }
        let c2 = c * c;
        Ok(Self {
            dim: r,
            params: Params::Tukey { c2, c4: c2 * c2, log_norm: r as f64 / 2.0 * (2.0 * PI).ln() },
        })
    }

    pub fn from_kind(kind: LossKind, r: usize, tuning: &LossTuning) -> Result<Self> {
        match kind {
            LossKind::Gaussian => Self::gaussian(r),
            LossKind::T => Self::t(r, tuning.nu),
            LossKind::Huber => Self::huber(r, tuning.huber_qh),
            LossKind::Tukey => Self::tukey(r, tuning.tukey_c),
        }
    }

    pub fn kind(&self) -> LossKind {
        match self.params {
            Params::Gaussian { .. } => LossKind::Gaussian,
            Params::T { .. } => LossKind::T,
            Params::Huber { .. } => LossKind::Huber,
            Params::Tukey { .. } => LossKind::Tukey,
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn nu(&self) -> Option<f64> {
        match self.params {
            Params::T { nu, .. } => Some(nu),
            _ => None,
        }
    }

    /// Threshold `c` of the Huber and Tukey models.
    pub fn c(&self) -> Option<f64> {
        match self.params {
            Params::Huber { c2, .. } | Params::Tukey { c2, .. } => Some(c2.sqrt()),
            _ => None,
        }
    }

    /// Huber consistency constant `b`.
    pub fn b(&self) -> Option<f64> {
        match self.params {
            Params::Huber { b, .. } => Some(b),
            _ => None,
        }
    }

    /// `ln A_H` of the Huber model.
    pub fn log_ah(&self) -> Option<f64> {
        match self.params {
            Params::Huber { log_ah, .. } => Some(log_ah),
            _ => None,
        }
    }

    pub fn has_density(&self) -> bool {
        self.kind() != LossKind::Tukey
    }

    /// Variants that skip the sign check, for hot loops where `t` comes from a
    /// Cholesky quadratic form.
    #[inline]
    pub(crate) fn rho_unchecked(&self, t: f64) -> f64 {
        match self.params {
            Params::Gaussian { log_norm } => 0.5 * t + log_norm,
            Params::T { nu, log_norm } => -log_norm + (nu + self.dim as f64) / 2.0 * (t / nu).ln_1p(),
            Params::Huber { c2, b, log_ah } => {
                if t <= c2 {
                    -log_ah + t / (2.0 * b)
                } else {
                    -log_ah + c2 / (2.0 * b) * ((t / c2).ln() + 1.0)
                }
            }
            Params::Tukey { c2, c4, log_norm } => {
                if t <= c2 {
                    t * t * t / (6.0 * c4) - t * t / (2.0 * c2) + t / 2.0 + log_norm
                } else {
                    c2 / 6.0 + log_norm
                }
            }
        }
    }

    #[inline]
    pub(crate) fn psi_unchecked(&self, t: f64) -> f64 {
        match self.params {
            Params::Gaussian { .. } => 0.5,
            Params::T { nu, .. } => 0.5 * (nu + self.dim as f64) / (nu + t),
            Params::Huber { c2, b, .. } => {
                if t <= c2 {
                    1.0 / (2.0 * b)
                } else {
                    c2 / (2.0 * b * t)
                }
            }
            Params::Tukey { c2, c4, .. } => {
                if t <= c2 {
                    t * t / (2.0 * c4) - t / c2 + 0.5
                } else {
                    0.0
                }
            }
        }
    }

    #[inline]
    pub(crate) fn eta_unchecked(&self, t: f64) -> f64 {
        match self.params {
            Params::Gaussian { .. } => 0.0,
            Params::T { nu, .. } => -0.5 * (nu + self.dim as f64) / ((nu + t) * (nu + t)),
            Params::Huber { c2, b, .. } => {
                if t <= c2 {
                    0.0
                } else {
                    -c2 / (2.0 * b * t * t)
                }
            }
            Params::Tukey { c2, c4, .. } => {
                if t <= c2 {
                    t / c4 - 1.0 / c2
                } else {
                    0.0
                }
            }
        }
    }

    pub fn rho(&self, t: f64) -> Result<f64> {
        check_t(t)?;
        Ok(self.rho_unchecked(t))
    }

    pub fn psi(&self, t: f64) -> Result<f64> {
        check_t(t)?;
        Ok(self.psi_unchecked(t))
    }

    pub fn eta(&self, t: f64) -> Result<f64> {
        check_t(t)?;
        Ok(self.eta_unchecked(t))
    }

    /// `ln g(t) = −ρ(t)`; Tukey's loss has no density generator.
    pub fn log_density_generator(&self, t: f64) -> Result<f64> {
        if !self.has_density() {
            return Err(Error::NoDensityGenerator);
        }
        check_t(t)?;
        Ok(-self.rho_unchecked(t))
    }
}

fn check_t(t: f64) -> Result<()> {
    if t < 0.0 || t.is_nan() {
        return Err(Error::NegativeDistance(t));
    }
    Ok(())
}
