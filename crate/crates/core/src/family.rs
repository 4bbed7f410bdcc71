//! Link-level objectives.
//!
//! Every family is single-index: `ℓ(y, x, β, π)` depends on the parameters
//! only through `η = x'β + π`, so all derivatives follow from the scalar
//! triple `(ℓ, ∂ηℓ, ∂η²ℓ)`.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand_distr::{Distribution, Poisson, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::scalar::{dot, Scalar};
use crate::special::{inv_mills, ln_norm_cdf, logistic, norm_cdf, norm_pdf, norm_quantile, softplus};

/// Probit indices are clamped to this band before evaluation.
pub const ETA_GUARD: f64 = 37.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelFamily {
    Probit,
    Logit,
    GaussianNls,
    PoissonQmle,
}

/// `(ℓ, ∂ηℓ, ∂η²ℓ)` at one observation.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EtaDerivs<T> {
    pub value: T,
    pub d1: T,
    pub d2: T,
    pub clamped: bool,
}

/// Derivatives of `ℓ` in `(β, π)`.
#[derive(Clone, Debug, PartialEq)]
pub struct LinkDerivatives<T> {
    pub d_beta: Vec<T>,
    pub d_pi: T,
    pub d_beta_beta: Matrix<T>,
    pub d_beta_pi: Vec<T>,
    pub d_pi_pi: T,
}

impl ModelFamily {
    pub const ALL: [ModelFamily; 4] = [
        ModelFamily::Probit,
        ModelFamily::Logit,
        ModelFamily::GaussianNls,
        ModelFamily::PoissonQmle,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ModelFamily::Probit => "probit",
            ModelFamily::Logit => "logit",
            ModelFamily::GaussianNls => "gaussian_nls",
            ModelFamily::PoissonQmle => "poisson_qmle",
        }
    }

    pub fn is_binary(self) -> bool {
        matches!(self, ModelFamily::Probit | ModelFamily::Logit)
    }

    pub fn check_outcome(self, y: f64) -> Result<()> {
        let ok = match self {
            ModelFamily::Probit | ModelFamily::Logit => y == 0.0 || y == 1.0,
            ModelFamily::GaussianNls => y.is_finite(),
            ModelFamily::PoissonQmle => y.is_finite() && y >= 0.0,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::Domain {
                family: self.name(),
                value: y,
            })
        }
    }

    fn eta_derivs_f64(self, y: f64, eta: f64) -> EtaDerivs<f64> {
        match self {
            ModelFamily::Probit => {
                let clamped = eta.abs() > ETA_GUARD;
                let e = eta.clamp(-ETA_GUARD, ETA_GUARD);
                let (mut value, mut d1, mut d2) = (0.0, 0.0, 0.0);
                if y != 0.0 {
                    let lam = inv_mills(e);
                    value += y * ln_norm_cdf(e);
                    d1 += y * lam;
                    d2 -= y * lam * (e + lam);
                }
                if y != 1.0 {
                    let lam = inv_mills(-e);
                    value += (1.0 - y) * ln_norm_cdf(-e);
                    d1 -= (1.0 - y) * lam;
                    d2 -= (1.0 - y) * lam * (lam - e);
                }
                EtaDerivs { value, d1, d2, clamped }
            }
            ModelFamily::Logit => {
                let p = logistic(eta);
                EtaDerivs {
                    value: y * eta - softplus(eta),
                    d1: y - p,
                    d2: -p * (1.0 - p),
                    clamped: false,
                }
            }
            ModelFamily::GaussianNls => {
                let r = y - eta;
                EtaDerivs {
                    value: -r * r,
                    d1: 2.0 * r,
                    d2: -2.0,
                    clamped: false,
                }
            }
            ModelFamily::PoissonQmle => {
                let m = eta.exp();
                EtaDerivs {
                    value: y * eta - m,
                    d1: y - m,
                    d2: -m,
                    clamped: false,
                }
            }
        }
    }

    /// `(ℓ, ∂ηℓ, ∂η²ℓ)`; evaluated in double precision and rounded to `T`.
    #[inline]
    pub fn eta_derivs<T: Scalar>(self, y: T, eta: T) -> EtaDerivs<T> {
        let d = self.eta_derivs_f64(y.as_f64(), eta.as_f64());
        EtaDerivs {
            value: T::lit(d.value),
            d1: T::lit(d.d1),
            d2: T::lit(d.d2),
            clamped: d.clamped,
        }
    }

    #[inline]
    pub fn value<T: Scalar>(self, y: T, eta: T) -> T {
        self.eta_derivs(y, eta).value
    }

    /// Conditional mean `μ(η)`.
    pub fn mean<T: Scalar>(self, eta: T) -> T {
        let e = eta.as_f64();
        T::lit(match self {
            ModelFamily::Probit => norm_cdf(e),
            ModelFamily::Logit => logistic(e),
            ModelFamily::GaussianNls => e,
            ModelFamily::PoissonQmle => e.exp(),
        })
    }

    /// `dμ/dη`.
    pub fn mean_d1<T: Scalar>(self, eta: T) -> T {
        let e = eta.as_f64();
        T::lit(match self {
            ModelFamily::Probit => norm_pdf(e),
            ModelFamily::Logit => {
                let p = logistic(e);
                p * (1.0 - p)
            }
            ModelFamily::GaussianNls => 1.0,
            ModelFamily::PoissonQmle => e.exp(),
        })
    }

    /// `d²μ/dη²`.
    pub fn mean_d2<T: Scalar>(self, eta: T) -> T {
        let e = eta.as_f64();
        T::lit(match self {
            ModelFamily::Probit => -e * norm_pdf(e),
            ModelFamily::Logit => {
                let p = logistic(e);
                p * (1.0 - p) * (1.0 - 2.0 * p)
            }
            ModelFamily::GaussianNls => 0.0,
            ModelFamily::PoissonQmle => e.exp(),
        })
    }

    /// Draw an outcome at index `eta`.
    pub fn simulate<R: Rng + ?Sized>(self, eta: f64, rng: &mut R) -> f64 {
        match self {
            ModelFamily::Probit => {
                let eps: f64 = StandardNormal.sample(rng);
                f64::from(u8::from(eta > eps))
            }
            ModelFamily::Logit => {
                let u: f64 = rng.random();
                f64::from(u8::from(u < logistic(eta)))
            }
            ModelFamily::GaussianNls => {
                let eps: f64 = StandardNormal.sample(rng);
                eta + eps
            }
            ModelFamily::PoissonQmle => {
                let m = eta.exp();
                if m <= 0.0 {
                    0.0
                } else {
                    Poisson::new(m).map(|d| d.sample(rng)).unwrap_or(0.0)
                }
            }
        }
    }

    /// Index that reproduces the mean `m` for a single observation; used to
    /// build starting values from smoothed row and column means.
    pub fn index_of_mean(self, m: f64) -> f64 {
        match self {
            ModelFamily::Probit => norm_quantile(m),
            ModelFamily::Logit => (m / (1.0 - m)).ln(),
            ModelFamily::GaussianNls => m,
            ModelFamily::PoissonQmle => m.ln(),
        }
    }
}

impl fmt::Display for ModelFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ModelFamily {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "probit" => Ok(ModelFamily::Probit),
            "logit" => Ok(ModelFamily::Logit),
            "gaussian_nls" | "gaussian" | "nls" => Ok(ModelFamily::GaussianNls),
            "poisson" | "poisson_qmle" => Ok(ModelFamily::PoissonQmle),
            other => Err(format!(
                "unknown family {other:?} (expected probit, logit, gaussian-nls or poisson)"
            )),
        }
    }
}

/// `ℓ(y, x, β, π)`.
pub fn link_value<T: Scalar>(family: ModelFamily, y: T, x: &[T], beta: &[T], pi: T) -> Result<T> {
    family.check_outcome(y.as_f64())?;
    Ok(family.value(y, dot(x, beta) + pi))
}

pub fn link_derivatives<T: Scalar>(
    family: ModelFamily,
    y: T,
    x: &[T],
    beta: &[T],
    pi: T,
) -> Result<LinkDerivatives<T>> {
    family.check_outcome(y.as_f64())?;
    let d = family.eta_derivs(y, dot(x, beta) + pi);
    let k = x.len();
    Ok(LinkDerivatives {
        d_beta: x.iter().map(|&v| d.d1 * v).collect(),
        d_pi: d.d1,
        d_beta_beta: Matrix::from_fn(k, k, |a, b| d.d2 * x[a] * x[b]),
        d_beta_pi: x.iter().map(|&v| d.d2 * v).collect(),
        d_pi_pi: d.d2,
    })
}

pub fn simulate_outcome<T: Scalar, R: Rng + ?Sized>(
    family: ModelFamily,
    x: &[T],
    beta: &[T],
    pi: T,
    rng: &mut R,
) -> T {
    T::lit(family.simulate((dot(x, beta) + pi).as_f64(), rng))
}
