//! Normal and logistic distribution helpers with stable tails.
//!
//! Below `-TAIL_SWITCH` the normal CDF is evaluated through the Laplace
//! continued fraction for the Mills ratio, which keeps `log Φ` and `φ/Φ`
//! accurate long after `Φ` itself would underflow.

use libm::erfc;

use crate::scalar::Scalar;

const FRAC_1_SQRT_2PI: f64 = 0.398_942_280_401_432_7;
const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;
const TAIL_SWITCH: f64 = 5.0;
const CF_TERMS: usize = 80;

pub fn norm_pdf(x: f64) -> f64 {
    FRAC_1_SQRT_2PI * (-0.5 * x * x).exp()
}

pub fn ln_norm_pdf(x: f64) -> f64 {
    -0.5 * x * x - LN_SQRT_2PI
}

/// Upper-tail Mills ratio `(1 - Φ(x)) / φ(x)` for `x >= TAIL_SWITCH`.
fn mills_upper(x: f64) -> f64 {
    debug_assert!(x >= TAIL_SWITCH);
    let mut t = x;
    for k in (1..=CF_TERMS).rev() {
        t = x + k as f64 / t;
    }
    1.0 / t
}

pub fn norm_cdf(x: f64) -> f64 {
    if x < -TAIL_SWITCH {
        norm_pdf(x) * mills_upper(-x)
    } else {
        0.5 * erfc(-x * std::f64::consts::FRAC_1_SQRT_2)
    }
}

pub fn ln_norm_cdf(x: f64) -> f64 {
    if x < -TAIL_SWITCH {
        ln_norm_pdf(x) + mills_upper(-x).ln()
    } else if x > TAIL_SWITCH {
        (-norm_cdf(-x)).ln_1p()
    } else {
        norm_cdf(x).ln()
    }
}

/// Inverse Mills ratio `φ(x) / Φ(x)`.
pub fn inv_mills(x: f64) -> f64 {
    if x < -TAIL_SWITCH {
        1.0 / mills_upper(-x)
    } else {
        norm_pdf(x) / norm_cdf(x)
    }
}

/// Standard normal quantile: Acklam's rational approximation polished by
/// one Halley step against [`norm_cdf`].
pub fn norm_quantile(p: f64) -> f64 {
    if p <= 0.0 {
        return f64::NEG_INFINITY;
    }
    if p >= 1.0 {
        return f64::INFINITY;
    }
    const A: [f64; 6] = [-3.969683028665376e1, 2.209460984245205e2, -2.759285104469687e2, 1.383577518672690e2, -3.066479806614716e1, 2.506628277459239];
    const B: [f64; 5] = [-5.447609879822406e1, 1.615858368580409e2, -1.556989798598866e2, 6.680131188771972e1, -1.328068155288572e1];
    const C: [f64; 6] = [-7.784894002430293e-3, -3.223964580411365e-1, -2.400758277161838, -2.549732539343734, 4.374664141464968, 2.938163982698783];
    const D: [f64; 4] = [7.784695709041462e-3, 3.224671290700398e-1, 2.445134137142996, 3.754408661907416];
    let tail = |q: f64| {
        (((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    };
    let x = if p < 0.02425 {
        tail((-2.0 * p.ln()).sqrt())
    } else if p > 1.0 - 0.02425 {
        -tail((-2.0 * (1.0 - p).ln()).sqrt())
    } else {
        let q = p - 0.5;
        let r = q * q;
        (((((A[0] * r + A[1]) * r + A[2]) * r + A[3]) * r + A[4]) * r + A[5]) * q
            / (((((B[0] * r + B[1]) * r + B[2]) * r + B[3]) * r + B[4]) * r + 1.0)
    };
    let e = norm_cdf(x) - p;
    let u = e / norm_pdf(x);
    x - u / (1.0 + 0.5 * x * u)
}

pub fn logistic(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// `log(1 + exp(x))` without overflow.
pub fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

/// Two-sided p-value of a standard normal statistic.
pub fn two_sided_p(t: f64) -> f64 {
    erfc(t.abs() * std::f64::consts::FRAC_1_SQRT_2)
}

// Generic wrappers: evaluate in f64 and round to T.

pub fn phi<T: Scalar>(x: T) -> T {
    T::lit(norm_pdf(x.as_f64()))
}

pub fn big_phi<T: Scalar>(x: T) -> T {
    T::lit(norm_cdf(x.as_f64()))
}
