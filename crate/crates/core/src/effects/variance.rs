//! Conditional (`h + s`) and population (U-statistic) variances of averages.

use serde::{Deserialize, Serialize};

use crate::data::NetworkData;
use crate::error::Result;
use crate::estimator::FitResult;
use crate::linalg::Matrix;
use crate::scalar::Scalar;

use super::average::stripes;
use super::moments::{EvalContext, Gather, Moment};
use super::pattern::falling_factorial;

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct ConditionalVariance<T> {
    pub variance: T,
    pub se: T,
    /// Parameter-noise term; entry `(i, j)` with `j < i`.
    pub h: Matrix<T>,
    /// Outcome-noise term; entry `(i, j)` with `j < i`. Zero for
    /// outcome-free moments.
    pub s: Matrix<T>,
    /// `∂Δ̄/∂θ` in `(β, α, γ)` order.
    pub gradient: Vec<T>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct PopulationVariance<T> {
    pub variance: T,
    pub se: T,
    pub mu_hat: T,
    pub mu_tilde: Vec<T>,
}

/// Plug-in `∂Δ̄/∂θ`: the instance average of `∂m_λ/∂θ` at the context's
/// parameters and the observed outcomes.
pub fn average_gradient<T: Scalar>(moment: &dyn Moment<T>, ctx: &EvalContext<'_, T>, jobs: usize) -> Vec<T> {
    let (n, k) = (ctx.n_nodes(), ctx.data.dim_beta());
    let pattern = moment.pattern();
    let r = pattern.r();
    let parts = stripes(
        pattern,
        n,
        jobs,
        || (vec![T::zero(); k + 2 * n], Gather::new(r), vec![T::zero(); k], vec![T::zero(); r]),
        |(g, buf, db, dp), agents| {
            buf.fill(ctx, pattern, agents);
            moment.gradient(&buf.local(ctx), db, dp);
            for (t, &d) in g.iter_mut().zip(db.iter()) {
                *t = *t + d;
            }
            for ((i, j), &d) in pattern.instance_edges(agents).zip(dp.iter()) {
                g[k + i] = g[k + i] + d;
                g[k + n + j] = g[k + n + j] + d;
            }
        },
    );
    let count = T::lit(pattern.count(n));
    let mut g = vec![T::zero(); k + 2 * n];
    for (part, ..) in parts {
        for (t, v) in g.iter_mut().zip(part) {
            *t = *t + v;
        }
    }
    g.iter_mut().for_each(|v| *v = *v / count);
    g
}

/// `s_ij = ((N−p)!/(N−2)!) Σ_{λ ∋ (i,j) or (j,i)} (E[m_λ | Y_ij, Y_ji] − m̄_λ)`
/// for `j < i`, each instance contributing its projection onto the dyad.
pub fn outcome_noise<T: Scalar>(moment: &dyn Moment<T>, ctx: &EvalContext<'_, T>, jobs: usize) -> Matrix<T> {
    let n = ctx.n_nodes();
    let pattern = moment.pattern();
    if !pattern.uses_outcomes() {
        return Matrix::zeros(n, n);
    }
    let r = pattern.r();
    let parts = stripes(
        pattern,
        n,
        jobs,
        || {
            (
                Matrix::<T>::zeros(n, n),
                Gather::new(r),
                Vec::<(usize, usize)>::with_capacity(r),
                Vec::<(usize, usize)>::with_capacity(r),
                vec![false; r],
                Vec::<T>::with_capacity(r),
            )
        },
        |(s, buf, slots, dyads, keep, scratch), agents| {
            buf.fill(ctx, pattern, agents);
            let at = buf.local(ctx);
            let mean = moment.mean(&at);
            slots.clear();
            slots.extend(pattern.instance_edges(agents).map(|(i, j)| (i.max(j), i.min(j))));
            dyads.clear();
            dyads.extend_from_slice(slots);
            dyads.sort_unstable();
            dyads.dedup();
            for &d in dyads.iter() {
                for (k, &e) in keep.iter_mut().zip(slots.iter()) {
                    *k = e == d;
                }
                s[d] = s[d] + moment.projected(&at, keep, scratch) - mean;
            }
        },
    );
    let scale = T::one() / T::lit(falling_factorial(n - 2, pattern.p() - 2));
    let mut s = Matrix::zeros(n, n);
    for (part, ..) in parts {
        s = s.add(&part);
    }
    s.scaled(scale)
}

/// `V̂_Δ = (1/(N(N−1))) Σ_{j<i} (ĥ_ij + ŝ_ij)²` with `se = sqrt(V̂_Δ)/N`.
pub fn conditional_variance<T: Scalar>(
    fit: &FitResult<T>,
    moment: &dyn Moment<T>,
    data: &NetworkData<T>,
    jobs: usize,
) -> Result<ConditionalVariance<T>> {
    let (n, k) = (data.n_nodes(), data.dim_beta());
    let ctx = EvalContext::new(data, fit.family, &fit.params);
    let gradient = average_gradient(moment, &ctx, jobs);
    let u = fit.hessian.solve(&gradient);
    let nf = T::from_usize_lossy(n);
    let (ub, ua, ug) = (&u[..k], &u[k..k + n], &u[k + n..]);
    let proj = |i: usize, j: usize| -> T {
        if !fit.effective_mask.included(i, j) {
            return T::zero();
        }
        let d1 = fit.family.eta_derivs(data.y(i, j), ctx.eta(i, j)).d1;
        let x = data.x(i, j);
        let lin = (0..k).fold(ua[i] + ug[j], |acc, r| acc + ub[r] * x[r]);
        d1 * lin
    };
    let mut h = Matrix::zeros(n, n);
    for i in 0..n {
        for j in 0..i {
            h[(i, j)] = nf * (proj(i, j) + proj(j, i));
        }
    }
    let s = outcome_noise(moment, &ctx, jobs);
    let mut total = T::zero();
    for i in 0..n {
        for j in 0..i {
            let v = h[(i, j)] + s[(i, j)];
            total = total + v * v;
        }
    }
    let variance = total / T::from_usize_lossy(n * (n - 1));
    Ok(ConditionalVariance {
        variance,
        se: variance.sqrt() / nf,
        h,
        s,
        gradient,
    })
}

/// `V̂_δ = (1/N) Σ_i μ̃_i²` with `μ̃_i = ((N−p)!/(N−1)!) Σ_{λ ∋ i} (m̄_λ − μ̂)`
/// and `se = sqrt(V̂_δ/N)`.
pub fn population_variance<T: Scalar>(
    fit: &FitResult<T>,
    moment: &dyn Moment<T>,
    data: &NetworkData<T>,
    jobs: usize,
) -> PopulationVariance<T> {
    let ctx = EvalContext::new(data, fit.family, &fit.params);
    population_variance_at(moment, &ctx, jobs)
}

pub fn population_variance_at<T: Scalar>(moment: &dyn Moment<T>, ctx: &EvalContext<'_, T>, jobs: usize) -> PopulationVariance<T> {
    let n = ctx.n_nodes();
    let pattern = moment.pattern();
    let p = pattern.p();
    // Per node: Σ_{λ ∋ i} m̄_λ; the total is Σ_λ m̄_λ.
    let parts = stripes(
        pattern,
        n,
        jobs,
        || (vec![T::zero(); n], T::zero(), Gather::new(pattern.r())),
        |(by_node, total, buf), agents| {
            buf.fill(ctx, pattern, agents);
            let m = moment.mean(&buf.local(ctx));
            *total = *total + m;
            for &a in agents {
                by_node[a] = by_node[a] + m;
            }
        },
    );
    let mut by_node = vec![T::zero(); n];
    let mut total = T::zero();
    for (part, t, _) in parts {
        total = total + t;
        for (b, v) in by_node.iter_mut().zip(part) {
            *b = *b + v;
        }
    }
    let mu_hat = total / T::lit(pattern.count(n));
    let per_node = falling_factorial(n - 1, p - 1);
    // Each node lies in p·(N−1)!/(N−p)! instances.
    let containing = T::lit(p as f64 * per_node);
    let mu_tilde: Vec<T> = by_node.iter().map(|&b| (b - containing * mu_hat) / T::lit(per_node)).collect();
    let nf = T::from_usize_lossy(n);
    let variance = mu_tilde.iter().fold(T::zero(), |acc, &v| acc + v * v) / nf;
    PopulationVariance {
        variance,
        se: (variance / nf).sqrt(),
        mu_hat,
        mu_tilde,
    }
}
