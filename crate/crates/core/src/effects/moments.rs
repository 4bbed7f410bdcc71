//! Moment functions `m(Y_λ, X_λ, β, π_λ)` and their evaluation context.

use crate::data::NetworkData;
use crate::family::ModelFamily;
use crate::params::ParameterSet;
use crate::partition::EdgeMask;
use crate::scalar::Scalar;

use super::pattern::LambdaPattern;

/// Central-difference step used by the default `gradient`.
pub const FD_STEP: f64 = 1e-5;

/// Per-edge index, mean and mean derivatives at one parameter value.
#[derive(Clone, Debug)]
pub struct EvalContext<'a, T> {
    pub data: &'a NetworkData<T>,
    pub family: ModelFamily,
    pub params: &'a ParameterSet<T>,
    eta: Vec<T>,
    mu: Vec<T>,
    mu_d1: Vec<T>,
    mu_d2: Vec<T>,
}

impl<'a, T: Scalar> EvalContext<'a, T> {
    pub fn new(data: &'a NetworkData<T>, family: ModelFamily, params: &'a ParameterSet<T>) -> Self {
        let n = data.n_nodes();
        let mut eta = vec![T::zero(); n * n];
        let mut mu = vec![T::zero(); n * n];
        let mut mu_d1 = vec![T::zero(); n * n];
        let mut mu_d2 = vec![T::zero(); n * n];
        for (i, j) in data.edges() {
            let e = params.eta(data.x(i, j), i, j);
            let at = i * n + j;
            eta[at] = e;
            mu[at] = family.mean(e);
            mu_d1[at] = family.mean_d1(e);
            mu_d2[at] = family.mean_d2(e);
        }
        Self {
            data,
            family,
            params,
            eta,
            mu,
            mu_d1,
            mu_d2,
        }
    }

    pub fn n_nodes(&self) -> usize {
        self.data.n_nodes()
    }

    #[inline]
    pub fn mu(&self, i: usize, j: usize) -> T {
        self.mu[i * self.n_nodes() + j]
    }

    #[inline]
    pub fn eta(&self, i: usize, j: usize) -> T {
        self.eta[i * self.n_nodes() + j]
    }

    /// Row-major `f(i, j)` on the edges in `mask`, zero elsewhere.
    pub fn masked(&self, mask: Option<&EdgeMask>, f: impl Fn(usize, usize) -> T) -> Vec<T> {
        let n = self.n_nodes();
        let mut out = vec![T::zero(); n * n];
        for i in 0..n {
            for j in 0..n {
                if i != j && mask.is_none_or(|m| m.included(i, j)) {
                    out[i * n + j] = f(i, j);
                }
            }
        }
        out
    }
}

/// Reusable buffers holding one instance's slot values.
#[derive(Debug)]
pub struct Gather<'d, T> {
    pub x: Vec<&'d [T]>,
    pub y: Vec<T>,
    pub pi: Vec<T>,
    pub eta: Vec<T>,
    pub mu: Vec<T>,
    pub mu_d1: Vec<T>,
    pub mu_d2: Vec<T>,
}

impl<'d, T: Scalar> Gather<'d, T> {
    pub fn new(r: usize) -> Self {
        Self {
            x: Vec::with_capacity(r),
            y: Vec::with_capacity(r),
            pi: Vec::with_capacity(r),
            eta: Vec::with_capacity(r),
            mu: Vec::with_capacity(r),
            mu_d1: Vec::with_capacity(r),
            mu_d2: Vec::with_capacity(r),
        }
    }

    pub fn fill(&mut self, ctx: &EvalContext<'d, T>, pattern: &LambdaPattern, agents: &[usize]) {
        self.x.clear();
        self.y.clear();
        self.pi.clear();
        self.eta.clear();
        self.mu.clear();
        self.mu_d1.clear();
        self.mu_d2.clear();
        let n = ctx.n_nodes();
        for (i, j) in pattern.instance_edges(agents) {
            let at = i * n + j;
            self.x.push(ctx.data.x(i, j));
            self.y.push(ctx.data.y(i, j));
            self.pi.push(ctx.params.pi(i, j));
            self.eta.push(ctx.eta[at]);
            self.mu.push(ctx.mu[at]);
            self.mu_d1.push(ctx.mu_d1[at]);
            self.mu_d2.push(ctx.mu_d2[at]);
        }
    }

    pub fn local<'s>(&'s self, ctx: &'s EvalContext<'d, T>) -> Local<'s, T> {
        Local {
            family: ctx.family,
            beta: &ctx.params.beta,
            x: &self.x,
            y: &self.y,
            pi: &self.pi,
            eta: &self.eta,
            mu: &self.mu,
            mu_d1: &self.mu_d1,
            mu_d2: &self.mu_d2,
        }
    }
}

/// Everything a moment may look at for one instance; slot `e` refers to
/// the pattern's `e`-th edge.
#[derive(Clone, Copy, Debug)]
pub struct Local<'a, T> {
    pub family: ModelFamily,
    pub beta: &'a [T],
    pub x: &'a [&'a [T]],
    pub y: &'a [T],
    pub pi: &'a [T],
    pub eta: &'a [T],
    pub mu: &'a [T],
    pub mu_d1: &'a [T],
    pub mu_d2: &'a [T],
}

pub trait Moment<T: Scalar>: Send + Sync {
    fn name(&self) -> String;

    fn pattern(&self) -> &LambdaPattern;

    /// `m_λ`.
    fn value(&self, at: &Local<T>) -> T;

    /// `m̄_λ = E[m_λ | X, β, π]`. Outcome-dependent moments must override.
    fn mean(&self, at: &Local<T>) -> T {
        self.value(at)
    }

    /// `E[m_λ | Y_e for slots with keep[e]]`, the other outcomes integrated
    /// out. The default substitutes their means, which is exact whenever `m`
    /// is affine in each outcome separately (every built-in is).
    fn projected(&self, at: &Local<T>, keep: &[bool], scratch: &mut Vec<T>) -> T {
        scratch.clear();
        scratch.extend(keep.iter().enumerate().map(|(e, &k)| if k { at.y[e] } else { at.mu[e] }));
        self.value(&Local { y: scratch, ..*at })
    }

    /// `∂m_λ/∂β` into `d_beta` and `∂m_λ/∂π_e` into `d_pi[e]`, holding the
    /// observed outcomes fixed; averaged over instances this is the plug-in
    /// estimate of `∂Δ̄/∂θ`. The default differentiates `value` numerically
    /// with step `FD_STEP`.
    fn gradient(&self, at: &Local<T>, d_beta: &mut [T], d_pi: &mut [T]) {
        fd_gradient(|l| self.value(l), at, d_beta, d_pi)
    }

    /// `Σ_λ m_λ` over the instances whose edges all lie in `mask` (all of
    /// them for `None`), in closed form. `None` means enumerate instead.
    fn masked_sum(&self, _ctx: &EvalContext<'_, T>, _mask: Option<&EdgeMask>) -> Option<T> {
        None
    }
}

/// Central differences of `f` in `β` and each `π_e`, recomputing the
/// slot means from the shifted index.
pub fn fd_gradient<T: Scalar>(f: impl Fn(&Local<T>) -> T, at: &Local<T>, d_beta: &mut [T], d_pi: &mut [T]) {
    let h = FD_STEP;
    let r = at.eta.len();
    let eval = |beta: &[T], pi: &[T], eta: &[T]| {
        let mu: Vec<T> = eta.iter().map(|&e| at.family.mean(e)).collect();
        let mu_d1: Vec<T> = eta.iter().map(|&e| at.family.mean_d1(e)).collect();
        let mu_d2: Vec<T> = eta.iter().map(|&e| at.family.mean_d2(e)).collect();
        f(&Local {
            beta,
            pi,
            eta,
            mu: &mu,
            mu_d1: &mu_d1,
            mu_d2: &mu_d2,
            ..*at
        })
        .as_f64()
    };
    for s in 0..at.beta.len() {
        let step = h * at.beta[s].as_f64().abs().max(1.0);
        let shifted = |sign: f64| {
            let d = T::lit(sign * step);
            let mut beta = at.beta.to_vec();
            beta[s] = beta[s] + d;
            let eta: Vec<T> = (0..r).map(|e| at.eta[e] + d * at.x[e][s]).collect();
            eval(&beta, at.pi, &eta)
        };
        d_beta[s] = T::lit((shifted(1.0) - shifted(-1.0)) / (2.0 * step));
    }
    for e in 0..r {
        let step = h * at.pi[e].as_f64().abs().max(1.0);
        let shifted = |sign: f64| {
            let d = T::lit(sign * step);
            let mut pi = at.pi.to_vec();
            pi[e] = pi[e] + d;
            let mut eta = at.eta.to_vec();
            eta[e] = eta[e] + d;
            eval(at.beta, &pi, &eta)
        };
        d_pi[e] = T::lit((shifted(1.0) - shifted(-1.0)) / (2.0 * step));
    }
}

/// `μ(x'β + π)` over single edges.
#[derive(Clone, Debug)]
pub struct FittedMean {
    pattern: LambdaPattern,
}

impl Default for FittedMean {
    fn default() -> Self {
        Self {
            pattern: LambdaPattern::single_edge(false),
        }
    }
}

impl<T: Scalar> Moment<T> for FittedMean {
    fn name(&self) -> String {
        "fitted_mean".into()
    }
    fn pattern(&self) -> &LambdaPattern {
        &self.pattern
    }
    fn value(&self, at: &Local<T>) -> T {
        at.mu[0]
    }
    fn gradient(&self, at: &Local<T>, d_beta: &mut [T], d_pi: &mut [T]) {
        for (d, &x) in d_beta.iter_mut().zip(at.x[0]) {
            *d = at.mu_d1[0] * x;
        }
        d_pi[0] = at.mu_d1[0];
    }
}

/// `∂μ/∂x_r = μ'(η) β_r`.
#[derive(Clone, Debug)]
pub struct MarginalEffect {
    pub covariate: usize,
    pattern: LambdaPattern,
}

impl MarginalEffect {
    pub fn new(covariate: usize) -> Self {
        Self {
            covariate,
            pattern: LambdaPattern::single_edge(false),
        }
    }
}

impl<T: Scalar> Moment<T> for MarginalEffect {
    fn name(&self) -> String {
        format!("marginal:{}", self.covariate)
    }
    fn pattern(&self) -> &LambdaPattern {
        &self.pattern
    }
    fn value(&self, at: &Local<T>) -> T {
        at.mu_d1[0] * at.beta[self.covariate]
    }
    fn gradient(&self, at: &Local<T>, d_beta: &mut [T], d_pi: &mut [T]) {
        let br = at.beta[self.covariate];
        for (s, (d, &x)) in d_beta.iter_mut().zip(at.x[0]).enumerate() {
            *d = at.mu_d2[0] * x * br;
            if s == self.covariate {
                *d = *d + at.mu_d1[0];
            }
        }
        d_pi[0] = at.mu_d2[0] * br;
    }
}

/// `μ(η | x_r = 1) − μ(η | x_r = 0)`.
#[derive(Clone, Debug)]
pub struct DiscreteDifference {
    pub covariate: usize,
    pattern: LambdaPattern,
}

impl DiscreteDifference {
    pub fn new(covariate: usize) -> Self {
        Self {
            covariate,
            pattern: LambdaPattern::single_edge(false),
        }
    }

    fn indices<T: Scalar>(&self, at: &Local<T>) -> (T, T) {
        let (xr, br) = (at.x[0][self.covariate], at.beta[self.covariate]);
        (at.eta[0] + (T::one() - xr) * br, at.eta[0] - xr * br)
    }
}

impl<T: Scalar> Moment<T> for DiscreteDifference {
    fn name(&self) -> String {
        format!("diff:{}", self.covariate)
    }
    fn pattern(&self) -> &LambdaPattern {
        &self.pattern
    }
    fn value(&self, at: &Local<T>) -> T {
        let (on, off) = self.indices(at);
        at.family.mean(on) - at.family.mean(off)
    }
    fn gradient(&self, at: &Local<T>, d_beta: &mut [T], d_pi: &mut [T]) {
        let (on, off) = self.indices(at);
        let (g1, g0) = (at.family.mean_d1(on), at.family.mean_d1(off));
        for (s, (d, &x)) in d_beta.iter_mut().zip(at.x[0]).enumerate() {
            *d = if s == self.covariate { g1 } else { (g1 - g0) * x };
        }
        d_pi[0] = g1 - g0;
    }
}

/// `μ_ab μ_ac μ_cb`, the expected transitive-triangle indicator.
#[derive(Clone, Debug)]
pub struct ExpectedTriangles {
    pattern: LambdaPattern,
}

impl Default for ExpectedTriangles {
    fn default() -> Self {
        Self {
            pattern: LambdaPattern::transitive_triangle(false),
        }
    }
}

impl<T: Scalar> Moment<T> for ExpectedTriangles {
    fn name(&self) -> String {
        "expected_triangles".into()
    }
    fn pattern(&self) -> &LambdaPattern {
        &self.pattern
    }
    fn value(&self, at: &Local<T>) -> T {
        at.mu[0] * at.mu[1] * at.mu[2]
    }
    fn gradient(&self, at: &Local<T>, d_beta: &mut [T], d_pi: &mut [T]) {
        let m = at.mu;
        d_pi[0] = at.mu_d1[0] * m[1] * m[2];
        d_pi[1] = at.mu_d1[1] * m[0] * m[2];
        d_pi[2] = at.mu_d1[2] * m[0] * m[1];
        for (s, d) in d_beta.iter_mut().enumerate() {
            *d = (0..3).fold(T::zero(), |acc, e| acc + d_pi[e] * at.x[e][s]);
        }
    }
}

/// `Y_ab Y_ac Y_cb − μ_ab μ_ac μ_cb`.
#[derive(Clone, Debug)]
pub struct TriangleCount {
    pattern: LambdaPattern,
}

impl Default for TriangleCount {
    fn default() -> Self {
        Self {
            pattern: LambdaPattern::transitive_triangle(true),
        }
    }
}

/// `(Y_ab − μ_ab) Y_ac Y_cb`.
#[derive(Clone, Debug)]
pub struct TransitivityCovariance {
    pattern: LambdaPattern,
}

impl Default for TransitivityCovariance {
    fn default() -> Self {
        Self {
            pattern: LambdaPattern::transitive_triangle(true),
        }
    }
}

/// `(Y_ab − μ_ab) Y_ba`.
#[derive(Clone, Debug)]
pub struct Reciprocity {
    pattern: LambdaPattern,
}

impl Default for Reciprocity {
    fn default() -> Self {
        Self {
            pattern: LambdaPattern::reciprocal_pair(true),
        }
    }
}

/// `Σ_{a≠b} w_ab Σ_c a_ac a_cb` for row-major `n × n` matrices with zero
/// diagonals, so that `c` ranges over the other agents automatically.
fn two_path_sum<T: Scalar>(n: usize, w: &[T], a: &[T]) -> T {
    let mut total = T::zero();
    let mut row = vec![T::zero(); n];
    for i in 0..n {
        row.iter_mut().for_each(|v| *v = T::zero());
        for c in 0..n {
            let aic = a[i * n + c];
            if aic != T::zero() {
                for (r, &acj) in row.iter_mut().zip(&a[c * n..(c + 1) * n]) {
                    *r = *r + aic * acj;
                }
            }
        }
        total = w[i * n..(i + 1) * n].iter().zip(&row).fold(total, |acc, (&x, &p)| acc + x * p);
    }
    total
}

/// Chain rule from slot derivatives to `β`.
fn beta_from_slots<T: Scalar>(at: &Local<T>, d_pi: &[T], d_beta: &mut [T]) {
    for (s, d) in d_beta.iter_mut().enumerate() {
        *d = d_pi.iter().zip(at.x).fold(T::zero(), |acc, (&g, x)| acc + g * x[s]);
    }
}

// The three statistics below have conditional mean identically zero when
// outcomes are independent across ordered pairs, for every parameter value.
// Their derivative at fixed outcomes is not zero.
macro_rules! zero_mean_statistic {
    ($ty:ty, $name:literal, |$at:ident| $value:expr, |$g:ident, $dp:ident| $grad:block $(, |$c:ident, $m:ident| $sum:expr)?) => {
        impl<T: Scalar> Moment<T> for $ty {
            fn name(&self) -> String {
                $name.into()
            }
            fn pattern(&self) -> &LambdaPattern {
                &self.pattern
            }
            fn value(&self, $at: &Local<T>) -> T {
                $value
            }
            fn mean(&self, _: &Local<T>) -> T {
                T::zero()
            }
            fn gradient(&self, $g: &Local<T>, d_beta: &mut [T], $dp: &mut [T]) {
                $grad
                beta_from_slots($g, $dp, d_beta);
            }
            $(
                fn masked_sum(&self, $c: &EvalContext<'_, T>, $m: Option<&EdgeMask>) -> Option<T> {
                    Some($sum)
                }
            )?
        }
    };
}

zero_mean_statistic!(
    TriangleCount,
    "triangle_count",
    |at| at.y[0] * at.y[1] * at.y[2] - at.mu[0] * at.mu[1] * at.mu[2],
    |at, d_pi| {
        let m = at.mu;
        d_pi[0] = -at.mu_d1[0] * m[1] * m[2];
        d_pi[1] = -at.mu_d1[1] * m[0] * m[2];
        d_pi[2] = -at.mu_d1[2] * m[0] * m[1];
    },
    |ctx, mask| {
        let y = ctx.masked(mask, |i, j| ctx.data.y(i, j));
        let mu = ctx.masked(mask, |i, j| ctx.mu(i, j));
        two_path_sum(ctx.n_nodes(), &y, &y) - two_path_sum(ctx.n_nodes(), &mu, &mu)
    }
);
zero_mean_statistic!(
    TransitivityCovariance,
    "transitivity_covariance",
    |at| (at.y[0] - at.mu[0]) * at.y[1] * at.y[2],
    |at, d_pi| {
        d_pi[0] = -at.mu_d1[0] * at.y[1] * at.y[2];
        d_pi[1] = T::zero();
        d_pi[2] = T::zero();
    },
    |ctx, mask| {
        let y = ctx.masked(mask, |i, j| ctx.data.y(i, j));
        let resid = ctx.masked(mask, |i, j| ctx.data.y(i, j) - ctx.mu(i, j));
        two_path_sum(ctx.n_nodes(), &resid, &y)
    }
);
zero_mean_statistic!(
    Reciprocity,
    "reciprocity",
    |at| (at.y[0] - at.mu[0]) * at.y[1],
    |at, d_pi| {
        d_pi[0] = -at.mu_d1[0] * at.y[1];
        d_pi[1] = T::zero();
    }
);

type LocalFn<T> = Box<dyn Fn(&Local<T>) -> T + Send + Sync>;

/// A moment given by closures. Without `mean`, the moment must be
/// outcome-free; derivatives come from finite differences.
pub struct CustomMoment<T> {
    pub name: String,
    pub pattern: LambdaPattern,
    pub value: LocalFn<T>,
    pub mean: Option<LocalFn<T>>,
}

impl<T: Scalar> CustomMoment<T> {
    pub fn outcome_free(name: &str, pattern: LambdaPattern, value: impl Fn(&Local<T>) -> T + Send + Sync + 'static) -> Self {
        Self {
            name: name.into(),
            pattern,
            value: Box::new(value),
            mean: None,
        }
    }
}

impl<T: Scalar> Moment<T> for CustomMoment<T> {
    fn name(&self) -> String {
        self.name.clone()
    }
    fn pattern(&self) -> &LambdaPattern {
        &self.pattern
    }
    fn value(&self, at: &Local<T>) -> T {
        (self.value)(at)
    }
    fn mean(&self, at: &Local<T>) -> T {
        match &self.mean {
            Some(f) => f(at),
            None => (self.value)(at),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn local_check<M: Moment<f64>>(m: &M, family: ModelFamily, r: usize) {
        let xs: Vec<Vec<f64>> = (0..r).map(|e| vec![0.3 + 0.2 * e as f64, 1.0 - 0.7 * e as f64]).collect();
        let x: Vec<&[f64]> = xs.iter().map(|v| v.as_slice()).collect();
        let beta = [0.4, -0.6];
        let pi: Vec<f64> = (0..r).map(|e| 0.1 - 0.25 * e as f64).collect();
        let eta: Vec<f64> = (0..r).map(|e| x[e][0] * beta[0] + x[e][1] * beta[1] + pi[e]).collect();
        let mu: Vec<f64> = eta.iter().map(|&e| family.mean(e)).collect();
        let mu_d1: Vec<f64> = eta.iter().map(|&e| family.mean_d1(e)).collect();
        let mu_d2: Vec<f64> = eta.iter().map(|&e| family.mean_d2(e)).collect();
        let y = vec![1.0; r];
        let at = Local {
            family,
            beta: &beta,
            x: &x,
            y: &y,
            pi: &pi,
            eta: &eta,
            mu: &mu,
            mu_d1: &mu_d1,
            mu_d2: &mu_d2,
        };
        let (mut ab, mut ap) = (vec![0.0; 2], vec![0.0; r]);
        let (mut fb, mut fp) = (vec![0.0; 2], vec![0.0; r]);
        m.gradient(&at, &mut ab, &mut ap);
        fd_gradient(|l| m.value(l), &at, &mut fb, &mut fp);
        for (a, f) in ab.iter().chain(&ap).zip(fb.iter().chain(&fp)) {
            assert!((a - f).abs() < 1e-8 * (1.0 + a.abs()), "{}: {a} vs {f}", Moment::<f64>::name(m));
        }
    }

    #[test]
    fn analytic_gradients_match_differences() {
        for fam in [ModelFamily::Probit, ModelFamily::Logit, ModelFamily::PoissonQmle] {
            local_check(&FittedMean::default(), fam, 1);
            local_check(&MarginalEffect::new(0), fam, 1);
            local_check(&MarginalEffect::new(1), fam, 1);
            local_check(&DiscreteDifference::new(1), fam, 1);
            local_check(&ExpectedTriangles::default(), fam, 3);
        }
        for fam in [ModelFamily::Probit, ModelFamily::Logit] {
            local_check(&TriangleCount::default(), fam, 3);
            local_check(&TransitivityCovariance::default(), fam, 3);
            local_check(&Reciprocity::default(), fam, 2);
        }
    }
}
