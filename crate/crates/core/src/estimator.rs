//! Penalized maximum likelihood by joint Newton iterations.
//!
//! Maximizes `(1/c) Σ w_ij ℓ_ij − (b/2N)(Σα − Σγ)²` over `(β, α, γ)`.
//! Each iteration factorizes the structured negative Hessian, takes a
//! Newton step with backtracking, then shifts the `α`/`γ` level so the
//! normalization holds exactly (the shift leaves every `π_ij` unchanged and
//! can only raise the objective).
//!
//! A fixed effect whose included edges are all absent is inactive and held at
//! zero. For binary families an effect whose included outcomes are constant
//! has its maximizer at infinity; it is held at `±ETA_GUARD` and its edges,
//! whose contributions vanish in that limit, are dropped from the sample.
//! This repeats until no further effect becomes degenerate.

use serde::{Deserialize, Serialize};

use crate::data::NetworkData;
use crate::error::{Error, Result};
use crate::family::{ModelFamily, ETA_GUARD};
use crate::hessian::{HessianBlocks, StructuredHessian};
use crate::linalg::Matrix;
use crate::params::ParameterSet;
use crate::partition::EdgeMask;
use crate::scalar::{dot, Scalar};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct FitConfig<T> {
    pub max_iterations: usize,
    /// Convergence threshold on the max-norm of the full score.
    pub gradient_tolerance: T,
    pub penalty_b: T,
    pub shrink: T,
    pub sufficient_decrease: T,
    pub warm_start: Option<ParameterSet<T>>,
}

impl<T: Scalar> Default for FitConfig<T> {
    fn default() -> Self {
        Self {
            max_iterations: 200,
            gradient_tolerance: T::default_tolerance(),
            penalty_b: T::one(),
            shrink: T::lit(0.5),
            sufficient_decrease: T::lit(1e-4),
            warm_start: None,
        }
    }
}

impl<T: Scalar> FitConfig<T> {
    pub fn with_warm_start(&self, start: &ParameterSet<T>) -> Self {
        Self {
            warm_start: Some(start.clone()),
            ..self.clone()
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct FitDiagnostics {
    /// Edges whose index fell outside the probit guard band at the solution.
    pub clamp_events: usize,
    /// Iterations where the Hessian needed a ridge to factorize.
    pub ridge_iterations: usize,
    pub backtracks: usize,
    /// Sender effects held fixed (no data, or a constant binary row).
    pub inactive_alpha: Vec<usize>,
    pub inactive_gamma: Vec<usize>,
}

#[derive(Clone, Debug)]
pub struct FitResult<T> {
    pub family: ModelFamily,
    pub params: ParameterSet<T>,
    pub objective: T,
    pub iterations: usize,
    pub converged: bool,
    pub score_norm: T,
    pub normalizer: T,
    pub penalty_b: T,
    /// Inclusion weights requested by the caller.
    pub mask: EdgeMask,
    /// Edges actually in the objective after removing degenerate effects.
    pub effective_mask: EdgeMask,
    pub active_alpha: Vec<bool>,
    pub active_gamma: Vec<bool>,
    pub diagnostics: FitDiagnostics,
    /// Factorized negative Hessian at the returned iterate.
    pub hessian: StructuredHessian<T>,
}

impl<T: Scalar> FitResult<T> {
    pub fn n_nodes(&self) -> usize {
        self.params.n_nodes()
    }

    /// Concentrated information for `β` scaled by `1/N`.
    pub fn w_hat(&self) -> Matrix<T> {
        self.hessian
            .schur_beta()
            .scaled(T::one() / T::from_usize_lossy(self.n_nodes()))
    }

    /// `Σα − Σγ` over active effects.
    pub fn normalization_gap(&self) -> T {
        active_gap(&self.params, &self.active_alpha, &self.active_gamma)
    }
}

fn active_gap<T: Scalar>(p: &ParameterSet<T>, aa: &[bool], ag: &[bool]) -> T {
    let sa: T = p.alpha.iter().zip(aa).filter(|(_, &a)| a).map(|(&v, _)| v).sum();
    let sg: T = p.gamma.iter().zip(ag).filter(|(_, &a)| a).map(|(&v, _)| v).sum();
    sa - sg
}

/// Active-set resolution: which effects are free, their fixed values
/// otherwise, and the edges left in the objective.
struct ActiveSet<T> {
    alpha: Vec<bool>,
    gamma: Vec<bool>,
    alpha_fixed: Vec<T>,
    gamma_fixed: Vec<T>,
    mask: EdgeMask,
}

fn resolve_active<T: Scalar>(data: &NetworkData<T>, family: ModelFamily, mask: &EdgeMask) -> ActiveSet<T> {
    let n = data.n_nodes();
    let mut s = ActiveSet {
        alpha: vec![true; n],
        gamma: vec![true; n],
        alpha_fixed: vec![T::zero(); n],
        gamma_fixed: vec![T::zero(); n],
        mask: mask.clone(),
    };
    let limit = |total: T, count: usize| -> Option<T> {
        if count == 0 {
            Some(T::zero())
        } else if family.is_binary() && total == T::zero() {
            Some(T::lit(-ETA_GUARD))
        } else if family.is_binary() && total == T::from_usize_lossy(count) {
            Some(T::lit(ETA_GUARD))
        } else {
            None
        }
    };
    loop {
        let mut changed = false;
        for i in 0..n {
            if !s.alpha[i] {
                continue;
            }
            let (mut tot, mut cnt) = (T::zero(), 0);
            for j in (0..n).filter(|&j| s.mask.included(i, j)) {
                tot = tot + data.y(i, j);
                cnt += 1;
            }
            if let Some(v) = limit(tot, cnt) {
                s.alpha[i] = false;
                s.alpha_fixed[i] = v;
                (0..n).for_each(|j| s.mask.set(i, j, false));
                changed = true;
            }
        }
        for j in 0..n {
            if !s.gamma[j] {
                continue;
            }
            let (mut tot, mut cnt) = (T::zero(), 0);
            for i in (0..n).filter(|&i| s.mask.included(i, j)) {
                tot = tot + data.y(i, j);
                cnt += 1;
            }
            if let Some(v) = limit(tot, cnt) {
                s.gamma[j] = false;
                s.gamma_fixed[j] = v;
                (0..n).for_each(|i| s.mask.set(i, j, false));
                changed = true;
            }
        }
        if !changed {
            return s;
        }
    }
}

/// Objective, score and Hessian blocks at one iterate.
struct Evaluation<T> {
    objective: T,
    score: Vec<T>,
    blocks: HessianBlocks<T>,
    clamp_events: usize,
}

struct Problem<'a, T> {
    data: &'a NetworkData<T>,
    family: ModelFamily,
    edges: Vec<(usize, usize)>,
    inv_c: T,
    b: T,
    active: &'a ActiveSet<T>,
}

impl<T: Scalar> Problem<'_, T> {
    fn n(&self) -> usize {
        self.data.n_nodes()
    }

    fn k(&self) -> usize {
        self.data.dim_beta()
    }

    fn penalty_curv(&self) -> T {
        self.b / T::from_usize_lossy(self.n())
    }

    fn objective(&self, p: &ParameterSet<T>) -> T {
        let mut s = T::zero();
        for &(i, j) in &self.edges {
            s = s + self.family.value(self.data.y(i, j), p.eta(self.data.x(i, j), i, j));
        }
        let gap = active_gap(p, &self.active.alpha, &self.active.gamma);
        s * self.inv_c - self.penalty_curv() * T::lit(0.5) * gap * gap
    }

    fn evaluate(&self, p: &ParameterSet<T>) -> Evaluation<T> {
        let (n, k) = (self.n(), self.k());
        let mut blocks = HessianBlocks::zeros(n, k);
        blocks.active_alpha = self.active.alpha.clone();
        blocks.active_gamma = self.active.gamma.clone();
        blocks.penalty = self.penalty_curv();
        let mut score = vec![T::zero(); k + 2 * n];
        let mut value = T::zero();
        let mut clamp_events = 0;
        for &(i, j) in &self.edges {
            let x = self.data.x(i, j);
            let d = self.family.eta_derivs(self.data.y(i, j), p.eta(x, i, j));
            clamp_events += usize::from(d.clamped);
            value = value + d.value;
            let g = d.d1 * self.inv_c;
            let h = -d.d2 * self.inv_c;
            for r in 0..k {
                score[r] = score[r] + g * x[r];
                let hx = h * x[r];
                blocks.beta_alpha[(r, i)] = blocks.beta_alpha[(r, i)] + hx;
                blocks.beta_gamma[(r, j)] = blocks.beta_gamma[(r, j)] + hx;
                for c in 0..=r {
                    blocks.beta_beta[(r, c)] = blocks.beta_beta[(r, c)] + hx * x[c];
                }
            }
            score[k + i] = score[k + i] + g;
            score[k + n + j] = score[k + n + j] + g;
            blocks.d_alpha[i] = blocks.d_alpha[i] + h;
            blocks.d_gamma[j] = blocks.d_gamma[j] + h;
            blocks.cross[(i, j)] = h;
        }
        for r in 0..k {
            for c in 0..r {
                blocks.beta_beta[(c, r)] = blocks.beta_beta[(r, c)];
            }
        }
        let gap = active_gap(p, &self.active.alpha, &self.active.gamma);
        let pc = self.penalty_curv();
        for i in 0..n {
            score[k + i] = if self.active.alpha[i] { score[k + i] - pc * gap } else { T::zero() };
            score[k + n + i] = if self.active.gamma[i] { score[k + n + i] + pc * gap } else { T::zero() };
        }
        Evaluation {
            objective: value * self.inv_c - pc * T::lit(0.5) * gap * gap,
            score,
            blocks,
            clamp_events,
        }
    }

    fn step(&self, p: &ParameterSet<T>, dir: &[T], t: T) -> ParameterSet<T> {
        let (n, k) = (self.n(), self.k());
        let mut q = p.clone();
        for r in 0..k {
            q.beta[r] = q.beta[r] + t * dir[r];
        }
        for i in 0..n {
            if self.active.alpha[i] {
                q.alpha[i] = q.alpha[i] + t * dir[k + i];
            }
            if self.active.gamma[i] {
                q.gamma[i] = q.gamma[i] + t * dir[k + n + i];
            }
        }
        self.level_shift(&mut q);
        q
    }

    fn level_shift(&self, q: &mut ParameterSet<T>) {
        let na = self.active.alpha.iter().filter(|&&a| a).count();
        let ng = self.active.gamma.iter().filter(|&&a| a).count();
        if na + ng == 0 {
            return;
        }
        let delta = active_gap(q, &self.active.alpha, &self.active.gamma) / T::from_usize_lossy(na + ng);
        for i in 0..self.n() {
            if self.active.alpha[i] {
                q.alpha[i] = q.alpha[i] - delta;
            }
            if self.active.gamma[i] {
                q.gamma[i] = q.gamma[i] + delta;
            }
        }
    }

    fn start(&self, warm: Option<&ParameterSet<T>>) -> ParameterSet<T> {
        let (n, k) = (self.n(), self.k());
        let mut p = match warm {
            Some(w) if w.n_nodes() == n && w.dim_beta() == k => w.clone(),
            _ => self.cold_start(),
        };
        for i in 0..n {
            if !self.active.alpha[i] {
                p.alpha[i] = self.active.alpha_fixed[i];
            }
            if !self.active.gamma[i] {
                p.gamma[i] = self.active.gamma_fixed[i];
            }
        }
        self.level_shift(&mut p);
        p
    }

    /// `β = 0`, effects from smoothed row and column means.
    fn cold_start(&self) -> ParameterSet<T> {
        let (n, k) = (self.n(), self.k());
        let mut rows = vec![(0.0f64, 0usize); n];
        let mut cols = vec![(0.0f64, 0usize); n];
        let mut all = (0.0f64, 0usize);
        for &(i, j) in &self.edges {
            let y = self.data.y(i, j).as_f64();
            rows[i].0 += y;
            rows[i].1 += 1;
            cols[j].0 += y;
            cols[j].1 += 1;
            all.0 += y;
            all.1 += 1;
        }
        let fam = self.family;
        let smooth = |(s, c): (f64, usize)| -> f64 {
            match fam {
                ModelFamily::GaussianNls => {
                    if c == 0 {
                        0.0
                    } else {
                        s / c as f64
                    }
                }
                _ => (s + 0.5) / (c as f64 + 1.0),
            }
        };
        let half = 0.5 * fam.index_of_mean(smooth(all));
        let mut p = ParameterSet::zeros(n, k);
        for i in 0..n {
            p.alpha[i] = T::lit(fam.index_of_mean(smooth(rows[i])) - half);
            p.gamma[i] = T::lit(fam.index_of_mean(smooth(cols[i])) - half);
        }
        p
    }
}

fn factorize_with_ridge<T: Scalar>(blocks: &HessianBlocks<T>) -> Result<(StructuredHessian<T>, bool)> {
    match StructuredHessian::factorize(blocks.clone()) {
        Ok(h) => Ok((h, false)),
        Err(first) => {
            let scale = blocks
                .d_alpha
                .iter()
                .chain(&blocks.d_gamma)
                .fold(T::zero(), |m, &d| m.max(d.abs()))
                .max(T::one());
            let mut mu = scale * T::lit(1e-8);
            for _ in 0..8 {
                let mut b = blocks.clone();
                b.d_alpha.iter_mut().for_each(|d| *d = *d + mu);
                b.d_gamma.iter_mut().for_each(|d| *d = *d + mu);
                for r in 0..b.dim_beta() {
                    b.beta_beta[(r, r)] = b.beta_beta[(r, r)] + mu;
                }
                if let Ok(h) = StructuredHessian::factorize(b) {
                    return Ok((h, true));
                }
                mu = mu * T::lit(100.0);
            }
            Err(first)
        }
    }
}

/// Fit on the edges selected by `mask`, dividing the likelihood by
/// `normalizer`. Returns the last iterate even when the iteration budget runs
/// out (`converged == false`); fails only if the Hessian cannot be factorized.
pub fn fit_unchecked<T: Scalar>(
    data: &NetworkData<T>,
    family: ModelFamily,
    config: &FitConfig<T>,
    mask: &EdgeMask,
    normalizer: T,
) -> Result<FitResult<T>> {
    let n = data.n_nodes();
    assert_eq!(mask.n_nodes(), n, "mask size");
    let active = resolve_active(data, family, mask);
    let edges: Vec<(usize, usize)> = data.edges().filter(|&(i, j)| active.mask.included(i, j)).collect();
    let prob = Problem {
        data,
        family,
        edges,
        inv_c: T::one() / normalizer,
        b: config.penalty_b,
        active: &active,
    };
    let mut diag = FitDiagnostics {
        inactive_alpha: (0..n).filter(|&i| !active.alpha[i]).collect(),
        inactive_gamma: (0..n).filter(|&i| !active.gamma[i]).collect(),
        ..Default::default()
    };

    let mut p = prob.start(config.warm_start.as_ref());
    let mut iterations = 0;
    let slack = T::lit(64.0) * T::epsilon();
    loop {
        let ev = prob.evaluate(&p);
        let score_norm = active_score_norm(&ev.score, &active);
        let done = score_norm <= config.gradient_tolerance;
        if done || iterations >= config.max_iterations {
            diag.clamp_events = ev.clamp_events;
            let (hessian, ridged) = factorize_with_ridge(&ev.blocks)?;
            diag.ridge_iterations += usize::from(ridged);
            return Ok(FitResult {
                family,
                params: p,
                objective: ev.objective,
                iterations,
                converged: done,
                score_norm,
                normalizer,
                penalty_b: config.penalty_b,
                mask: mask.clone(),
                effective_mask: active.mask.clone(),
                active_alpha: active.alpha.clone(),
                active_gamma: active.gamma.clone(),
                diagnostics: diag,
                hessian,
            });
        }
        let (h, ridged) = factorize_with_ridge(&ev.blocks)?;
        diag.ridge_iterations += usize::from(ridged);
        let dir = h.solve(&ev.score);
        let slope = dot(&ev.score, &dir);
        let floor = ev.objective - slack * (T::one() + ev.objective.abs());
        let mut t = T::one();
        let mut accepted = None;
        for _ in 0..60 {
            let q = prob.step(&p, &dir, t);
            let obj = prob.objective(&q);
            if obj >= ev.objective + config.sufficient_decrease * t * slope || (obj >= floor && obj.is_finite() && t == T::one()) {
                accepted = Some(q);
                break;
            }
            diag.backtracks += 1;
            t = t * config.shrink;
        }
        iterations += 1;
        match accepted {
            Some(q) => p = q,
            None => {
                // No ascent possible at working precision; report as is.
                let ev = prob.evaluate(&p);
                let score_norm = active_score_norm(&ev.score, &active);
                diag.clamp_events = ev.clamp_events;
                let (hessian, ridged) = factorize_with_ridge(&ev.blocks)?;
            diag.ridge_iterations += usize::from(ridged);
                return Ok(FitResult {
                    family,
                    params: p,
                    objective: ev.objective,
                    iterations,
                    converged: score_norm <= config.gradient_tolerance,
                    score_norm,
                    normalizer,
                    penalty_b: config.penalty_b,
                    mask: mask.clone(),
                    effective_mask: active.mask.clone(),
                    active_alpha: active.alpha.clone(),
                    active_gamma: active.gamma.clone(),
                    diagnostics: diag,
                    hessian,
                });
            }
        }
    }
}

fn active_score_norm<T: Scalar>(score: &[T], active: &ActiveSet<T>) -> T {
    let n = active.alpha.len();
    let k = score.len() - 2 * n;
    let mut m = T::zero();
    for (r, &g) in score.iter().enumerate() {
        let on = r < k || (r < k + n && active.alpha[r - k]) || (r >= k + n && active.gamma[r - k - n]);
        if on {
            m = m.max(g.abs());
        }
    }
    if m.is_nan() {
        T::infinity()
    } else {
        m
    }
}

/// As [`fit_unchecked`], but non-convergence is an error.
pub fn fit<T: Scalar>(
    data: &NetworkData<T>,
    family: ModelFamily,
    config: &FitConfig<T>,
    mask: &EdgeMask,
    normalizer: T,
) -> Result<FitResult<T>> {
    let r = fit_unchecked(data, family, config, mask, normalizer)?;
    if r.converged {
        Ok(r)
    } else {
        Err(Error::NonConvergence {
            iterations: r.iterations,
            score_norm: r.score_norm.as_f64(),
        })
    }
}

/// Full-sample fit: every edge, normalizer `N − 1`.
pub fn fit_full<T: Scalar>(data: &NetworkData<T>, family: ModelFamily, config: &FitConfig<T>) -> Result<FitResult<T>> {
    data.check_family(family)?;
    let n = data.n_nodes();
    fit(data, family, config, &EdgeMask::full(n), T::from_usize_lossy(n - 1))
}

/// `(1/c) Σ_mask ℓ_ij − (b/2N)(Σα − Σγ)²` with every effect counted.
pub fn penalized_objective<T: Scalar>(
    data: &NetworkData<T>,
    family: ModelFamily,
    mask: &EdgeMask,
    normalizer: T,
    penalty_b: T,
    p: &ParameterSet<T>,
) -> T {
    let s: T = data
        .edges()
        .filter(|&(i, j)| mask.included(i, j))
        .map(|(i, j)| family.value(data.y(i, j), p.eta(data.x(i, j), i, j)))
        .sum();
    let gap = p.normalization_gap();
    s / normalizer - penalty_b / T::from_usize_lossy(2 * data.n_nodes()) * gap * gap
}

/// Objective, score and negative Hessian of the penalized objective with
/// every effect free, in `(β, α, γ)` order.
pub fn penalized_derivatives<T: Scalar>(
    data: &NetworkData<T>,
    family: ModelFamily,
    mask: &EdgeMask,
    normalizer: T,
    penalty_b: T,
    p: &ParameterSet<T>,
) -> (T, Vec<T>, HessianBlocks<T>) {
    let n = data.n_nodes();
    let active = ActiveSet {
        alpha: vec![true; n],
        gamma: vec![true; n],
        alpha_fixed: vec![T::zero(); n],
        gamma_fixed: vec![T::zero(); n],
        mask: mask.clone(),
    };
    let prob = Problem {
        data,
        family,
        edges: data.edges().filter(|&(i, j)| mask.included(i, j)).collect(),
        inv_c: T::one() / normalizer,
        b: penalty_b,
        active: &active,
    };
    let ev = prob.evaluate(p);
    (ev.objective, ev.score, ev.blocks)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_data_gives_zero_fit() {
        let d = NetworkData::from_fn(6, vec!["x".into()], |i, j| (0.0, vec![(i as f64) - (j as f64) * 0.3])).unwrap();
        let r = fit_full(&d, ModelFamily::GaussianNls, &FitConfig::default()).unwrap();
        assert!(r.converged);
        assert!(r.params.beta[0].abs() < 1e-12);
        assert!(r.params.alpha.iter().chain(&r.params.gamma).all(|v| v.abs() < 1e-12));
    }
}
