//! Plug-in, leave-out and jackknifed averages of a moment over `Λ_N`.

use serde::{Deserialize, Serialize};

use crate::data::NetworkData;
use crate::error::{Error, Result};
use crate::family::ModelFamily;
use crate::jackknife::{combine, par_map, LeaveOutEstimates};
use crate::params::ParameterSet;
use crate::partition::EdgeMask;
use crate::scalar::Scalar;

use super::moments::{EvalContext, Gather, Moment};
use super::pattern::LambdaPattern;
use super::variance::{conditional_variance, population_variance};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Target {
    /// `Δ̄_N`, the average of `m̄_λ` at the true parameters.
    #[default]
    Conditional,
    /// `δ`, the population mean.
    Population,
}

impl std::str::FromStr for Target {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s.to_ascii_lowercase().as_str() {
            "conditional" => Ok(Target::Conditional),
            "population" => Ok(Target::Population),
            other => Err(format!("unknown target {other:?} (expected conditional or population)")),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct EffectOptions {
    pub target: Target,
    pub jobs: usize,
    /// Permit enumeration of 4+-agent patterns on large networks.
    pub allow_large: bool,
}

impl Default for EffectOptions {
    fn default() -> Self {
        Self {
            target: Target::Conditional,
            jobs: 1,
            allow_large: false,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct EffectResult<T> {
    pub name: String,
    pub target: Target,
    pub delta_plugin: T,
    pub delta_jackknife: T,
    pub delta_leaveout: Vec<T>,
    pub variance: T,
    pub se: T,
    /// `Δ̂_N / se`.
    pub t_plugin: T,
    /// `Δ̂_J / se`.
    pub t_jackknife: T,
    pub n_instances: f64,
    pub leaveout_failures: usize,
    pub notes: Vec<String>,
}

/// Run `visit` over every instance, one accumulator per first agent, and
/// return the accumulators in agent order.
pub(crate) fn stripes<A: Send>(
    pattern: &LambdaPattern,
    n: usize,
    jobs: usize,
    init: impl Fn() -> A + Send + Sync,
    visit: impl Fn(&mut A, &[usize]) + Send + Sync,
) -> Vec<A> {
    par_map(jobs, n, |first| {
        let mut acc = init();
        pattern.for_each_with_first(n, first, &mut |agents| visit(&mut acc, agents));
        acc
    })
}

/// Sum of `f` over all instances, reduced in agent order.
fn instance_sum<T: Scalar>(
    moment: &dyn Moment<T>,
    ctx: &EvalContext<'_, T>,
    jobs: usize,
    keep: impl Fn(&[usize]) -> bool + Send + Sync,
) -> T {
    let pattern = moment.pattern();
    let parts = stripes(
        pattern,
        ctx.n_nodes(),
        jobs,
        || (T::zero(), Gather::new(pattern.r())),
        |(sum, g), agents| {
            if keep(agents) {
                g.fill(ctx, pattern, agents);
                *sum = *sum + moment.value(&g.local(ctx));
            }
        },
    );
    parts.into_iter().fold(T::zero(), |acc, (s, _)| acc + s)
}

/// `Δ̂ = (1/|Λ|) Σ_λ m_λ` at `params`.
pub fn plugin_average<T: Scalar>(
    moment: &dyn Moment<T>,
    data: &NetworkData<T>,
    family: ModelFamily,
    params: &ParameterSet<T>,
    jobs: usize,
) -> T {
    let ctx = EvalContext::new(data, family, params);
    let count = moment.pattern().count(data.n_nodes());
    let sum = moment
        .masked_sum(&ctx, None)
        .unwrap_or_else(|| instance_sum(moment, &ctx, jobs, |_| true));
    sum / T::lit(count)
}

/// Leave-out average at leave-out parameters. Outcome-dependent moments
/// only use instances whose edges all lie in `mask`, rescaled by
/// `N_l/(N_l − r)` with `N_l` the number of leave-out sets.
pub fn leaveout_average<T: Scalar>(
    moment: &dyn Moment<T>,
    data: &NetworkData<T>,
    family: ModelFamily,
    params: &ParameterSet<T>,
    mask: &EdgeMask,
    n_sets: usize,
    jobs: usize,
) -> Result<T> {
    let pattern = moment.pattern();
    let count = T::lit(pattern.count(data.n_nodes()));
    let ctx = EvalContext::new(data, family, params);
    if !pattern.uses_outcomes() {
        return Ok(instance_sum(moment, &ctx, jobs, |_| true) / count);
    }
    let r = pattern.r();
    if r + 1 >= n_sets {
        return Err(Error::PatternTooLargeForLeaveOut { r, sets: n_sets });
    }
    let inside = |agents: &[usize]| pattern.instance_edges(agents).all(|(i, j)| mask.included(i, j));
    let sum = moment
        .masked_sum(&ctx, Some(mask))
        .unwrap_or_else(|| instance_sum(moment, &ctx, jobs, inside));
    let rescale = T::from_usize_lossy(n_sets) / T::from_usize_lossy(n_sets - r);
    Ok(rescale * sum / count)
}

/// Plug-in, leave-out and jackknifed averages without a variance.
#[derive(Clone, Debug, PartialEq)]
pub struct JackknifedAverage<T> {
    pub plugin: T,
    pub jackknife: T,
    pub leaveout: Vec<T>,
    pub failures: usize,
    pub notes: Vec<String>,
}

/// Jackknifed average over the converged leave-out fits in `est`.
pub fn jackknifed_average<T: Scalar>(
    est: &LeaveOutEstimates<T>,
    moment: &dyn Moment<T>,
    data: &NetworkData<T>,
    jobs: usize,
) -> Result<JackknifedAverage<T>> {
    let full = &est.full;
    if !full.converged {
        return Err(Error::NonConvergence {
            iterations: full.iterations,
            score_norm: full.score_norm.as_f64(),
        });
    }
    let n_sets = est.fits.len();
    let plugin = plugin_average(moment, data, full.family, &full.params, jobs);
    let mut notes = Vec::new();
    let mut leaveout = Vec::with_capacity(n_sets);
    let mut failures = 0;
    for (k, fit) in est.fits.iter().enumerate() {
        match fit {
            Ok(f) if f.converged => {
                leaveout.push(leaveout_average(moment, data, full.family, &f.params, &f.mask, n_sets, jobs)?)
            }
            Ok(_) => {
                failures += 1;
                notes.push(format!("leave-out fit {k} did not converge; excluded"));
            }
            Err(e) => {
                failures += 1;
                notes.push(format!("leave-out fit {k} failed: {e}; excluded"));
            }
        }
    }
    if leaveout.is_empty() {
        return Err(Error::InvalidData("no leave-out fit succeeded".into()));
    }
    let jackknife = combine(plugin, &leaveout, data.n_nodes(), est.l);
    Ok(JackknifedAverage {
        plugin,
        jackknife,
        leaveout,
        failures,
        notes,
    })
}

/// Plug-in and jackknifed average with its variance for `opts.target`.
pub fn average_effect<T: Scalar>(
    est: &LeaveOutEstimates<T>,
    moment: &dyn Moment<T>,
    data: &NetworkData<T>,
    opts: &EffectOptions,
) -> Result<EffectResult<T>> {
    let full = &est.full;
    let n = data.n_nodes();
    moment.pattern().check_size(n, opts.allow_large)?;
    let JackknifedAverage {
        plugin,
        jackknife: jack,
        leaveout,
        failures,
        notes,
    } = jackknifed_average(est, moment, data, opts.jobs)?;
    let (variance, se) = match opts.target {
        Target::Conditional => {
            let v = conditional_variance(full, moment, data, opts.jobs)?;
            (v.variance, v.se)
        }
        Target::Population => {
            let v = population_variance(full, moment, data, opts.jobs);
            (v.variance, v.se)
        }
    };
    let t = |v: T| if se > T::zero() { v / se } else { T::nan() };
    Ok(EffectResult {
        name: moment.name(),
        target: opts.target,
        delta_plugin: plugin,
        delta_jackknife: jack,
        delta_leaveout: leaveout,
        variance,
        se,
        t_plugin: t(plugin),
        t_jackknife: t(jack),
        n_instances: moment.pattern().count(n),
        leaveout_failures: failures,
        notes,
    })
}
