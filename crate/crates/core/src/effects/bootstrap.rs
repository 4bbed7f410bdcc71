//! Parametric bootstrap standard errors for plug-in statistics.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::data::NetworkData;
use crate::error::Result;
use crate::estimator::{fit_full, FitConfig, FitResult};
use crate::jackknife::{leave_out_fits, par_map};
use crate::partition::LeaveOutPartition;
use crate::rng::{stream, tag};
use crate::scalar::Scalar;

use super::average::{jackknifed_average, plugin_average};
use super::moments::Moment;

pub const DEFAULT_BOOTSTRAP_DRAWS: usize = 200;

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct BootstrapResult<T> {
    pub se: T,
    pub replicates: Vec<T>,
    /// Draws whose refit failed (only with refitting).
    pub failed: usize,
}

/// Outcomes drawn from the fitted model; replicate `b` uses its own stream.
pub fn simulate_from_fit<T: Scalar>(fit: &FitResult<T>, data: &NetworkData<T>, rng: &mut impl Rng) -> NetworkData<T> {
    let p = &fit.params;
    data.with_outcomes(|i, j| T::lit(fit.family.simulate(p.eta(data.x(i, j), i, j).as_f64(), rng)))
}

/// SD of the plug-in statistic over `n_boot` networks simulated from the
/// fit. Parameters stay at the fitted values unless `refit` is given, in
/// which case each draw is re-estimated with that configuration.
pub fn bootstrap_statistic_se<T: Scalar>(
    fit: &FitResult<T>,
    data: &NetworkData<T>,
    moment: &dyn Moment<T>,
    n_boot: usize,
    seed: u64,
    jobs: usize,
    refit: Option<&FitConfig<T>>,
) -> Result<BootstrapResult<T>> {
    let draws = par_map(jobs, n_boot, |b| {
        let mut rng = stream(seed, &[tag::BOOTSTRAP, b as u64]);
        let sim = simulate_from_fit(fit, data, &mut rng);
        match refit {
            None => Some(plugin_average(moment, &sim, fit.family, &fit.params, 1)),
            Some(cfg) => fit_full(&sim, fit.family, &cfg.with_warm_start(&fit.params))
                .ok()
                .map(|f| plugin_average(moment, &sim, fit.family, &f.params, 1)),
        }
    });
    let failed = draws.iter().filter(|d| d.is_none()).count();
    let replicates: Vec<T> = draws.into_iter().flatten().collect();
    Ok(BootstrapResult {
        se: sample_sd(&replicates),
        replicates,
        failed,
    })
}

/// SD of the jackknifed statistic: each simulated network is re-estimated,
/// refit on every leave-out set of `partition`, and corrected. Draw `b`
/// uses the same outcomes as in [`bootstrap_statistic_se`].
#[allow(clippy::too_many_arguments)]
pub fn bootstrap_jackknife_se<T: Scalar>(
    fit: &FitResult<T>,
    data: &NetworkData<T>,
    moment: &dyn Moment<T>,
    partition: &LeaveOutPartition,
    n_boot: usize,
    seed: u64,
    jobs: usize,
    config: &FitConfig<T>,
) -> Result<BootstrapResult<T>> {
    let cfg = config.with_warm_start(&fit.params);
    let draws = par_map(jobs, n_boot, |b| {
        let mut rng = stream(seed, &[tag::BOOTSTRAP, b as u64]);
        let sim = simulate_from_fit(fit, data, &mut rng);
        let full = fit_full(&sim, fit.family, &cfg).ok().filter(|f| f.converged)?;
        let est = leave_out_fits(&sim, fit.family, &cfg, full, partition, 1);
        jackknifed_average(&est, moment, &sim, 1).ok().map(|j| j.jackknife)
    });
    let failed = draws.iter().filter(|d| d.is_none()).count();
    let replicates: Vec<T> = draws.into_iter().flatten().collect();
    Ok(BootstrapResult {
        se: sample_sd(&replicates),
        replicates,
        failed,
    })
}

fn sample_sd<T: Scalar>(v: &[T]) -> T {
    if v.len() < 2 {
        return T::zero();
    }
    let n = T::from_usize_lossy(v.len());
    let mean = v.iter().fold(T::zero(), |a, &b| a + b) / n;
    let ss = v.iter().fold(T::zero(), |a, &b| a + (b - mean) * (b - mean));
    (ss / (n - T::one())).sqrt()
}
