//! Leave-out re-estimation and jackknife combinations.

use num_traits::{FromPrimitive, Num};
use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::NetworkData;
use crate::error::{Error, Result};
use crate::estimator::{fit_full, fit_unchecked, FitConfig, FitResult};
use crate::family::ModelFamily;
use crate::linalg::{symmetric_eigenvalues, Matrix};
use crate::params::ParameterSet;
use crate::partition::{EdgeMask, LeaveOutPartition};
use crate::rng::{self, tag};
use crate::scalar::Scalar;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    Plain,
    LeaveL,
    Weighted,
    SplitSample,
    DoubleAgent,
}

impl std::str::FromStr for Variant {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "plain" | "j" => Ok(Variant::Plain),
            "leave_l" => Ok(Variant::LeaveL),
            "weighted" | "wj" => Ok(Variant::Weighted),
            "split" | "split_sample" | "ss" => Ok(Variant::SplitSample),
            "double" | "double_agent" | "d" => Ok(Variant::DoubleAgent),
            other => Err(format!("unknown jackknife variant {other:?}")),
        }
    }
}

/// Jackknife weights `((N−1)/l, (N−1−l)/l)`.
pub fn coefficients<V: Num + FromPrimitive>(n: usize, l: usize) -> (V, V) {
    let at = |v: usize| V::from_usize(v).expect("representable count");
    (at(n - 1) / at(l), at(n - 1 - l) / at(l))
}

/// `((N−1)/l)·full − ((N−1−l)/l)·mean(leave_out)`.
pub fn combine<V: Num + FromPrimitive + Copy>(full: V, leave_out: &[V], n: usize, l: usize) -> V {
    let (a, b) = coefficients::<V>(n, l);
    let mut sum = V::zero();
    for &v in leave_out {
        sum = sum + v;
    }
    let mean = sum / V::from_usize(leave_out.len()).expect("count");
    a * full - b * mean
}

fn combine_vec<T: Scalar>(full: &[T], leave_out: &[&[T]], n: usize, l: usize) -> Vec<T> {
    (0..full.len())
        .map(|r| {
            let col: Vec<T> = leave_out.iter().map(|v| v[r]).collect();
            combine(full[r], &col, n, l)
        })
        .collect()
}

/// Map over `0..count` on a pool of `jobs` threads; output order is the
/// index order, so results do not depend on `jobs`.
pub fn par_map<R: Send>(jobs: usize, count: usize, f: impl Fn(usize) -> R + Send + Sync) -> Vec<R> {
    if jobs <= 1 || count <= 1 {
        return (0..count).map(f).collect();
    }
    match rayon::ThreadPoolBuilder::new().num_threads(jobs).build() {
        Ok(pool) => pool.install(|| (0..count).into_par_iter().map(&f).collect()),
        Err(_) => (0..count).map(f).collect(),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SubFitDiagnostics {
    pub index: usize,
    pub converged: bool,
    pub iterations: usize,
    pub score_norm: f64,
    pub ridged: bool,
    pub error: Option<String>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct JackknifeResult<T> {
    pub variant: Variant,
    pub l: usize,
    pub beta_full: Vec<T>,
    pub beta_leaveout: Vec<Vec<T>>,
    pub beta_corrected: Vec<T>,
    /// `(α, γ)` combined with the same coefficients, when defined.
    pub phi_corrected: Option<Vec<T>>,
    pub weights_used: Option<Vec<Matrix<T>>>,
    pub per_k_diagnostics: Vec<SubFitDiagnostics>,
    /// False when any sub-fit failed or did not converge.
    pub reliable: bool,
    pub notes: Vec<String>,
    /// Across-relabel standard deviation of `beta_corrected`.
    pub relabel_sd: Option<Vec<T>>,
}

/// Full fit plus the leave-out fits over a partition.
#[derive(Clone, Debug)]
pub struct LeaveOutEstimates<T> {
    pub full: FitResult<T>,
    pub fits: Vec<Result<FitResult<T>, String>>,
    pub n: usize,
    pub l: usize,
}

fn diag_of<T: Scalar>(index: usize, r: &Result<FitResult<T>, String>) -> SubFitDiagnostics {
    match r {
        Ok(f) => SubFitDiagnostics {
            index,
            converged: f.converged,
            iterations: f.iterations,
            score_norm: f.score_norm.as_f64(),
            ridged: false,
            error: None,
        },
        Err(e) => SubFitDiagnostics {
            index,
            converged: false,
            iterations: 0,
            score_norm: f64::NAN,
            ridged: false,
            error: Some(e.clone()),
        },
    }
}

/// Run the `N_l` leave-out fits, warm-started at the full-sample solution.
pub fn leave_out_fits<T: Scalar>(
    data: &NetworkData<T>,
    family: ModelFamily,
    config: &FitConfig<T>,
    full: FitResult<T>,
    partition: &LeaveOutPartition,
    jobs: usize,
) -> LeaveOutEstimates<T> {
    let n = data.n_nodes();
    let l = partition.block_size();
    let cfg = config.with_warm_start(&full.params);
    let c = T::from_usize_lossy(n - 1 - l);
    let fits = par_map(jobs, partition.n_sets(), |k| {
        let mask = partition.edge_mask(k).map_err(|e| e.to_string())?;
        fit_unchecked(data, family, &cfg, &mask, c).map_err(|e| e.to_string())
    });
    LeaveOutEstimates { full, fits, n, l }
}

impl<T: Scalar> LeaveOutEstimates<T> {
    pub fn compute(
        data: &NetworkData<T>,
        family: ModelFamily,
        config: &FitConfig<T>,
        partition: &LeaveOutPartition,
        jobs: usize,
    ) -> Result<Self> {
        let full = fit_full(data, family, config)?;
        Ok(leave_out_fits(data, family, config, full, partition, jobs))
    }

    fn ok_fits(&self) -> Vec<&FitResult<T>> {
        self.fits.iter().filter_map(|r| r.as_ref().ok()).collect()
    }

    fn reliable(&self) -> bool {
        self.fits.iter().all(|r| r.as_ref().map(|f| f.converged).unwrap_or(false))
    }

    /// Plain (or leave-l) combination of `β` and `φ`.
    pub fn plain(&self) -> JackknifeResult<T> {
        let ok = self.ok_fits();
        let betas: Vec<&[T]> = ok.iter().map(|f| f.params.beta.as_slice()).collect();
        let beta_corrected = combine_vec(&self.full.params.beta, &betas, self.n, self.l);
        let phi_full = [self.full.params.alpha.clone(), self.full.params.gamma.clone()].concat();
        let phis: Vec<Vec<T>> = ok.iter().map(|f| [f.params.alpha.clone(), f.params.gamma.clone()].concat()).collect();
        let phi_refs: Vec<&[T]> = phis.iter().map(Vec::as_slice).collect();
        let mut notes = Vec::new();
        if ok.len() < self.fits.len() {
            notes.push(format!("{} of {} leave-out fits failed and were excluded", self.fits.len() - ok.len(), self.fits.len()));
        }
        JackknifeResult {
            variant: if self.l == 1 { Variant::Plain } else { Variant::LeaveL },
            l: self.l,
            beta_full: self.full.params.beta.clone(),
            beta_leaveout: ok.iter().map(|f| f.params.beta.clone()).collect(),
            beta_corrected,
            phi_corrected: Some(combine_vec(&phi_full, &phi_refs, self.n, self.l)),
            weights_used: None,
            per_k_diagnostics: self.fits.iter().enumerate().map(|(k, r)| diag_of(k, r)).collect(),
            reliable: self.reliable() && !ok.is_empty(),
            notes,
            relabel_sd: None,
        }
    }

    /// Information-weighted combination:
    /// `a β − b W̄⁻¹ mean_k(Ŵ_(k) β_(k))`, `Ŵ_(k)` the concentrated Hessian of
    /// fit `k` scaled by `1/N`.
    pub fn weighted(&self) -> Result<JackknifeResult<T>> {
        let ok = self.ok_fits();
        let k = self.full.params.dim_beta();
        let mut res = self.plain();
        res.variant = Variant::Weighted;
        let mut weights = Vec::with_capacity(ok.len());
        let mut wbar = Matrix::zeros(k, k);
        let mut wb = vec![T::zero(); k];
        for (idx, f) in self.fits.iter().enumerate().filter_map(|(i, r)| r.as_ref().ok().map(|f| (i, f))) {
            let mut w = f.w_hat();
            if w.cholesky().is_err() {
                let ridge = T::lit(1e-8) * (w.trace() / T::from_usize_lossy(k.max(1))).abs().max(T::min_positive_value());
                for r in 0..k {
                    w[(r, r)] = w[(r, r)] + ridge;
                }
                if let Some(d) = res.per_k_diagnostics.get_mut(idx) {
                    d.ridged = true;
                }
                res.notes.push(format!("leave-out weight {idx} not positive definite; ridge added"));
            }
            let wbk = w.mat_vec(&f.params.beta);
            for r in 0..k {
                wb[r] = wb[r] + wbk[r];
            }
            wbar = wbar.add(&w);
            weights.push(w);
        }
        let m = T::from_usize_lossy(ok.len().max(1));
        let wbar = wbar.scaled(T::one() / m);
        let wb: Vec<T> = wb.iter().map(|&v| v / m).collect();
        let chol = wbar.cholesky().map_err(|_| Error::NotPositiveDefinite {
            what: "mean leave-out weight",
            eigenvalues: symmetric_eigenvalues(&wbar).iter().map(|v| v.as_f64()).collect(),
        })?;
        let adj = chol.solve(&wb);
        let (a, b) = coefficients::<T>(self.n, self.l);
        res.beta_corrected = self.full.params.beta.iter().zip(&adj).map(|(&f, &v)| a * f - b * v).collect();
        res.weights_used = Some(weights);
        Ok(res)
    }
}

pub fn jackknife_beta<T: Scalar>(
    data: &NetworkData<T>,
    family: ModelFamily,
    config: &FitConfig<T>,
    partition: &LeaveOutPartition,
    jobs: usize,
) -> Result<JackknifeResult<T>> {
    Ok(LeaveOutEstimates::compute(data, family, config, partition, jobs)?.plain())
}

pub fn jackknife_weighted<T: Scalar>(
    data: &NetworkData<T>,
    family: ModelFamily,
    config: &FitConfig<T>,
    partition: &LeaveOutPartition,
    jobs: usize,
) -> Result<JackknifeResult<T>> {
    LeaveOutEstimates::compute(data, family, config, partition, jobs)?.weighted()
}

/// Sender and receiver halves from a seeded permutation; the first half has
/// `⌊N/2⌋` nodes.
pub fn split_halves(n: usize, seed: u64) -> (Vec<usize>, Vec<usize>) {
    let mut perm: Vec<usize> = (0..n).collect();
    perm.shuffle(&mut rng::stream(seed, &[tag::SPLIT_SAMPLE]));
    let mut a = perm[..n / 2].to_vec();
    let mut b = perm[n / 2..].to_vec();
    a.sort_unstable();
    b.sort_unstable();
    (a, b)
}

/// `3β − β_{α/2,γ} − β_{α,γ/2}` from four half-sample fits.
pub fn jackknife_split_sample<T: Scalar>(
    data: &NetworkData<T>,
    family: ModelFamily,
    config: &FitConfig<T>,
    full: &FitResult<T>,
    seed: u64,
    jobs: usize,
) -> Result<JackknifeResult<T>> {
    let n = data.n_nodes();
    let (h1, h2) = split_halves(n, seed);
    let mut in1 = vec![false; n];
    h1.iter().for_each(|&v| in1[v] = true);
    let cfg = config.with_warm_start(&full.params);
    let c = T::from_usize_lossy(n - 1);
    let specs: [(&str, bool, bool); 4] = [
        ("senders in half 1", true, true),
        ("senders in half 2", true, false),
        ("receivers in half 1", false, true),
        ("receivers in half 2", false, false),
    ];
    let fits = par_map(jobs, 4, |s| {
        let (_, by_sender, first) = specs[s];
        let mask = EdgeMask::from_fn(n, |i, j| in1[if by_sender { i } else { j }] == first);
        fit_unchecked(data, family, &cfg, &mask, c)
    });
    let mut betas = Vec::with_capacity(4);
    let mut diags = Vec::with_capacity(4);
    for (s, r) in fits.into_iter().enumerate() {
        let half = specs[s].0.to_string();
        let f = r.map_err(|e| Error::DegenerateHalf { half: half.clone(), source: Box::new(e) })?;
        if !f.converged {
            return Err(Error::DegenerateHalf {
                half,
                source: Box::new(Error::NonConvergence {
                    iterations: f.iterations,
                    score_norm: f.score_norm.as_f64(),
                }),
            });
        }
        diags.push(diag_of(s, &Ok(f.clone())));
        betas.push(f.params.beta);
    }
    let half = T::lit(0.5);
    let three = T::lit(3.0);
    let corrected = (0..full.params.dim_beta())
        .map(|r| {
            let sender = half * (betas[0][r] + betas[1][r]);
            let receiver = half * (betas[2][r] + betas[3][r]);
            three * full.params.beta[r] - sender - receiver
        })
        .collect();
    let mut notes = Vec::new();
    if n % 2 == 1 {
        notes.push(format!("odd N: halves have {} and {} nodes", h1.len(), h2.len()));
    }
    Ok(JackknifeResult {
        variant: Variant::SplitSample,
        l: 1,
        beta_full: full.params.beta.clone(),
        beta_leaveout: betas,
        beta_corrected: corrected,
        phi_corrected: None,
        weights_used: None,
        per_k_diagnostics: diags,
        reliable: true,
        notes,
        relabel_sd: None,
    })
}

/// `Nβ − (N−1) mean_i β_(i)`, where fit `i` drops every edge touching agent `i`.
pub fn jackknife_double<T: Scalar>(
    data: &NetworkData<T>,
    family: ModelFamily,
    config: &FitConfig<T>,
    full: &FitResult<T>,
    jobs: usize,
) -> Result<JackknifeResult<T>> {
    let n = data.n_nodes();
    let cfg = config.with_warm_start(&full.params);
    let c = T::from_usize_lossy(n - 2);
    let all = EdgeMask::full(n);
    let fits: Vec<Result<FitResult<T>, String>> = par_map(jobs, n, |i| {
        fit_unchecked(data, family, &cfg, &all.without_node(i), c).map_err(|e| e.to_string())
    });
    let diags: Vec<SubFitDiagnostics> = fits.iter().enumerate().map(|(i, r)| diag_of(i, r)).collect();
    let ok: Vec<&FitResult<T>> = fits.iter().filter_map(|r| r.as_ref().ok()).filter(|f| f.converged).collect();
    if ok.is_empty() {
        return Err(Error::NonConvergence {
            iterations: 0,
            score_norm: f64::NAN,
        });
    }
    let nn = T::from_usize_lossy(n);
    let m = T::from_usize_lossy(ok.len());
    let corrected = (0..full.params.dim_beta())
        .map(|r| {
            let mean = ok.iter().map(|f| f.params.beta[r]).sum::<T>() / m;
            nn * full.params.beta[r] - (nn - T::one()) * mean
        })
        .collect();
    let mut notes = Vec::new();
    if ok.len() < n {
        notes.push(format!("{} of {n} leave-one-agent fits failed; mean taken over the remaining {}", n - ok.len(), ok.len()));
    }
    Ok(JackknifeResult {
        variant: Variant::DoubleAgent,
        l: 1,
        beta_full: full.params.beta.clone(),
        beta_leaveout: ok.iter().map(|f| f.params.beta.clone()).collect(),
        beta_corrected: corrected,
        phi_corrected: None,
        weights_used: None,
        per_k_diagnostics: diags,
        reliable: ok.len() == n,
        notes,
        relabel_sd: None,
    })
}

/// Seed used for relabeling round `r`.
pub fn relabel_seed(seed: u64, r: usize) -> u64 {
    rng::derive_seed(seed, &[tag::RELABEL, r as u64])
}

/// Average the plain (or weighted) jackknife over `n_relabels` random node
/// orderings; the across-relabel SD is reported as a stability diagnostic.
#[allow(clippy::too_many_arguments)]
pub fn jackknife_with_relabeling<T: Scalar>(
    data: &NetworkData<T>,
    family: ModelFamily,
    config: &FitConfig<T>,
    l: usize,
    weighted: bool,
    n_relabels: usize,
    seed: u64,
    jobs: usize,
) -> Result<JackknifeResult<T>> {
    if n_relabels == 0 {
        return Err(Error::InvalidData("n_relabels must be at least 1".into()));
    }
    let partition = crate::partition::build_partition(data.n_nodes(), l)?;
    let full = fit_full(data, family, config)?;
    let mut runs = Vec::with_capacity(n_relabels);
    for r in 0..n_relabels {
        let perm = crate::data::relabel_permutation(data.n_nodes(), relabel_seed(seed, r));
        let d = data.permute(&perm);
        // The full-sample solution is label-equivariant, so its permutation
        // is an exact warm start.
        let warm = config.with_warm_start(&full.params.permute(&perm));
        let fr = fit_full(&d, family, &warm)?;
        let est = leave_out_fits(&d, family, config, fr, &partition, jobs);
        let mut res = if weighted { est.weighted()? } else { est.plain() };
        if let Some(phi) = res.phi_corrected.as_mut() {
            *phi = unpermute_phi(phi, &perm);
        }
        runs.push(res);
    }
    let k = full.params.dim_beta();
    let m = T::from_usize_lossy(n_relabels);
    let mean: Vec<T> = (0..k).map(|r| runs.iter().map(|x| x.beta_corrected[r]).sum::<T>() / m).collect();
    let sd: Vec<T> = (0..k)
        .map(|r| {
            if n_relabels < 2 {
                return T::zero();
            }
            let ss: T = runs.iter().map(|x| (x.beta_corrected[r] - mean[r]).powi(2)).sum();
            (ss / T::from_usize_lossy(n_relabels - 1)).sqrt()
        })
        .collect();
    let mut out = runs.swap_remove(0);
    if n_relabels > 1 {
        out.beta_corrected = mean;
        out.phi_corrected = None;
        out.notes.push(format!("averaged over {n_relabels} relabelings"));
    }
    out.beta_full = full.params.beta.clone();
    out.relabel_sd = Some(sd);
    Ok(out)
}

fn unpermute_phi<T: Scalar>(phi: &[T], perm: &[usize]) -> Vec<T> {
    let n = perm.len();
    let mut out = vec![T::zero(); 2 * n];
    for (a, &p) in perm.iter().enumerate() {
        out[p] = phi[a];
        out[n + p] = phi[n + a];
    }
    out
}

/// Parameters of a corrected `φ` vector as a parameter set.
pub fn corrected_params<T: Scalar>(beta: &[T], phi: &[T]) -> ParameterSet<T> {
    let n = phi.len() / 2;
    ParameterSet {
        beta: beta.to_vec(),
        alpha: phi[..n].to_vec(),
        gamma: phi[n..].to_vec(),
    }
}
