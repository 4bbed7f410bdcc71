//! Monte Carlo replications over estimator variants.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use dyadnet::effects::{
    average_effect, bootstrap_jackknife_se, bootstrap_statistic_se, transitivity_statistic, EffectOptions, FittedMean, StatisticKind, Target,
};
use dyadnet::inference::{compute_partialled_score, sandwich_variance};
use dyadnet::jackknife::{jackknife_double, jackknife_split_sample, leave_out_fits, par_map};
use dyadnet::rng::{derive_seed, tag};
use dyadnet::{build_partition, fit_full, FitConfig, ModelFamily, Network, XiVariant};

use crate::alternative::{generate_transitive, Transitive};
use crate::design::{connected, generate_design, SimDesign};

/// Two-sided 5% normal critical value.
pub const Z_975: f64 = 1.959_963_984_540_054;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Estimator {
    #[serde(rename = "MLE")]
    Mle,
    #[serde(rename = "J")]
    Jackknife,
    #[serde(rename = "WJ")]
    Weighted,
    #[serde(rename = "SS")]
    SplitSample,
    #[serde(rename = "D")]
    Double,
}

impl Estimator {
    pub const ALL: [Estimator; 5] = [
        Estimator::Mle,
        Estimator::Jackknife,
        Estimator::Weighted,
        Estimator::SplitSample,
        Estimator::Double,
    ];

    pub fn label(self) -> &'static str {
        match self {
            Estimator::Mle => "MLE",
            Estimator::Jackknife => "J",
            Estimator::Weighted => "WJ",
            Estimator::SplitSample => "SS",
            Estimator::Double => "D",
        }
    }

    /// Comma-separated list such as `mle,j,wj`.
    pub fn parse_list(s: &str) -> Result<Vec<Estimator>, String> {
        let mut out: Vec<Estimator> = Vec::new();
        for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
            let e: Estimator = part.parse()?;
            if !out.contains(&e) {
                out.push(e);
            }
        }
        Ok(out)
    }
}

impl std::str::FromStr for Estimator {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s.to_ascii_lowercase().as_str() {
            "mle" => Ok(Estimator::Mle),
            "j" | "jackknife" => Ok(Estimator::Jackknife),
            "wj" | "weighted" => Ok(Estimator::Weighted),
            "ss" | "split" => Ok(Estimator::SplitSample),
            "d" | "double" => Ok(Estimator::Double),
            other => Err(format!("unknown estimator {other:?} (expected mle, j, wj, ss or d)")),
        }
    }
}

/// One estimator's outcome in one replication.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RepRow {
    pub rep: usize,
    pub estimator: Estimator,
    pub n_kept: usize,
    pub density: f64,
    pub connected: usize,
    pub estimate: Option<f64>,
    pub se: Option<f64>,
    pub t: Option<f64>,
    pub reject: Option<bool>,
    pub error: Option<String>,
}

impl RepRow {
    pub fn ok(&self) -> bool {
        self.estimate.is_some() && self.t.is_some()
    }
}

fn config() -> FitConfig<f64> {
    FitConfig::default()
}

/// Generate, filter, fit and correct one replication.
pub fn run_rep(design: &SimDesign, rep: usize) -> Vec<RepRow> {
    let (raw, _) = generate_design(design, rep);
    run_on(design, rep, &raw)
}

fn run_on(design: &SimDesign, rep: usize, raw: &Network) -> Vec<RepRow> {
    let density = raw.density();
    let conn = connected(raw);
    let row = |estimator, n_kept, estimate: Option<f64>, se: Option<f64>, error: Option<String>| {
        let t = match (estimate, se) {
            (Some(b), Some(s)) if s > 0.0 && b.is_finite() => Some((b - design.theta) / s),
            _ => None,
        };
        let error = error.or_else(|| if estimate.is_some() && t.is_none() { Some("no usable standard error".into()) } else { None });
        RepRow {
            rep,
            estimator,
            n_kept,
            density,
            connected: conn,
            estimate,
            se,
            t,
            reject: t.map(|t| t.abs() > Z_975),
            error,
        }
    };
    let fail_all = |n_kept, msg: String| design.estimators.iter().map(|&e| row(e, n_kept, None, None, Some(msg.clone()))).collect();

    let family = ModelFamily::Probit;
    let data = match raw.filter_degenerate(family) {
        Ok((d, _)) => d,
        Err(e) => return fail_all(0, e.to_string()),
    };
    let n = data.n_nodes();
    let cfg = config();
    let full = match fit_full(&data, family, &cfg) {
        Ok(f) if f.converged => f,
        Ok(_) => return fail_all(n, "full-sample fit did not converge".into()),
        Err(e) => return fail_all(n, e.to_string()),
    };
    let se = compute_partialled_score(&full, &data, XiVariant::Gamma)
        .and_then(|ps| sandwich_variance(&full, &ps, &data))
        .map(|v| v.se[0]);
    let (se, se_err) = match se {
        Ok(s) => (Some(s), None),
        Err(e) => (None, Some(e.to_string())),
    };
    let beta = full.params.beta[0];

    let wants = |e| design.estimators.contains(&e);
    let leave = if wants(Estimator::Jackknife) || wants(Estimator::Weighted) {
        let part = build_partition(n, 1).expect("l = 1 is always valid");
        Some(leave_out_fits(&data, family, &cfg, full.clone(), &part, 1))
    } else {
        None
    };
    let mut rows = Vec::with_capacity(design.estimators.len());
    for &e in &design.estimators {
        let est: Result<f64, String> = match e {
            Estimator::Mle => Ok(beta),
            Estimator::Jackknife => {
                let j = leave.as_ref().expect("leave-out fits").plain();
                if j.reliable {
                    Ok(j.beta_corrected[0])
                } else {
                    Err("a leave-out fit did not converge".into())
                }
            }
            Estimator::Weighted => {
                let le = leave.as_ref().expect("leave-out fits");
                match le.weighted() {
                    Ok(j) if j.reliable => Ok(j.beta_corrected[0]),
                    Ok(_) => Err("a leave-out fit did not converge".into()),
                    Err(err) => Err(err.to_string()),
                }
            }
            Estimator::SplitSample => {
                let seed = derive_seed(design.seed, &[tag::SPLIT_SAMPLE, design.key(), rep as u64]);
                jackknife_split_sample(&data, family, &cfg, &full, seed, 1)
                    .map(|j| j.beta_corrected[0])
                    .map_err(|err| err.to_string())
            }
            Estimator::Double => jackknife_double(&data, family, &cfg, &full, 1)
                .map_err(|err| err.to_string())
                .and_then(|j| if j.reliable { Ok(j.beta_corrected[0]) } else { Err(j.notes.join("; ")) }),
        };
        rows.push(match est {
            Ok(b) => row(e, n, Some(b), se, se_err.clone()),
            Err(msg) => row(e, n, None, se, Some(msg)),
        });
    }
    rows
}

/// All replications, rows ordered by `(rep, estimator order in the design)`.
pub fn run_monte_carlo(design: &SimDesign, jobs: usize) -> Result<(SimSummary, Vec<RepRow>), String> {
    design.validate()?;
    let rows: Vec<RepRow> = par_map(jobs, design.n_reps, |rep| run_rep(design, rep)).into_iter().flatten().collect();
    Ok((SimSummary::from_rows(design, &rows), rows))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EstimatorSummary {
    pub estimator: Estimator,
    pub n_ok: usize,
    pub n_failed: usize,
    pub bias_mean: f64,
    pub bias_median: f64,
    pub std_dev: f64,
    pub p5_p95_range: f64,
    pub rejection_rate: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimSummary {
    pub label: String,
    pub n_nodes: usize,
    pub theta: f64,
    pub n_reps: usize,
    pub mean_density: f64,
    pub mean_connected: f64,
    pub rows: Vec<EstimatorSummary>,
}

/// Linear-interpolation quantile of sorted data (Hyndman–Fan type 7).
pub fn quantile(sorted: &[f64], q: f64) -> f64 {
    if sorted.is_empty() {
        return f64::NAN;
    }
    let h = (sorted.len() - 1) as f64 * q;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

fn mean(v: &[f64]) -> f64 {
    if v.is_empty() {
        f64::NAN
    } else {
        v.iter().sum::<f64>() / v.len() as f64
    }
}

/// Sample standard deviation with `n − 1` in the denominator.
pub fn std_dev(v: &[f64]) -> f64 {
    if v.len() < 2 {
        return f64::NAN;
    }
    let m = mean(v);
    (v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (v.len() - 1) as f64).sqrt()
}

impl SimSummary {
    pub fn from_rows(design: &SimDesign, rows: &[RepRow]) -> Self {
        let mut per_rep: Vec<(usize, f64, usize)> = rows.iter().map(|r| (r.rep, r.density, r.connected)).collect();
        per_rep.sort_by_key(|p| p.0);
        per_rep.dedup_by_key(|p| p.0);
        let summaries = design
            .estimators
            .iter()
            .map(|&e| {
                let mine: Vec<&RepRow> = rows.iter().filter(|r| r.estimator == e).collect();
                let ok: Vec<&RepRow> = mine.iter().copied().filter(|r| r.ok()).collect();
                let mut bias: Vec<f64> = ok.iter().map(|r| r.estimate.unwrap() - design.theta).collect();
                let rejections = ok.iter().filter(|r| r.reject == Some(true)).count();
                let bias_mean = mean(&bias);
                let std = std_dev(&bias);
                bias.sort_by(f64::total_cmp);
                EstimatorSummary {
                    estimator: e,
                    n_ok: ok.len(),
                    n_failed: mine.len() - ok.len(),
                    bias_mean,
                    bias_median: quantile(&bias, 0.5),
                    std_dev: std,
                    p5_p95_range: quantile(&bias, 0.95) - quantile(&bias, 0.05),
                    rejection_rate: if ok.is_empty() { f64::NAN } else { rejections as f64 / ok.len() as f64 },
                }
            })
            .collect();
        SimSummary {
            label: design.label.clone(),
            n_nodes: design.n_nodes,
            theta: design.theta,
            n_reps: design.n_reps,
            mean_density: mean(&per_rep.iter().map(|p| p.1).collect::<Vec<_>>()),
            mean_connected: mean(&per_rep.iter().map(|p| p.2 as f64).collect::<Vec<_>>()),
            rows: summaries,
        }
    }

    pub fn row(&self, e: Estimator) -> Option<&EstimatorSummary> {
        self.rows.iter().find(|r| r.estimator == e)
    }

    /// Long-form `section,key,value` CSV; floats use shortest round-trip text.
    pub fn write_csv<W: Write>(&self, w: W) -> csv::Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["section", "key", "value"])?;
        let design = [
            ("label", self.label.clone()),
            ("n_nodes", self.n_nodes.to_string()),
            ("theta", self.theta.to_string()),
            ("n_reps", self.n_reps.to_string()),
            ("mean_density", self.mean_density.to_string()),
            ("mean_connected", self.mean_connected.to_string()),
        ];
        for (k, v) in design {
            out.write_record(["design", k, &v])?;
        }
        for r in &self.rows {
            let s = r.estimator.label();
            let fields = [
                ("n_ok", r.n_ok.to_string()),
                ("n_failed", r.n_failed.to_string()),
                ("bias_mean", r.bias_mean.to_string()),
                ("bias_median", r.bias_median.to_string()),
                ("std_dev", r.std_dev.to_string()),
                ("p5_p95_range", r.p5_p95_range.to_string()),
                ("rejection_rate", r.rejection_rate.to_string()),
            ];
            for (k, v) in fields {
                out.write_record([s, k, &v])?;
            }
        }
        out.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(r: R) -> Result<Self, String> {
        let mut s = SimSummary {
            label: String::new(),
            n_nodes: 0,
            theta: f64::NAN,
            n_reps: 0,
            mean_density: f64::NAN,
            mean_connected: f64::NAN,
            rows: Vec::new(),
        };
        let bad = |k: &str, v: &str| format!("bad value {v:?} for {k}");
        for rec in csv::Reader::from_reader(r).records() {
            let rec = rec.map_err(|e| e.to_string())?;
            let (section, key, value) = (&rec[0], &rec[1], &rec[2]);
            let float = || value.parse::<f64>().map_err(|_| bad(key, value));
            let int = || value.parse::<usize>().map_err(|_| bad(key, value));
            if section == "design" {
                match key {
                    "label" => s.label = value.to_string(),
                    "n_nodes" => s.n_nodes = int()?,
                    "theta" => s.theta = float()?,
                    "n_reps" => s.n_reps = int()?,
                    "mean_density" => s.mean_density = float()?,
                    "mean_connected" => s.mean_connected = float()?,
                    other => return Err(format!("unknown design key {other:?}")),
                }
                continue;
            }
            let e: Estimator = match section {
                "MLE" => Estimator::Mle,
                "J" => Estimator::Jackknife,
                "WJ" => Estimator::Weighted,
                "SS" => Estimator::SplitSample,
                "D" => Estimator::Double,
                other => return Err(format!("unknown section {other:?}")),
            };
            if s.rows.last().map(|r| r.estimator) != Some(e) {
                s.rows.push(EstimatorSummary {
                    estimator: e,
                    n_ok: 0,
                    n_failed: 0,
                    bias_mean: f64::NAN,
                    bias_median: f64::NAN,
                    std_dev: f64::NAN,
                    p5_p95_range: f64::NAN,
                    rejection_rate: f64::NAN,
                });
            }
            let row = s.rows.last_mut().unwrap();
            match key {
                "n_ok" => row.n_ok = int()?,
                "n_failed" => row.n_failed = int()?,
                "bias_mean" => row.bias_mean = float()?,
                "bias_median" => row.bias_median = float()?,
                "std_dev" => row.std_dev = float()?,
                "p5_p95_range" => row.p5_p95_range = float()?,
                "rejection_rate" => row.rejection_rate = float()?,
                other => return Err(format!("unknown summary key {other:?}")),
            }
        }
        Ok(s)
    }
}

pub fn write_rep_csv<W: Write>(rows: &[RepRow], w: W) -> csv::Result<()> {
    let mut out = csv::Writer::from_writer(w);
    for r in rows {
        out.serialize(r)?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_rep_csv<R: Read>(r: R) -> csv::Result<Vec<RepRow>> {
    csv::Reader::from_reader(r).deserialize().collect()
}

/// Confidence-interval check for the conditional average link probability.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoverageRow {
    pub rep: usize,
    pub target: f64,
    pub estimate: f64,
    pub se: f64,
    pub covered: bool,
}

/// `Δ̄_N = (1/(N(N−1))) Σ Φ(θ X_ij + α_i + γ_j)` on the kept nodes, against
/// the jackknifed fitted mean with the conditional standard error.
pub fn coverage_rep(design: &SimDesign, rep: usize) -> Result<CoverageRow, String> {
    let (raw, truth) = generate_design(design, rep);
    let family = ModelFamily::Probit;
    let (data, _) = raw.filter_degenerate(family).map_err(|e| e.to_string())?;
    let truth = truth.restrict(&raw, &data);
    let p = truth.params();
    let n = data.n_nodes();
    let target = data.edges().map(|(i, j)| family.mean(p.eta(data.x(i, j), i, j))).sum::<f64>() / (n * (n - 1)) as f64;
    let cfg = config();
    let full = fit_full(&data, family, &cfg).map_err(|e| e.to_string())?;
    let part = build_partition(n, 1).map_err(|e| e.to_string())?;
    let est = leave_out_fits(&data, family, &cfg, full, &part, 1);
    let opts = EffectOptions {
        target: Target::Conditional,
        jobs: 1,
        allow_large: false,
    };
    let res = average_effect(&est, &FittedMean::default(), &data, &opts).map_err(|e| e.to_string())?;
    Ok(CoverageRow {
        rep,
        target,
        estimate: res.delta_jackknife,
        se: res.se,
        covered: (res.delta_jackknife - target).abs() <= Z_975 * res.se,
    })
}

pub fn run_coverage(design: &SimDesign, jobs: usize) -> Vec<Result<CoverageRow, String>> {
    par_map(jobs, design.n_reps, |rep| coverage_rep(design, rep))
}

/// Which process generates the outcomes for a specification test.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum Dgp {
    Dyadic,
    Transitive(Transitive),
}

/// Standard error used to studentize a specification statistic.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum TestSe {
    /// Plug-in conditional variance.
    Analytic,
    /// Parametric bootstrap from the full-sample fit.
    Bootstrap { draws: usize, refit: bool },
    /// Bootstrap of the jackknifed statistic itself: every draw is refit on
    /// the full sample and on each leave-out set.
    JackknifeBootstrap { draws: usize },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TestRow {
    pub rep: usize,
    pub statistic: f64,
    pub statistic_plugin: f64,
    pub se_analytic: f64,
    pub se: f64,
    pub t: f64,
    pub reject: bool,
}

/// Jackknifed transitivity statistic for one replication, studentized by `se`.
pub fn spec_test_rep(design: &SimDesign, rep: usize, dgp: Dgp, kind: StatisticKind, se: TestSe) -> Result<TestRow, String> {
    let raw = match dgp {
        Dgp::Dyadic => generate_design(design, rep).0,
        Dgp::Transitive(alt) => generate_transitive(design, rep, alt).0,
    };
    let family = ModelFamily::Probit;
    let (data, _) = raw.filter_degenerate(family).map_err(|e| e.to_string())?;
    let cfg = config();
    let full = fit_full(&data, family, &cfg).map_err(|e| e.to_string())?;
    let part = build_partition(data.n_nodes(), 1).map_err(|e| e.to_string())?;
    let seed = derive_seed(design.seed, &[tag::BOOTSTRAP, design.key(), rep as u64]);
    let moment = kind.moment::<f64>();
    let boot = match se {
        TestSe::Analytic => None,
        TestSe::Bootstrap { draws, refit } => {
            let b = bootstrap_statistic_se(&full, &data, moment.as_ref(), draws, seed, 1, refit.then_some(&cfg))
                .map_err(|e| e.to_string())?;
            Some(b.se)
        }
        TestSe::JackknifeBootstrap { draws } => {
            let b = bootstrap_jackknife_se(&full, &data, moment.as_ref(), &part, draws, seed, 1, &cfg)
                .map_err(|e| e.to_string())?;
            Some(b.se)
        }
    };
    let est = leave_out_fits(&data, family, &cfg, full, &part, 1);
    let res = transitivity_statistic(&est, &data, kind, 1).map_err(|e| e.to_string())?;
    let se = boot.unwrap_or(res.se);
    if !(se > 0.0) {
        return Err("statistic has zero standard error".into());
    }
    let t = res.delta_jackknife / se;
    Ok(TestRow {
        rep,
        statistic: res.delta_jackknife,
        statistic_plugin: res.delta_plugin,
        se_analytic: res.se,
        se,
        t,
        reject: t.abs() > Z_975,
    })
}

pub fn run_spec_test(
    design: &SimDesign,
    dgp: Dgp,
    kind: StatisticKind,
    se: TestSe,
    jobs: usize,
) -> Vec<Result<TestRow, String>> {
    par_map(jobs, design.n_reps, |rep| spec_test_rep(design, rep, dgp, kind, se))
}

/// Share of successful rows satisfying `f`, with the success count.
pub fn rate<R>(rows: &[Result<R, String>], f: impl Fn(&R) -> bool) -> (f64, usize) {
    let ok: Vec<&R> = rows.iter().filter_map(|r| r.as_ref().ok()).collect();
    let hits = ok.iter().filter(|r| f(r)).count();
    (if ok.is_empty() { f64::NAN } else { hits as f64 / ok.len() as f64 }, ok.len())
}
