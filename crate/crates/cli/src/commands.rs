//! The subcommands.

use std::path::Path;
use std::str::FromStr;

use serde_json::{json, Value};

use dyadnet::data::load_edge_list;
use dyadnet::effects::{
    average_effect, bootstrap_jackknife_se, bootstrap_statistic_se, transitivity_statistic, DiscreteDifference, EffectOptions, EffectResult,
    ExpectedTriangles, FittedMean, MarginalEffect, Moment, Reciprocity, StatisticKind, Target, TransitivityCovariance,
    TriangleCount,
};
use dyadnet::inference::{compute_partialled_score, sandwich_variance, t_statistics};
use dyadnet::jackknife::{jackknife_double, jackknife_split_sample, jackknife_with_relabeling, leave_out_fits};
use dyadnet::partition::LeaveOutPartition;
use dyadnet::{build_partition, fit_full, EdgeSchema, Fit, FitConfig, ModelFamily, Network, Variance, Variant, XiVariant};
use dyadnet_sim::runner::write_rep_csv;
use dyadnet_sim::{emit_table, run_monte_carlo, Estimator, FeMode, FeSetting, Layout, SimDesign};

use crate::config::RunConfig;
use crate::error::CliError;
use crate::output::{num, write_csv, write_json, RESULTS, SUMMARY};

fn parse<T: FromStr<Err = String>>(key: &str, value: &str) -> Result<T, CliError> {
    value.parse().map_err(|e: String| CliError::input(format!("--{}: {e}", key.replace('_', "-"))))
}

fn fit_config(cfg: &RunConfig) -> FitConfig<f64> {
    FitConfig {
        max_iterations: cfg.max_iter,
        gradient_tolerance: cfg.tol,
        penalty_b: cfg.penalty_b,
        ..FitConfig::default()
    }
}

/// Parse every enumerated setting so bad values fail before any work.
pub fn validate(cfg: &RunConfig) -> Result<(), CliError> {
    parse::<ModelFamily>("family", &cfg.family)?;
    parse::<XiVariant>("xi_variant", &cfg.xi_variant)?;
    parse::<Variant>("variant", &cfg.variant)?;
    parse::<Target>("target", &cfg.target)?;
    parse::<StatisticKind>("statistic", &cfg.statistic)?;
    parse::<FeSetting>("design", &cfg.design)?;
    parse::<FeMode>("fe_mode", &cfg.fe_mode)?;
    Estimator::parse_list(&cfg.estimators).map_err(|e| CliError::input(format!("--estimators: {e}")))?;
    if !["error", "warn", "info", "debug", "trace", "off"].contains(&cfg.log_level.as_str()) {
        return Err(CliError::input(format!("--log-level: unknown level {:?}", cfg.log_level)));
    }
    if cfg.jobs == 0 {
        return Err(CliError::input("--jobs must be at least 1"));
    }
    if cfg.leave_l == 0 {
        return Err(CliError::input("--leave-l must be at least 1"));
    }
    Ok(())
}

struct Loaded {
    data: Network,
    family: ModelFamily,
    dropped: Vec<String>,
}

fn load(cfg: &RunConfig) -> Result<Loaded, CliError> {
    let path = cfg.input.as_deref().ok_or_else(|| CliError::input("--input is required"))?;
    let family: ModelFamily = parse("family", &cfg.family)?;
    let schema = EdgeSchema {
        sender: cfg.sender_col.clone(),
        receiver: cfg.receiver_col.clone(),
        outcome: cfg.outcome_col.clone(),
        covariates: cfg
            .covariate_cols
            .split(',')
            .map(str::trim)
            .filter(|s| !s.is_empty())
            .map(String::from)
            .collect(),
        delimiter: None,
    };
    let raw: Network = load_edge_list(path, &schema)?;
    raw.check_family(family)?;
    let (data, dropped) = if cfg.filter_degenerate {
        let (d, report) = raw.filter_degenerate(family)?;
        if !report.is_empty() {
            log::warn!("dropped {} degenerate nodes: {:?}", report.dropped_nodes.len(), report.dropped_nodes);
        }
        (d, report.dropped_nodes)
    } else {
        (raw, Vec::new())
    };
    log::info!("{} nodes, {} covariates", data.n_nodes(), data.dim_beta());
    Ok(Loaded { data, family, dropped })
}

fn converged_fit(data: &Network, family: ModelFamily, fc: &FitConfig<f64>) -> Result<Fit, CliError> {
    let fit = fit_full(data, family, fc)?;
    if !fit.converged {
        return Err(CliError::numerical(format!(
            "full-sample fit did not converge after {} iterations (score max-norm {:e})",
            fit.iterations, fit.score_norm
        )));
    }
    Ok(fit)
}

fn sandwich(fit: &Fit, data: &Network, cfg: &RunConfig) -> Result<Variance, CliError> {
    let xi: XiVariant = parse("xi_variant", &cfg.xi_variant)?;
    let ps = compute_partialled_score(fit, data, xi)?;
    Ok(sandwich_variance(fit, &ps, data)?)
}

fn inference_block(var: &Variance, beta: &[f64]) -> Value {
    let ts = t_statistics(beta, &vec![0.0; beta.len()], var);
    json!({
        "beta": beta,
        "se": var.se,
        "t": ts.iter().map(|t| t.t).collect::<Vec<_>>(),
        "p": ts.iter().map(|t| t.p).collect::<Vec<_>>(),
        "W": var.w_hat.to_rows(),
        "Omega": var.omega_hat.to_rows(),
        "V": var.v_hat.to_rows(),
        "clustering": var.clustering,
        "w_eigenvalues": var.w_eigenvalues,
        "w_path_gap": var.w_path_gap,
    })
}

pub fn estimate(cfg: &RunConfig, out: &Path) -> Result<(), CliError> {
    let Loaded { data, family, dropped } = load(cfg)?;
    let fit = converged_fit(&data, family, &fit_config(cfg))?;
    let var = sandwich(&fit, &data, cfg)?;
    let results = json!({
        "command": "estimate",
        "family": family.name(),
        "n_nodes": data.n_nodes(),
        "dropped_nodes": dropped,
        "covariates": data.covariate_names(),
        "inference": inference_block(&var, &fit.params.beta),
        "labels": data.labels(),
        "alpha": fit.params.alpha,
        "gamma": fit.params.gamma,
        "diagnostics": {
            "converged": fit.converged,
            "iterations": fit.iterations,
            "score_norm": fit.score_norm,
            "objective": fit.objective,
            "normalization_gap": fit.normalization_gap(),
            "solver": fit.diagnostics,
        },
    });
    write_json(&out.join(RESULTS), &results)?;
    let ts = t_statistics(&fit.params.beta, &vec![0.0; data.dim_beta()], &var);
    let rows: Vec<Vec<String>> = data
        .covariate_names()
        .iter()
        .zip(&ts)
        .map(|(name, t)| vec![name.clone(), num(t.estimate), num(t.se), num(t.t), num(t.p)])
        .collect();
    write_csv(&out.join(SUMMARY), &["covariate", "estimate", "se", "t", "p"], &rows)
}

pub fn jackknife(cfg: &RunConfig, out: &Path) -> Result<(), CliError> {
    let Loaded { data, family, dropped } = load(cfg)?;
    let fc = fit_config(cfg);
    let variant: Variant = parse("variant", &cfg.variant)?;
    let full = converged_fit(&data, family, &fc)?;
    let var = sandwich(&full, &data, cfg)?;
    let weighted = variant == Variant::Weighted;
    let res = match variant {
        Variant::Plain | Variant::LeaveL | Variant::Weighted if cfg.relabels > 1 => {
            jackknife_with_relabeling(&data, family, &fc, cfg.leave_l, weighted, cfg.relabels, cfg.seed, cfg.jobs)?
        }
        Variant::Plain | Variant::LeaveL | Variant::Weighted => {
            let part = build_partition(data.n_nodes(), cfg.leave_l)?;
            let est = leave_out_fits(&data, family, &fc, full.clone(), &part, cfg.jobs);
            if weighted {
                est.weighted()?
            } else {
                est.plain()
            }
        }
        Variant::SplitSample => jackknife_split_sample(&data, family, &fc, &full, cfg.seed, cfg.jobs)?,
        Variant::DoubleAgent => jackknife_double(&data, family, &fc, &full, cfg.jobs)?,
    };
    for note in &res.notes {
        log::warn!("{note}");
    }
    let beta_j = &res.beta_corrected;
    let bias_over_se: Vec<f64> = full.params.beta.iter().zip(beta_j).zip(&var.se).map(|((b, j), s)| (b - j) / s).collect();
    let results = json!({
        "command": "jackknife",
        "family": family.name(),
        "variant": res.variant,
        "l": res.l,
        "n_nodes": data.n_nodes(),
        "dropped_nodes": dropped,
        "covariates": data.covariate_names(),
        "beta_mle": full.params.beta,
        "beta_jackknife": beta_j,
        "bias_over_se": bias_over_se,
        "reliable": res.reliable,
        "inference": inference_block(&var, beta_j),
        "detail": res,
    });
    write_json(&out.join(RESULTS), &results)?;
    let rows: Vec<Vec<String>> = data
        .covariate_names()
        .iter()
        .enumerate()
        .map(|(r, name)| vec![name.clone(), num(full.params.beta[r]), num(beta_j[r]), num(var.se[r]), num(bias_over_se[r])])
        .collect();
    write_csv(&out.join(SUMMARY), &["covariate", "estimate", "jackknife", "se", "bias_over_se"], &rows)
}

fn covariate_index(data: &Network, spec: &str) -> Result<usize, CliError> {
    let names = data.covariate_names();
    names
        .iter()
        .position(|n| n == spec)
        .or_else(|| spec.parse::<usize>().ok().filter(|&i| i < names.len()))
        .ok_or_else(|| CliError::input(format!("--effect: unknown covariate {spec:?} (have {names:?})")))
}

fn parse_effect(spec: &str, data: &Network) -> Result<Box<dyn Moment<f64>>, CliError> {
    let (kind, arg) = spec.split_once(':').unwrap_or((spec, ""));
    Ok(match (kind.to_ascii_lowercase().as_str(), arg) {
        ("mean", "") => Box::new(FittedMean::default()),
        ("marginal", v) if !v.is_empty() => Box::new(MarginalEffect::new(covariate_index(data, v)?)),
        ("diff", v) if !v.is_empty() => Box::new(DiscreteDifference::new(covariate_index(data, v)?)),
        ("clustering", "") => Box::new(ExpectedTriangles::default()),
        ("transitivity", "") => Box::new(TransitivityCovariance::default()),
        ("triangles", "") => Box::new(TriangleCount::default()),
        ("reciprocity", "") => Box::new(Reciprocity::default()),
        _ => {
            return Err(CliError::input(format!(
                "--effect: unknown effect {spec:?} (expected mean, marginal:VAR, diff:VAR, clustering, transitivity, triangles or reciprocity)"
            )))
        }
    })
}

#[allow(clippy::too_many_arguments)]
fn effect_outputs(
    cfg: &RunConfig,
    out: &Path,
    command: &str,
    data: &Network,
    full: &Fit,
    part: &LeaveOutPartition,
    moment: &dyn Moment<f64>,
    res: &EffectResult<f64>,
) -> Result<(), CliError> {
    let fc = fit_config(cfg);
    let boot = match (cfg.n_boot, cfg.bootstrap_jackknife) {
        (0, _) => None,
        (draws, true) => Some(bootstrap_jackknife_se(full, data, moment, part, draws, cfg.seed, cfg.jobs, &fc)?),
        (draws, false) => Some(bootstrap_statistic_se(full, data, moment, draws, cfg.seed, cfg.jobs, cfg.bootstrap_refit.then_some(&fc))?),
    };
    let boot_json = boot.as_ref().map(|b| {
        json!({
            "draws": cfg.n_boot,
            "refit": cfg.bootstrap_refit || cfg.bootstrap_jackknife,
            "jackknife": cfg.bootstrap_jackknife,
            "se": b.se,
            "failed": b.failed,
            "t_plugin": res.delta_plugin / b.se,
            "t_jackknife": res.delta_jackknife / b.se,
        })
    });
    let results = json!({
        "command": command,
        "family": full.family.name(),
        "n_nodes": data.n_nodes(),
        "effect": res,
        "bootstrap": boot_json,
    });
    write_json(&out.join(RESULTS), &results)?;
    let se_boot = boot.as_ref().map(|b| num(b.se)).unwrap_or_default();
    let row = vec![
        res.name.clone(),
        format!("{:?}", res.target).to_lowercase(),
        num(res.delta_plugin),
        num(res.delta_jackknife),
        num(res.se),
        num(res.t_plugin),
        num(res.t_jackknife),
        se_boot,
    ];
    write_csv(
        &out.join(SUMMARY),
        &["name", "target", "plugin", "jackknife", "se", "t_plugin", "t_jackknife", "se_bootstrap"],
        &[row],
    )
}

pub fn effects(cfg: &RunConfig, out: &Path) -> Result<(), CliError> {
    let Loaded { data, family, .. } = load(cfg)?;
    let moment = parse_effect(&cfg.effect, &data)?;
    moment.pattern().check_size(data.n_nodes(), cfg.allow_large)?;
    let fc = fit_config(cfg);
    let full = converged_fit(&data, family, &fc)?;
    let part = build_partition(data.n_nodes(), cfg.leave_l)?;
    let est = leave_out_fits(&data, family, &fc, full, &part, cfg.jobs);
    let opts = EffectOptions {
        target: parse("target", &cfg.target)?,
        jobs: cfg.jobs,
        allow_large: cfg.allow_large,
    };
    let res = average_effect(&est, moment.as_ref(), &data, &opts)?;
    effect_outputs(cfg, out, "effects", &data, &est.full, &part, moment.as_ref(), &res)
}

pub fn test(cfg: &RunConfig, out: &Path) -> Result<(), CliError> {
    let Loaded { data, family, .. } = load(cfg)?;
    let kind: StatisticKind = parse("statistic", &cfg.statistic)?;
    let fc = fit_config(cfg);
    let full = converged_fit(&data, family, &fc)?;
    let part = build_partition(data.n_nodes(), cfg.leave_l)?;
    let est = leave_out_fits(&data, family, &fc, full, &part, cfg.jobs);
    let res = transitivity_statistic(&est, &data, kind, cfg.jobs)?;
    let moment = kind.moment::<f64>();
    effect_outputs(cfg, out, "test", &data, &est.full, &part, moment.as_ref(), &res)
}

pub fn simulate(cfg: &RunConfig, out: &Path) -> Result<(), CliError> {
    let setting: FeSetting = parse("design", &cfg.design)?;
    let estimators = Estimator::parse_list(&cfg.estimators).map_err(CliError::input)?;
    let mut design = SimDesign::standard(setting, cfg.n, cfg.reps, cfg.seed, estimators);
    design.theta = cfg.theta;
    design.fe_mode = parse("fe_mode", &cfg.fe_mode)?;
    if cfg.fe_lower.is_some() || cfg.fe_upper.is_some() {
        let (lo, hi) = design.fe_range;
        design.fe_range = (cfg.fe_lower.unwrap_or(lo), cfg.fe_upper.unwrap_or(hi));
        design.label = format!("({}, {})", design.fe_range.0, design.fe_range.1);
    }
    let (summary, rows) = run_monte_carlo(&design, cfg.jobs).map_err(CliError::input)?;
    write_json(&out.join(RESULTS), &json!({ "command": "simulate", "design": design, "summary": summary }))?;
    let mut f = std::fs::File::create(out.join(SUMMARY))?;
    summary.write_csv(&mut f)?;
    write_rep_csv(&rows, std::fs::File::create(out.join("reps.csv"))?)?;
    let mut text = String::new();
    for (layout, file) in [(Layout::Estimators, "table.csv"), (Layout::Comparison, "table_compare.csv")] {
        let t = emit_table(&summary, layout);
        std::fs::write(out.join(file), &t.csv)?;
        if t.csv.contains('\n') && t.csv.lines().count() > 1 {
            text.push_str(&t.text);
            text.push('\n');
        }
    }
    std::fs::write(out.join("table.txt"), &text)?;
    print!("{text}");
    Ok(())
}

pub fn partition_dump(cfg: &RunConfig, out: &Path) -> Result<(), CliError> {
    let (n, labels) = if cfg.input.is_some() {
        let loaded = load(cfg)?;
        (loaded.data.n_nodes(), Some(loaded.data.labels().to_vec()))
    } else {
        (cfg.n, None)
    };
    let part = build_partition(n, cfg.leave_l)?;
    let report = part.validate();
    let sets: Vec<Vec<[usize; 2]>> = part.sets().iter().map(|s| s.iter().map(|&(i, j)| [i, j]).collect()).collect();
    write_json(
        &out.join(RESULTS),
        &json!({
            "command": "partition-dump",
            "n_nodes": n,
            "l": cfg.leave_l,
            "n_sets": part.n_sets(),
            "valid": report.is_valid(),
            "validation": report,
            "labels": labels,
            "sets": sets,
        }),
    )?;
    let name = |i: usize| labels.as_ref().map(|l| l[i].clone()).unwrap_or_else(|| i.to_string());
    let rows: Vec<Vec<String>> = part
        .sets()
        .iter()
        .enumerate()
        .flat_map(|(k, s)| s.iter().map(move |&(i, j)| (k, i, j)))
        .map(|(k, i, j)| vec![k.to_string(), name(i), name(j)])
        .collect();
    write_csv(&out.join(SUMMARY), &["set", "sender", "receiver"], &rows)
}
