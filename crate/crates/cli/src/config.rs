//! Run configuration: command-line flags over a TOML file over defaults,
//! with the source of every value recorded.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use clap::Args;
use serde::{Deserialize, Serialize};

use crate::error::CliError;

/// Where a resolved value came from.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Source {
    Flag,
    File,
    Default,
}

macro_rules! options {
    (
        valued { $( $(#[$vm:meta])* $v:ident : $vt:ty = $vd:expr, )* }
        optional { $( $(#[$om:meta])* $o:ident : $ot:ty, )* }
    ) => {
        /// Flags shared by every subcommand; also the schema of config files.
        #[derive(Args, Serialize, Deserialize, Clone, Debug, Default, PartialEq)]
        #[serde(deny_unknown_fields)]
        pub struct Options {
            /// TOML config file (or a previous manifest.json) supplying defaults for these flags
            #[arg(long, value_name = "PATH")]
            #[serde(skip)]
            pub config: Option<PathBuf>,
            $( $(#[$vm])* #[serde(default)] pub $v: Option<$vt>, )*
            $( $(#[$om])* #[serde(default)] pub $o: Option<$ot>, )*
        }

        /// Fully resolved configuration of one run.
        #[derive(Serialize, Deserialize, Clone, Debug, PartialEq)]
        #[serde(deny_unknown_fields)]
        pub struct RunConfig {
            pub command: String,
            $( pub $v: $vt, )*
            $( pub $o: Option<$ot>, )*
        }

        impl RunConfig {
            /// Layer `flags` over `file` over the defaults.
            pub fn resolve(command: &str, flags: &Options, file: &Options) -> (RunConfig, BTreeMap<String, Source>) {
                let mut prov = BTreeMap::new();
                let cfg = RunConfig {
                    command: command.to_string(),
                    $( $v: {
                        let (val, src) = match (&flags.$v, &file.$v) {
                            (Some(x), _) => (x.clone(), Source::Flag),
                            (None, Some(x)) => (x.clone(), Source::File),
                            (None, None) => ($vd, Source::Default),
                        };
                        prov.insert(stringify!($v).to_string(), src);
                        val
                    }, )*
                    $( $o: {
                        let (val, src) = match (&flags.$o, &file.$o) {
                            (Some(x), _) => (Some(x.clone()), Source::Flag),
                            (None, Some(x)) => (Some(x.clone()), Source::File),
                            (None, None) => (None, Source::Default),
                        };
                        prov.insert(stringify!($o).to_string(), src);
                        val
                    }, )*
                };
                (cfg, prov)
            }
        }
    };
}

options! {
    valued {
        /// Output directory
        #[arg(long, value_name = "DIR")]
        out: PathBuf = PathBuf::from("dyadnet-out"),
        /// Seed for every random stream
        #[arg(long)]
        seed: u64 = 1,
        /// Worker threads (results do not depend on it)
        #[arg(long)]
        jobs: usize = 1,
        /// error, warn, info, debug or trace
        #[arg(long)]
        log_level: String = "warn".into(),
        /// probit, logit, gaussian-nls or poisson
        #[arg(long)]
        family: String = "probit".into(),
        #[arg(long)]
        sender_col: String = "sender_id".into(),
        #[arg(long)]
        receiver_col: String = "receiver_id".into(),
        #[arg(long)]
        outcome_col: String = "outcome".into(),
        /// Comma-separated covariate columns; empty uses every other column
        #[arg(long)]
        covariate_cols: String = String::new(),
        /// Drop nodes whose outcomes are all zero (or all one) before fitting
        #[arg(long, num_args = 0..=1, default_missing_value = "true")]
        filter_degenerate: bool = true,
        /// Newton iteration cap
        #[arg(long)]
        max_iter: usize = 200,
        /// Score max-norm tolerance
        #[arg(long)]
        tol: f64 = 1e-9,
        /// Weight of the fixed-effect normalization penalty
        #[arg(long)]
        penalty_b: f64 = 1.0,
        /// gamma or main-text projection for the partialled score
        #[arg(long)]
        xi_variant: String = "gamma".into(),
        /// plain, weighted, split or double
        #[arg(long)]
        variant: String = "plain".into(),
        /// Leave-out block size; must divide N-1
        #[arg(long)]
        leave_l: usize = 1,
        /// Average the jackknife over this many random node orderings
        #[arg(long)]
        relabels: usize = 1,
        /// mean, marginal:VAR, diff:VAR, clustering, transitivity, triangles or reciprocity
        #[arg(long)]
        effect: String = "mean".into(),
        /// conditional or population
        #[arg(long)]
        target: String = "conditional".into(),
        /// Parametric bootstrap draws (0 disables; `test` defaults to 200)
        #[arg(long)]
        n_boot: usize = 0,
        /// Re-estimate the model on every bootstrap draw
        #[arg(long, num_args = 0..=1, default_missing_value = "true")]
        bootstrap_refit: bool = false,
        /// Bootstrap the jackknifed value: every draw is refit on the full
        /// sample and each leave-out set (default for `test`)
        #[arg(long, num_args = 0..=1, default_missing_value = "true")]
        bootstrap_jackknife: bool = false,
        /// Allow enumeration of 4-agent patterns on large networks
        #[arg(long, num_args = 0..=1, default_missing_value = "true")]
        allow_large: bool = false,
        /// covariance, triangle-count or reciprocity
        #[arg(long)]
        statistic: String = "covariance".into(),
        /// dense, mid, sqrt or sparse
        #[arg(long)]
        design: String = "dense".into(),
        /// Number of simulated nodes (also used by partition-dump without --input)
        #[arg(long)]
        n: usize = 50,
        #[arg(long)]
        reps: usize = 100,
        /// Comma-separated subset of mle,j,wj,ss,d
        #[arg(long)]
        estimators: String = "mle,j,wj".into(),
        /// shared or independent receiver effects
        #[arg(long)]
        fe_mode: String = "shared".into(),
        /// True coefficient in simulations
        #[arg(long)]
        theta: f64 = 1.0,
    }
    optional {
        /// Edge-list CSV/TSV
        #[arg(long, value_name = "PATH")]
        input: PathBuf,
        /// Custom lower end of the simulated fixed effects
        #[arg(long, allow_hyphen_values = true)]
        fe_lower: f64,
        /// Custom upper end of the simulated fixed effects
        #[arg(long, allow_hyphen_values = true)]
        fe_upper: f64,
    }
}

/// Read a TOML config, or the `config` block of a manifest when the file
/// ends in `.json`. Unknown keys are input errors.
pub fn load_config(path: &Path) -> Result<Options, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::input(format!("cannot read {}: {e}", path.display())))?;
    let is_json = path.extension().is_some_and(|e| e.eq_ignore_ascii_case("json"));
    if is_json {
        let mut v: serde_json::Value =
            serde_json::from_str(&text).map_err(|e| CliError::input(format!("{}: {e}", path.display())))?;
        let mut cfg = v
            .get_mut("config")
            .map(serde_json::Value::take)
            .ok_or_else(|| CliError::input(format!("{}: no \"config\" object", path.display())))?;
        if let Some(obj) = cfg.as_object_mut() {
            obj.remove("command");
        }
        serde_json::from_value(cfg).map_err(|e| CliError::input(format!("{}: {e}", path.display())))
    } else {
        toml::from_str(&text).map_err(|e| CliError::input(format!("{}: {}", path.display(), e.message())))
    }
}

/// Resolve the configuration for `command`, returning it with provenance.
pub fn resolve(command: &str, flags: &Options) -> Result<(RunConfig, BTreeMap<String, Source>), CliError> {
    let file = match &flags.config {
        Some(p) => load_config(p)?,
        None => Options::default(),
    };
    let (mut cfg, prov) = RunConfig::resolve(command, flags, &file);
    if command == "test" && prov.get("n_boot") == Some(&Source::Default) {
        cfg.n_boot = dyadnet::effects::bootstrap::DEFAULT_BOOTSTRAP_DRAWS;
    }
    if command == "test" && prov.get("bootstrap_jackknife") == Some(&Source::Default) {
        cfg.bootstrap_jackknife = true;
    }
    Ok((cfg, prov))
}
