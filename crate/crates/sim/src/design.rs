//! The probit simulation designs: `Y_ij = 1{θ X_i X_j + α_i + γ_j > ε_ij}`.

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use dyadnet::rng::{derive_seed, stream, tag};
use dyadnet::{ModelFamily, Network, ParameterSet};

use crate::runner::Estimator;

/// The four standard fixed-effect ranges.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeSetting {
    /// `(−log log N, log log N)`.
    Dense,
    /// `(−log log N, 0)`.
    Mid,
    /// `(−(log N)^½, 0)`.
    Sqrt,
    /// `(−log N, 0)`.
    Sparse,
}

impl FeSetting {
    pub const ALL: [FeSetting; 4] = [FeSetting::Dense, FeSetting::Mid, FeSetting::Sqrt, FeSetting::Sparse];

    pub fn range(self, n: usize) -> (f64, f64) {
        let ln = (n as f64).ln();
        match self {
            FeSetting::Dense => (-ln.ln(), ln.ln()),
            FeSetting::Mid => (-ln.ln(), 0.0),
            FeSetting::Sqrt => (-ln.sqrt(), 0.0),
            FeSetting::Sparse => (-ln, 0.0),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            FeSetting::Dense => "dense",
            FeSetting::Mid => "mid",
            FeSetting::Sqrt => "sqrt",
            FeSetting::Sparse => "sparse",
        }
    }

    pub fn caption(self) -> &'static str {
        match self {
            FeSetting::Dense => "(±log log N)",
            FeSetting::Mid => "(−log log N, 0)",
            FeSetting::Sqrt => "(−(log N)^1/2, 0)",
            FeSetting::Sparse => "(−log N, 0)",
        }
    }
}

impl std::str::FromStr for FeSetting {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        FeSetting::ALL
            .into_iter()
            .find(|f| f.name() == s.to_ascii_lowercase())
            .ok_or_else(|| format!("unknown design {s:?} (expected dense, mid, sqrt or sparse)"))
    }
}

/// Whether receivers reuse the sender sequence or get a permuted copy.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeMode {
    #[default]
    Shared,
    Independent,
}

impl std::str::FromStr for FeMode {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s.to_ascii_lowercase().as_str() {
            "shared" => Ok(FeMode::Shared),
            "independent" => Ok(FeMode::Independent),
            other => Err(format!("unknown fe mode {other:?} (expected shared or independent)")),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimDesign {
    pub n_nodes: usize,
    pub theta: f64,
    pub fe_range: (f64, f64),
    pub fe_mode: FeMode,
    pub n_reps: usize,
    pub seed: u64,
    pub estimators: Vec<Estimator>,
    /// Display name, e.g. the setting's caption.
    pub label: String,
}

impl SimDesign {
    pub fn standard(setting: FeSetting, n_nodes: usize, n_reps: usize, seed: u64, estimators: Vec<Estimator>) -> Self {
        Self {
            n_nodes,
            theta: 1.0,
            fe_range: setting.range(n_nodes),
            fe_mode: FeMode::Shared,
            n_reps,
            seed,
            estimators,
            label: setting.caption().into(),
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        let (lo, hi) = self.fe_range;
        if !(lo <= hi) {
            return Err(format!("fixed-effect range ({lo}, {hi}) has lower bound above upper bound"));
        }
        if self.n_reps == 0 {
            return Err("n_reps must be at least 1".into());
        }
        if self.n_nodes < 4 {
            return Err(format!("need at least 4 nodes, got {}", self.n_nodes));
        }
        Ok(())
    }

    /// Identifies the data-generating process (not the estimators) in RNG
    /// stream paths.
    pub fn key(&self) -> u64 {
        derive_seed(
            0,
            &[
                self.n_nodes as u64,
                self.theta.to_bits(),
                self.fe_range.0.to_bits(),
                self.fe_range.1.to_bits(),
                self.fe_mode as u64,
            ],
        )
    }

    /// Sender and receiver effects.
    pub fn fixed_effects(&self, rep: usize) -> (Vec<f64>, Vec<f64>) {
        let n = self.n_nodes;
        let (lo, hi) = self.fe_range;
        let seq: Vec<f64> = (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect();
        let gamma = match self.fe_mode {
            FeMode::Shared => seq.clone(),
            FeMode::Independent => {
                let mut g = seq.clone();
                g.shuffle(&mut stream(self.seed, &[tag::FE_PERMUTATION, self.key(), rep as u64]));
                g
            }
        };
        (seq, gamma)
    }
}

/// `X_i = 1 − 2·1{i odd}` with one-based `i`.
pub fn node_sign(i: usize) -> f64 {
    if (i + 1) % 2 == 1 {
        -1.0
    } else {
        1.0
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Truth {
    pub theta: f64,
    pub alpha: Vec<f64>,
    pub gamma: Vec<f64>,
}

impl Truth {
    pub fn params(&self) -> ParameterSet<f64> {
        ParameterSet {
            beta: vec![self.theta],
            alpha: self.alpha.clone(),
            gamma: self.gamma.clone(),
        }
    }

    /// Truth restricted to the nodes kept in `data`, matched by label.
    pub fn restrict(&self, original: &Network, data: &Network) -> Truth {
        let idx = kept_indices(original, data);
        Truth {
            theta: self.theta,
            alpha: idx.iter().map(|&i| self.alpha[i]).collect(),
            gamma: idx.iter().map(|&i| self.gamma[i]).collect(),
        }
    }
}

/// Position in `original` of each node of `data`.
pub fn kept_indices(original: &Network, data: &Network) -> Vec<usize> {
    data.labels()
        .iter()
        .map(|l| original.labels().iter().position(|m| m == l).expect("label of a kept node"))
        .collect()
}

/// Draw repetition `rep`; outcomes come from the stream keyed on
/// `(seed, design, rep)`, in row-major pair order.
pub fn generate_design(design: &SimDesign, rep: usize) -> (Network, Truth) {
    let (alpha, gamma) = design.fixed_effects(rep);
    let truth = Truth {
        theta: design.theta,
        alpha,
        gamma,
    };
    let mut rng = stream(design.seed, &[tag::DESIGN, design.key(), rep as u64]);
    let p = truth.params();
    let data = Network::from_fn(design.n_nodes, vec!["x".into()], |i, j| {
        let x = vec![node_sign(i) * node_sign(j)];
        (ModelFamily::Probit.simulate(p.eta(&x, i, j), &mut rng), x)
    })
    .expect("at least 4 nodes");
    (data, truth)
}

/// Share of ordered pairs with a link.
pub fn density(data: &Network) -> f64 {
    data.density()
}

/// Number of nodes with at least one incoming or outgoing link.
pub fn connected(data: &Network) -> usize {
    let out = data.out_sums();
    let inn = data.in_sums();
    out.iter().zip(&inn).filter(|(&o, &i)| o + i > 0.0).count()
}
