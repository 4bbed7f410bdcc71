//! Strategic-transitivity alternative: agents keep their idiosyncratic
//! link preferences and repeatedly revise links with an extra payoff for
//! partners they share.

use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use dyadnet::rng::{stream, tag};
use dyadnet::Network;

use crate::design::{generate_design, SimDesign, Truth};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Transitive {
    /// Payoff weight on the centered shared-partner share.
    pub kappa: f64,
    /// Revision rounds after the dyadic start.
    pub rounds: usize,
}

impl Default for Transitive {
    fn default() -> Self {
        Self { kappa: 3.0, rounds: 3 }
    }
}

/// `S_ij = (1/(N−2)) Σ_{k∉{i,j}} Y_ik Y_kj`, row-major, zero diagonal.
pub fn shared_partners(data: &Network) -> Vec<f64> {
    let n = data.n_nodes();
    let mut s = vec![0.0; n * n];
    for (i, j) in data.edges() {
        let c: f64 = (0..n).filter(|&k| k != i && k != j).map(|k| data.y(i, k) * data.y(k, j)).sum();
        s[i * n + j] = c / (n - 2) as f64;
    }
    s
}

/// Start from `Y⁰_ij = 1{θ X_ij + α_i + γ_j > ε_ij}` and apply `rounds`
/// simultaneous revisions `Y_ij = 1{θ X_ij + α_i + γ_j + κ (S_ij − S̄) > ε_ij}`
/// with `S` from the previous round and the same errors throughout.
pub fn generate_transitive(design: &SimDesign, rep: usize, alt: Transitive) -> (Network, Truth) {
    let (template, truth) = generate_design(design, rep);
    let n = design.n_nodes;
    let p = truth.params();
    let mut rng = stream(design.seed, &[tag::ALTERNATIVE, design.key(), rep as u64]);
    let mut eps = vec![0.0; n * n];
    let mut eta = vec![0.0; n * n];
    for (i, j) in template.edges() {
        eps[i * n + j] = StandardNormal.sample(&mut rng);
        eta[i * n + j] = p.eta(template.x(i, j), i, j);
    }
    let mut data = template.with_outcomes(|i, j| f64::from(u8::from(eta[i * n + j] > eps[i * n + j])));
    for _ in 0..alt.rounds {
        let s = shared_partners(&data);
        let mean = s.iter().sum::<f64>() / (n * (n - 1)) as f64;
        data = data.with_outcomes(|i, j| {
            let at = i * n + j;
            f64::from(u8::from(eta[at] + alt.kappa * (s[at] - mean) > eps[at]))
        });
    }
    (data, truth)
}
