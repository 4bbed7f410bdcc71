#![allow(dead_code)]

pub mod oracles;

use dyadnet::rng::stream;
use dyadnet::{ModelFamily, Network, ParameterSet};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

/// Random design with a continuous and a binary dyad covariate and normal
/// fixed effects of scale `fe_scale`.
pub fn design(n: usize, family: ModelFamily, seed: u64, fe_scale: f64) -> (Network, ParameterSet<f64>) {
    let mut rng = stream(seed, &[7]);
    let beta = vec![0.6, -0.4];
    let mut normal = || -> f64 { StandardNormal.sample(&mut rng) };
    let alpha: Vec<f64> = (0..n).map(|_| fe_scale * normal()).collect();
    let gamma: Vec<f64> = (0..n).map(|_| fe_scale * normal()).collect();
    let zs: Vec<f64> = (0..n).map(|_| normal()).collect();
    let truth = ParameterSet {
        beta: beta.clone(),
        alpha,
        gamma,
    };
    let data = Network::from_fn(n, vec!["dist".into(), "tie".into()], |i, j| {
        let x = vec![(zs[i] - zs[j]).abs() - 1.0, f64::from(u8::from(rng.random::<f64>() < 0.4))];
        let eta = truth.eta(&x, i, j);
        (family.simulate(eta, &mut rng), x)
    })
    .unwrap();
    (data, truth)
}

/// First design from `seed` upward with no degenerate node.
pub fn clean_design(n: usize, family: ModelFamily, seed: u64, fe_scale: f64) -> (Network, ParameterSet<f64>, u64) {
    for s in seed.. {
        let (d, t) = design(n, family, s, fe_scale);
        if matches!(d.filter_degenerate(family), Ok((_, report)) if report.is_empty()) {
            return (d, t, s);
        }
    }
    unreachable!()
}

/// The Monte Carlo probit design: `X_ij = X_i X_j`, `X_i = ±1`,
/// `α_i = γ_i` equally spaced on `[lo, hi]`, probit outcomes.
pub fn probit_design(n: usize, theta: f64, lo: f64, hi: f64, seed: u64) -> (Network, ParameterSet<f64>) {
    let mut rng = stream(seed, &[11]);
    let fe: Vec<f64> = (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect();
    let truth = ParameterSet {
        beta: vec![theta],
        alpha: fe.clone(),
        gamma: fe,
    };
    let sign = |i: usize| if (i + 1) % 2 == 1 { -1.0 } else { 1.0 };
    let data = Network::from_fn(n, vec!["x".into()], |i, j| {
        let x = vec![sign(i) * sign(j)];
        (ModelFamily::Probit.simulate(truth.eta(&x, i, j), &mut rng), x)
    })
    .unwrap();
    (data, truth)
}

pub fn assert_close(a: f64, b: f64, tol: f64, what: &str) {
    assert!((a - b).abs() <= tol, "{what}: {a} vs {b} (|diff| {:e} > {tol:e})", (a - b).abs());
}
