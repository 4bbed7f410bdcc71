//! Brute-force references shared by the oracle tests.

use dyadnet::effects::moments::EvalContext;
use dyadnet::effects::variance::population_variance_at;
use dyadnet::effects::ExpectedTriangles;
use dyadnet::inference::{compute_partialled_score, sandwich_variance, w_hat_from_partialled};
use dyadnet::jackknife::combine;
use dyadnet::partition::{build_partition, EdgeMask, LeaveOutPartition};
use dyadnet::{
    fit_full, penalized_derivatives, penalized_objective, Error, Fit, FitConfig, ModelFamily, Network, ParameterSet, XiVariant,
};
use nalgebra::{DMatrix, DVector};

use super::clean_design;

pub fn objective(data: &Network, family: ModelFamily, theta: &[f64]) -> f64 {
    let n = data.n_nodes();
    let p = ParameterSet::from_slice(theta, n, data.dim_beta());
    penalized_objective(data, family, &EdgeMask::full(n), (n - 1) as f64, 1.0, &p)
}

pub fn fd_gradient(f: &impl Fn(&[f64]) -> f64, theta: &[f64]) -> Vec<f64> {
    (0..theta.len())
        .map(|a| {
            let h = 1e-5 * theta[a].abs().max(1.0);
            let mut up = theta.to_vec();
            let mut dn = theta.to_vec();
            up[a] += h;
            dn[a] -= h;
            (f(&up) - f(&dn)) / (2.0 * h)
        })
        .collect()
}

/// BFGS on `−f` with finite-difference gradients and Armijo backtracking.
pub fn bfgs_maximize(f: impl Fn(&[f64]) -> f64, start: Vec<f64>) -> Vec<f64> {
    let dim = start.len();
    let neg = |t: &[f64]| -f(t);
    let mut x = DVector::from_vec(start);
    let mut g = DVector::from_vec(fd_gradient(&neg, x.as_slice()));
    let mut hinv = DMatrix::<f64>::identity(dim, dim);
    for _ in 0..5000 {
        if g.amax() < 1e-10 {
            break;
        }
        let d = -(&hinv * &g);
        let f0 = neg(x.as_slice());
        let slope = g.dot(&d);
        let mut t = 1.0;
        let mut next = &x + &d * t;
        while neg(next.as_slice()) > f0 + 1e-4 * t * slope && t > 1e-12 {
            t *= 0.5;
            next = &x + &d * t;
        }
        let g_next = DVector::from_vec(fd_gradient(&neg, next.as_slice()));
        let s = &next - &x;
        let y = &g_next - &g;
        let sy = s.dot(&y);
        if sy > 1e-14 {
            let rho = 1.0 / sy;
            let i = DMatrix::<f64>::identity(dim, dim);
            let left = &i - &s * y.transpose() * rho;
            let right = &i - &y * s.transpose() * rho;
            hinv = &left * &hinv * &right + &s * s.transpose() * rho;
        }
        if s.amax() < 1e-15 {
            break;
        }
        x = next;
        g = g_next;
    }
    x.as_slice().to_vec()
}

pub fn valid_blocks(n: usize) -> impl Iterator<Item = usize> {
    (1..n).filter(move |l| (n - 1) % l == 0)
}

/// Every off-diagonal pair in exactly one set; every node sends and
/// receives exactly `l` pairs in each set.
pub fn check_conditions(p: &LeaveOutPartition, n: usize, l: usize) {
    let mut hits = vec![0usize; n * n];
    for set in p.sets() {
        let mut out = vec![0usize; n];
        let mut inn = vec![0usize; n];
        for &(i, j) in set {
            assert_ne!(i, j);
            hits[i * n + j] += 1;
            out[i] += 1;
            inn[j] += 1;
        }
        assert!(out.iter().chain(&inn).all(|&c| c == l), "N={n} l={l}: row/column counts {out:?} {inn:?}");
    }
    for i in 0..n {
        for j in 0..n {
            assert_eq!(hits[i * n + j], usize::from(i != j), "N={n} l={l}: pair ({i},{j})");
        }
    }
}

/// `J[A_i]` with leave-out means over the pairs each set keeps.
pub fn jackknifed_node_means(a: &[f64], n: usize, l: usize) -> Vec<f64> {
    let p = build_partition(n, l).unwrap();
    let masks: Vec<EdgeMask> = (0..p.n_sets()).map(|k| p.edge_mask(k).unwrap()).collect();
    (0..n)
        .map(|i| {
            let full = (0..n).filter(|&s| s != i).map(|s| a[i * n + s]).sum::<f64>() / (n - 1) as f64;
            let loo: Vec<f64> = masks
                .iter()
                .map(|m| {
                    (0..n).filter(|&s| s != i && m.included(i, s)).map(|s| a[i * n + s]).sum::<f64>()
                        / (n - 1 - l) as f64
                })
                .collect();
            combine(full, &loo, n, l)
        })
        .collect()
}

/// `Ξ_ij` by the quadruple sum over observations with an independent
/// dense inverse of the fixed-effect block.
pub fn xi_quadruple_sum(fit: &Fit, data: &Network, variant: XiVariant, i: usize, j: usize) -> Vec<f64> {
    let n = data.n_nodes();
    let k = data.dim_beta();
    let family = fit.family;
    let dense = fit.hessian.to_dense();
    let hpp = DMatrix::from_fn(2 * n, 2 * n, |a, b| dense[(k + a, k + b)]);
    let inv = hpp.try_inverse().expect("fixed-effect block invertible");
    let aa = |i: usize, s: usize| inv[(i, s)];
    let ag = |i: usize, t: usize| inv[(i, n + t)];
    let ga = |j: usize, s: usize| inv[(n + j, s)];
    let gg = |j: usize, t: usize| inv[(n + j, n + t)];
    let q = |s: usize, t: usize| -family.eta_derivs(data.y(s, t), fit.params.eta(data.x(s, t), s, t)).d2;
    (0..k)
        .map(|r| {
            let mut sum = 0.0;
            for s in 0..n {
                for t in (0..n).filter(|&t| t != s) {
                    let gamma = match variant {
                        XiVariant::Gamma => aa(i, s) + ga(j, s) + ag(i, t) + gg(j, t),
                        XiVariant::MainText => aa(i, s) + ga(j, t) + ag(i, t) + gg(s, t),
                    };
                    sum += gamma * q(s, t) * data.x(s, t)[r];
                }
            }
            match variant {
                XiVariant::Gamma => sum / (n - 1) as f64,
                XiVariant::MainText => sum / n as f64,
            }
        })
        .collect()
}

/// Structured Newton against BFGS: 20 instances per family at N in {6, 8, 10}.
pub fn check_newton_against_bfgs() {
    for family in ModelFamily::ALL {
        for n in [6, 8, 10] {
            let mut seed = 1000 * n as u64;
            for _ in 0..20 {
                // Redraw until the maximizer is finite (no separation).
                let (data, fit, used) = loop {
                    let (data, _, used) = clean_design(n, family, seed, 0.4);
                    seed = used + 1;
                    if let Ok(fit) = fit_full(&data, family, &FitConfig::default()) {
                        let big = fit.params.to_vec().iter().fold(0.0_f64, |m, v| m.max(v.abs()));
                        if big < 6.0 && fit.diagnostics.clamp_events == 0 {
                            break (data, fit, used);
                        }
                    }
                };
                assert!(fit.diagnostics.inactive_alpha.is_empty() && fit.diagnostics.inactive_gamma.is_empty());
                let newton = fit.params.to_vec();
                let oracle = bfgs_maximize(|t| objective(&data, family, t), vec![0.0; newton.len()]);
                for (a, (u, v)) in newton.iter().zip(&oracle).enumerate() {
                    assert!(
                        (u - v).abs() < 1e-6,
                        "{family} N={n} seed={used} parameter {a}: newton {u} vs bfgs {v}"
                    );
                }
            }
        }
    }
}

/// Score and Hessian against central differences, relative 1e-6.
pub fn check_derivatives_against_differences() {
    for family in ModelFamily::ALL {
        for (n, seed) in [(6, 3), (8, 4), (10, 5)] {
            let (data, truth, _) = clean_design(n, family, seed, 0.4);
            let k = data.dim_beta();
            let mut theta = truth.to_vec();
            // Move off the normalization so the penalty contributes.
            theta[k] += 0.3;
            let p = ParameterSet::from_slice(&theta, n, k);
            let mask = EdgeMask::full(n);
            let c = (n - 1) as f64;
            let (obj, score, blocks) = penalized_derivatives(&data, family, &mask, c, 1.0, &p);
            assert!((obj - objective(&data, family, &theta)).abs() < 1e-12);
            let fd = fd_gradient(&|t: &[f64]| objective(&data, family, t), &theta);
            for (a, (s, f)) in score.iter().zip(&fd).enumerate() {
                assert!((s - f).abs() <= 1e-6 * s.abs().max(1.0), "{family} score {a}: {s} vs {f}");
            }
            let dense = blocks.to_dense();
            for b in 0..theta.len() {
                let h = 1e-5 * theta[b].abs().max(1.0);
                let mut up = theta.clone();
                let mut dn = theta.clone();
                up[b] += h;
                dn[b] -= h;
                let su = penalized_derivatives(&data, family, &mask, c, 1.0, &ParameterSet::from_slice(&up, n, k)).1;
                let sd = penalized_derivatives(&data, family, &mask, c, 1.0, &ParameterSet::from_slice(&dn, n, k)).1;
                for a in 0..theta.len() {
                    let fd = -(su[a] - sd[a]) / (2.0 * h);
                    let an = dense[(a, b)];
                    assert!((an - fd).abs() <= 1e-6 * an.abs().max(1.0), "{family} H[{a},{b}]: {an} vs {fd}");
                }
            }
        }
    }
}

/// Collapsed Ξ against the quadruple sum at N=10, both variants, 1e-10.
pub fn check_xi_against_quadruple_sum() {
    let n = 10;
    for family in ModelFamily::ALL {
        let (data, _, _) = clean_design(n, family, 90, 0.4);
        let fit = fit_full(&data, family, &FitConfig::default()).unwrap();
        for variant in [XiVariant::Gamma, XiVariant::MainText] {
            let ps = compute_partialled_score(&fit, &data, variant).unwrap();
            for i in 0..n {
                for j in (0..n).filter(|&j| j != i) {
                    let oracle = xi_quadruple_sum(&fit, &data, variant, i, j);
                    for (r, want) in oracle.iter().enumerate() {
                        let got = ps.xi(i, j)[r];
                        assert!((got - want).abs() < 1e-10, "{family} {variant:?} Xi[{i},{j},{r}]: {got} vs {want}");
                    }
                }
            }
        }
    }
}

/// Partialled scores sum to ~0 (max-norm below 1e-6 N) and both Ŵ routes agree.
pub fn check_partialled_scores() {
    for family in ModelFamily::ALL {
        for (n, seed) in [(10, 5), (20, 6), (30, 7)] {
            let (data, _, _) = clean_design(n, family, seed, 0.4);
            let fit = fit_full(&data, family, &FitConfig::default()).unwrap();
            let ps = compute_partialled_score(&fit, &data, XiVariant::Gamma).unwrap();
            let total = ps.d_total();
            let worst = total.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
            assert!(worst < 1e-6 * n as f64, "{family} N={n}: sum D = {total:?}");
            let w1 = w_hat_from_partialled(&fit, &data, &ps);
            let w2 = fit.w_hat();
            assert!(w1.max_abs_diff(&w2) < 1e-9, "{family} N={n}: W paths differ by {:e}", w1.max_abs_diff(&w2));
            let v = sandwich_variance(&fit, &ps, &data).unwrap();
            assert!(v.se.iter().all(|&s| s > 0.0 && s.is_finite()));
            assert_eq!(v.clustering, "dyad");
        }
    }
}

/// Conditions (i)-(ii) for every N in 4..=60 and every valid l.
pub fn check_partitions_exhaustively() {
    for n in 4..=60 {
        for l in valid_blocks(n) {
            let p = build_partition(n, l).unwrap();
            assert_eq!(p.n_sets(), (n - 1) / l);
            assert!(p.validate().is_valid());
            check_conditions(&p, n, l);
            // Each set is a union of whole diagonals j − i ≡ d (mod N).
            let sets = p.n_sets();
            for (k, set) in p.sets().iter().enumerate() {
                for &(i, j) in set {
                    let d = (j + n - i) % n;
                    assert_eq!((d - 1) % sets, k);
                }
                let mask = p.edge_mask(k).unwrap();
                assert_eq!(mask.n_excluded(), n * l);
            }
        }
        let bad = (2..n).find(|l| (n - 1) % l != 0);
        if let Some(l) = bad {
            assert!(matches!(build_partition(n, l), Err(Error::InvalidBlockSize { .. })));
        }
    }
}

/// Node projections of the expected-triangle kernel against enumeration at N=8, 1e-12.
pub fn check_node_projections() {
    let n = 8;
    let (data, _, _) = clean_design(n, ModelFamily::Probit, 21, 0.5);
    let fit = fit_full(&data, ModelFamily::Probit, &FitConfig::default()).unwrap();
    let ctx = EvalContext::new(&data, ModelFamily::Probit, &fit.params);
    let pop = population_variance_at(&ExpectedTriangles::default(), &ctx, 2);
    let mu = |i: usize, j: usize| ModelFamily::Probit.mean(fit.params.eta(data.x(i, j), i, j));
    let mbar = |[a, b, c]: [usize; 3]| mu(a, b) * mu(a, c) * mu(c, b);
    let all: Vec<[usize; 3]> = triples(n).collect();
    assert_eq!(all.len(), n * (n - 1) * (n - 2));
    let mu_hat = all.iter().map(|&t| mbar(t)).sum::<f64>() / all.len() as f64;
    assert!((pop.mu_hat - mu_hat).abs() < 1e-14);
    let mut v = 0.0;
    for i in 0..n {
        let containing: Vec<f64> = all.iter().filter(|t| t.contains(&i)).map(|&t| mbar(t) - mu_hat).collect();
        // (N−1)!/(N−p)! = 42 instances per placeholder position.
        assert_eq!(containing.len(), 3 * 42);
        let oracle = containing.iter().sum::<f64>() / 42.0;
        assert!((pop.mu_tilde[i] - oracle).abs() < 1e-12, "node {i}");
        v += oracle * oracle;
    }
    v /= n as f64;
    assert!((pop.variance - v).abs() < 1e-12);
    assert!((pop.se - (v / n as f64).sqrt()).abs() < 1e-12);
}

/// Ordered triples of distinct nodes.
pub fn triples(n: usize) -> impl Iterator<Item = [usize; 3]> {
    (0..n).flat_map(move |a| {
        (0..n).flat_map(move |b| (0..n).filter(move |&c| c != a && c != b && a != b).map(move |c| [a, b, c]))
    })
}
