//! Structured Newton against a dense quasi-Newton optimizer, and analytic
//! derivatives against finite differences.

mod common;

use common::oracles::{check_derivatives_against_differences, check_newton_against_bfgs};
use dyadnet::ModelFamily;

#[test]
fn structured_newton_matches_dense_bfgs() {
    check_newton_against_bfgs();
}

#[test]
fn score_and_hessian_match_finite_differences() {
    check_derivatives_against_differences();
}

#[test]
fn eta_derivatives_match_finite_differences() {
    for family in ModelFamily::ALL {
        let ys: &[f64] = match family {
            ModelFamily::Probit | ModelFamily::Logit => &[0.0, 1.0],
            ModelFamily::GaussianNls => &[-1.3, 0.2, 2.5],
            ModelFamily::PoissonQmle => &[0.0, 1.0, 4.0],
        };
        for &y in ys {
            for i in -30..=30 {
                let eta = i as f64 * 0.2;
                let d = family.eta_derivs(y, eta);
                let h = 1e-5;
                let v = |e: f64| family.value(y, e);
                let d1 = |e: f64| family.eta_derivs(y, e).d1;
                let fd1 = (v(eta + h) - v(eta - h)) / (2.0 * h);
                let fd2 = (d1(eta + h) - d1(eta - h)) / (2.0 * h);
                assert!((d.d1 - fd1).abs() <= 1e-6 * d.d1.abs().max(1.0), "{family} y={y} eta={eta}: d1");
                assert!((d.d2 - fd2).abs() <= 1e-6 * d.d2.abs().max(1.0), "{family} y={y} eta={eta}: d2");
            }
        }
    }
}
