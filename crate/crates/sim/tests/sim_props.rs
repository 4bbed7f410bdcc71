use dyadnet::ModelFamily;
use dyadnet_sim::alternative::shared_partners;
use dyadnet_sim::design::{connected, kept_indices, node_sign};
use dyadnet_sim::runner::{quantile, read_rep_csv, std_dev, write_rep_csv};
use dyadnet_sim::table::STATISTIC_ROWS;
use dyadnet_sim::*;
use proptest::prelude::*;

fn mean_density(design: &SimDesign, draws: usize) -> f64 {
    (0..draws).map(|r| generate_design(design, r).0.density()).sum::<f64>() / draws as f64
}

#[test]
fn standard_densities_and_ordering() {
    let targets = [0.50, 0.19, 0.12, 0.03];
    let mut last = f64::INFINITY;
    for (setting, target) in FeSetting::ALL.into_iter().zip(targets) {
        let d = SimDesign::standard(setting, 50, 1, 4, vec![]);
        let m = mean_density(&d, 300);
        assert!((m - target).abs() < 0.02, "{setting:?}: {m}");
        assert!(m < last, "densities must fall across settings");
        last = m;
    }
}

#[test]
fn symmetric_design_has_half_density() {
    let d = SimDesign {
        n_nodes: 20,
        theta: 0.0,
        fe_range: (0.0, 0.0),
        fe_mode: FeMode::Shared,
        n_reps: 1,
        seed: 9,
        estimators: vec![],
        label: "null".into(),
    };
    let m = mean_density(&d, 1000);
    // 380 pairs per draw, so the SD of the mean is about 0.0008.
    assert!((m - 0.5).abs() < 0.004, "{m}");
}

#[test]
fn design_layout() {
    let d = SimDesign::standard(FeSetting::Sparse, 10, 1, 1, vec![]);
    let (lo, hi) = d.fe_range;
    assert!((lo + 10f64.ln()).abs() < 1e-15 && hi == 0.0);
    let (a, g) = d.fixed_effects(0);
    assert_eq!(a, g);
    assert_eq!(a[0], lo);
    assert!((a[9] - hi).abs() < 1e-15);
    for w in a.windows(2) {
        assert!((w[1] - w[0] - (hi - lo) / 9.0).abs() < 1e-12);
    }
    assert_eq!((node_sign(0), node_sign(1), node_sign(2)), (-1.0, 1.0, -1.0));
    let (net, _) = generate_design(&d, 0);
    assert_eq!(net.x(0, 1), &[-1.0]);
    assert_eq!(net.x(0, 2), &[1.0]);

    let ind = SimDesign {
        fe_mode: FeMode::Independent,
        ..d.clone()
    };
    let (a2, g2) = ind.fixed_effects(3);
    assert_eq!(a2, a);
    let mut sorted = g2.clone();
    sorted.sort_by(f64::total_cmp);
    assert_eq!(sorted, a);
    assert_ne!(g2, a);

    assert!(SimDesign { fe_range: (1.0, 0.0), ..d.clone() }.validate().is_err());
    assert!(SimDesign { n_reps: 0, ..d }.validate().is_err());
}

#[test]
fn kept_nodes_map_back_to_truth() {
    let d = SimDesign::standard(FeSetting::Sparse, 50, 1, 2, vec![]);
    let (raw, truth) = generate_design(&d, 0);
    let (kept, report) = raw.filter_degenerate(ModelFamily::Probit).unwrap();
    assert!(!report.is_empty(), "sparse design should drop some nodes");
    let idx = kept_indices(&raw, &kept);
    let t = truth.restrict(&raw, &kept);
    for (a, &i) in idx.iter().enumerate() {
        assert_eq!(t.alpha[a], truth.alpha[i]);
        for (b, &j) in idx.iter().enumerate() {
            assert_eq!(kept.y(a, b), raw.y(i, j));
        }
    }
    assert!(connected(&raw) < 50);
}

#[test]
fn replications_are_reproducible_across_jobs_and_run_length() {
    let est = vec![Estimator::Mle, Estimator::Jackknife, Estimator::Weighted, Estimator::SplitSample];
    let d = SimDesign::standard(FeSetting::Dense, 16, 3, 11, est);
    let (s1, r1) = run_monte_carlo(&d, 1).unwrap();
    let (s3, r3) = run_monte_carlo(&d, 3).unwrap();
    assert_eq!(r1, r3);
    assert_eq!(s1, s3);
    let (_, longer) = run_monte_carlo(&SimDesign { n_reps: 5, ..d.clone() }, 2).unwrap();
    assert_eq!(&longer[..r1.len()], &r1[..]);
}

#[test]
fn mle_bias_is_detectable_in_every_design() {
    for setting in FeSetting::ALL {
        let reps = 120;
        let d = SimDesign::standard(setting, 50, reps, 5, vec![Estimator::Mle]);
        let (s, _) = run_monte_carlo(&d, 1).unwrap();
        let r = s.row(Estimator::Mle).unwrap();
        let n_ok = r.n_ok as f64;
        assert!(r.n_ok > reps * 9 / 10, "{setting:?}: only {} usable reps", r.n_ok);
        assert!(r.bias_mean > 2.0 * r.std_dev / n_ok.sqrt(), "{setting:?}: {r:?}");
        assert!((0.0..=1.0).contains(&r.rejection_rate) && r.p5_p95_range >= 0.0);
    }
}

#[test]
fn tables_and_csv_round_trips() {
    let d = SimDesign::standard(FeSetting::Mid, 14, 4, 3, Estimator::ALL.to_vec());
    let (s, rows) = run_monte_carlo(&d, 1).unwrap();

    let mut buf = Vec::new();
    s.write_csv(&mut buf).unwrap();
    assert_eq!(SimSummary::read_csv(buf.as_slice()).unwrap(), s);

    let mut buf = Vec::new();
    write_rep_csv(&rows, &mut buf).unwrap();
    assert_eq!(read_rep_csv(buf.as_slice()).unwrap(), rows);

    let t = emit_table(&s, Layout::Estimators);
    let lines: Vec<&str> = t.csv.lines().collect();
    assert_eq!(lines[0], "statistic,MLE,J,WJ");
    assert_eq!(lines.len(), 1 + STATISTIC_ROWS.len());
    for (line, name) in lines[1..].iter().zip(STATISTIC_ROWS) {
        assert!(line.starts_with(name));
    }
    let parsed: f64 = lines[1].split(',').nth(1).unwrap().parse().unwrap();
    assert_eq!(parsed, s.row(Estimator::Mle).unwrap().bias_mean);
    assert_eq!(emit_table(&s, Layout::Comparison).csv.lines().next().unwrap(), "statistic,J,WJ,D,SS");

    let empty = SimSummary { rows: vec![], ..s };
    let t = emit_table(&empty, Layout::Estimators);
    assert_eq!(t.csv, "statistic\n");
}

#[test]
fn transitive_alternative_adds_triangles() {
    let d = SimDesign::standard(FeSetting::Dense, 30, 1, 8, vec![]);
    let share = |alt: Transitive| {
        let (g, _) = generate_transitive(&d, 0, alt);
        let s = shared_partners(&g);
        let n = g.n_nodes();
        g.edges().map(|(i, j)| g.y(i, j) * s[i * n + j]).sum::<f64>() / g.edges().map(|(i, j)| g.y(i, j)).sum::<f64>()
    };
    let base = Transitive { kappa: 0.0, rounds: 0 };
    assert_eq!(share(base), share(Transitive { kappa: 0.0, rounds: 4 }));
    assert!(share(Transitive { kappa: 2.0, rounds: 3 }) > share(base) + 0.01);
}

#[test]
fn type_seven_quantiles() {
    let v: Vec<f64> = (1..=10).map(f64::from).collect();
    assert!((quantile(&v, 0.05) - 1.45).abs() < 1e-12);
    assert!((quantile(&v, 0.95) - 9.55).abs() < 1e-12);
    assert_eq!(quantile(&v, 0.5), 5.5);
    assert!((std_dev(&[1.0, 2.0, 3.0, 4.0]) - (5.0f64 / 3.0).sqrt()).abs() < 1e-15);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn summary_csv_round_trips(bias in prop::collection::vec(-1.0e3..1.0e3f64, 4), n in 0usize..500) {
        let rows = [Estimator::Mle, Estimator::Double].iter().enumerate().map(|(i, &e)| EstimatorSummary {
            estimator: e,
            n_ok: n + i,
            n_failed: i,
            bias_mean: bias[0],
            bias_median: bias[1],
            std_dev: bias[2].abs(),
            p5_p95_range: bias[3].abs(),
            rejection_rate: 0.5,
        }).collect();
        let s = SimSummary {
            label: "a, \"quoted\" label".into(),
            n_nodes: n,
            theta: bias[0],
            n_reps: n + 1,
            mean_density: bias[1],
            mean_connected: bias[2],
            rows,
        };
        let mut buf = Vec::new();
        s.write_csv(&mut buf).unwrap();
        prop_assert_eq!(SimSummary::read_csv(buf.as_slice()).unwrap(), s);
    }
}
