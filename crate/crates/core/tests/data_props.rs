//! Edge-list IO, degeneracy filtering and relabeling properties.

mod common;

use common::design;
use dyadnet::data::{load_edge_list, read_edge_list, save_edge_list, write_edge_list};
use dyadnet::{fit_full, EdgeSchema, FitConfig, ModelFamily, Network};
use proptest::prelude::*;

fn schema() -> EdgeSchema {
    EdgeSchema::default()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn write_then_read_is_identity(seed in 0u64..1000, n in 4usize..12, fam in 0usize..4) {
        let family = ModelFamily::ALL[fam];
        let (data, _) = design(n, family, seed, 0.5);
        for delim in [b',', b'\t'] {
            let mut buf = Vec::new();
            write_edge_list(&data, &schema(), delim, &mut buf).unwrap();
            let back: Network = read_edge_list(buf.as_slice(), &schema(), delim).unwrap();
            prop_assert_eq!(back.n_nodes(), n);
            prop_assert_eq!(back.labels(), data.labels());
            prop_assert_eq!(back.covariate_names(), data.covariate_names());
            for (i, j) in data.edges() {
                prop_assert_eq!(back.y(i, j).to_bits(), data.y(i, j).to_bits());
                for (a, b) in back.x(i, j).iter().zip(data.x(i, j)) {
                    prop_assert_eq!(a.to_bits(), b.to_bits());
                }
            }
        }
    }

    #[test]
    fn filtering_is_idempotent(seed in 0u64..1000, n in 5usize..14) {
        let (data, _) = design(n, ModelFamily::Probit, seed, 1.5);
        if let Ok((once, _)) = data.filter_degenerate(ModelFamily::Probit) {
            let (twice, report) = once.filter_degenerate(ModelFamily::Probit).unwrap();
            prop_assert!(report.is_empty());
            prop_assert_eq!(twice.labels(), once.labels());
        }
    }
}

#[test]
fn file_round_trip_by_extension() {
    let (data, _) = design(7, ModelFamily::Logit, 3, 0.5);
    let dir = tempfile::tempdir().unwrap();
    for name in ["edges.csv", "edges.tsv"] {
        let path = dir.path().join(name);
        save_edge_list(&data, &path, &schema()).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert_eq!(text.lines().next().unwrap().contains('\t'), name.ends_with("tsv"));
        let back: Network = load_edge_list(&path, &schema()).unwrap();
        assert_eq!(back.labels(), data.labels());
    }
}

#[test]
fn relabeling_leaves_the_estimates_unchanged() {
    let (data, _) = design(15, ModelFamily::Probit, 8, 0.5);
    let (data, _) = data.filter_degenerate(ModelFamily::Probit).unwrap();
    let base = fit_full(&data, ModelFamily::Probit, &FitConfig::default()).unwrap();
    for seed in [1, 2, 3] {
        let moved = data.relabel(seed);
        let fit = fit_full(&moved, ModelFamily::Probit, &FitConfig::default()).unwrap();
        for (a, b) in base.params.beta.iter().zip(&fit.params.beta) {
            assert!((a - b).abs() < 1e-9);
        }
        // Labels travel with their rows.
        let perm = dyadnet::data::relabel_permutation(data.n_nodes(), seed);
        for (a, &p) in perm.iter().enumerate() {
            assert_eq!(moved.labels()[a], data.labels()[p]);
            assert!((fit.params.alpha[a] - base.params.alpha[p]).abs() < 1e-8);
        }
    }
}

#[test]
fn single_precision_fit_tracks_double() {
    let (data, _) = design(20, ModelFamily::Logit, 4, 0.5);
    let (data, _) = data.filter_degenerate(ModelFamily::Logit).unwrap();
    let f64fit = fit_full(&data, ModelFamily::Logit, &FitConfig::default()).unwrap();
    let d32 = data.cast::<f32>();
    let f32fit = fit_full(&d32, ModelFamily::Logit, &FitConfig::default()).unwrap();
    for (a, b) in f64fit.params.beta.iter().zip(&f32fit.params.beta) {
        assert!((a - f64::from(*b)).abs() < 1e-3, "{a} vs {b}");
    }
}
