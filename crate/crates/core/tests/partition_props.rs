//! Exhaustive checks of the diagonal-slice partition and the jackknife
//! identity for per-node means.

mod common;

use common::oracles::{check_conditions, check_partitions_exhaustively, jackknifed_node_means, valid_blocks};
use dyadnet::data::relabel_permutation;
use dyadnet::jackknife::combine;
use dyadnet::partition::{build_partition, EdgeMask, LeaveOutPartition};
use num_rational::Ratio;
use proptest::prelude::*;

#[test]
fn conditions_hold_for_every_size_and_block() {
    check_partitions_exhaustively();
}

#[test]
fn first_set_for_four_nodes_is_the_first_off_diagonal() {
    let p = build_partition(4, 1).unwrap();
    let mut set = p.set(0).unwrap().to_vec();
    set.sort_unstable();
    assert_eq!(set, vec![(0, 1), (1, 2), (2, 3), (3, 0)]);
    let mask = p.edge_mask(0).unwrap();
    let zeros: Vec<_> = (0..4)
        .flat_map(|i| (0..4).map(move |j| (i, j)))
        .filter(|&(i, j)| i != j && !mask.included(i, j))
        .collect();
    assert_eq!(zeros, vec![(0, 1), (1, 2), (2, 3), (3, 0)]);
}

#[test]
fn relabeled_partition_still_satisfies_the_conditions() {
    for (n, l) in [(13, 1), (13, 3), (25, 4), (50, 7)] {
        let p = build_partition(n, l).unwrap();
        let perm = relabel_permutation(n, 99);
        let moved: Vec<Vec<(usize, usize)>> = p
            .sets()
            .iter()
            .map(|s| s.iter().map(|&(i, j)| (perm[i], perm[j])).collect())
            .collect();
        let q = LeaveOutPartition::from_sets(n, l, moved);
        assert!(q.validate().is_valid());
        check_conditions(&q, n, l);
    }
}

#[test]
fn every_pair_is_excluded_by_exactly_one_mask() {
    let (n, l) = (21, 4);
    let p = build_partition(n, l).unwrap();
    let masks: Vec<EdgeMask> = (0..p.n_sets()).map(|k| p.edge_mask(k).unwrap()).collect();
    for i in 0..n {
        for j in (0..n).filter(|&j| j != i) {
            assert_eq!(masks.iter().filter(|m| !m.included(i, j)).count(), 1);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn jackknife_reproduces_node_means(
        n in 4usize..30,
        pick in 0usize..8,
        vals in proptest::collection::vec(-5.0f64..5.0, 900),
    ) {
        let blocks: Vec<usize> = valid_blocks(n).filter(|&l| l < n - 1).collect();
        prop_assume!(!blocks.is_empty());
        let l = blocks[pick % blocks.len()];
        let a = &vals[..n * n];
        let jack = jackknifed_node_means(a, n, l);
        for i in 0..n {
            let mean = (0..n).filter(|&s| s != i).map(|s| a[i * n + s]).sum::<f64>() / (n - 1) as f64;
            prop_assert!((jack[i] - mean).abs() < 1e-12, "node {}: {} vs {}", i, jack[i], mean);
        }
    }

    #[test]
    fn combination_is_linear(
        n in 4usize..40,
        a in -50i64..50, b in -50i64..50,
        xs in proptest::collection::vec(-1000i64..1000, 40),
        ys in proptest::collection::vec(-1000i64..1000, 40),
        fx in -1000i64..1000, fy in -1000i64..1000,
    ) {
        let l = 1;
        let m = n - 1;
        let r = |v: i64| Ratio::new(v, 7);
        let (a, b) = (r(a), r(b));
        let xs: Vec<_> = xs[..m].iter().map(|&v| r(v)).collect();
        let ys: Vec<_> = ys[..m].iter().map(|&v| r(v)).collect();
        let mixed: Vec<_> = xs.iter().zip(&ys).map(|(&x, &y)| a * x + b * y).collect();
        let lhs = combine(a * r(fx) + b * r(fy), &mixed, n, l);
        let rhs = a * combine(r(fx), &xs, n, l) + b * combine(r(fy), &ys, n, l);
        prop_assert_eq!(lhs, rhs);
    }
}
