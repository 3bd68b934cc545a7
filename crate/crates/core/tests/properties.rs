mod common;

use std::collections::BTreeSet;

use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use common::*;
use vulspg::pipeline::{split_dataset, unit_spgs, Metrics, SpgOptions};
use vulspg::spg::{canonical_hash, split_subgraphs};

proptest! {
    #[test]
    fn rounded_percentages_stay_within_half_a_tenth(tp in 0u64..500, tn in 0u64..500, fp in 0u64..500, fn_ in 0u64..500) {
        let m = Metrics::from_counts(tp, tn, fp, fn_);
        let exact = |num: u64, den: u64| 100.0 * num as f64 / den as f64;
        if let Some(a) = m.accuracy {
            prop_assert!((a - exact(tp + tn, m.total())).abs() <= 0.05 + 1e-9);
        }
        if let (Some(r), Some(fnr)) = (m.recall, m.fnr) {
            prop_assert!((r + fnr - 100.0).abs() <= 0.1 + 1e-9);
        }
        match m.f1 {
            None => prop_assert_eq!(tp + fp + fn_, 0),
            Some(f) => prop_assert!((0.0..=100.0).contains(&f)),
        }
    }

    #[test]
    fn split_is_a_partition(n in 2usize..200, ratio in 0.05f64..0.95, seed: u64) {
        let (train, test) = split_dataset(n, ratio, seed).unwrap();
        prop_assert!(!train.is_empty() && !test.is_empty());
        let all: BTreeSet<usize> = train.iter().chain(&test).copied().collect();
        prop_assert_eq!(all.len(), n);
        prop_assert_eq!(all.into_iter().max(), Some(n - 1));
        prop_assert_eq!(split_dataset(n, ratio, seed).unwrap(), (train, test));
    }

    #[test]
    fn hash_ignores_node_order(seed: u64) {
        let spg = four_node_spg();
        let mut perm: Vec<usize> = (0..spg.nodes.len()).collect();
        perm.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        prop_assert_eq!(canonical_hash(&spg), canonical_hash(&permute_spg(&spg, &perm)));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn toy_spgs_are_consistent(seed: u64, vulnerable: bool) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let program = toy_program(&mut rng, 0, vulnerable);
        let spgs = unit_spgs(&program.unit(), &program.labels(), &SpgOptions::default()).unwrap();
        prop_assert!(!spgs.is_empty());
        let hashes: BTreeSet<u64> = spgs.iter().map(canonical_hash).collect();
        prop_assert_eq!(hashes.len(), spgs.len());
        for spg in &spgs {
            prop_assert!(spg.validate().is_ok());
            let parts = split_subgraphs(spg);
            prop_assert_eq!(parts.cdg.edges.len() + parts.ddg.edges.len() + parts.fcdg.edges.len(), spg.edges.len());
        }
        if !vulnerable {
            prop_assert!(spgs.iter().all(|s| s.label == Some(0)));
        }
    }
}
