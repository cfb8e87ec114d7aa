mod common;

use proptest::prelude::*;
use quadhc::eval::{ari, dasgupta_cost};
use quadhc::four_al::four_al;
use quadhc::io;
use quadhc::kernel::{active_kernel, passive_kernel_certified, ActiveKernelConfig};
use quadhc::oracle::sample_passive;
use quadhc::ordinal::single_linkage;
use quadhc::{ActiveOracle, Dendrogram, Partition, SimilarityMatrix};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn matrix(n: usize, seed: u64) -> SimilarityMatrix {
    common::random_matrix(n, &mut common::rng(seed))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn ari_is_symmetric_and_label_free(
        a in prop::collection::vec(0usize..4, 3..30),
        shift in 1usize..100,
        seed: u64,
    ) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let b: Vec<usize> = a.iter().map(|_| rand::Rng::random_range(&mut rng, 0..4)).collect();
        let relabeled: Vec<usize> = a.iter().map(|x| x * 7 + shift).collect();
        let ab = ari(&a, &b).unwrap();
        prop_assert_eq!(ab.to_bits(), ari(&b, &a).unwrap().to_bits());
        prop_assert_eq!(ari(&relabeled, &b).unwrap().to_bits(), ab.to_bits());
        prop_assert_eq!(ari(&a, &relabeled).unwrap(), 1.0);
        prop_assert!(ab <= 1.0 + 1e-12);
    }

    #[test]
    fn dasgupta_ignores_child_order(n in 2usize..20, seed: u64, swaps in prop::collection::vec(any::<prop::sample::Index>(), 0..10)) {
        let w = matrix(n, seed);
        let mut d = Dendrogram::random_uniform(n, &mut common::rng(seed ^ 1)).unwrap();
        let before = dasgupta_cost(&w, &d).unwrap();
        for s in swaps {
            d.swap_children(s.index(n - 1));
        }
        prop_assert_eq!(before.to_bits(), dasgupta_cost(&w, &d).unwrap().to_bits());
    }

    #[test]
    fn random_trees_are_valid(n in 1usize..40, seed: u64) {
        let d = Dendrogram::random_uniform(n, &mut common::rng(seed)).unwrap();
        prop_assert_eq!(d.merges().len(), n - 1);
        prop_assert_eq!(d.node_sizes()[d.root()], n);
        for k in 1..=n {
            let labels = d.cut_at(k).unwrap();
            prop_assert_eq!(labels.iter().max().unwrap() + 1, k);
        }
        let again = io::parse_linkage_csv(&io::write_linkage_csv(&d), "t").unwrap();
        prop_assert_eq!(again, d);
    }

    #[test]
    fn passive_kernel_symmetric_and_bounded(n in 3usize..9, p in 0.05f64..1.0, seed: u64) {
        let qs = sample_passive(&matrix(n, seed), p, seed).unwrap();
        let (k, terms) = passive_kernel_certified(&qs).unwrap();
        for i in 0..n {
            prop_assert_eq!(k.get(i, i), 0);
            for j in 0..n {
                prop_assert_eq!(k.get(i, j), k.get(j, i));
                prop_assert!(k.get(i, j).abs() <= terms.get(i, j));
            }
        }
    }

    #[test]
    fn active_kernel_symmetric_and_bounded(n in 3usize..12, refs in 1usize..4, seed: u64) {
        let w = matrix(n, seed);
        let mut oracle = ActiveOracle::new(&w).unwrap();
        let cfg = ActiveKernelConfig { landmark_prob: 1.0, num_references: refs, seed };
        let (k, _) = active_kernel(&mut oracle, n, &cfg).unwrap();
        for i in 0..n {
            for j in 0..n {
                prop_assert_eq!(k.get(i, j), k.get(j, i));
                prop_assert!(k.get(i, j).unsigned_abs() as usize <= refs * n);
            }
        }
    }

    #[test]
    fn single_linkage_depends_only_on_order(n in 2usize..16, seed: u64, a in 0.1f64..5.0, b in -3.0f64..3.0) {
        let w = matrix(n, seed);
        let t = w.map(|x| a * x.powi(3) + b);
        let (d1, q1) = single_linkage(&mut ActiveOracle::new(&w).unwrap(), n).unwrap();
        let (d2, q2) = single_linkage(&mut ActiveOracle::new(&t).unwrap(), n).unwrap();
        prop_assert_eq!(common::dendrogram_merges(&d1), common::dendrogram_merges(&d2));
        prop_assert_eq!(q1, q2);
    }

    #[test]
    fn four_al_returns_full_tree(n in 2usize..10, p in 0.0f64..1.0, seed: u64) {
        let qs = sample_passive(&matrix(n, seed), p, seed).unwrap();
        let d = four_al(&qs, &Partition::singletons(n)).unwrap();
        prop_assert_eq!(d.n_leaves(), n);
        let mut leaves = d.leaves_under(d.root());
        leaves.sort_unstable();
        prop_assert_eq!(leaves, (0..n).collect::<Vec<_>>());
    }

    #[test]
    fn similarity_csv_round_trips(n in 0usize..8, seed: u64) {
        let w = matrix(n, seed);
        let back = io::parse_similarity_csv(&io::write_similarity_csv(&w), "t").unwrap();
        let bits = |m: &SimilarityMatrix| m.as_slice().iter().map(|x| x.to_bits()).collect::<Vec<_>>();
        prop_assert_eq!(bits(&back), bits(&w));
    }

    #[test]
    fn partition_csv_round_trips(labels in prop::collection::vec(0usize..5, 0..20)) {
        let back = io::parse_partition_csv(&io::write_partition_csv(&labels), "t").unwrap();
        let canon = quadhc::eval::canonical_labels(&labels);
        prop_assert_eq!(quadhc::eval::canonical_labels(&back.labels(labels.len()).unwrap()), canon);
    }
}
