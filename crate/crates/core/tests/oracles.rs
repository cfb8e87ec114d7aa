//! Library results against the brute-force references in `common`.

mod common;

use common::{Link, Obs};
use quadhc::four_al::{four_al_checked, ClusterPreferenceTable};
use quadhc::kernel::{active_kernel, active_kernel_with, passive_kernel, sample_design, ActiveKernelConfig, KernelDesign};
use quadhc::oracle::sample_passive;
use quadhc::ordinal::{complete_linkage, single_linkage};
use quadhc::{ActiveOracle, Partition, SimilarityMatrix};
use rand::seq::SliceRandom;
use rand::Rng;

fn dense(k: &quadhc::kernel::KernelMatrix) -> Vec<Vec<i64>> {
    (0..k.n()).map(|i| (0..k.n()).map(|j| k.get(i, j)).collect()).collect()
}

// 4 items; expected kernels below were worked out by hand.
fn frozen_matrix() -> SimilarityMatrix {
    let v = [[0.0, 0.9, 0.1, 0.2], [0.9, 0.0, 0.3, 0.4], [0.1, 0.3, 0.0, 0.8], [0.2, 0.4, 0.8, 0.0]];
    SimilarityMatrix::from_fn(4, |i, j| v[i][j])
}

#[test]
fn passive_kernel_frozen_values() {
    let qs = sample_passive(&frozen_matrix(), 1.0, 0).unwrap();
    let k = dense(&passive_kernel(&qs).unwrap());
    let expected = vec![
        vec![0, 4, 0, 0],
        vec![4, 0, 0, 0],
        vec![0, 0, 0, 8],
        vec![0, 0, 8, 0],
    ];
    assert_eq!(k, expected);
    let obs = Obs { n: 4, set: qs.iter().map(|q| ((q.winner.a(), q.winner.b()), (q.loser.a(), q.loser.b()))).collect() };
    assert_eq!(common::passive_kernel(&obs), expected);
}

#[test]
fn active_kernel_frozen_values() {
    let w = frozen_matrix();
    let mut oracle = ActiveOracle::new(&w).unwrap();
    let design = KernelDesign {
        landmarks: vec![0, 1, 2, 3],
        references: vec![quadhc::PairId::new(1, 2).unwrap()],
    };
    let (k, _) = active_kernel_with(&mut oracle, 4, &design).unwrap();
    // reference w_12 = 0.3
    let expected = vec![vec![0, -1, -1, 0], vec![-1, 0, 0, -1], vec![-1, 0, 0, 1], vec![0, -1, 1, 0]];
    assert_eq!(dense(&k), expected);
    assert_eq!(common::active_kernel(&w, &[0, 1, 2, 3], &[(1, 2)]), expected);
}

#[test]
fn passive_kernel_matches_brute_force_with_arbitrary_orientations() {
    let mut rng = common::rng(11);
    for _ in 0..40 {
        let n = rng.random_range(3..=7);
        let p = rng.random_range(0.05..1.0);
        let obs = common::random_obs(n, p, None, &mut rng);
        let k = passive_kernel(&obs.to_set()).unwrap();
        assert_eq!(dense(&k), common::passive_kernel(&obs));
    }
}

#[test]
fn active_kernel_matches_brute_force_with_ties() {
    let mut rng = common::rng(12);
    for t in 0..40 {
        let n = rng.random_range(3..=8);
        let w = common::coarse_matrix(n, 3, &mut rng);
        let cfg = ActiveKernelConfig {
            landmark_prob: rng.random_range(0.3..=1.0),
            num_references: rng.random_range(1..=n * (n - 1) / 2),
            seed: t,
        };
        let design = match sample_design(n, &cfg) {
            Err(quadhc::Error::EmptyLandmarks) => continue,
            d => d.unwrap(),
        };
        let refs: Vec<_> = design.references.iter().map(|r| (r.a(), r.b())).collect();
        let mut oracle = ActiveOracle::new(&w).unwrap();
        let (k, _) = active_kernel(&mut oracle, n, &cfg).unwrap();
        assert_eq!(dense(&k), common::active_kernel(&w, &design.landmarks, &refs));
    }
}

fn random_partition(n: usize, k: usize, rng: &mut impl Rng) -> Vec<Vec<usize>> {
    let mut items: Vec<usize> = (0..n).collect();
    items.shuffle(rng);
    let mut groups = vec![Vec::new(); k];
    for (x, &i) in items.iter().enumerate() {
        groups[if x < k { x } else { rng.random_range(0..k) }].push(i);
    }
    groups
}

#[test]
fn cluster_table_matches_brute_force() {
    let mut rng = common::rng(13);
    for _ in 0..30 {
        let n = rng.random_range(3..=8);
        let k = rng.random_range(2..=n);
        let obs = common::random_obs(n, rng.random_range(0.1..1.0), None, &mut rng);
        let groups = random_partition(n, k, &mut rng);
        let partition = Partition::new(groups.clone()).unwrap();
        let table = ClusterPreferenceTable::build(&obs.to_set(), &partition).unwrap();
        let g = partition.clusters();
        for p in 0..k {
            for q in 0..k {
                if p == q {
                    continue;
                }
                assert_eq!(table.similarity(p, q).unwrap(), common::cluster_similarity(&obs, g, p, q));
                for r in 0..k {
                    for s in 0..k {
                        if r == s {
                            continue;
                        }
                        let exact = table.preference(p, q, r, s).unwrap();
                        let brute = common::preference(&obs, g, p, q, r, s);
                        assert_eq!(
                            num_rational::BigRational::new((*exact.numer()).into(), (*exact.denom()).into()),
                            brute
                        );
                    }
                }
            }
        }
    }
}

#[test]
fn ordinal_linkage_matches_classical() {
    let mut rng = common::rng(14);
    for _ in 0..30 {
        let n = rng.random_range(2..=12);
        let w = common::random_matrix(n, &mut rng);
        let mut oracle = ActiveOracle::new(&w).unwrap();
        let (sl, _) = single_linkage(&mut oracle, n).unwrap();
        let mut oracle = ActiveOracle::new(&w).unwrap();
        let (cl, _) = complete_linkage(&mut oracle, n).unwrap();
        assert_eq!(common::dendrogram_merges(&sl), common::classical_merges(&w, Link::Single));
        assert_eq!(common::dendrogram_merges(&cl), common::classical_merges(&w, Link::Complete));
    }
}

#[test]
fn four_al_first_merge_is_brute_force_argmax() {
    let mut rng = common::rng(15);
    for _ in 0..20 {
        let n = rng.random_range(3..=8);
        let w = common::random_matrix(n, &mut rng);
        let obs = common::random_obs(n, 1.0, Some(&w), &mut rng);
        let (d, report) = four_al_checked(&obs.to_set(), &Partition::singletons(n)).unwrap();
        assert!(report.violations.is_empty());
        let g: Vec<Vec<usize>> = (0..n).map(|i| vec![i]).collect();
        let mut best = None;
        for p in 0..n {
            for q in p + 1..n {
                let v = common::cluster_similarity(&obs, &g, p, q);
                if best.as_ref().is_none_or(|(bv, _)| &v > bv) {
                    best = Some((v, (p, q)));
                }
            }
        }
        let m = d.merges()[0];
        assert_eq!((m.left.min(m.right), m.left.max(m.right)), best.unwrap().1);
    }
}

#[test]
fn dasgupta_and_ari_match_definitions() {
    let mut rng = common::rng(16);
    for _ in 0..20 {
        let n = rng.random_range(2..=10);
        let w = common::random_matrix(n, &mut rng);
        let d = quadhc::Dendrogram::random_uniform(n, &mut rng).unwrap();
        let fast = quadhc::eval::dasgupta_cost(&w, &d).unwrap();
        assert!((fast - common::dasgupta_cost(&w, &d)).abs() <= 1e-9 * fast.abs().max(1.0));
        if n >= 3 {
            let a: Vec<usize> = (0..n).map(|_| rng.random_range(0..3)).collect();
            let b: Vec<usize> = (0..n).map(|_| rng.random_range(0..3)).collect();
            let brute = common::ari(&a, &b);
            if brute.is_finite() {
                assert!((quadhc::eval::ari(&a, &b).unwrap() - brute).abs() < 1e-12);
            }
        }
    }
}
