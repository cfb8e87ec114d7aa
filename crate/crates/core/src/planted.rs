//! Planted hierarchical block model: noisy similarity matrices whose expected
//! values form nested blocks over a complete binary tree of pure clusters.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::dendrogram::Dendrogram;
use crate::error::{Error, Result};
use crate::pairs::pair_index;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlantedConfig {
    /// Size of each pure cluster.
    pub n0: usize,
    /// Depth of the planted tree; there are `2^levels` pure clusters.
    pub levels: u32,
    /// Expected similarity within a pure cluster.
    pub mu: f64,
    /// Drop in expected similarity per level of separation.
    pub delta: f64,
    /// Standard deviation of the Gaussian noise.
    pub sigma: f64,
    pub seed: u64,
}

impl PlantedConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n0 == 0 {
            return Err(Error::InvalidConfig("n0 must be positive".into()));
        }
        if !(self.sigma >= 0.0) || !self.sigma.is_finite() {
            return Err(Error::InvalidConfig(format!(
                "sigma must be a finite non-negative number, got {}",
                self.sigma
            )));
        }
        if !(self.delta >= 0.0) || !self.delta.is_finite() {
            return Err(Error::InvalidConfig(format!(
                "delta must be a finite non-negative number, got {}",
                self.delta
            )));
        }
        if !self.mu.is_finite() {
            return Err(Error::InvalidConfig("mu must be finite".into()));
        }
        self.n_items().map(|_| ())
    }

    /// `N = 2^L · n0`, or an error when it does not fit in `usize`.
    pub fn n_items(&self) -> Result<usize> {
        let clusters = 1usize.checked_shl(self.levels).ok_or(Error::TooLarge {
            n: usize::MAX,
            reason: "2^levels overflows",
        })?;
        clusters.checked_mul(self.n0).ok_or(Error::TooLarge {
            n: usize::MAX,
            reason: "2^levels * n0 overflows",
        })
    }
}

/// Dense symmetric similarity matrix. The diagonal holds `NaN` and is never read.
#[derive(Clone, Debug, PartialEq)]
pub struct SimilarityMatrix {
    n: usize,
    entries: Vec<f64>,
}

impl SimilarityMatrix {
    /// Builds the matrix from `f(i, j)` evaluated once per pair `i < j`.
    pub fn from_fn(n: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut entries = vec![f64::NAN; n * n];
        for i in 0..n {
            for j in i + 1..n {
                let v = f(i, j);
                entries[i * n + j] = v;
                entries[j * n + i] = v;
            }
        }
        SimilarityMatrix { n, entries }
    }

    /// Builds the matrix from row-major data, checking symmetry off the diagonal.
    pub fn from_dense(n: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != n * n {
            return Err(Error::InvalidArgument(format!(
                "expected {} entries for n = {n}, got {}",
                n * n,
                data.len()
            )));
        }
        let mut entries = data;
        for i in 0..n {
            entries[i * n + i] = f64::NAN;
            for j in i + 1..n {
                let (x, y) = (entries[i * n + j], entries[j * n + i]);
                if x.is_nan() || x != y {
                    return Err(Error::InvalidArgument(format!(
                        "matrix is not symmetric at ({i},{j}): {x} vs {y}"
                    )));
                }
            }
        }
        Ok(SimilarityMatrix { n, entries })
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        debug_assert!(i != j, "diagonal similarity is undefined");
        self.entries[i * self.n + j]
    }

    /// Applies `f` to every off-diagonal entry.
    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        SimilarityMatrix::from_fn(self.n, |i, j| f(self.get(i, j)))
    }

    /// Row-major view including the `NaN` diagonal.
    pub fn as_slice(&self) -> &[f64] {
        &self.entries
    }
}

/// The planted tree: `2^levels` contiguous pure clusters of `n0` items under
/// a complete binary tree.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GroundTruthHierarchy {
    levels: u32,
    n0: usize,
}

impl GroundTruthHierarchy {
    pub fn new(levels: u32, n0: usize) -> Result<Self> {
        PlantedConfig {
            n0,
            levels,
            mu: 0.0,
            delta: 0.0,
            sigma: 0.0,
            seed: 0,
        }
        .validate()?;
        Ok(GroundTruthHierarchy { levels, n0 })
    }

    #[inline]
    pub fn levels(&self) -> u32 {
        self.levels
    }

    #[inline]
    pub fn n0(&self) -> usize {
        self.n0
    }

    #[inline]
    pub fn n_items(&self) -> usize {
        self.n0 << self.levels
    }

    pub fn num_pure_clusters(&self) -> usize {
        1 << self.levels
    }

    /// Index range of pure cluster `g`.
    pub fn pure_cluster(&self, g: usize) -> std::ops::Range<usize> {
        g * self.n0..(g + 1) * self.n0
    }

    #[inline]
    pub fn pure_cluster_of(&self, i: usize) -> usize {
        i / self.n0
    }

    /// Level of the least common ancestor of `i` and `j` in the planted tree:
    /// `levels` for items of the same pure cluster, `0` for a split at the root.
    pub fn lca_level(&self, i: usize, j: usize) -> Result<u32> {
        let n = self.n_items();
        for x in [i, j] {
            if x >= n {
                return Err(Error::IndexOutOfRange { index: x, n });
            }
        }
        if i == j {
            return Err(Error::InvalidArgument(
                "lca level of an item with itself is undefined".into(),
            ));
        }
        Ok(self.lca_level_unchecked(i, j))
    }

    #[inline]
    pub(crate) fn lca_level_unchecked(&self, i: usize, j: usize) -> u32 {
        let diff = self.pure_cluster_of(i) ^ self.pure_cluster_of(j);
        // Cluster indices agree on their top `levels - bit_length(diff)` bits.
        self.levels - (usize::BITS - diff.leading_zeros())
    }

    /// Cluster label of every item in the level-`level` partition (`2^level` blocks).
    pub fn level_labels(&self, level: u32) -> Vec<usize> {
        assert!(level <= self.levels);
        let block = self.n0 << (self.levels - level);
        (0..self.n_items()).map(|i| i / block).collect()
    }

    /// Reference dendrogram: each pure cluster is chained in index order,
    /// then sibling clusters merge level by level up to the root.
    pub fn ground_truth_dendrogram(&self) -> Dendrogram {
        let n = self.n_items();
        let mut merges = Vec::with_capacity(n.saturating_sub(1));
        let mut next = n;
        let mut tops = Vec::with_capacity(self.num_pure_clusters());
        for g in 0..self.num_pure_clusters() {
            let mut range = self.pure_cluster(g);
            let mut top = range.next().expect("n0 > 0");
            for item in range {
                merges.push((top, item));
                top = next;
                next += 1;
            }
            tops.push(top);
        }
        while tops.len() > 1 {
            let mut parents = Vec::with_capacity(tops.len() / 2);
            for sib in tops.chunks(2) {
                merges.push((sib[0], sib[1]));
                parents.push(next);
                next += 1;
            }
            tops = parents;
        }
        Dendrogram::from_merges(n, merges).expect("planted tree is a valid dendrogram")
    }
}

/// Samples a noisy hierarchical block matrix and its planted hierarchy.
///
/// Entry `(i, j)` draws its noise from its own ChaCha8 stream keyed by
/// `(seed, pair index)`, so the matrix does not depend on evaluation order.
pub fn generate_planted(
    config: &PlantedConfig,
) -> Result<(SimilarityMatrix, GroundTruthHierarchy)> {
    config.validate()?;
    let hierarchy = GroundTruthHierarchy {
        levels: config.levels,
        n0: config.n0,
    };
    let n = config.n_items()?;
    let w = SimilarityMatrix::from_fn(n, |i, j| {
        let mean = expected_similarity_unchecked(&hierarchy, config, i, j);
        if config.sigma == 0.0 {
            return mean;
        }
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        rng.set_stream(pair_index(n, i, j) as u64);
        let z: f64 = StandardNormal.sample(&mut rng);
        mean + config.sigma * z
    });
    Ok((w, hierarchy))
}

/// `mu - (L - lca_level(i, j)) * delta`.
pub fn expected_similarity(
    hierarchy: &GroundTruthHierarchy,
    config: &PlantedConfig,
    i: usize,
    j: usize,
) -> Result<f64> {
    hierarchy.lca_level(i, j)?;
    Ok(expected_similarity_unchecked(hierarchy, config, i, j))
}

fn expected_similarity_unchecked(
    hierarchy: &GroundTruthHierarchy,
    config: &PlantedConfig,
    i: usize,
    j: usize,
) -> f64 {
    let gap = hierarchy.levels - hierarchy.lca_level_unchecked(i, j);
    config.mu - gap as f64 * config.delta
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(n0: usize, levels: u32, mu: f64, delta: f64, sigma: f64) -> PlantedConfig {
        PlantedConfig {
            n0,
            levels,
            mu,
            delta,
            sigma,
            seed: 7,
        }
    }

    #[test]
    fn noiseless_cross_pair() {
        let (w, _) = generate_planted(&cfg(1, 1, 0.8, 0.2, 0.0)).unwrap();
        assert_eq!(w.n(), 2);
        assert!((w.get(0, 1) - 0.6).abs() < 1e-15);
    }

    #[test]
    fn noiseless_single_cluster() {
        let (w, _) = generate_planted(&cfg(2, 0, 0.5, 0.3, 0.0)).unwrap();
        assert_eq!(w.get(0, 1), 0.5);
    }

    #[test]
    fn lca_levels_small_tree() {
        let h = GroundTruthHierarchy::new(2, 2).unwrap();
        assert_eq!(h.lca_level(0, 1).unwrap(), 2);
        assert_eq!(h.lca_level(0, 2).unwrap(), 1);
        assert_eq!(h.lca_level(0, 4).unwrap(), 0);
        assert_eq!(h.lca_level(7, 3).unwrap(), 0);
        assert!(h.lca_level(3, 3).is_err());
        assert!(h.lca_level(0, 8).is_err());
    }

    #[test]
    fn expected_similarity_values() {
        let h = GroundTruthHierarchy::new(3, 1).unwrap();
        let c = cfg(1, 3, 0.8, 0.1, 0.0);
        // items 0 and 1 share level 2, 0 and 4 split at the root
        assert!((expected_similarity(&h, &c, 0, 4).unwrap() - 0.5).abs() < 1e-12);
        let c2 = cfg(1, 3, 0.8, 0.02, 0.0);
        assert!((expected_similarity(&h, &c2, 0, 1).unwrap() - 0.78).abs() < 1e-12);
        let h2 = GroundTruthHierarchy::new(3, 2).unwrap();
        assert_eq!(expected_similarity(&h2, &c, 0, 1).unwrap(), 0.8);
    }

    #[test]
    fn rejects_bad_configs() {
        assert!(generate_planted(&cfg(0, 2, 0.8, 0.1, 0.1)).is_err());
        assert!(generate_planted(&cfg(2, 2, 0.8, -0.1, 0.1)).is_err());
        assert!(generate_planted(&cfg(2, 2, 0.8, 0.1, -0.1)).is_err());
        assert!(cfg(usize::MAX, 2, 0.8, 0.1, 0.1).n_items().is_err());
        assert!(cfg(1, 200, 0.8, 0.1, 0.1).n_items().is_err());
    }

    #[test]
    fn deterministic_and_symmetric() {
        let c = cfg(4, 2, 0.8, 0.1, 0.1);
        let (a, _) = generate_planted(&c).unwrap();
        let (b, _) = generate_planted(&c).unwrap();
        assert_eq!(a.as_slice().len(), b.as_slice().len());
        for i in 0..a.n() {
            for j in 0..a.n() {
                if i != j {
                    assert_eq!(a.get(i, j).to_bits(), b.get(i, j).to_bits());
                    assert_eq!(a.get(i, j).to_bits(), a.get(j, i).to_bits());
                }
            }
        }
    }

    #[test]
    fn noiseless_blocks_increase_with_lca() {
        let c = cfg(3, 3, 0.8, 0.05, 0.0);
        let (w, h) = generate_planted(&c).unwrap();
        for i in 0..w.n() {
            for j in 0..w.n() {
                for k in 0..w.n() {
                    for l in 0..w.n() {
                        if i == j || k == l {
                            continue;
                        }
                        let (a, b) = (h.lca_level(i, j).unwrap(), h.lca_level(k, l).unwrap());
                        if a == b {
                            assert_eq!(w.get(i, j), w.get(k, l));
                        } else if a > b {
                            assert!(w.get(i, j) > w.get(k, l));
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn ground_truth_cuts_match_levels() {
        let h = GroundTruthHierarchy::new(2, 2).unwrap();
        let d = h.ground_truth_dendrogram();
        assert_eq!(d.merges().len(), 7);
        for level in 1..=2 {
            let cut = d.cut_at(1 << level).unwrap();
            assert_eq!(
                crate::eval::canonical_labels(&cut),
                crate::eval::canonical_labels(&h.level_labels(level))
            );
        }

        let chain = GroundTruthHierarchy::new(0, 3).unwrap().ground_truth_dendrogram();
        assert_eq!(chain.merges().iter().map(|m| (m.left, m.right)).collect::<Vec<_>>(), vec![(0, 1), (3, 2)]);

        let single = GroundTruthHierarchy::new(1, 1).unwrap().ground_truth_dendrogram();
        assert_eq!(single.merges().len(), 1);
    }

    #[test]
    fn standardized_residuals_are_standard_normal() {
        let c = cfg(4, 2, 0.8, 0.1, 0.3);
        let samples = 10_000;
        let (mut sum, mut sq) = (0.0, 0.0);
        for s in 0..samples {
            let (w, h) = generate_planted(&PlantedConfig { seed: s, ..c.clone() }).unwrap();
            let mean = expected_similarity(&h, &c, 1, 9).unwrap();
            let z = (w.get(1, 9) - mean) / c.sigma;
            sum += z;
            sq += z * z;
        }
        let mean = sum / samples as f64;
        let var = sq / samples as f64 - mean * mean;
        assert!(mean.abs() < 0.05, "mean {mean}");
        assert!((var - 1.0).abs() < 0.05, "var {var}");
    }
}
