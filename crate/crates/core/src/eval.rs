//! Clustering and tree quality metrics.

use rustc_hash::FxHashMap;

use crate::dendrogram::Dendrogram;
use crate::error::{Error, Result};
use crate::planted::{GroundTruthHierarchy, SimilarityMatrix};

/// Relabels so that labels appear as 0, 1, 2, ... in item order.
pub fn canonical_labels(labels: &[usize]) -> Vec<usize> {
    let mut map = FxHashMap::default();
    labels
        .iter()
        .map(|&l| {
            let next = map.len();
            *map.entry(l).or_insert(next)
        })
        .collect()
}

fn choose2(x: u64) -> f64 {
    (x * x.saturating_sub(1) / 2) as f64
}

/// Adjusted Rand index between two labelings of the same items.
///
/// When both partitions are trivial in the same way (the expected and
/// maximal index coincide) the index is 1 if they are identical and 0
/// otherwise.
pub fn ari(a: &[usize], b: &[usize]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::MismatchedItems);
    }
    let (a, b) = (canonical_labels(a), canonical_labels(b));
    let ka = a.iter().max().map_or(0, |m| m + 1);
    let kb = b.iter().max().map_or(0, |m| m + 1);
    let mut table: FxHashMap<(usize, usize), u64> = FxHashMap::default();
    let mut rows = vec![0u64; ka];
    let mut cols = vec![0u64; kb];
    for (&x, &y) in a.iter().zip(&b) {
        *table.entry((x, y)).or_insert(0) += 1;
        rows[x] += 1;
        cols[y] += 1;
    }
    let index: f64 = table.values().map(|&c| choose2(c)).sum();
    let sum_a: f64 = rows.iter().map(|&c| choose2(c)).sum();
    let sum_b: f64 = cols.iter().map(|&c| choose2(c)).sum();
    let total = choose2(a.len() as u64);
    if total == 0.0 {
        return Ok(1.0);
    }
    let expected = sum_a * sum_b / total;
    let max = 0.5 * (sum_a + sum_b);
    if max == expected {
        return Ok(if a == b { 1.0 } else { 0.0 });
    }
    Ok((index - expected) / (max - expected))
}

/// Mean ARI between the planted level partitions and the cuts of `d` with
/// the same number of clusters, over levels `1..=L`.
pub fn aari(truth: &GroundTruthHierarchy, d: &Dendrogram) -> Result<f64> {
    let levels = truth.levels();
    if levels == 0 {
        return Err(Error::InvalidArgument("AARI needs at least one level".into()));
    }
    if d.n_leaves() != truth.n_items() {
        return Err(Error::MismatchedItems);
    }
    let mut sum = 0.0;
    for level in 1..=levels {
        sum += ari(&truth.level_labels(level), &d.cut_at(1 << level)?)?;
    }
    Ok(sum / levels as f64)
}

/// Dasgupta cost: each unordered pair's similarity weighted by the size of
/// the smallest cluster of `d` containing both.
///
/// Sums run in an order fixed by item indices, so swapping children leaves
/// the result bit-identical.
pub fn dasgupta_cost(w: &SimilarityMatrix, d: &Dendrogram) -> Result<f64> {
    let n = w.n();
    if d.n_leaves() != n {
        return Err(Error::MismatchedItems);
    }
    // member lists stay sorted
    let mut members: Vec<Vec<usize>> = (0..n).map(|i| vec![i]).collect();
    let mut cost = 0.0;
    for m in d.merges() {
        let mut left = std::mem::take(&mut members[m.left]);
        let mut right = std::mem::take(&mut members[m.right]);
        if right[0] < left[0] {
            std::mem::swap(&mut left, &mut right);
        }
        let size = (left.len() + right.len()) as f64;
        let mut cross = 0.0;
        for &i in &left {
            for &j in &right {
                cross += w.get(i, j);
            }
        }
        cost += size * cross;
        let mut joined = Vec::with_capacity(left.len() + right.len());
        let (mut a, mut b) = (left.iter().peekable(), right.iter().peekable());
        while let (Some(&&x), Some(&&y)) = (a.peek(), b.peek()) {
            if x < y {
                joined.push(x);
                a.next();
            } else {
                joined.push(y);
                b.next();
            }
        }
        joined.extend(a);
        joined.extend(b);
        members.push(joined);
    }
    Ok(cost)
}

/// Cosine similarities between the rows of an `n × dim` row-major matrix.
pub fn cosine_similarity_matrix(features: &[f64], dim: usize) -> Result<SimilarityMatrix> {
    if dim == 0 || features.len() % dim != 0 {
        return Err(Error::InvalidArgument(format!(
            "{} values do not form rows of width {dim}",
            features.len()
        )));
    }
    let rows: Vec<&[f64]> = features.chunks(dim).collect();
    let norms: Vec<f64> = rows
        .iter()
        .map(|r| r.iter().map(|x| x * x).sum::<f64>().sqrt())
        .collect();
    if let Some(row) = norms.iter().position(|&x| x == 0.0 || !x.is_finite()) {
        return Err(Error::ZeroNormRow { row });
    }
    Ok(SimilarityMatrix::from_fn(rows.len(), |i, j| {
        let dot: f64 = rows[i].iter().zip(rows[j]).map(|(x, y)| x * y).sum();
        (dot / (norms[i] * norms[j])).clamp(-1.0, 1.0)
    }))
}

/// Standard normal CDF.
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x / std::f64::consts::SQRT_2)
}

/// Probability-derived bias `2 Φ(ℓδ / (√2 σ)) − 1` of a comparison between
/// two pairs whose expected similarities differ by `ℓδ`.
pub fn beta_expected(ell: f64, delta: f64, sigma: f64) -> Result<f64> {
    if !(sigma > 0.0) {
        return Err(Error::InvalidArgument(format!("sigma must be positive, got {sigma}")));
    }
    // 2Φ(x) − 1 = erf(x/√2); evaluated on |x| so the result is exactly odd
    let x = ell * delta / (std::f64::consts::SQRT_2 * sigma);
    let v = libm::erf(x.abs() / std::f64::consts::SQRT_2);
    Ok(if x < 0.0 { -v } else { v })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pair_count_ari(a: &[usize], b: &[usize]) -> f64 {
        let n = a.len();
        let (mut both, mut only_a, mut only_b, mut total) = (0.0, 0.0, 0.0, 0.0);
        for i in 0..n {
            for j in i + 1..n {
                let (sa, sb) = (a[i] == a[j], b[i] == b[j]);
                total += 1.0;
                if sa && sb {
                    both += 1.0;
                }
                if sa {
                    only_a += 1.0;
                }
                if sb {
                    only_b += 1.0;
                }
            }
        }
        let expected = only_a * only_b / total;
        (both - expected) / (0.5 * (only_a + only_b) - expected)
    }

    #[test]
    fn ari_examples() {
        assert_eq!(ari(&[0, 0, 1, 2], &[5, 5, 7, 9]).unwrap(), 1.0);
        assert_eq!(ari(&[0, 1, 2, 3], &[0, 0, 0, 0]).unwrap(), 0.0);
        let (a, b) = ([0, 0, 1, 1], [0, 1, 0, 1]);
        let v = ari(&a, &b).unwrap();
        assert!((v - pair_count_ari(&a, &b)).abs() < 1e-12);
        assert!((v + 0.5).abs() < 1e-12);
        assert!(ari(&[0, 1], &[0]).is_err());
    }

    #[test]
    fn aari_of_truth_and_wrong_tree() {
        let h = GroundTruthHierarchy::new(1, 2).unwrap();
        assert_eq!(aari(&h, &h.ground_truth_dendrogram()).unwrap(), 1.0);
        // pure clusters are {0,1} and {2,3}; merge across them first
        let d = Dendrogram::from_merges(4, vec![(0, 2), (1, 3), (4, 5)]).unwrap();
        let expected = pair_count_ari(&[0, 0, 1, 1], &[0, 1, 0, 1]);
        assert!((aari(&h, &d).unwrap() - expected).abs() < 1e-12);
        assert!(aari(&GroundTruthHierarchy::new(0, 3).unwrap(), &Dendrogram::from_merges(3, vec![(0, 1), (3, 2)]).unwrap()).is_err());
    }

    #[test]
    fn aari_averages_levels() {
        // level 1 right ({0..3},{4..7}), level 2 wrong inside each half
        let h = GroundTruthHierarchy::new(2, 2).unwrap();
        let d = Dendrogram::from_merges(
            8,
            vec![(0, 2), (1, 3), (4, 6), (5, 7), (8, 9), (10, 11), (12, 13)],
        )
        .unwrap();
        let l2 = pair_count_ari(&h.level_labels(2), &d.cut_at(4).unwrap());
        assert!((aari(&h, &d).unwrap() - (1.0 + l2) / 2.0).abs() < 1e-12);
    }

    #[test]
    fn dasgupta_examples() {
        let w = SimilarityMatrix::from_fn(3, |i, j| if (i, j) == (0, 1) { 1.0 } else { 0.0 });
        let good = Dendrogram::from_merges(3, vec![(0, 1), (3, 2)]).unwrap();
        assert_eq!(dasgupta_cost(&w, &good).unwrap(), 2.0);
        for bad in [vec![(0, 2), (3, 1)], vec![(1, 2), (3, 0)]] {
            assert_eq!(dasgupta_cost(&w, &Dendrogram::from_merges(3, bad).unwrap()).unwrap(), 3.0);
        }
        let zero = SimilarityMatrix::from_fn(3, |_, _| 0.0);
        assert_eq!(dasgupta_cost(&zero, &good).unwrap(), 0.0);
        let two = SimilarityMatrix::from_fn(2, |_, _| 0.7);
        assert_eq!(dasgupta_cost(&two, &Dendrogram::from_merges(2, vec![(0, 1)]).unwrap()).unwrap(), 1.4);
    }

    #[test]
    fn cosine_examples() {
        let w = cosine_similarity_matrix(&[1.0, 0.0, 2.0, 0.0, 0.0, 3.0, -1.0, 0.0], 2).unwrap();
        assert_eq!(w.get(0, 1), 1.0);
        assert_eq!(w.get(0, 2), 0.0);
        assert_eq!(w.get(0, 3), -1.0);
        assert!(matches!(
            cosine_similarity_matrix(&[1.0, 0.0, 0.0, 0.0], 2),
            Err(Error::ZeroNormRow { row: 1 })
        ));
    }

    #[test]
    fn beta_properties() {
        assert_eq!(beta_expected(0.0, 0.1, 0.1).unwrap(), 0.0);
        for ell in [1.0, 2.0, 3.0] {
            let b = beta_expected(ell, 0.04, 0.1).unwrap();
            assert_eq!(beta_expected(-ell, 0.04, 0.1).unwrap(), -b);
            assert!(b < beta_expected(ell + 0.5, 0.04, 0.1).unwrap());
        }
        assert!(beta_expected(1.0, 0.1, 0.0).is_err());
        assert!((normal_cdf(1.0) - 0.841_344_746_068_542_9).abs() < 1e-15);
    }
}
