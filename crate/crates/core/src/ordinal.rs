//! Single and complete linkage from active comparisons alone: merge-sort all
//! pairs through the oracle, then run classical linkage on the ranks.

use crate::dendrogram::Dendrogram;
use crate::engine::{classical_linkage, Linkage};
use crate::error::{Error, Result};
use crate::oracle::ActiveOracle;
use crate::pairs::{pair_index, PairId};

/// Strict total order over all pairs; rank 0 is the least similar pair.
#[derive(Clone, Debug)]
pub struct PairRankTable {
    n: usize,
    ranks: Vec<u32>,
}

impl PairRankTable {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn rank(&self, p: PairId) -> usize {
        self.ranks[pair_index(self.n, p.a(), p.b())] as usize
    }

    #[inline]
    pub fn rank_of(&self, i: usize, j: usize) -> usize {
        let (a, b) = if i < j { (i, j) } else { (j, i) };
        self.ranks[pair_index(self.n, a, b)] as usize
    }
}

/// Sorts all `C(n,2)` pairs by similarity with a top-down merge sort whose
/// comparisons go through `oracle`.
pub fn rank_all_pairs(oracle: &mut ActiveOracle<'_>, n: usize) -> Result<PairRankTable> {
    if n < 2 {
        return Err(Error::InvalidArgument(format!("need at least 2 items, got {n}")));
    }
    if n != oracle.n() {
        return Err(Error::InvalidArgument(format!(
            "oracle holds {} items, asked to rank {n}",
            oracle.n()
        )));
    }
    let mut order: Vec<usize> = (0..oracle.pairs().len()).collect();
    let mut scratch = order.clone();
    merge_sort(&mut order, &mut scratch, &mut |x, y| oracle.compare_indexed(x, y));
    let mut ranks = vec![0u32; order.len()];
    for (r, &p) in order.iter().enumerate() {
        ranks[p] = r as u32;
    }
    Ok(PairRankTable { n, ranks })
}

/// Ascending by similarity; `beats(x, y)` means `w_x > w_y`.
fn merge_sort(v: &mut [usize], scratch: &mut [usize], beats: &mut impl FnMut(usize, usize) -> bool) {
    let len = v.len();
    if len < 2 {
        return;
    }
    let mid = len / 2;
    {
        let (lo, hi) = v.split_at_mut(mid);
        let (slo, shi) = scratch.split_at_mut(mid);
        merge_sort(lo, slo, beats);
        merge_sort(hi, shi, beats);
    }
    let (mut i, mut j, mut k) = (0, mid, 0);
    while i < mid && j < len {
        if beats(v[i], v[j]) {
            scratch[k] = v[j];
            j += 1;
        } else {
            scratch[k] = v[i];
            i += 1;
        }
        k += 1;
    }
    scratch[k..k + mid - i].copy_from_slice(&v[i..mid]);
    k += mid - i;
    scratch[k..k + len - j].copy_from_slice(&v[j..len]);
    v.copy_from_slice(&scratch[..len]);
}

fn ordinal_linkage(
    linkage: Linkage,
    oracle: &mut ActiveOracle<'_>,
    n: usize,
) -> Result<(Dendrogram, u64)> {
    let before = oracle.query_count();
    let table = rank_all_pairs(oracle, n)?;
    let d = classical_linkage(linkage, n, |i, j| table.rank_of(i, j) as i64)?;
    Ok((d, oracle.query_count() - before))
}

/// Single linkage using only comparisons. Returns the dendrogram and the
/// number of distinct queries it issued.
pub fn single_linkage(oracle: &mut ActiveOracle<'_>, n: usize) -> Result<(Dendrogram, u64)> {
    ordinal_linkage(Linkage::Single, oracle, n)
}

/// Complete linkage using only comparisons.
pub fn complete_linkage(oracle: &mut ActiveOracle<'_>, n: usize) -> Result<(Dendrogram, u64)> {
    ordinal_linkage(Linkage::Complete, oracle, n)
}

/// Merge-sort query bounds for sorting all pairs of `n` items.
pub fn query_bounds(n: usize) -> (u64, u64) {
    let p = crate::pairs::num_pairs(n) as u64;
    let log = if p <= 1 { 0 } else { 64 - (p - 1).leading_zeros() as u64 };
    (p.saturating_sub(1), p * log)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::planted::SimilarityMatrix;

    #[test]
    fn tiny_instances() {
        let w = SimilarityMatrix::from_fn(2, |_, _| 1.0);
        let mut o = ActiveOracle::new(&w).unwrap();
        let t = rank_all_pairs(&mut o, 2).unwrap();
        assert_eq!(t.rank_of(0, 1), 0);
        assert_eq!(o.query_count(), 0);

        let w = SimilarityMatrix::from_fn(3, |i, j| (i + 2 * j) as f64);
        let mut o = ActiveOracle::new(&w).unwrap();
        rank_all_pairs(&mut o, 3).unwrap();
        assert!((2..=6).contains(&o.query_count()));
        assert_eq!(query_bounds(3), (2, 6));
    }

    #[test]
    fn global_max_merges_first() {
        let vals = [((0, 1), 6.0), ((2, 3), 5.0), ((0, 2), 4.0), ((1, 3), 3.0), ((0, 3), 2.0), ((1, 2), 1.0)];
        let w = SimilarityMatrix::from_fn(4, |i, j| vals.iter().find(|v| v.0 == (i, j)).unwrap().1);
        let mut o = ActiveOracle::new(&w).unwrap();
        let (d, _) = single_linkage(&mut o, 4).unwrap();
        assert_eq!((d.merges()[0].left, d.merges()[0].right), (0, 1));
        assert_eq!((d.merges()[1].left, d.merges()[1].right), (2, 3));
    }

    #[test]
    fn complete_linkage_uses_min_cross_similarity() {
        // {0,1} and {2,3} form first; item 4 then joins the cluster whose
        // weakest link to it is strongest.
        let vals = [
            ((0, 1), 10.0),
            ((2, 3), 9.0),
            ((0, 4), 8.0),
            ((1, 4), 1.0),
            ((2, 4), 4.0),
            ((3, 4), 5.0),
            ((0, 2), 0.0),
            ((0, 3), 0.5),
            ((1, 2), 0.2),
            ((1, 3), 0.3),
        ];
        let w = SimilarityMatrix::from_fn(5, |i, j| vals.iter().find(|v| v.0 == (i, j)).unwrap().1);
        let mut o = ActiveOracle::new(&w).unwrap();
        let (cl, _) = complete_linkage(&mut o, 5).unwrap();
        // clusters 5={0,1}, 6={2,3}; CL joins 4 with 6 (min 4 > min 1)
        assert_eq!((cl.merges()[2].left, cl.merges()[2].right), (4, 6));
        let mut o = ActiveOracle::new(&w).unwrap();
        let (sl, _) = single_linkage(&mut o, 5).unwrap();
        // SL joins 4 with {0,1} through w_04 = 8
        assert_eq!((sl.merges()[2].left, sl.merges()[2].right), (4, 5));
    }
}
