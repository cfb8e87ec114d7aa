//! Generic agglomeration: repeatedly merge the pair of clusters a linkage
//! strategy selects, recording the merges as a dendrogram.

use std::cmp::Ordering;

use crate::dendrogram::{Dendrogram, Merge};
use crate::error::{Error, Result};

/// Disjoint, non-empty item sets. Cluster `c` has id `c`; the engine hands
/// out fresh ids `K, K+1, ...` to merged clusters.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Partition {
    clusters: Vec<Vec<usize>>,
}

impl Partition {
    pub fn new(clusters: Vec<Vec<usize>>) -> Result<Self> {
        let max = clusters.iter().flatten().copied().max().unwrap_or(0);
        let mut seen = vec![false; max + 1];
        for (c, members) in clusters.iter().enumerate() {
            if members.is_empty() {
                return Err(Error::InvalidArgument(format!("cluster {c} is empty")));
            }
            for &i in members {
                if seen[i] {
                    return Err(Error::InvalidArgument(format!(
                        "item {i} appears in more than one cluster"
                    )));
                }
                seen[i] = true;
            }
        }
        let clusters = clusters
            .into_iter()
            .map(|mut m| {
                m.sort_unstable();
                m
            })
            .collect();
        Ok(Partition { clusters })
    }

    pub fn singletons(n: usize) -> Self {
        Partition {
            clusters: (0..n).map(|i| vec![i]).collect(),
        }
    }

    /// Groups items by label, clusters ordered by smallest label value.
    pub fn from_labels(labels: &[usize]) -> Self {
        let mut groups: std::collections::BTreeMap<usize, Vec<usize>> = Default::default();
        for (i, &l) in labels.iter().enumerate() {
            groups.entry(l).or_default().push(i);
        }
        Partition {
            clusters: groups.into_values().collect(),
        }
    }

    pub fn clusters(&self) -> &[Vec<usize>] {
        &self.clusters
    }

    pub fn len(&self) -> usize {
        self.clusters.len()
    }

    pub fn is_empty(&self) -> bool {
        self.clusters.is_empty()
    }

    pub fn n_items(&self) -> usize {
        self.clusters.iter().map(Vec::len).sum()
    }

    /// True when the clusters cover exactly `0..n`.
    pub fn covers(&self, n: usize) -> bool {
        self.n_items() == n && self.clusters.iter().flatten().all(|&i| i < n)
    }

    /// Cluster label per item; requires the partition to cover `0..n`.
    pub fn labels(&self, n: usize) -> Result<Vec<usize>> {
        if !self.covers(n) {
            return Err(Error::MismatchedItems);
        }
        let mut labels = vec![0; n];
        for (c, members) in self.clusters.iter().enumerate() {
            for &i in members {
                labels[i] = c;
            }
        }
        Ok(labels)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Selection {
    /// Active cluster ids to merge.
    pub pair: (usize, usize),
    /// Linkage value of the pair, when the strategy can compute one.
    pub value: Option<f64>,
}

/// Cluster-level similarity, expressed through the argmax pair it induces.
pub trait LinkageStrategy {
    /// Picks the next pair among `active` (sorted ascending ids).
    fn select(&mut self, active: &[usize]) -> Result<Selection>;

    /// Notifies the strategy that `a` and `b` now form cluster `new_id`.
    fn merged(&mut self, a: usize, b: usize, new_id: usize) -> Result<()>;
}

/// Runs agglomeration over `initial` and returns the cluster-level
/// dendrogram, whose leaves are the initial clusters.
pub fn agglomerate_clusters<S: LinkageStrategy + ?Sized>(
    strategy: &mut S,
    initial: &Partition,
) -> Result<Dendrogram> {
    let k = initial.len();
    if k < 2 {
        return Err(Error::InvalidArgument(
            "agglomeration needs at least two initial clusters".into(),
        ));
    }
    let mut active: Vec<usize> = (0..k).collect();
    let mut merges = Vec::with_capacity(k - 1);
    for step in 0..k - 1 {
        let sel = strategy.select(&active)?;
        let (a, b) = sel.pair;
        let pos_a = active.binary_search(&a);
        let pos_b = active.binary_search(&b);
        let (Ok(pa), Ok(pb)) = (pos_a, pos_b) else {
            return Err(Error::ContractViolation(format!(
                "selected ({a},{b}) which is not a pair of active clusters"
            )));
        };
        if pa == pb {
            return Err(Error::ContractViolation(format!(
                "selected cluster {a} twice"
            )));
        }
        let new_id = k + step;
        active.remove(pa.max(pb));
        active.remove(pa.min(pb));
        active.push(new_id);
        merges.push(Merge {
            left: a.min(b),
            right: a.max(b),
            height: sel.value,
        });
        strategy.merged(a, b, new_id)?;
    }
    Dendrogram::new(k, merges)
}

/// Runs agglomeration and expands the result to one leaf per item: members
/// of each initial cluster are first chained in index order.
pub fn agglomerate<S: LinkageStrategy + ?Sized>(
    strategy: &mut S,
    initial: &Partition,
) -> Result<Dendrogram> {
    let clusters = agglomerate_clusters(strategy, initial)?;
    expand(initial, &clusters)
}

/// Expands a dendrogram over clusters into one over the items they contain.
pub fn expand(initial: &Partition, clusters: &Dendrogram) -> Result<Dendrogram> {
    let n = initial.n_items();
    if !initial.covers(n) || clusters.n_leaves() != initial.len() {
        return Err(Error::MismatchedItems);
    }
    let mut merges = Vec::with_capacity(n - 1);
    let mut node_of = Vec::with_capacity(2 * initial.len() - 1);
    for members in initial.clusters() {
        let mut top = members[0];
        for &item in &members[1..] {
            merges.push(Merge {
                left: top,
                right: item,
                height: None,
            });
            top = n + merges.len() - 1;
        }
        node_of.push(top);
    }
    for m in clusters.merges() {
        merges.push(Merge {
            left: node_of[m.left],
            right: node_of[m.right],
            height: m.height,
        });
        node_of.push(n + merges.len() - 1);
    }
    Dendrogram::new(n, merges)
}

/// Argmax over candidate pairs; ties go to the lexicographically smallest
/// `(smaller id, larger id)`.
pub fn lexicographic_argmax<T>(
    candidates: impl IntoIterator<Item = ((usize, usize), T)>,
    mut cmp: impl FnMut(&T, &T) -> Ordering,
) -> Option<((usize, usize), T)> {
    let mut best: Option<((usize, usize), T)> = None;
    for ((a, b), v) in candidates {
        let key = (a.min(b), a.max(b));
        let better = match &best {
            None => true,
            Some((bk, bv)) => match cmp(&v, bv) {
                Ordering::Greater => true,
                Ordering::Equal => key < *bk,
                Ordering::Less => false,
            },
        };
        if better {
            best = Some((key, v));
        }
    }
    best
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Linkage {
    Single,
    Complete,
    Average,
}

/// Scalar similarity usable by [`MatrixLinkage`].
pub trait LinkageValue: Copy + std::fmt::Debug {
    fn zero() -> Self;
    fn cmp_value(&self, other: &Self) -> Ordering;
    fn add(self, other: Self) -> Self;
    /// Compares `sum_a / n_a` against `sum_b / n_b`.
    fn cmp_mean(sum_a: Self, n_a: usize, sum_b: Self, n_b: usize) -> Ordering;
    fn to_f64(self) -> f64;
}

impl LinkageValue for i64 {
    fn zero() -> Self {
        0
    }
    fn cmp_value(&self, other: &Self) -> Ordering {
        self.cmp(other)
    }
    fn add(self, other: Self) -> Self {
        self + other
    }
    fn cmp_mean(sum_a: Self, n_a: usize, sum_b: Self, n_b: usize) -> Ordering {
        (sum_a as i128 * n_b as i128).cmp(&(sum_b as i128 * n_a as i128))
    }
    fn to_f64(self) -> f64 {
        self as f64
    }
}

impl LinkageValue for f64 {
    fn zero() -> Self {
        0.0
    }
    fn cmp_value(&self, other: &Self) -> Ordering {
        self.total_cmp(other)
    }
    fn add(self, other: Self) -> Self {
        self + other
    }
    fn cmp_mean(sum_a: Self, n_a: usize, sum_b: Self, n_b: usize) -> Ordering {
        (sum_a / n_a as f64).total_cmp(&(sum_b / n_b as f64))
    }
    fn to_f64(self) -> f64 {
        self
    }
}

/// Classical single / complete / average linkage over a known item-level
/// similarity, maintained with Lance–Williams updates. Average linkage keeps
/// cross-cluster sums so integer inputs stay exact.
#[derive(Clone, Debug)]
pub struct MatrixLinkage<V> {
    linkage: Linkage,
    /// Slot-indexed cluster values (extreme for SL/CL, cross sum for AL).
    values: Vec<V>,
    sizes: Vec<usize>,
    stride: usize,
    slot_of: Vec<usize>,
}

impl<V: LinkageValue> MatrixLinkage<V> {
    /// `sim(i, j)` is only evaluated for items in different initial clusters.
    pub fn new(linkage: Linkage, initial: &Partition, sim: impl Fn(usize, usize) -> V) -> Self {
        let k = initial.len();
        let clusters = initial.clusters();
        let mut values = Vec::with_capacity(k * k);
        for a in 0..k {
            for b in 0..k {
                if a == b {
                    values.push(V::zero());
                    continue;
                }
                let mut acc: Option<V> = None;
                for &i in &clusters[a] {
                    for &j in &clusters[b] {
                        let v = sim(i, j);
                        acc = Some(match acc {
                            None => v,
                            Some(x) => combine(linkage, x, v),
                        });
                    }
                }
                values.push(acc.expect("clusters are non-empty"));
            }
        }
        MatrixLinkage {
            linkage,
            values,
            sizes: clusters.iter().map(Vec::len).collect(),
            stride: k,
            slot_of: (0..k).collect(),
        }
    }

    #[inline]
    fn value(&self, a: usize, b: usize) -> V {
        self.values[a * self.stride + b]
    }
}

fn combine<V: LinkageValue>(linkage: Linkage, x: V, y: V) -> V {
    match linkage {
        Linkage::Single => {
            if y.cmp_value(&x) == Ordering::Greater {
                y
            } else {
                x
            }
        }
        Linkage::Complete => {
            if y.cmp_value(&x) == Ordering::Less {
                y
            } else {
                x
            }
        }
        Linkage::Average => x.add(y),
    }
}

impl<V: LinkageValue> LinkageStrategy for MatrixLinkage<V> {
    fn select(&mut self, active: &[usize]) -> Result<Selection> {
        let mut cands = Vec::with_capacity(active.len() * active.len() / 2);
        for (x, &a) in active.iter().enumerate() {
            for &b in &active[x + 1..] {
                cands.push(((a, b), (self.slot_of[a], self.slot_of[b])));
            }
        }
        let linkage = self.linkage;
        let best = lexicographic_argmax(cands, |&(a1, b1), &(a2, b2)| match linkage {
            Linkage::Average => V::cmp_mean(
                self.value(a1, b1),
                self.sizes[a1] * self.sizes[b1],
                self.value(a2, b2),
                self.sizes[a2] * self.sizes[b2],
            ),
            _ => self.value(a1, b1).cmp_value(&self.value(a2, b2)),
        })
        .ok_or_else(|| Error::ContractViolation("no pair to merge".into()))?;
        let (sa, sb) = best.1;
        let value = match linkage {
            Linkage::Average => {
                self.value(sa, sb).to_f64() / (self.sizes[sa] * self.sizes[sb]) as f64
            }
            _ => self.value(sa, sb).to_f64(),
        };
        Ok(Selection {
            pair: best.0,
            value: Some(value),
        })
    }

    fn merged(&mut self, a: usize, b: usize, new_id: usize) -> Result<()> {
        let (sa, sb) = (self.slot_of[a], self.slot_of[b]);
        // the merged cluster reuses slot `sa`
        for x in 0..self.stride {
            if x == sa || x == sb {
                continue;
            }
            let v = combine(self.linkage, self.value(sa, x), self.value(sb, x));
            self.values[sa * self.stride + x] = v;
            self.values[x * self.stride + sa] = v;
        }
        self.sizes[sa] += self.sizes[sb];
        if self.slot_of.len() <= new_id {
            self.slot_of.resize(new_id + 1, usize::MAX);
        }
        self.slot_of[new_id] = sa;
        Ok(())
    }
}

/// Classical linkage on a dense similarity, starting from singletons.
pub fn classical_linkage<V: LinkageValue>(
    linkage: Linkage,
    n: usize,
    sim: impl Fn(usize, usize) -> V,
) -> Result<Dendrogram> {
    let initial = Partition::singletons(n);
    let mut strategy = MatrixLinkage::new(linkage, &initial, sim);
    agglomerate(&mut strategy, &initial)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::planted::{generate_planted, PlantedConfig};

    struct Bad;
    impl LinkageStrategy for Bad {
        fn select(&mut self, _: &[usize]) -> Result<Selection> {
            Ok(Selection {
                pair: (0, 0),
                value: None,
            })
        }
        fn merged(&mut self, _: usize, _: usize, _: usize) -> Result<()> {
            Ok(())
        }
    }

    #[test]
    fn invalid_selection_aborts() {
        let p = Partition::singletons(3);
        assert!(matches!(
            agglomerate(&mut Bad, &p),
            Err(Error::ContractViolation(_))
        ));
    }

    #[test]
    fn two_clusters_single_merge() {
        let p = Partition::new(vec![vec![0, 2], vec![1]]).unwrap();
        let mut s = MatrixLinkage::new(Linkage::Average, &p, |_, _| 1.0f64);
        let d = agglomerate(&mut s, &p).unwrap();
        assert_eq!(d.n_leaves(), 3);
        // chain {0,2} first, then join {1}
        assert_eq!((d.merges()[0].left, d.merges()[0].right), (0, 2));
        assert_eq!((d.merges()[1].left, d.merges()[1].right), (3, 1));
    }

    #[test]
    fn noiseless_planted_average_linkage_order() {
        let cfg = PlantedConfig {
            n0: 1,
            levels: 2,
            mu: 0.8,
            delta: 0.1,
            sigma: 0.0,
            seed: 0,
        };
        let (w, _) = generate_planted(&cfg).unwrap();
        let d = classical_linkage(Linkage::Average, 4, |i, j| w.get(i, j)).unwrap();
        let pairs: Vec<_> = d.merges().iter().map(|m| (m.left, m.right)).collect();
        assert_eq!(pairs, vec![(0, 1), (2, 3), (4, 5)]);
    }

    #[test]
    fn ties_prefer_smallest_pair() {
        let d = classical_linkage(Linkage::Single, 4, |_, _| 0i64).unwrap();
        let pairs: Vec<_> = d.merges().iter().map(|m| (m.left, m.right)).collect();
        assert_eq!(pairs, vec![(0, 1), (2, 3), (4, 5)]);
    }

    #[test]
    fn partition_validation() {
        assert!(Partition::new(vec![vec![0], vec![]]).is_err());
        assert!(Partition::new(vec![vec![0, 1], vec![1]]).is_err());
        let p = Partition::from_labels(&[1, 0, 1]);
        assert_eq!(p.clusters(), &[vec![1], vec![0, 2]]);
        assert!(p.covers(3));
    }
}
