//! Quadruplet-based average linkage (4-AL).
//!
//! Observed comparisons are aggregated into a preference between pairs of
//! clusters, and a cluster pair's similarity is its average preference over
//! every other cluster pair. Clusters are merged greedily by that similarity,
//! optionally starting from given initial clusters.

use std::cmp::Ordering;

use num_bigint::BigInt;
use num_rational::{BigRational, Ratio};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rustc_hash::FxHashMap;

use crate::dendrogram::Dendrogram;
use crate::engine::{agglomerate, lexicographic_argmax, LinkageStrategy, Partition, Selection};
use crate::error::{Error, Result};
use crate::oracle::{decode_other, Quadruplet, QuadrupletSet, WIN_BIT};
use crate::planted::GroundTruthHierarchy;

/// How 4-AL's initial clusters are obtained.
#[derive(Clone, Debug, PartialEq)]
pub enum InitialPartitionConfig {
    Singletons,
    /// Chunks of `m` items drawn without replacement inside each planted pure
    /// cluster; a shorter leftover chunk is kept as its own cluster.
    FromGroundTruth { m: usize },
    Given(Partition),
}

impl InitialPartitionConfig {
    pub fn build(
        &self,
        n: usize,
        hierarchy: Option<&GroundTruthHierarchy>,
        seed: u64,
    ) -> Result<Partition> {
        let p = match self {
            InitialPartitionConfig::Singletons => Partition::singletons(n),
            InitialPartitionConfig::FromGroundTruth { m } => {
                let h = hierarchy.ok_or_else(|| {
                    Error::InvalidConfig("ground-truth initial clusters need a planted hierarchy".into())
                })?;
                if *m == 0 || *m > h.n0() {
                    return Err(Error::InvalidConfig(format!(
                        "initial cluster size {m} must be in 1..={}",
                        h.n0()
                    )));
                }
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let mut clusters = Vec::new();
                for g in 0..h.num_pure_clusters() {
                    let mut items: Vec<usize> = h.pure_cluster(g).collect();
                    items.shuffle(&mut rng);
                    clusters.extend(items.chunks(*m).map(<[usize]>::to_vec));
                }
                Partition::new(clusters)?
            }
            InitialPartitionConfig::Given(p) => p.clone(),
        };
        if !p.covers(n) {
            return Err(Error::MismatchedItems);
        }
        Ok(p)
    }
}

/// Index of the unordered pair `(x, y)`, `x < y < k`.
#[inline]
fn tri_index(k: usize, x: usize, y: usize) -> usize {
    debug_assert!(x < y && y < k);
    x * (2 * k - x - 1) / 2 + (y - x - 1)
}

/// Net comparison counts between pairs of clusters of a fixed partition.
///
/// Entry `{(p,q),(r,s)}` is the number of observations whose winner straddles
/// clusters `p, q` and whose loser straddles `r, s`, minus the reverse.
/// Observations with both items of a side in one cluster are ignored.
#[derive(Clone, Debug)]
pub struct ClusterPreferenceTable {
    k: usize,
    sizes: Vec<usize>,
    counts: FxHashMap<(u32, u32), i64>,
}

impl ClusterPreferenceTable {
    pub fn build(qs: &QuadrupletSet, partition: &Partition) -> Result<Self> {
        let n = qs.n();
        let labels = partition.labels(n)?;
        let k = partition.len();
        let code = |pair: crate::pairs::PairId| -> Option<u32> {
            let (x, y) = (labels[pair.a()], labels[pair.b()]);
            match x.cmp(&y) {
                Ordering::Equal => None,
                Ordering::Less => Some(tri_index(k, x, y) as u32),
                Ordering::Greater => Some(tri_index(k, y, x) as u32),
            }
        };
        let mut counts: FxHashMap<(u32, u32), i64> = FxHashMap::default();
        for Quadruplet { winner, loser } in qs.iter() {
            let (Some(u), Some(v)) = (code(winner), code(loser)) else {
                continue;
            };
            match u.cmp(&v) {
                Ordering::Equal => {}
                Ordering::Less => *counts.entry((u, v)).or_insert(0) += 1,
                Ordering::Greater => *counts.entry((v, u)).or_insert(0) -= 1,
            }
        }
        counts.retain(|_, c| *c != 0);
        Ok(ClusterPreferenceTable {
            k,
            sizes: partition.clusters().iter().map(Vec::len).collect(),
            counts,
        })
    }

    pub fn num_clusters(&self) -> usize {
        self.k
    }

    pub fn size(&self, c: usize) -> usize {
        self.sizes[c]
    }

    fn check(&self, p: usize, q: usize) -> Result<()> {
        for c in [p, q] {
            if c >= self.k {
                return Err(Error::IndexOutOfRange { index: c, n: self.k });
            }
        }
        if p == q {
            return Err(Error::InvalidArgument(format!(
                "cluster {p} paired with itself"
            )));
        }
        Ok(())
    }

    fn pair_code(&self, p: usize, q: usize) -> u32 {
        tri_index(self.k, p.min(q), p.max(q)) as u32
    }

    /// Signed count `C[(p,q),(r,s)]`.
    pub fn count(&self, p: usize, q: usize, r: usize, s: usize) -> Result<i64> {
        self.check(p, q)?;
        self.check(r, s)?;
        let (u, v) = (self.pair_code(p, q), self.pair_code(r, s));
        Ok(match u.cmp(&v) {
            Ordering::Equal => 0,
            Ordering::Less => self.counts.get(&(u, v)).copied().unwrap_or(0),
            Ordering::Greater => -self.counts.get(&(v, u)).copied().unwrap_or(0),
        })
    }

    /// Exact preference of `(p,q)` over `(r,s)`: the count normalised by
    /// `|G_p||G_q||G_r||G_s|`.
    pub fn preference(&self, p: usize, q: usize, r: usize, s: usize) -> Result<Ratio<i64>> {
        let c = self.count(p, q, r, s)?;
        let denom = (self.sizes[p] * self.sizes[q] * self.sizes[r] * self.sizes[s]) as i64;
        Ok(Ratio::new(c, denom))
    }

    /// Exact similarity of clusters `p` and `q`: the average preference of
    /// `(p,q)` over all ordered pairs `(r,s)`, `r != s`.
    pub fn similarity(&self, p: usize, q: usize) -> Result<BigRational> {
        self.check(p, q)?;
        let mut total = BigRational::from_integer(BigInt::from(0));
        let u = self.pair_code(p, q);
        for (&(a, b), &c) in &self.counts {
            let (other, sign) = if a == u {
                (b, 1)
            } else if b == u {
                (a, -1)
            } else {
                continue;
            };
            let (r, s) = self.pair_of_code(other as usize);
            // (r,s) and (s,r) both appear in the ordered sum
            let denom = (self.sizes[p] * self.sizes[q] * self.sizes[r] * self.sizes[s]) as i64;
            total += BigRational::new(BigInt::from(2 * sign * c), BigInt::from(denom));
        }
        let k = self.k as i64;
        Ok(total / BigRational::from_integer(BigInt::from(k * (k - 1))))
    }

    fn pair_of_code(&self, code: usize) -> (usize, usize) {
        let mut x = 0;
        let mut start = 0;
        loop {
            let row = self.k - x - 1;
            if code < start + row {
                return (x, x + 1 + code - start);
            }
            start += row;
            x += 1;
        }
    }

    /// Sum of `|C|` over ordered pair-of-pair entries.
    pub fn total_abs(&self) -> i64 {
        // each stored unordered entry stands for 4 ordered cluster pairs on
        // each side; report per unordered cluster pair
        self.counts.values().map(|c| 2 * c.abs()).sum()
    }
}

fn to_f64(r: &BigRational) -> f64 {
    use num_traits::ToPrimitive;
    r.to_f64().unwrap_or(f64::NAN)
}

/// Preference of cluster pair `(p,q)` over `(r,s)` for a partition.
pub fn preference(
    qs: &QuadrupletSet,
    partition: &Partition,
    p: usize,
    q: usize,
    r: usize,
    s: usize,
) -> Result<f64> {
    let t = ClusterPreferenceTable::build(qs, partition)?;
    let v = t.preference(p, q, r, s)?;
    Ok(*v.numer() as f64 / *v.denom() as f64)
}

/// Similarity of clusters `p` and `q` for a partition.
pub fn cluster_similarity(
    qs: &QuadrupletSet,
    partition: &Partition,
    p: usize,
    q: usize,
) -> Result<f64> {
    let t = ClusterPreferenceTable::build(qs, partition)?;
    Ok(to_f64(&t.similarity(p, q)?))
}

/// Scores are fixed point with this many fractional bits.
const FRAC_BITS: u32 = 64;
/// Above this many cluster pairs the dense aggregated table is not used.
const MAX_TABLE_PAIRS: usize = 4096;

/// 4-AL as a [`LinkageStrategy`].
///
/// Each round rescans the observations, mapping items to their current
/// clusters. Once the number of cluster pairs is small enough, observations
/// are aggregated into a dense cluster-pair table which is coarsened at each
/// merge instead. Scores accumulate in exact fixed-point integers, so both
/// paths give identical values; pairs whose scores differ by less than the
/// rounding bound of the weights count as ties.
pub struct FourAlStrategy<'q> {
    qs: &'q QuadrupletSet,
    /// Cluster slot of every item; a merged cluster keeps its first slot.
    slot_of_item: Vec<u32>,
    members: Vec<Vec<usize>>,
    sizes: Vec<usize>,
    slot_of_id: Vec<usize>,
    active_slots: Vec<usize>,
    table: Option<DenseTable>,
    tie_tolerance: i128,
}

struct DenseTable {
    /// Active slots defining the pair indexing.
    slots: Vec<usize>,
    kp: usize,
    net: Vec<i32>,
}

impl<'q> FourAlStrategy<'q> {
    pub fn new(qs: &'q QuadrupletSet, initial: &Partition) -> Result<Self> {
        let n = qs.n();
        let labels = initial.labels(n)?;
        let k = initial.len();
        Ok(FourAlStrategy {
            qs,
            slot_of_item: labels.iter().map(|&l| l as u32).collect(),
            members: initial.clusters().to_vec(),
            sizes: initial.clusters().iter().map(Vec::len).collect(),
            slot_of_id: (0..k).collect(),
            active_slots: (0..k).collect(),
            table: None,
            tie_tolerance: qs.len() as i128 / 2 + 1,
        })
    }

    fn pair_sizes(&self, slots: &[usize]) -> Vec<u64> {
        let k = slots.len();
        let mut out = Vec::with_capacity(k * (k.saturating_sub(1)) / 2);
        for x in 0..k {
            for y in x + 1..k {
                out.push((self.sizes[slots[x]] * self.sizes[slots[y]]) as u64);
            }
        }
        out
    }

    /// Cluster-pair code of every item pair under the current partition.
    fn item_pair_codes(&self, slots: &[usize]) -> Vec<u32> {
        let k = slots.len();
        let mut pos = vec![u32::MAX; self.sizes.len()];
        for (i, &s) in slots.iter().enumerate() {
            pos[s] = i as u32;
        }
        self.qs
            .pairs()
            .pairs()
            .iter()
            .map(|p| {
                let (x, y) = (
                    pos[self.slot_of_item[p.a()] as usize] as usize,
                    pos[self.slot_of_item[p.b()] as usize] as usize,
                );
                match x.cmp(&y) {
                    Ordering::Equal => u32::MAX,
                    Ordering::Less => tri_index(k, x, y) as u32,
                    Ordering::Greater => tri_index(k, y, x) as u32,
                }
            })
            .collect()
    }

    fn raw_scores(&self, slots: &[usize], weights: &[i128]) -> Vec<i128> {
        let codes = self.item_pair_codes(slots);
        let mut scores = vec![0i128; weights.len()];
        for (p, &cp) in codes.iter().enumerate() {
            if cp == u32::MAX {
                continue;
            }
            let row = self.qs.row(p);
            let start = row.partition_point(|&e| decode_other(e) < p);
            let wp = weights[cp as usize];
            let mut own = 0i128;
            for &e in &row[start..] {
                let cq = codes[decode_other(e)];
                if cq == u32::MAX {
                    continue;
                }
                let wq = weights[cq as usize];
                if e & WIN_BIT != 0 {
                    // the other pair won
                    scores[cq as usize] += wp;
                    own -= wq;
                } else {
                    scores[cq as usize] -= wp;
                    own += wq;
                }
            }
            scores[cp as usize] += own;
        }
        scores
    }

    fn build_table(&self, slots: &[usize]) -> DenseTable {
        let codes = self.item_pair_codes(slots);
        let k = slots.len();
        let kp = k * (k - 1) / 2;
        let mut net = vec![0i32; kp * kp];
        for (wi, li) in self.qs.iter_indexed() {
            let (u, v) = (codes[wi], codes[li]);
            if u == u32::MAX || v == u32::MAX || u == v {
                continue;
            }
            net[u as usize * kp + v as usize] += 1;
            net[v as usize * kp + u as usize] -= 1;
        }
        DenseTable {
            slots: slots.to_vec(),
            kp,
            net,
        }
    }

    fn table_scores(table: &DenseTable, weights: &[i128]) -> Vec<i128> {
        let kp = table.kp;
        (0..kp)
            .map(|u| {
                table.net[u * kp..(u + 1) * kp]
                    .iter()
                    .zip(weights)
                    .map(|(&c, &w)| c as i128 * w)
                    .sum()
            })
            .collect()
    }

    /// Re-indexes the table after slot `gone` was folded into slot `kept`.
    fn coarsen(table: &DenseTable, kept: usize, gone: usize) -> DenseTable {
        let old = &table.slots;
        let slots: Vec<usize> = old.iter().copied().filter(|&s| s != gone).collect();
        let k = slots.len();
        let kp = k * (k - 1) / 2;
        let mut pos = FxHashMap::default();
        for (i, &s) in slots.iter().enumerate() {
            pos.insert(s, i);
        }
        let ko = old.len();
        let mut remap = vec![u32::MAX; table.kp];
        for x in 0..ko {
            for y in x + 1..ko {
                let map = |s: usize| pos[&if s == gone { kept } else { s }];
                let (a, b) = (map(old[x]), map(old[y]));
                if a != b {
                    remap[tri_index(ko, x, y)] = tri_index(k, a.min(b), a.max(b)) as u32;
                }
            }
        }
        let mut net = vec![0i32; kp * kp];
        for u in 0..table.kp {
            let nu = remap[u];
            if nu == u32::MAX {
                continue;
            }
            for v in 0..table.kp {
                let nv = remap[v];
                if nv == u32::MAX || nv == nu {
                    continue;
                }
                net[nu as usize * kp + nv as usize] += table.net[u * table.kp + v];
            }
        }
        DenseTable { slots, kp, net }
    }
}

impl LinkageStrategy for FourAlStrategy<'_> {
    fn select(&mut self, active: &[usize]) -> Result<Selection> {
        let slots: Vec<usize> = active.iter().map(|&id| self.slot_of_id[id]).collect();
        let mut sorted_slots = slots.clone();
        sorted_slots.sort_unstable();
        debug_assert_eq!(sorted_slots, self.active_slots);
        let k = sorted_slots.len();
        let kp = k * (k - 1) / 2;
        let pair_sizes = self.pair_sizes(&sorted_slots);
        let weights: Vec<i128> = pair_sizes
            .iter()
            .map(|&sz| {
                let one = 1i128 << FRAC_BITS;
                (one + sz as i128 / 2) / sz as i128
            })
            .collect();

        if self.table.is_none() && kp <= MAX_TABLE_PAIRS && kp * kp <= self.qs.len().max(1) {
            self.table = Some(self.build_table(&sorted_slots));
        }
        let scores = match &self.table {
            Some(t) => {
                debug_assert_eq!(t.slots, sorted_slots);
                Self::table_scores(t, &weights)
            }
            None => self.raw_scores(&sorted_slots, &weights),
        };

        let mut pos = vec![usize::MAX; self.sizes.len()];
        for (i, &s) in sorted_slots.iter().enumerate() {
            pos[s] = i;
        }
        let tol = self.tie_tolerance;
        let mut cands = Vec::with_capacity(kp);
        for (x, &a) in active.iter().enumerate() {
            for &b in &active[x + 1..] {
                let (pa, pb) = (pos[self.slot_of_id[a]], pos[self.slot_of_id[b]]);
                let code = tri_index(k, pa.min(pb), pa.max(pb));
                cands.push(((a, b), (scores[code], pair_sizes[code] as i128)));
            }
        }
        // compare score_u / size_u with a rounding allowance
        let best = lexicographic_argmax(cands, |&(su, nu), &(sv, nv)| {
            let diff = su * nv - sv * nu;
            if diff.abs() <= tol * (nu + nv) {
                Ordering::Equal
            } else {
                diff.cmp(&0)
            }
        })
        .ok_or_else(|| Error::ContractViolation("no pair to merge".into()))?;
        let (score, size) = best.1;
        let value = if k >= 2 {
            score as f64 / (1u128 << FRAC_BITS) as f64 * 2.0 / ((k * (k - 1)) as f64 * size as f64)
        } else {
            0.0
        };
        Ok(Selection {
            pair: best.0,
            value: Some(value),
        })
    }

    fn merged(&mut self, a: usize, b: usize, new_id: usize) -> Result<()> {
        let (sa, sb) = (self.slot_of_id[a], self.slot_of_id[b]);
        let (kept, gone) = (sa.min(sb), sa.max(sb));
        let moved = std::mem::take(&mut self.members[gone]);
        for &i in &moved {
            self.slot_of_item[i] = kept as u32;
        }
        self.members[kept].extend(moved);
        self.sizes[kept] += self.sizes[gone];
        self.sizes[gone] = 0;
        self.active_slots.retain(|&s| s != gone);
        if self.slot_of_id.len() <= new_id {
            self.slot_of_id.resize(new_id + 1, usize::MAX);
        }
        self.slot_of_id[new_id] = kept;
        if let Some(t) = &self.table {
            self.table = Some(Self::coarsen(t, kept, gone));
        }
        Ok(())
    }
}

/// Runs 4-AL from `initial` and returns the item-level dendrogram.
pub fn four_al(qs: &QuadrupletSet, initial: &Partition) -> Result<Dendrogram> {
    if initial.len() < 2 {
        return Err(Error::InvalidArgument("4-AL needs at least two initial clusters".into()));
    }
    let mut strategy = FourAlStrategy::new(qs, initial)?;
    agglomerate(&mut strategy, initial)
}

/// Outcome of [`four_al_checked`].
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct MergeConsistencyReport {
    pub merges_checked: usize,
    pub identities_checked: usize,
    pub violations: Vec<String>,
}

/// Wraps a strategy and, after every merge, rebuilds the preference table
/// from scratch and checks it against the previous one: the preference of a
/// merged cluster is the size-weighted mean of its parts' preferences.
/// Antisymmetry and zero self-preference are checked on every partition.
struct Checking<'q> {
    inner: FourAlStrategy<'q>,
    qs: &'q QuadrupletSet,
    clusters: Vec<(usize, Vec<usize>)>,
    table: ClusterPreferenceTable,
    report: MergeConsistencyReport,
}

impl Checking<'_> {
    fn partition(&self) -> Result<Partition> {
        Partition::new(self.clusters.iter().map(|c| c.1.clone()).collect())
    }

    fn check_symmetries(&mut self) -> Result<()> {
        let k = self.table.num_clusters();
        for p in 0..k {
            for q in 0..k {
                if p == q {
                    continue;
                }
                if self.table.preference(p, q, p, q)? != Ratio::from_integer(0) {
                    self.report.violations.push(format!("self preference of ({p},{q}) is non-zero"));
                }
                for r in 0..k {
                    for s in 0..k {
                        if r == s {
                            continue;
                        }
                        if self.table.preference(p, q, r, s)? != -self.table.preference(r, s, p, q)? {
                            self.report
                                .violations
                                .push(format!("antisymmetry fails for ({p},{q}) vs ({r},{s})"));
                        }
                    }
                }
            }
        }
        Ok(())
    }
}

impl LinkageStrategy for Checking<'_> {
    fn select(&mut self, active: &[usize]) -> Result<Selection> {
        self.inner.select(active)
    }

    fn merged(&mut self, a: usize, b: usize, new_id: usize) -> Result<()> {
        self.inner.merged(a, b, new_id)?;
        let pos = |id: usize, cl: &[(usize, Vec<usize>)]| cl.iter().position(|c| c.0 == id).unwrap();
        let (pa, pb) = (pos(a, &self.clusters), pos(b, &self.clusters));
        let old = &self.table;
        let (size_a, size_b) = (old.size(pa) as i64, old.size(pb) as i64);
        let survivors: Vec<usize> = (0..self.clusters.len()).filter(|&c| c != pa && c != pb).collect();

        let mut merged_members = self.clusters[pa].1.clone();
        merged_members.extend(&self.clusters[pb].1);
        let mut next: Vec<(usize, Vec<usize>)> = survivors
            .iter()
            .map(|&c| self.clusters[c].clone())
            .collect();
        next.push((new_id, merged_members));
        let next_partition = Partition::new(next.iter().map(|c| c.1.clone()).collect())?;
        let new_table = ClusterPreferenceTable::build(self.qs, &next_partition)?;
        let m = next.len() - 1;

        for (g2_new, &g2) in survivors.iter().enumerate() {
            for (g3_new, &g3) in survivors.iter().enumerate() {
                for (g4_new, &g4) in survivors.iter().enumerate() {
                    if g3 == g4 {
                        continue;
                    }
                    let lhs = new_table.preference(m, g2_new, g3_new, g4_new)?;
                    let rhs = (old.preference(pa, g2, g3, g4)? * size_a
                        + old.preference(pb, g2, g3, g4)? * size_b)
                        / (size_a + size_b);
                    self.report.identities_checked += 1;
                    if lhs != rhs {
                        self.report.violations.push(format!(
                            "merge into {new_id}: W_Q(merged,{g2}|{g3},{g4}) = {lhs} but parts give {rhs}"
                        ));
                    }
                }
            }
        }
        self.report.merges_checked += 1;
        self.clusters = next;
        self.table = new_table;
        self.check_symmetries()
    }
}

/// [`four_al`] with the merge-consistency and antisymmetry identities
/// checked against freshly rebuilt preference tables after every merge.
pub fn four_al_checked(
    qs: &QuadrupletSet,
    initial: &Partition,
) -> Result<(Dendrogram, MergeConsistencyReport)> {
    let mut checking = Checking {
        inner: FourAlStrategy::new(qs, initial)?,
        qs,
        clusters: initial.clusters().iter().cloned().enumerate().collect(),
        table: ClusterPreferenceTable::build(qs, initial)?,
        report: MergeConsistencyReport::default(),
    };
    checking.check_symmetries()?;
    let _ = checking.partition()?;
    let d = agglomerate(&mut checking, initial)?;
    Ok((d, checking.report))
}
