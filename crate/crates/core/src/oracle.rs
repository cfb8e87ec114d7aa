//! Access to similarities through quadruplet comparisons only: an active
//! oracle with query accounting, and passively observed comparison sets.

use std::cmp::Ordering;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rustc_hash::{FxHashMap, FxHashSet};

use crate::error::{Error, Result};
use crate::pairs::{num_pairs, PairId, PairIndexer};
use crate::planted::SimilarityMatrix;

/// "`winner` is more similar than `loser`", i.e. `w_winner > w_loser`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Quadruplet {
    pub winner: PairId,
    pub loser: PairId,
}

impl Quadruplet {
    pub fn new(winner: PairId, loser: PairId) -> Result<Self> {
        if winner == loser {
            return Err(Error::MalformedComparison(format!(
                "pair {winner} compared with itself"
            )));
        }
        Ok(Quadruplet { winner, loser })
    }
}

/// True comparison outcome: `w_p > w_q`, ties broken towards the
/// lexicographically smaller pair.
#[inline]
pub fn pair_beats(w: &SimilarityMatrix, p: PairId, q: PairId) -> bool {
    match w.get(p.a(), p.b()).total_cmp(&w.get(q.a(), q.b())) {
        Ordering::Greater => true,
        Ordering::Less => false,
        Ordering::Equal => p < q,
    }
}

/// Answers quadruplet queries against a hidden similarity matrix and counts
/// distinct queries. Repeated queries are served from a cache.
pub struct ActiveOracle<'w> {
    w: &'w SimilarityMatrix,
    pairs: PairIndexer,
    // key << 2 | outcome, see `Outcome`
    cache: FxHashSet<u64>,
    query_count: u64,
}

#[derive(Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
enum Outcome {
    HiWins = 0,
    LoWins = 1,
    Tie = 2,
}

impl<'w> ActiveOracle<'w> {
    pub fn new(w: &'w SimilarityMatrix) -> Result<Self> {
        Ok(ActiveOracle {
            pairs: PairIndexer::new(w.n())?,
            w,
            cache: FxHashSet::default(),
            query_count: 0,
        })
    }

    pub fn n(&self) -> usize {
        self.w.n()
    }

    pub fn pairs(&self) -> &PairIndexer {
        &self.pairs
    }

    /// Number of distinct queries answered so far.
    pub fn query_count(&self) -> u64 {
        self.query_count
    }

    pub fn reserve(&mut self, additional: usize) {
        self.cache.reserve(additional);
    }

    fn check(&self, p: PairId, q: PairId) -> Result<()> {
        self.pairs.check(p)?;
        self.pairs.check(q)?;
        if p == q {
            return Err(Error::MalformedComparison(format!(
                "pair {p} compared with itself"
            )));
        }
        Ok(())
    }

    /// Does `w_p > w_q`? Ties go to the lexicographically smaller pair.
    pub fn compare(&mut self, p: PairId, q: PairId) -> Result<bool> {
        self.check(p, q)?;
        Ok(self.compare_indexed(self.pairs.index(p), self.pairs.index(q)))
    }

    /// Three-way answer: `Some(w_p > w_q)`, or `None` when the similarities
    /// are equal. Shares the cache and the query count with
    /// [`compare`](Self::compare).
    pub fn compare_strict(&mut self, p: PairId, q: PairId) -> Result<Option<bool>> {
        self.check(p, q)?;
        Ok(self.compare_strict_indexed(self.pairs.index(p), self.pairs.index(q)))
    }

    /// [`compare`](Self::compare) on lexicographic pair indices.
    pub fn compare_indexed(&mut self, p: usize, q: usize) -> bool {
        // a tie goes to the smaller index, which is the smaller pair
        self.compare_strict_indexed(p, q).unwrap_or(p < q)
    }

    /// [`compare_strict`](Self::compare_strict) on pair indices.
    pub fn compare_strict_indexed(&mut self, p: usize, q: usize) -> Option<bool> {
        debug_assert_ne!(p, q);
        let (lo, hi) = if p < q { (p, q) } else { (q, p) };
        let key = ((lo as u64) * self.pairs.len() as u64 + hi as u64) << 2;
        let outcome = [Outcome::LoWins, Outcome::HiWins, Outcome::Tie]
            .into_iter()
            .find(|&o| self.cache.contains(&(key | o as u64)))
            .unwrap_or_else(|| {
                let (a, b) = (self.pairs.pair(lo), self.pairs.pair(hi));
                let o = match self.w.get(a.a(), a.b()).total_cmp(&self.w.get(b.a(), b.b())) {
                    Ordering::Greater => Outcome::LoWins,
                    Ordering::Less => Outcome::HiWins,
                    Ordering::Equal => Outcome::Tie,
                };
                self.cache.insert(key | o as u64);
                self.query_count += 1;
                o
            });
        match outcome {
            Outcome::Tie => None,
            o => Some((o == Outcome::LoWins) == (p == lo)),
        }
    }
}

pub(crate) const WIN_BIT: u32 = 1 << 31;

/// Passively observed comparisons, indexed by reference pair.
///
/// Row `p` lists every observed comparison involving pair `p` as
/// `(other pair, sign)`, sorted by the other pair, where sign `+1` means the
/// other pair is the more similar one. Each observation appears in both rows.
#[derive(Clone, Debug)]
pub struct QuadrupletSet {
    pairs: PairIndexer,
    offsets: Vec<usize>,
    entries: Vec<u32>,
    len: usize,
}

impl QuadrupletSet {
    pub fn empty(n: usize) -> Result<Self> {
        let pairs = PairIndexer::new(n)?;
        Ok(QuadrupletSet {
            offsets: vec![0; pairs.len() + 1],
            pairs,
            entries: Vec::new(),
            len: 0,
        })
    }

    /// Builds a set from raw observations. Repeats collapse; contradicting
    /// orientations of the same pair-of-pairs are settled by majority and
    /// dropped on a tie.
    pub fn from_observations(
        n: usize,
        observations: impl IntoIterator<Item = Quadruplet>,
    ) -> Result<Self> {
        let pairs = PairIndexer::new(n)?;
        let mut votes: FxHashMap<(u32, u32), i64> = FxHashMap::default();
        for q in observations {
            pairs.check(q.winner)?;
            pairs.check(q.loser)?;
            if q.winner == q.loser {
                return Err(Error::MalformedComparison(format!(
                    "pair {} compared with itself",
                    q.winner
                )));
            }
            let (wi, li) = (pairs.index(q.winner) as u32, pairs.index(q.loser) as u32);
            let (key, vote) = if wi < li { ((wi, li), 1) } else { ((li, wi), -1) };
            *votes.entry(key).or_insert(0) += vote;
        }
        let mut oriented: Vec<(u32, u32, bool)> = votes
            .into_iter()
            .filter(|&(_, v)| v != 0)
            .map(|((lo, hi), v)| (lo, hi, v > 0))
            .collect();
        oriented.sort_unstable();

        let mut degree = vec![0usize; pairs.len()];
        for &(lo, hi, _) in &oriented {
            degree[lo as usize] += 1;
            degree[hi as usize] += 1;
        }
        let offsets = prefix_offsets(&degree);
        let mut cursor = offsets.clone();
        let mut entries = vec![0u32; offsets[pairs.len()]];
        for &(lo, hi, lo_wins) in &oriented {
            push_observation(&mut entries, &mut cursor, lo, hi, lo_wins);
        }
        for p in 0..pairs.len() {
            entries[offsets[p]..offsets[p + 1]].sort_unstable_by_key(|e| e & !WIN_BIT);
        }
        Ok(QuadrupletSet {
            pairs,
            offsets,
            entries,
            len: oriented.len(),
        })
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.pairs.n()
    }

    /// Number of observations.
    #[inline]
    pub fn len(&self) -> usize {
        self.len
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn pairs(&self) -> &PairIndexer {
        &self.pairs
    }

    /// Raw row for pair index `p`: entries are `other | WIN_BIT` when the
    /// other pair won.
    #[inline]
    pub(crate) fn row(&self, p: usize) -> &[u32] {
        &self.entries[self.offsets[p]..self.offsets[p + 1]]
    }

    /// Observed comparisons against `p`, as `(other, sign)` with sign `+1`
    /// when `other` is more similar than `p`.
    pub fn comparisons_with(&self, p: PairId) -> impl Iterator<Item = (PairId, i8)> + '_ {
        self.row(self.pairs.index(p))
            .iter()
            .map(move |&e| (self.pairs.pair(decode_other(e)), decode_sign(e)))
    }

    /// `Some(true)` when "`p` beats `q`" was observed, `Some(false)` for the
    /// reverse, `None` when the pair-of-pairs was not observed.
    pub fn orientation(&self, p: PairId, q: PairId) -> Option<bool> {
        if p.b() >= self.n() || q.b() >= self.n() || p == q {
            return None;
        }
        self.orientation_indexed(self.pairs.index(p), self.pairs.index(q))
    }

    #[inline]
    pub(crate) fn orientation_indexed(&self, p: usize, q: usize) -> Option<bool> {
        let row = self.row(p);
        row.binary_search_by_key(&(q as u32), |e| e & !WIN_BIT)
            .ok()
            .map(|k| row[k] & WIN_BIT == 0)
    }

    pub fn contains(&self, q: &Quadruplet) -> bool {
        self.orientation(q.winner, q.loser) == Some(true)
    }

    /// Every observation once, ordered by its lexicographically smaller pair.
    pub fn iter(&self) -> impl Iterator<Item = Quadruplet> + '_ {
        self.iter_indexed().map(|(w, l)| Quadruplet {
            winner: self.pairs.pair(w),
            loser: self.pairs.pair(l),
        })
    }

    /// Every observation once as `(winner index, loser index)`.
    pub fn iter_indexed(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        (0..self.pairs.len()).flat_map(move |p| {
            let row = self.row(p);
            let start = row.partition_point(|e| ((e & !WIN_BIT) as usize) < p);
            row[start..].iter().map(move |&e| {
                let q = decode_other(e);
                if e & WIN_BIT != 0 {
                    (q, p)
                } else {
                    (p, q)
                }
            })
        })
    }
}

#[inline]
pub(crate) fn decode_other(e: u32) -> usize {
    (e & !WIN_BIT) as usize
}

#[inline]
pub(crate) fn decode_sign(e: u32) -> i8 {
    if e & WIN_BIT != 0 {
        1
    } else {
        -1
    }
}

fn prefix_offsets(degree: &[usize]) -> Vec<usize> {
    let mut offsets = Vec::with_capacity(degree.len() + 1);
    let mut acc = 0;
    offsets.push(0);
    for d in degree {
        acc += d;
        offsets.push(acc);
    }
    offsets
}

#[inline]
fn push_observation(entries: &mut [u32], cursor: &mut [usize], lo: u32, hi: u32, lo_wins: bool) {
    let (to_lo, to_hi) = if lo_wins { (hi, lo | WIN_BIT) } else { (hi | WIN_BIT, lo) };
    entries[cursor[lo as usize]] = to_lo;
    cursor[lo as usize] += 1;
    entries[cursor[hi as usize]] = to_hi;
    cursor[hi as usize] += 1;
}

/// Visits a Bernoulli(`prob`) subset of the pairs-of-pairs `(lo, hi)`,
/// `lo < hi < n_pairs`, in lexicographic order, using geometric skips.
fn for_each_sampled(n_pairs: usize, prob: f64, seed: u64, mut visit: impl FnMut(usize, usize)) {
    if n_pairs < 2 || prob <= 0.0 {
        return;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let log_q = (1.0 - prob).ln();
    let (mut lo, mut hi) = (0usize, 1usize);
    loop {
        let mut skip = if prob >= 1.0 {
            0u64
        } else {
            let u: f64 = 1.0 - rng.random::<f64>(); // (0, 1]
            let s = (u.ln() / log_q).floor();
            if s >= u64::MAX as f64 {
                return;
            }
            s as u64
        };
        while skip > 0 {
            let left = (n_pairs - hi) as u64;
            if skip < left {
                hi += skip as usize;
                skip = 0;
            } else {
                skip -= left;
                lo += 1;
                hi = lo + 1;
                if hi >= n_pairs {
                    return;
                }
            }
        }
        visit(lo, hi);
        hi += 1;
        if hi >= n_pairs {
            lo += 1;
            hi = lo + 1;
            if hi >= n_pairs {
                return;
            }
        }
    }
}

/// Observes each unordered pair-of-pairs independently with probability
/// `prob`, oriented by the hidden similarities. Pairs may share an item.
/// A sampled pair-of-pairs with exactly equal similarities carries no strict
/// preference and is not recorded.
pub fn sample_passive(w: &SimilarityMatrix, prob: f64, seed: u64) -> Result<QuadrupletSet> {
    if !(0.0..=1.0).contains(&prob) {
        return Err(Error::InvalidArgument(format!(
            "sampling probability {prob} is outside [0, 1]"
        )));
    }
    let pairs = PairIndexer::new(w.n())?;
    let n_pairs = pairs.len();

    // Two passes over the same stream: degrees first, then the fill.
    let mut degree = vec![0usize; n_pairs];
    let mut len = 0usize;
    let pair_list = pairs.pairs();
    let value = |p: usize| w.get(pair_list[p].a(), pair_list[p].b());
    for_each_sampled(n_pairs, prob, seed, |lo, hi| {
        if value(lo) == value(hi) {
            return;
        }
        degree[lo] += 1;
        degree[hi] += 1;
        len += 1;
    });
    let offsets = prefix_offsets(&degree);
    drop(degree);
    let mut cursor = offsets.clone();
    let mut entries = vec![0u32; offsets[n_pairs]];
    for_each_sampled(n_pairs, prob, seed, |lo, hi| {
        if value(lo) == value(hi) {
            return;
        }
        let lo_wins = value(lo) > value(hi);
        push_observation(&mut entries, &mut cursor, lo as u32, hi as u32, lo_wins);
    });
    // Rows fill in ascending order: earlier rows contribute first, then the
    // row's own visits.
    debug_assert!((0..n_pairs).all(|p| {
        entries[offsets[p]..offsets[p + 1]]
            .windows(2)
            .all(|x| (x[0] & !WIN_BIT) < (x[1] & !WIN_BIT))
    }));
    Ok(QuadrupletSet {
        pairs,
        offsets,
        entries,
        len,
    })
}

/// Expected number of passive observations over `n` items.
pub fn expected_passive_count(n: usize, prob: f64) -> f64 {
    let p = num_pairs(n) as f64;
    prob * p * (p - 1.0) / 2.0
}

fn infer_n(max_index: Option<usize>, n: Option<usize>) -> Result<usize> {
    match (n, max_index) {
        (Some(n), Some(m)) if m >= n => Err(Error::IndexOutOfRange { index: m, n }),
        (Some(n), _) => Ok(n),
        (None, Some(m)) => Ok(m + 1),
        (None, None) => Ok(0),
    }
}

/// Converts triplets `(i, j, k)` ("`i` is more similar to `j` than to `k`")
/// into quadruplets `(i,j) > (i,k)`. When `n` is `None` it is taken as the
/// largest index plus one.
pub fn ingest_triplets(
    triplets: &[(usize, usize, usize)],
    n: Option<usize>,
) -> Result<QuadrupletSet> {
    let mut quads = Vec::with_capacity(triplets.len());
    for &(i, j, k) in triplets {
        if i == j || i == k || j == k {
            return Err(Error::MalformedComparison(format!(
                "triplet ({i},{j},{k}) repeats an index"
            )));
        }
        quads.push(Quadruplet::new(PairId::new(i, j)?, PairId::new(i, k)?)?);
    }
    let max = triplets.iter().map(|&(i, j, k)| i.max(j).max(k)).max();
    QuadrupletSet::from_observations(infer_n(max, n)?, quads)
}

/// Quadruplets `(i, j, k, l)` meaning `w_ij > w_kl`, with the same conflict
/// rules as [`ingest_triplets`].
pub fn ingest_quadruplets(
    rows: &[(usize, usize, usize, usize)],
    n: Option<usize>,
) -> Result<QuadrupletSet> {
    let mut quads = Vec::with_capacity(rows.len());
    for &(i, j, k, l) in rows {
        quads.push(Quadruplet::new(PairId::new(i, j)?, PairId::new(k, l)?)?);
    }
    let max = rows.iter().map(|&(i, j, k, l)| i.max(j).max(k).max(l)).max();
    QuadrupletSet::from_observations(infer_n(max, n)?, quads)
}
