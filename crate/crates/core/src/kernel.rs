//! Proxy similarities estimated from quadruplet comparisons, followed by
//! standard average linkage (4K-AL).
//!
//! Two items are similar when they compare alike against reference
//! similarities: `K_ij` sums `s(i,k) * s(j,k)` over landmarks `k` and
//! reference pairs, where `s` is the `+1/-1` outcome of comparing the pair
//! against the reference.

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dendrogram::Dendrogram;
use crate::engine::{classical_linkage, Linkage};
use crate::error::{Error, Result};
use crate::oracle::{decode_other, decode_sign, ActiveOracle, QuadrupletSet};
use crate::pairs::{pair_index, PairId};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ActiveKernelConfig {
    /// Probability that an item becomes a landmark.
    pub landmark_prob: f64,
    pub num_references: usize,
    pub seed: u64,
}

impl ActiveKernelConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.landmark_prob > 0.0 && self.landmark_prob <= 1.0) {
            return Err(Error::InvalidConfig(format!(
                "landmark probability {} is outside (0, 1]",
                self.landmark_prob
            )));
        }
        if self.num_references == 0 {
            return Err(Error::InvalidConfig("need at least one reference pair".into()));
        }
        Ok(())
    }
}

/// Symmetric integer kernel; the diagonal is not defined and reads as 0.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct KernelMatrix {
    n: usize,
    entries: Vec<i64>,
}

impl KernelMatrix {
    pub fn zeros(n: usize) -> Self {
        KernelMatrix {
            n,
            entries: vec![0; n * n],
        }
    }

    pub fn from_fn(n: usize, mut f: impl FnMut(usize, usize) -> i64) -> Self {
        let mut k = KernelMatrix::zeros(n);
        for i in 0..n {
            for j in i + 1..n {
                let v = f(i, j);
                k.entries[i * n + j] = v;
                k.entries[j * n + i] = v;
            }
        }
        k
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> i64 {
        self.entries[i * self.n + j]
    }

    fn symmetrize_upper(mut self) -> Self {
        let n = self.n;
        for i in 0..n {
            self.entries[i * n + i] = 0;
            for j in i + 1..n {
                self.entries[j * n + i] = self.entries[i * n + j];
            }
        }
        self
    }
}

/// Landmarks and references drawn for one active kernel.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct KernelDesign {
    pub landmarks: Vec<usize>,
    pub references: Vec<PairId>,
}

/// Draws the landmark set (Bernoulli per item, resampled once if empty) and
/// the reference pairs (uniform without replacement).
pub fn sample_design(n: usize, config: &ActiveKernelConfig) -> Result<KernelDesign> {
    config.validate()?;
    if n < 3 {
        return Err(Error::InvalidArgument(format!("active kernel needs n >= 3, got {n}")));
    }
    let total_pairs = crate::pairs::num_pairs(n);
    if config.num_references > total_pairs {
        return Err(Error::InvalidConfig(format!(
            "{} references requested but only {total_pairs} pairs exist",
            config.num_references
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut landmarks = Vec::new();
    for _ in 0..2 {
        landmarks = (0..n)
            .filter(|_| rng.random_bool(config.landmark_prob))
            .collect();
        if !landmarks.is_empty() {
            break;
        }
    }
    if landmarks.is_empty() {
        return Err(Error::EmptyLandmarks);
    }
    let pairs = crate::pairs::PairIndexer::new(n)?;
    let mut refs: Vec<usize> = index::sample(&mut rng, total_pairs, config.num_references).into_vec();
    refs.sort_unstable();
    Ok(KernelDesign {
        landmarks,
        references: refs.into_iter().map(|r| pairs.pair(r)).collect(),
    })
}

/// Active kernel with sampled landmarks and references. Returns the kernel
/// and the number of distinct oracle queries it issued.
pub fn active_kernel(
    oracle: &mut ActiveOracle<'_>,
    n: usize,
    config: &ActiveKernelConfig,
) -> Result<(KernelMatrix, u64)> {
    let design = sample_design(n, config)?;
    active_kernel_with(oracle, n, &design)
}

/// Active kernel for a fixed design.
///
/// Terms where `(i,k)` or `(j,k)` is the reference pair itself are skipped.
pub fn active_kernel_with(
    oracle: &mut ActiveOracle<'_>,
    n: usize,
    design: &KernelDesign,
) -> Result<(KernelMatrix, u64)> {
    if n < 3 {
        return Err(Error::InvalidArgument(format!("active kernel needs n >= 3, got {n}")));
    }
    if n != oracle.n() {
        return Err(Error::InvalidArgument(format!(
            "oracle holds {} items, kernel asked for {n}",
            oracle.n()
        )));
    }
    for &k in &design.landmarks {
        if k >= n {
            return Err(Error::IndexOutOfRange { index: k, n });
        }
    }
    for r in &design.references {
        oracle.pairs().check(*r)?;
    }
    if design.landmarks.is_empty() {
        return Err(Error::EmptyLandmarks);
    }
    let before = oracle.query_count();
    let columns = design.landmarks.len() * design.references.len();
    let words = columns.div_ceil(64);
    // Per item: `valid` marks columns where the term exists, `above` marks
    // columns where w_ik beat the reference.
    let mut valid = vec![0u64; n * words];
    let mut above = vec![0u64; n * words];
    oracle.reserve(columns * n);
    let mut col = 0;
    for r in &design.references {
        let ref_idx = pair_index(n, r.a(), r.b());
        for &k in &design.landmarks {
            let (w, bit) = (col / 64, 1u64 << (col % 64));
            for i in 0..n {
                if i == k {
                    continue;
                }
                let (a, b) = if i < k { (i, k) } else { (k, i) };
                let p = pair_index(n, a, b);
                if p == ref_idx {
                    continue;
                }
                // an exact tie contributes nothing
                if let Some(won) = oracle.compare_strict_indexed(p, ref_idx) {
                    valid[i * words + w] |= bit;
                    if won {
                        above[i * words + w] |= bit;
                    }
                }
            }
            col += 1;
        }
    }
    let kernel = KernelMatrix::from_fn(n, |i, j| {
        let (vi, vj) = (&valid[i * words..(i + 1) * words], &valid[j * words..(j + 1) * words]);
        let (bi, bj) = (&above[i * words..(i + 1) * words], &above[j * words..(j + 1) * words]);
        let mut both = 0i64;
        let mut disagree = 0i64;
        for t in 0..words {
            let m = vi[t] & vj[t];
            both += m.count_ones() as i64;
            disagree += (m & (bi[t] ^ bj[t])).count_ones() as i64;
        }
        both - 2 * disagree
    });
    debug_assert!((0..n).all(|i| (0..n).all(|j| i == j || kernel.get(i, j).unsigned_abs() as usize <= columns)));
    Ok((kernel, oracle.query_count() - before))
}

struct Accumulator {
    n: usize,
    sums: Vec<i64>,
    terms: Vec<i64>,
    buckets: Vec<Vec<(u32, i8)>>,
    touched: Vec<u32>,
}

impl Accumulator {
    fn new(n: usize, certify: bool) -> Self {
        Accumulator {
            n,
            sums: vec![0; n * n],
            terms: if certify { vec![0; n * n] } else { Vec::new() },
            buckets: vec![Vec::new(); n],
            touched: Vec::new(),
        }
    }

    fn merge(mut self, other: Self) -> Self {
        for (a, b) in self.sums.iter_mut().zip(&other.sums) {
            *a += b;
        }
        for (a, b) in self.terms.iter_mut().zip(&other.terms) {
            *a += b;
        }
        self
    }

    /// Adds every term whose reference pair is `reference`.
    fn add_reference(&mut self, qs: &QuadrupletSet, reference: usize) {
        let pairs = qs.pairs();
        // Group the comparisons against this reference by shared item r:
        // the observation of (a, b) lands in bucket b as item a and vice versa.
        // Buckets end up sorted by item because rows are sorted by pair.
        for &e in qs.row(reference) {
            let p = pairs.pair(decode_other(e));
            let s = decode_sign(e);
            for (r, item) in [(p.b(), p.a()), (p.a(), p.b())] {
                if self.buckets[r].is_empty() {
                    self.touched.push(r as u32);
                }
                self.buckets[r].push((item as u32, s));
            }
        }
        let n = self.n;
        let certify = !self.terms.is_empty();
        for &r in &self.touched {
            let bucket = &mut self.buckets[r as usize];
            for (x, &(i, si)) in bucket.iter().enumerate() {
                let row = i as usize * n;
                for &(j, sj) in &bucket[x + 1..] {
                    self.sums[row + j as usize] += (si * sj) as i64;
                    if certify {
                        self.terms[row + j as usize] += 1;
                    }
                }
            }
            bucket.clear();
        }
        self.touched.clear();
    }
}

fn accumulate_passive(qs: &QuadrupletSet, certify: bool) -> Accumulator {
    let n = qs.n();
    (0..qs.pairs().len())
        .into_par_iter()
        .with_min_len(256)
        .fold(
            || Accumulator::new(n, certify),
            |mut acc, reference| {
                acc.add_reference(qs, reference);
                acc
            },
        )
        .reduce(|| Accumulator::new(n, certify), Accumulator::merge)
}

/// Passive kernel: every pair is a reference, and a term counts only when
/// both of its comparisons were observed.
///
/// Computed per reference pair by grouping its observed comparisons by the
/// shared item, which costs `sum over references and items of d^2` rather
/// than the naive `n^5`.
pub fn passive_kernel(qs: &QuadrupletSet) -> Result<KernelMatrix> {
    let n = qs.n();
    if n < 3 {
        return Err(Error::InvalidArgument(format!("passive kernel needs n >= 3, got {n}")));
    }
    let acc = accumulate_passive(qs, false);
    Ok(KernelMatrix {
        n,
        entries: acc.sums,
    }
    .symmetrize_upper())
}

/// Passive kernel together with the number of contributing terms per entry;
/// `|K_ij|` never exceeds its term count.
pub fn passive_kernel_certified(qs: &QuadrupletSet) -> Result<(KernelMatrix, KernelMatrix)> {
    let n = qs.n();
    if n < 3 {
        return Err(Error::InvalidArgument(format!("passive kernel needs n >= 3, got {n}")));
    }
    let acc = accumulate_passive(qs, true);
    let kernel = KernelMatrix { n, entries: acc.sums }.symmetrize_upper();
    let terms = KernelMatrix { n, entries: acc.terms }.symmetrize_upper();
    Ok((kernel, terms))
}

/// Standard average linkage on the kernel, from singletons.
pub fn average_linkage_on_kernel(k: &KernelMatrix) -> Result<Dendrogram> {
    if k.n() < 2 {
        return Err(Error::InvalidArgument("average linkage needs n >= 2".into()));
    }
    classical_linkage(Linkage::Average, k.n(), |i, j| k.get(i, j))
}
