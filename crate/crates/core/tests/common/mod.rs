//! Brute-force reference implementations. Everything here works from the
//! defining formulas with plain loops and shares no code with the library.
#![allow(dead_code)]

use std::collections::HashSet;

use num_bigint::BigInt;
use num_rational::BigRational;
use quadhc::oracle::Quadruplet;
use quadhc::{Dendrogram, PairId, QuadrupletSet, SimilarityMatrix};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub type P = (usize, usize);

pub fn norm(a: usize, b: usize) -> P {
    (a.min(b), a.max(b))
}

/// Oriented observations as `(winner, loser)` with normalized pairs.
#[derive(Clone, Debug, Default)]
pub struct Obs {
    pub n: usize,
    pub set: HashSet<(P, P)>,
}

impl Obs {
    /// `I[(x beats y) observed] - I[(y beats x) observed]`; degenerate pairs give 0.
    pub fn sign(&self, x: P, y: P) -> i64 {
        if x.0 == x.1 || y.0 == y.1 {
            return 0;
        }
        let (x, y) = (norm(x.0, x.1), norm(y.0, y.1));
        self.set.contains(&(x, y)) as i64 - self.set.contains(&(y, x)) as i64
    }

    pub fn to_set(&self) -> QuadrupletSet {
        let quads = self.set.iter().map(|&(a, b)| Quadruplet {
            winner: PairId::new(a.0, a.1).unwrap(),
            loser: PairId::new(b.0, b.1).unwrap(),
        });
        QuadrupletSet::from_observations(self.n, quads).unwrap()
    }
}

pub fn all_pairs(n: usize) -> Vec<P> {
    let mut v = Vec::new();
    for a in 0..n {
        for b in a + 1..n {
            v.push((a, b));
        }
    }
    v
}

/// Each unordered pair-of-pairs observed with probability `p`, oriented by
/// `w` when given and by a coin flip otherwise. Exact ties are left out.
pub fn random_obs(n: usize, p: f64, w: Option<&SimilarityMatrix>, rng: &mut impl Rng) -> Obs {
    let pairs = all_pairs(n);
    let mut set = HashSet::new();
    for x in 0..pairs.len() {
        for y in x + 1..pairs.len() {
            if !rng.random_bool(p) {
                continue;
            }
            let (a, b) = (pairs[x], pairs[y]);
            let a_wins = match w {
                Some(w) => {
                    let (va, vb) = (w.get(a.0, a.1), w.get(b.0, b.1));
                    if va == vb {
                        continue;
                    }
                    va > vb
                }
                None => rng.random_bool(0.5),
            };
            set.insert(if a_wins { (a, b) } else { (b, a) });
        }
    }
    Obs { n, set }
}

pub fn random_matrix(n: usize, rng: &mut impl Rng) -> SimilarityMatrix {
    let vals: Vec<f64> = (0..n * n).map(|_| rng.random::<f64>()).collect();
    SimilarityMatrix::from_fn(n, |i, j| vals[i.min(j) * n + i.max(j)])
}

/// Matrix with values on a coarse grid, so ties are common.
pub fn coarse_matrix(n: usize, levels: u32, rng: &mut impl Rng) -> SimilarityMatrix {
    let vals: Vec<f64> = (0..n * n).map(|_| rng.random_range(0..levels) as f64).collect();
    SimilarityMatrix::from_fn(n, |i, j| vals[i.min(j) * n + i.max(j)])
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Passive kernel: `sum_{k<l} sum_r s(i,r | k,l) s(j,r | k,l)`.
pub fn passive_kernel(obs: &Obs) -> Vec<Vec<i64>> {
    let n = obs.n;
    let mut k = vec![vec![0i64; n]; n];
    for i in 0..n {
        for j in 0..n {
            if i == j {
                continue;
            }
            let mut s = 0;
            for a in 0..n {
                for b in a + 1..n {
                    for r in 0..n {
                        s += obs.sign((i, r), (a, b)) * obs.sign((j, r), (a, b));
                    }
                }
            }
            k[i][j] = s;
        }
    }
    k
}

fn cmp_sign(x: f64, y: f64) -> i64 {
    (x > y) as i64 - (x < y) as i64
}

/// Active kernel for landmarks `s` and reference pairs `refs`.
pub fn active_kernel(w: &SimilarityMatrix, s: &[usize], refs: &[P]) -> Vec<Vec<i64>> {
    let n = w.n();
    let mut k = vec![vec![0i64; n]; n];
    for i in 0..n {
        for j in 0..n {
            if i == j {
                continue;
            }
            let mut sum = 0;
            for &(a, b) in refs {
                let r = w.get(a, b);
                for &m in s {
                    if m == i || m == j {
                        continue;
                    }
                    sum += cmp_sign(w.get(i, m), r) * cmp_sign(w.get(j, m), r);
                }
            }
            k[i][j] = sum;
        }
    }
    k
}

fn frac(num: i64, den: i64) -> BigRational {
    BigRational::new(BigInt::from(num), BigInt::from(den))
}

/// Cluster pair preference, one term per item quadruple.
pub fn preference(obs: &Obs, g: &[Vec<usize>], p: usize, q: usize, r: usize, s: usize) -> BigRational {
    let mut num = 0i64;
    for &i in &g[p] {
        for &j in &g[q] {
            for &k in &g[r] {
                for &l in &g[s] {
                    num += obs.sign((i, j), (k, l));
                }
            }
        }
    }
    let den = (g[p].len() * g[q].len() * g[r].len() * g[s].len()) as i64;
    frac(num, den)
}

/// Cluster similarity as six nested loops over `r, s, i, j, k, l`.
pub fn cluster_similarity(obs: &Obs, g: &[Vec<usize>], p: usize, q: usize) -> BigRational {
    let kk = g.len() as i64;
    let mut total = frac(0, 1);
    for r in 0..g.len() {
        for s in 0..g.len() {
            if r == s {
                continue;
            }
            let mut num = 0i64;
            for &i in &g[p] {
                for &j in &g[q] {
                    for &k in &g[r] {
                        for &l in &g[s] {
                            num += obs.sign((i, j), (k, l));
                        }
                    }
                }
            }
            let den = (g[p].len() * g[q].len() * g[r].len() * g[s].len()) as i64;
            total += frac(num, den);
        }
    }
    total / frac(kk * (kk - 1), 1)
}

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum Link {
    Single,
    Complete,
}

/// Merge sequence of classical single or complete linkage as pairs of leaf
/// sets. Assumes no ties among linkage values.
pub fn classical_merges(w: &SimilarityMatrix, link: Link) -> Vec<(Vec<usize>, Vec<usize>)> {
    let n = w.n();
    let mut clusters: Vec<Vec<usize>> = (0..n).map(|i| vec![i]).collect();
    let mut out = Vec::new();
    while clusters.len() > 1 {
        let mut best: Option<(f64, usize, usize)> = None;
        for a in 0..clusters.len() {
            for b in a + 1..clusters.len() {
                let mut v = match link {
                    Link::Single => f64::NEG_INFINITY,
                    Link::Complete => f64::INFINITY,
                };
                for &i in &clusters[a] {
                    for &j in &clusters[b] {
                        v = match link {
                            Link::Single => v.max(w.get(i, j)),
                            Link::Complete => v.min(w.get(i, j)),
                        };
                    }
                }
                if best.is_none_or(|(bv, _, _)| v > bv) {
                    best = Some((v, a, b));
                }
            }
        }
        let (_, a, b) = best.unwrap();
        let right = clusters.remove(b);
        let left = clusters.remove(a);
        out.push(canon_pair(left.clone(), right.clone()));
        let mut joined = left;
        joined.extend(right);
        clusters.push(joined);
    }
    out
}

fn canon_pair(mut a: Vec<usize>, mut b: Vec<usize>) -> (Vec<usize>, Vec<usize>) {
    a.sort_unstable();
    b.sort_unstable();
    if a <= b {
        (a, b)
    } else {
        (b, a)
    }
}

/// Merge sequence of a dendrogram in the same form as [`classical_merges`].
pub fn dendrogram_merges(d: &Dendrogram) -> Vec<(Vec<usize>, Vec<usize>)> {
    d.merges()
        .iter()
        .map(|m| canon_pair(d.leaves_under(m.left), d.leaves_under(m.right)))
        .collect()
}

/// Dasgupta cost from the definition: every pair weighted by the number of
/// leaves under its lowest common ancestor.
pub fn dasgupta_cost(w: &SimilarityMatrix, d: &Dendrogram) -> f64 {
    let n = d.n_leaves();
    let mut cost = 0.0;
    for i in 0..n {
        for j in i + 1..n {
            let lca = d
                .merges()
                .iter()
                .map(|m| (d.leaves_under(m.left), d.leaves_under(m.right)))
                .find(|(l, r)| (l.contains(&i) && r.contains(&j)) || (l.contains(&j) && r.contains(&i)))
                .unwrap();
            cost += (lca.0.len() + lca.1.len()) as f64 * w.get(i, j);
        }
    }
    cost
}

/// ARI from pair counts.
pub fn ari(a: &[usize], b: &[usize]) -> f64 {
    let n = a.len();
    let (mut both, mut sa, mut sb, mut total) = (0.0, 0.0, 0.0, 0.0);
    for i in 0..n {
        for j in i + 1..n {
            let (x, y) = (a[i] == a[j], b[i] == b[j]);
            total += 1.0;
            both += (x && y) as u8 as f64;
            sa += x as u8 as f64;
            sb += y as u8 as f64;
        }
    }
    let expected = sa * sb / total;
    (both - expected) / (0.5 * (sa + sb) - expected)
}
