//! Canonical unordered item pairs and their dense lexicographic indexing.

use std::fmt;

use crate::error::{Error, Result};

/// Unordered pair of distinct items, stored with `a < b`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct PairId {
    a: u32,
    b: u32,
}

impl PairId {
    /// Builds the canonical pair from two distinct items in either order.
    pub fn new(x: usize, y: usize) -> Result<Self> {
        if x == y {
            return Err(Error::MalformedComparison(format!(
                "pair ({x},{y}) repeats an item"
            )));
        }
        let (a, b) = if x < y { (x, y) } else { (y, x) };
        let a = u32::try_from(a).map_err(|_| Error::TooLarge {
            n: a,
            reason: "item index exceeds u32",
        })?;
        let b = u32::try_from(b).map_err(|_| Error::TooLarge {
            n: b,
            reason: "item index exceeds u32",
        })?;
        Ok(PairId { a, b })
    }

    #[inline]
    pub fn a(self) -> usize {
        self.a as usize
    }

    #[inline]
    pub fn b(self) -> usize {
        self.b as usize
    }

    #[inline]
    pub fn contains(self, item: usize) -> bool {
        self.a() == item || self.b() == item
    }

    /// The member of the pair that is not `item`, if `item` is a member.
    #[inline]
    pub fn other(self, item: usize) -> Option<usize> {
        if self.a() == item {
            Some(self.b())
        } else if self.b() == item {
            Some(self.a())
        } else {
            None
        }
    }
}

impl fmt::Display for PairId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({},{})", self.a, self.b)
    }
}

/// Largest item count whose pairs can be indexed by `u32` with one bit spare.
pub const MAX_ITEMS: usize = 65_535;

/// Maps pairs over `n` items to `0..C(n,2)` in lexicographic order.
#[derive(Clone, Debug)]
pub struct PairIndexer {
    n: usize,
    pairs: Vec<PairId>,
}

impl PairIndexer {
    pub fn new(n: usize) -> Result<Self> {
        if n > MAX_ITEMS {
            return Err(Error::TooLarge {
                n,
                reason: "pair indices must fit in 31 bits",
            });
        }
        let mut pairs = Vec::with_capacity(num_pairs(n));
        for a in 0..n {
            for b in a + 1..n {
                pairs.push(PairId {
                    a: a as u32,
                    b: b as u32,
                });
            }
        }
        Ok(PairIndexer { n, pairs })
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    #[inline]
    pub fn index(&self, p: PairId) -> usize {
        pair_index(self.n, p.a(), p.b())
    }

    #[inline]
    pub fn pair(&self, idx: usize) -> PairId {
        self.pairs[idx]
    }

    pub fn pairs(&self) -> &[PairId] {
        &self.pairs
    }

    pub fn check(&self, p: PairId) -> Result<()> {
        if p.b() >= self.n {
            return Err(Error::IndexOutOfRange {
                index: p.b(),
                n: self.n,
            });
        }
        Ok(())
    }
}

#[inline]
pub fn num_pairs(n: usize) -> usize {
    n * n.saturating_sub(1) / 2
}

/// Lexicographic index of `(a, b)` with `a < b < n`.
#[inline]
pub fn pair_index(n: usize, a: usize, b: usize) -> usize {
    debug_assert!(a < b && b < n);
    a * (2 * n - a - 1) / 2 + (b - a - 1)
}
