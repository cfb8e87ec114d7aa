//! Binary merge trees.
//!
//! Leaves are numbered `0..n_leaves`; the node created by merge step `s` has
//! id `n_leaves + s`.

use rand::Rng;

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Merge {
    pub left: usize,
    pub right: usize,
    /// Optional linkage value recorded at this step.
    pub height: Option<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Dendrogram {
    n_leaves: usize,
    merges: Vec<Merge>,
}

impl Dendrogram {
    pub fn from_merges(n_leaves: usize, merges: Vec<(usize, usize)>) -> Result<Self> {
        Self::new(
            n_leaves,
            merges
                .into_iter()
                .map(|(left, right)| Merge {
                    left,
                    right,
                    height: None,
                })
                .collect(),
        )
    }

    /// Validates that `merges` forms a full binary tree over `n_leaves` leaves.
    pub fn new(n_leaves: usize, merges: Vec<Merge>) -> Result<Self> {
        if n_leaves == 0 {
            return Err(Error::InvalidArgument("dendrogram needs at least one leaf".into()));
        }
        if merges.len() != n_leaves - 1 {
            return Err(Error::InvalidArgument(format!(
                "{} leaves need {} merges, got {}",
                n_leaves,
                n_leaves - 1,
                merges.len()
            )));
        }
        let mut used = vec![false; 2 * n_leaves - 1];
        for (step, m) in merges.iter().enumerate() {
            let created = n_leaves + step;
            for node in [m.left, m.right] {
                if node >= created {
                    return Err(Error::InvalidArgument(format!(
                        "merge {step} references node {node} before it exists"
                    )));
                }
                if used[node] {
                    return Err(Error::InvalidArgument(format!(
                        "node {node} is merged twice (step {step})"
                    )));
                }
                used[node] = true;
            }
            if m.left == m.right {
                return Err(Error::InvalidArgument(format!("merge {step} joins a node with itself")));
            }
        }
        Ok(Dendrogram { n_leaves, merges })
    }

    #[inline]
    pub fn n_leaves(&self) -> usize {
        self.n_leaves
    }

    pub fn merges(&self) -> &[Merge] {
        &self.merges
    }

    /// Id of the root node.
    pub fn root(&self) -> usize {
        2 * self.n_leaves - 2
    }

    /// Children of an internal node, `None` for leaves.
    pub fn children(&self, node: usize) -> Option<(usize, usize)> {
        node.checked_sub(self.n_leaves)
            .and_then(|s| self.merges.get(s))
            .map(|m| (m.left, m.right))
    }

    /// Sizes of every node, indexed by node id.
    pub fn node_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![1; 2 * self.n_leaves - 1];
        for (s, m) in self.merges.iter().enumerate() {
            sizes[self.n_leaves + s] = sizes[m.left] + sizes[m.right];
        }
        sizes
    }

    /// Leaves under `node`, in left-to-right order.
    pub fn leaves_under(&self, node: usize) -> Vec<usize> {
        let mut out = Vec::new();
        let mut stack = vec![node];
        while let Some(x) = stack.pop() {
            match self.children(x) {
                Some((l, r)) => {
                    stack.push(r);
                    stack.push(l);
                }
                None => out.push(x),
            }
        }
        out
    }

    /// Partition when exactly `k` clusters remain (the last `k - 1` merges
    /// undone). Labels are numbered by first appearance.
    pub fn cut_at(&self, k: usize) -> Result<Vec<usize>> {
        if k == 0 || k > self.n_leaves {
            return Err(Error::InvalidArgument(format!(
                "cannot cut {} leaves into {k} clusters",
                self.n_leaves
            )));
        }
        let total = 2 * self.n_leaves - 1;
        let kept = self.n_leaves - k;
        // Parents always have larger ids, so one downward sweep assigns tops.
        let mut top: Vec<usize> = (0..total).collect();
        for s in (0..kept).rev() {
            let node = self.n_leaves + s;
            let m = self.merges[s];
            top[m.left] = top[node];
            top[m.right] = top[node];
        }
        let mut root_label = vec![usize::MAX; total];
        let mut next = 0;
        let mut labels = Vec::with_capacity(self.n_leaves);
        for &r in &top[..self.n_leaves] {
            if root_label[r] == usize::MAX {
                root_label[r] = next;
                next += 1;
            }
            labels.push(root_label[r]);
        }
        Ok(labels)
    }

    /// Exchanges the children of the node created at `step`.
    pub fn swap_children(&mut self, step: usize) {
        let m = &mut self.merges[step];
        std::mem::swap(&mut m.left, &mut m.right);
    }

    /// Newick rendering with leaf indices as labels.
    pub fn to_newick(&self) -> String {
        enum Visit {
            Enter(usize),
            Comma,
            Close,
        }
        let mut out = String::new();
        let mut stack = vec![Visit::Enter(self.root())];
        while let Some(v) = stack.pop() {
            match v {
                Visit::Enter(node) => match self.children(node) {
                    Some((l, r)) => {
                        out.push('(');
                        stack.push(Visit::Close);
                        stack.push(Visit::Enter(r));
                        stack.push(Visit::Comma);
                        stack.push(Visit::Enter(l));
                    }
                    None => out.push_str(&node.to_string()),
                },
                Visit::Comma => out.push(','),
                Visit::Close => out.push(')'),
            }
        }
        out.push(';');
        out
    }

    /// Uniformly random rooted binary tree over `n` labelled leaves (Rémy's
    /// algorithm), emitted in post-order.
    pub fn random_uniform<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidArgument("dendrogram needs at least one leaf".into()));
        }
        // Arena: leaves 0..n, internal nodes n.. in insertion order.
        const NONE: usize = usize::MAX;
        let mut parent = vec![NONE; 2 * n - 1];
        let mut kids = vec![(NONE, NONE); 2 * n - 1];
        let mut nodes = vec![0usize];
        let mut root = 0;
        for leaf in 1..n {
            let target = nodes[rng.random_range(0..nodes.len())];
            let internal = n + leaf - 1;
            let up = parent[target];
            kids[internal] = if rng.random_bool(0.5) {
                (target, leaf)
            } else {
                (leaf, target)
            };
            parent[internal] = up;
            parent[target] = internal;
            parent[leaf] = internal;
            if up == NONE {
                root = internal;
            } else {
                let (l, r) = kids[up];
                kids[up] = if l == target { (internal, r) } else { (l, internal) };
            }
            nodes.push(leaf);
            nodes.push(internal);
        }
        // post-order to merge list
        let mut id = vec![NONE; 2 * n - 1];
        for (leaf, slot) in id.iter_mut().enumerate().take(n) {
            *slot = leaf;
        }
        let mut merges = Vec::with_capacity(n - 1);
        let mut stack = vec![(root, false)];
        while let Some((node, expanded)) = stack.pop() {
            if node < n {
                continue;
            }
            let (l, r) = kids[node];
            if expanded {
                id[node] = n + merges.len();
                merges.push((id[l], id[r]));
            } else {
                stack.push((node, true));
                stack.push((r, false));
                stack.push((l, false));
            }
        }
        Dendrogram::from_merges(n, merges)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn rejects_invalid_trees() {
        assert!(Dendrogram::from_merges(3, vec![(0, 1)]).is_err());
        assert!(Dendrogram::from_merges(3, vec![(0, 1), (0, 2)]).is_err());
        assert!(Dendrogram::from_merges(3, vec![(0, 4), (1, 2)]).is_err());
        assert!(Dendrogram::from_merges(3, vec![(0, 1), (3, 2)]).is_ok());
    }

    #[test]
    fn cuts_are_nested_partitions() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for n in 1..20 {
            let d = Dendrogram::random_uniform(n, &mut rng).unwrap();
            assert_eq!(d.cut_at(n).unwrap(), (0..n).collect::<Vec<_>>());
            assert!(d.cut_at(1).unwrap().iter().all(|&l| l == 0));
            for k in 2..=n {
                let fine = d.cut_at(k).unwrap();
                let coarse = d.cut_at(k - 1).unwrap();
                assert_eq!(fine.iter().max().unwrap() + 1, k);
                for i in 0..n {
                    for j in 0..n {
                        if fine[i] == fine[j] {
                            assert_eq!(coarse[i], coarse[j]);
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn newick_shape() {
        let d = Dendrogram::from_merges(3, vec![(0, 1), (3, 2)]).unwrap();
        assert_eq!(d.to_newick(), "((0,1),2);");
        assert_eq!(Dendrogram::from_merges(1, vec![]).unwrap().to_newick(), "0;");
    }

    #[test]
    fn random_tree_covers_all_shapes_on_three_leaves() {
        // 3 labelled rooted binary trees on 3 leaves, identified by the first pair.
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut counts = [0usize; 3];
        for _ in 0..3000 {
            let d = Dendrogram::random_uniform(3, &mut rng).unwrap();
            let m = d.merges()[0];
            let lone = 3 - m.left - m.right;
            counts[lone] += 1;
        }
        for c in counts {
            assert!((800..1200).contains(&c), "{counts:?}");
        }
    }
}
