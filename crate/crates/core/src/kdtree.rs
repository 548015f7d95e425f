//! Static KD-tree holding a copy of its points in leaf order. Membership
//! changes are handled by the owner (tombstones plus periodic rebuilds).

use alloc::vec::Vec;

const LEAF_SIZE: usize = 16;

#[derive(Debug, Clone)]
enum Node {
    Leaf { start: u32, end: u32 },
    Split { axis: u32, value: f64, left: u32, right: u32 },
}

#[derive(Debug, Clone, Default)]
pub(crate) struct KdTree {
    dim: usize,
    nodes: Vec<Node>,
    ids: Vec<u32>,
    /// Point of `ids[i]` at `points[i * dim..]`.
    points: Vec<f64>,
}

/// Up to `k` nearest points ordered by `(squared distance, tie key)`.
#[derive(Debug, Clone)]
pub(crate) struct Neighbors {
    k: usize,
    items: Vec<(f64, u64, u32)>,
}

impl Neighbors {
    pub fn new(k: usize) -> Self {
        Neighbors { k, items: Vec::with_capacity(k + 1) }
    }

    #[inline]
    pub fn worst_d2(&self) -> f64 {
        if self.items.len() < self.k {
            f64::INFINITY
        } else {
            self.items[self.items.len() - 1].0
        }
    }

    /// Offers a point; kept when it beats the current worst.
    #[inline]
    pub fn offer(&mut self, d2: f64, tie: u64, id: u32) {
        if self.k == 0 {
            return;
        }
        let less = |a: &(f64, u64, u32)| a.0 < d2 || (a.0 == d2 && a.1 < tie);
        if self.items.len() == self.k && less(&self.items[self.k - 1]) {
            return;
        }
        let pos = self.items.partition_point(less);
        self.items.insert(pos, (d2, tie, id));
        self.items.truncate(self.k);
    }

    /// `(squared distance, id)` pairs, nearest first.
    pub fn iter(&self) -> impl Iterator<Item = (f64, u32)> + '_ {
        self.items.iter().map(|&(d, _, id)| (d, id))
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }
}

impl KdTree {
    /// Builds over `ids`, reading point `id` at `coords[id * dim..]`.
    pub fn build(coords: &[f64], dim: usize, mut ids: Vec<u32>) -> Self {
        let mut tree = KdTree { dim, nodes: Vec::new(), ids: Vec::new(), points: Vec::new() };
        if !ids.is_empty() {
            let n = ids.len();
            tree.build_node(coords, &mut ids, 0, n);
        }
        tree.points = Vec::with_capacity(ids.len() * dim);
        for &id in &ids {
            tree.points.extend_from_slice(&coords[id as usize * dim..(id as usize + 1) * dim]);
        }
        tree.ids = ids;
        tree
    }

    fn build_node(&mut self, coords: &[f64], ids: &mut [u32], start: usize, end: usize) -> u32 {
        let idx = self.nodes.len() as u32;
        if end - start <= LEAF_SIZE {
            self.nodes.push(Node::Leaf { start: start as u32, end: end as u32 });
            return idx;
        }
        let dim = self.dim;
        let coord = |id: u32, a: usize| coords[id as usize * dim + a];
        let slice = &mut ids[start..end];
        let mut axis = 0;
        let mut best_spread = -1.0;
        for a in 0..dim {
            let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
            for &id in slice.iter() {
                let v = coord(id, a);
                lo = lo.min(v);
                hi = hi.max(v);
            }
            if hi - lo > best_spread {
                best_spread = hi - lo;
                axis = a;
            }
        }
        let mid = slice.len() / 2;
        slice.select_nth_unstable_by(mid, |&x, &y| coord(x, axis).total_cmp(&coord(y, axis)));
        let value = coord(slice[mid], axis);
        self.nodes.push(Node::Leaf { start: 0, end: 0 });
        let left = self.build_node(coords, ids, start, start + mid);
        let right = self.build_node(coords, ids, start + mid, end);
        self.nodes[idx as usize] = Node::Split { axis: axis as u32, value, left, right };
        idx
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    /// Feeds every live point that could enter the `k` nearest into `out`.
    /// `tie_key` returns `None` for removed points.
    pub fn search<F>(&self, query: &[f64], tie_key: &F, out: &mut Neighbors)
    where
        F: Fn(u32) -> Option<u64>,
    {
        if !self.nodes.is_empty() {
            let mut offsets = alloc::vec![0.0; self.dim];
            self.search_node(0, query, tie_key, out, 0.0, &mut offsets);
        }
    }

    /// `cell_d2` is a lower bound on the squared distance from `query` to
    /// any point under `node`, built from the per-axis `offsets` to the
    /// splits crossed so far.
    fn search_node<F>(
        &self,
        node: u32,
        query: &[f64],
        tie_key: &F,
        out: &mut Neighbors,
        cell_d2: f64,
        offsets: &mut [f64],
    ) where
        F: Fn(u32) -> Option<u64>,
    {
        match self.nodes[node as usize] {
            Node::Leaf { start, end } => {
                let (start, end) = (start as usize, end as usize);
                let points = self.points[start * self.dim..end * self.dim].chunks_exact(self.dim);
                let mut bound = out.worst_d2();
                for (&id, p) in self.ids[start..end].iter().zip(points) {
                    if let Some(d2) = crate::math::sq_dist_within(query, p, bound) {
                        if let Some(tie) = tie_key(id) {
                            out.offer(d2, tie, id);
                            bound = out.worst_d2();
                        }
                    }
                }
            }
            Node::Split { axis, value, left, right } => {
                let axis = axis as usize;
                let diff = query[axis] - value;
                let (near, far) = if diff < 0.0 { (left, right) } else { (right, left) };
                self.search_node(near, query, tie_key, out, cell_d2, offsets);
                let old = offsets[axis];
                let far_d2 = cell_d2 - old * old + diff * diff;
                // Points exactly at the current worst distance may still win on
                // the tie key; the slack absorbs rounding in the running bound.
                if far_d2 * (1.0 - 1e-9) <= out.worst_d2() {
                    offsets[axis] = diff;
                    self.search_node(far, query, tie_key, out, far_d2, offsets);
                    offsets[axis] = old;
                }
            }
        }
    }

    pub fn ids(&self) -> &[u32] {
        &self.ids
    }
}
