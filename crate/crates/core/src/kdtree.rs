//! Exact k-nearest-neighbor search under the L1 metric.
//!
//! Small static kd-tree over the stored belief points of one value table.
//! Queries are deterministic: ties on distance break toward the lower point
//! index.

use alloc::vec;
use alloc::vec::Vec;

#[derive(Debug, Clone)]
enum Node {
    Split {
        axis: usize,
        value: f64,
        left: u32,
        right: u32,
    },
    Leaf {
        start: u32,
        end: u32,
    },
}

#[derive(Debug, Clone)]
pub struct KdTree {
    dim: usize,
    coords: Vec<f64>,
    order: Vec<u32>,
    nodes: Vec<Node>,
    root: u32,
}

const LEAF_SIZE: usize = 8;

impl KdTree {
    /// Builds a tree over `n` points of dimension `dim`, `coords` flat
    /// row-major.
    pub fn build(dim: usize, coords: Vec<f64>) -> KdTree {
        assert!(dim > 0);
        let n = coords.len() / dim;
        let mut order: Vec<u32> = (0..n as u32).collect();
        let mut tree = KdTree {
            dim,
            coords,
            order: Vec::new(),
            nodes: Vec::new(),
            root: 0,
        };
        if n > 0 {
            let root = tree.build_range(&mut order, 0, n);
            tree.root = root;
        }
        tree.order = order;
        tree
    }

    fn coord(&self, point: u32, axis: usize) -> f64 {
        self.coords[point as usize * self.dim + axis]
    }

    fn build_range(&mut self, order: &mut [u32], start: usize, end: usize) -> u32 {
        let count = end - start;
        if count <= LEAF_SIZE {
            self.nodes.push(Node::Leaf {
                start: start as u32,
                end: end as u32,
            });
            return (self.nodes.len() - 1) as u32;
        }
        // Split along the axis with the widest spread.
        let mut axis = 0;
        let mut best_spread = -1.0;
        for a in 0..self.dim {
            let mut lo = f64::INFINITY;
            let mut hi = f64::NEG_INFINITY;
            for &p in &order[start..end] {
                let c = self.coord(p, a);
                lo = lo.min(c);
                hi = hi.max(c);
            }
            if hi - lo > best_spread {
                best_spread = hi - lo;
                axis = a;
            }
        }
        if best_spread <= 0.0 {
            // All points identical: keep one leaf.
            self.nodes.push(Node::Leaf {
                start: start as u32,
                end: end as u32,
            });
            return (self.nodes.len() - 1) as u32;
        }
        let mid = start + count / 2;
        order[start..end].select_nth_unstable_by(mid - start, |&a, &b| {
            let ca = self.coords[a as usize * self.dim + axis];
            let cb = self.coords[b as usize * self.dim + axis];
            ca.partial_cmp(&cb).unwrap().then(a.cmp(&b))
        });
        let split_value = self.coord(order[mid], axis);
        let placeholder = self.nodes.len();
        self.nodes.push(Node::Leaf { start: 0, end: 0 });
        let left = self.build_range(order, start, mid);
        let right = self.build_range(order, mid, end);
        self.nodes[placeholder] = Node::Split {
            axis,
            value: split_value,
            left,
            right,
        };
        placeholder as u32
    }

    /// The `k` nearest stored points to `query` under L1 distance, sorted by
    /// `(distance, index)`. Returns fewer than `k` only if the tree is small.
    pub fn knn(&self, query: &[f64], k: usize) -> Vec<(f64, u32)> {
        debug_assert_eq!(query.len(), self.dim);
        let mut best: Vec<(f64, u32)> = Vec::with_capacity(k + 1);
        if self.order.is_empty() || k == 0 {
            return best;
        }
        let mut offsets = vec![0.0; self.dim];
        self.search(self.root, query, k, 0.0, &mut offsets, &mut best);
        best
    }

    fn search(
        &self,
        node: u32,
        query: &[f64],
        k: usize,
        bound: f64,
        offsets: &mut [f64],
        best: &mut Vec<(f64, u32)>,
    ) {
        match &self.nodes[node as usize] {
            Node::Leaf { start, end } => {
                for &p in &self.order[*start as usize..*end as usize] {
                    let base = p as usize * self.dim;
                    let mut dist = 0.0;
                    for (a, &q) in query.iter().enumerate() {
                        dist += (self.coords[base + a] - q).abs();
                    }
                    insert_candidate(best, k, dist, p);
                }
            }
            Node::Split {
                axis,
                value,
                left,
                right,
            } => {
                let delta = query[*axis] - *value;
                let (near, far) = if delta < 0.0 { (*left, *right) } else { (*right, *left) };
                self.search(near, query, k, bound, offsets, best);
                // Lower bound for the far side: replace this axis'
                // contribution with the distance to the splitting plane.
                let old = offsets[*axis];
                let plane = delta.abs().max(old);
                let far_bound = bound - old + plane;
                if best.len() < k || far_bound <= best.last().map(|b| b.0).unwrap_or(f64::INFINITY) {
                    offsets[*axis] = plane;
                    self.search(far, query, k, far_bound, offsets, best);
                    offsets[*axis] = old;
                }
            }
        }
    }
}

fn insert_candidate(best: &mut Vec<(f64, u32)>, k: usize, dist: f64, idx: u32) {
    let cand = (dist, idx);
    if best.len() == k {
        let worst = *best.last().unwrap();
        if !(cand.0 < worst.0 || (cand.0 == worst.0 && cand.1 < worst.1)) {
            return;
        }
    }
    let pos = best
        .iter()
        .position(|&(d, i)| cand.0 < d || (cand.0 == d && cand.1 < i))
        .unwrap_or(best.len());
    best.insert(pos, cand);
    if best.len() > k {
        best.pop();
    }
}
