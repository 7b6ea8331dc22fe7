//! Exact k-nearest-neighbour search over a borrowed flat coordinate buffer.
//!
//! Median-split k-d tree with preorder node layout and a bounded max-heap
//! for candidates. Queries never approximate: pruning uses exact squared
//! distances, and `knn_with_ties` completes the boundary tie group so that
//! callers see the full multiset of points at the k-th distance.

use std::collections::BinaryHeap;

const LEAF_SIZE: usize = 24;

/// One search hit: distance to the query plus the point index.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Neighbor {
    pub dist: f64,
    pub index: usize,
}

enum Node {
    // Left child is the next node in preorder; `right` is explicit.
    Branch { dim: u16, val: f64, right: u32 },
    Leaf { start: u32, end: u32 },
}

pub struct KdTree<'a> {
    coords: &'a [f64],
    dim: usize,
    nodes: Vec<Node>,
    order: Vec<u32>,
}

#[derive(PartialEq)]
struct HeapItem {
    d2: f64,
    index: u32,
}

impl Eq for HeapItem {}

impl Ord for HeapItem {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.d2
            .total_cmp(&other.d2)
            .then(self.index.cmp(&other.index))
    }
}

impl PartialOrd for HeapItem {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

#[inline]
fn dist2(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
}

impl<'a> KdTree<'a> {
    /// Build over `n = coords.len() / dim` points. O(n log n).
    pub fn new(coords: &'a [f64], dim: usize) -> Self {
        assert!(dim >= 1 && coords.len().is_multiple_of(dim));
        let n = coords.len() / dim;
        let mut tree = KdTree {
            coords,
            dim,
            nodes: Vec::with_capacity(2 * n / LEAF_SIZE + 1),
            order: (0..n as u32).collect(),
        };
        if n > 0 {
            tree.build(0, n);
        }
        tree
    }

    pub fn len(&self) -> usize {
        self.order.len()
    }

    pub fn is_empty(&self) -> bool {
        self.order.is_empty()
    }

    fn point(&self, idx: u32) -> &[f64] {
        let i = idx as usize * self.dim;
        &self.coords[i..i + self.dim]
    }

    fn build(&mut self, lo: usize, hi: usize) -> u32 {
        let me = self.nodes.len() as u32;
        if hi - lo <= LEAF_SIZE {
            self.nodes.push(Node::Leaf {
                start: lo as u32,
                end: hi as u32,
            });
            return me;
        }
        // Split along the widest extent.
        let mut best_dim = 0usize;
        let mut best_extent = -1.0f64;
        for d in 0..self.dim {
            let mut min = f64::INFINITY;
            let mut max = f64::NEG_INFINITY;
            for &idx in &self.order[lo..hi] {
                let c = self.coords[idx as usize * self.dim + d];
                min = min.min(c);
                max = max.max(c);
            }
            if max - min > best_extent {
                best_extent = max - min;
                best_dim = d;
            }
        }
        if best_extent <= 0.0 {
            // All points coincide; no split can separate them.
            self.nodes.push(Node::Leaf {
                start: lo as u32,
                end: hi as u32,
            });
            return me;
        }
        let mid = (lo + hi) / 2;
        let dim = self.dim;
        let coords = self.coords;
        self.order[lo..hi].select_nth_unstable_by(mid - lo, |&a, &b| {
            coords[a as usize * dim + best_dim].total_cmp(&coords[b as usize * dim + best_dim])
        });
        let val = coords[self.order[mid] as usize * dim + best_dim];
        self.nodes.push(Node::Branch {
            dim: best_dim as u16,
            val,
            right: 0, // patched below
        });
        let left = self.build(lo, mid);
        debug_assert_eq!(left, me + 1);
        let right = self.build(mid, hi);
        let Node::Branch { right: slot, .. } = &mut self.nodes[me as usize] else {
            unreachable!()
        };
        *slot = right;
        me
    }

    /// The `k` nearest points, sorted by `(distance, index)`.
    pub fn knn(&self, query: &[f64], k: usize) -> Vec<Neighbor> {
        assert_eq!(query.len(), self.dim);
        let k = k.min(self.len());
        if k == 0 {
            return Vec::new();
        }
        let mut heap: BinaryHeap<HeapItem> = BinaryHeap::with_capacity(k + 1);
        self.search(0, query, k, &mut heap);
        // into_sorted_vec is ascending in (d2, index).
        heap.into_sorted_vec()
            .into_iter()
            .map(|h| Neighbor {
                dist: h.d2.sqrt(),
                index: h.index as usize,
            })
            .collect()
    }

    fn search(&self, node: u32, query: &[f64], k: usize, heap: &mut BinaryHeap<HeapItem>) {
        match &self.nodes[node as usize] {
            Node::Leaf { start, end } => {
                for &idx in &self.order[*start as usize..*end as usize] {
                    let d2 = dist2(query, self.point(idx));
                    if heap.len() < k {
                        heap.push(HeapItem { d2, index: idx });
                    } else if d2 < heap.peek().unwrap().d2 {
                        heap.pop();
                        heap.push(HeapItem { d2, index: idx });
                    }
                }
            }
            Node::Branch { dim, val, right } => {
                let diff = query[*dim as usize] - val;
                let (near, far) = if diff <= 0.0 {
                    (node + 1, *right)
                } else {
                    (*right, node + 1)
                };
                self.search(near, query, k, heap);
                let bound = if heap.len() < k {
                    f64::INFINITY
                } else {
                    heap.peek().unwrap().d2
                };
                if diff * diff <= bound {
                    self.search(far, query, k, heap);
                }
            }
        }
    }

    /// Every point whose distance (`sqrt` of the squared distance, the same
    /// expression the other queries use) is `<= radius`, sorted.
    ///
    /// The tree is pruned with a slightly widened squared bound and the
    /// final filter runs on the sqrt scale, so boundary ties are decided
    /// exactly like a brute-force scan would decide them.
    pub fn within(&self, query: &[f64], radius: f64) -> Vec<Neighbor> {
        assert_eq!(query.len(), self.dim);
        if self.is_empty() || radius < 0.0 {
            return Vec::new();
        }
        let r2 = radius * radius * (1.0 + 4.0 * f64::EPSILON) + f64::MIN_POSITIVE;
        let mut hits = Vec::new();
        self.range(0, query, r2, &mut hits);
        let mut out: Vec<Neighbor> = hits
            .into_iter()
            .filter_map(|(d2, idx)| {
                let dist = d2.sqrt();
                (dist <= radius).then_some(Neighbor {
                    dist,
                    index: idx as usize,
                })
            })
            .collect();
        out.sort_by(|a, b| a.dist.total_cmp(&b.dist).then(a.index.cmp(&b.index)));
        out
    }

    fn range(&self, node: u32, query: &[f64], r2: f64, hits: &mut Vec<(f64, u32)>) {
        match &self.nodes[node as usize] {
            Node::Leaf { start, end } => {
                for &idx in &self.order[*start as usize..*end as usize] {
                    let d2 = dist2(query, self.point(idx));
                    if d2 <= r2 {
                        hits.push((d2, idx));
                    }
                }
            }
            Node::Branch { dim, val, right } => {
                let diff = query[*dim as usize] - val;
                if diff <= 0.0 {
                    self.range(node + 1, query, r2, hits);
                    if diff * diff <= r2 {
                        self.range(*right, query, r2, hits);
                    }
                } else {
                    self.range(*right, query, r2, hits);
                    if diff * diff <= r2 {
                        self.range(node + 1, query, r2, hits);
                    }
                }
            }
        }
    }

    /// The `k` nearest points plus every further point tied with the k-th
    /// distance. Result length is `>= min(k, n)` and sorted by
    /// `(distance, index)`.
    pub fn knn_with_ties(&self, query: &[f64], k: usize) -> Vec<Neighbor> {
        let k = k.min(self.len());
        if k == 0 {
            return Vec::new();
        }
        let base = self.knn(query, k);
        self.within(query, base.last().unwrap().dist)
    }
}

/// Brute-force reference used by tests and by the non-tree code paths.
pub fn brute_force_knn(coords: &[f64], dim: usize, query: &[f64], k: usize) -> Vec<Neighbor> {
    let n = coords.len() / dim;
    let mut all: Vec<Neighbor> = (0..n)
        .map(|i| Neighbor {
            dist: dist2(query, &coords[i * dim..(i + 1) * dim]).sqrt(),
            index: i,
        })
        .collect();
    all.sort_by(|a, b| a.dist.total_cmp(&b.dist).then(a.index.cmp(&b.index)));
    all.truncate(k);
    all
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn knn_on_line() {
        let coords = vec![0.0, 1.0, 3.0, 7.0];
        let tree = KdTree::new(&coords, 1);
        let hits = tree.knn(&[0.0], 2);
        assert_eq!(hits.len(), 2);
        assert_eq!(hits[0].index, 0);
        assert_eq!(hits[0].dist, 0.0);
        assert_eq!(hits[1].index, 1);
        assert_eq!(hits[1].dist, 1.0);
    }

    #[test]
    fn ties_are_completed() {
        // Four points at distance exactly 1 from the origin.
        let coords = vec![1.0, 0.0, -1.0, 0.0, 0.0, 1.0, 0.0, -1.0];
        let tree = KdTree::new(&coords, 2);
        let hits = tree.knn_with_ties(&[0.0, 0.0], 2);
        assert_eq!(hits.len(), 4);
        assert!(hits.iter().all(|h| h.dist == 1.0));
    }

    #[test]
    fn duplicate_points_supported() {
        let coords = vec![2.0; 64];
        let tree = KdTree::new(&coords, 2);
        let hits = tree.knn(&[2.0, 2.0], 5);
        assert_eq!(hits.len(), 5);
        assert!(hits.iter().all(|h| h.dist == 0.0));
    }

    proptest! {
        #[test]
        fn matches_brute_force(
            pts in prop::collection::vec(-10.0f64..10.0, 3 * 5..3 * 160),
            q in prop::collection::vec(-12.0f64..12.0, 3),
            k in 1usize..40,
        ) {
            let n = pts.len() / 3;
            let coords = &pts[..n * 3];
            let tree = KdTree::new(coords, 3);
            let got = tree.knn(&q, k);
            let want = brute_force_knn(coords, 3, &q, k.min(n));
            prop_assert_eq!(got.len(), want.len());
            for (g, w) in got.iter().zip(&want) {
                // Equal distances may legitimately swap indices; distances
                // themselves must agree bit-for-bit.
                prop_assert_eq!(g.dist, w.dist);
            }
        }

        #[test]
        fn within_matches_filter(
            pts in prop::collection::vec(-5.0f64..5.0, 2 * 4..2 * 120),
            q in prop::collection::vec(-6.0f64..6.0, 2),
            r in 0.0f64..8.0,
        ) {
            let n = pts.len() / 2;
            let coords = &pts[..n * 2];
            let tree = KdTree::new(coords, 2);
            let got = tree.within(&q, r);
            let want: Vec<usize> = (0..n)
                .filter(|&i| dist2(&q, &coords[i * 2..i * 2 + 2]).sqrt() <= r)
                .collect();
            let got_idx: Vec<usize> = {
                let mut v: Vec<usize> = got.iter().map(|h| h.index).collect();
                v.sort_unstable();
                v
            };
            prop_assert_eq!(got_idx, want);
        }
    }
}
