//! Static 3-d tree for nearest-neighbour distances.

use rayon::prelude::*;

use crate::scene::Vec3;

const LEAF: usize = 8;

#[derive(Debug, Clone)]
enum Node {
    Leaf { start: usize, end: usize },
    Split { axis: usize, value: f64, left: usize, right: usize },
}

#[derive(Debug, Clone)]
pub struct KdTree {
    points: Vec<Vec3>,
    nodes: Vec<Node>,
}

impl KdTree {
    pub fn new(points: &[Vec3]) -> Self {
        let mut t = Self {
            points: points.to_vec(),
            nodes: Vec::new(),
        };
        if !points.is_empty() {
            let n = t.points.len();
            t.build(0, n);
        }
        t
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    fn build(&mut self, start: usize, end: usize) -> usize {
        let id = self.nodes.len();
        if end - start <= LEAF {
            self.nodes.push(Node::Leaf { start, end });
            return id;
        }
        let slice = &mut self.points[start..end];
        let (mut lo, mut hi) = (Vec3::repeat(f64::INFINITY), Vec3::repeat(f64::NEG_INFINITY));
        for p in slice.iter() {
            lo = lo.inf(p);
            hi = hi.sup(p);
        }
        let axis = (hi - lo).imax();
        let mid = slice.len() / 2;
        slice.select_nth_unstable_by(mid, |a, b| a[axis].total_cmp(&b[axis]));
        let value = slice[mid][axis];
        self.nodes.push(Node::Leaf { start: 0, end: 0 });
        let left = self.build(start, start + mid);
        let right = self.build(start + mid, end);
        self.nodes[id] = Node::Split {
            axis,
            value,
            left,
            right,
        };
        id
    }

    /// Squared distance to, and index-free copy of, the nearest point.
    pub fn nearest(&self, q: &Vec3) -> Option<(Vec3, f64)> {
        if self.points.is_empty() {
            return None;
        }
        let mut best = (self.points[0], f64::INFINITY);
        self.search(0, q, &mut best);
        Some((best.0, best.1.sqrt()))
    }

    fn search(&self, node: usize, q: &Vec3, best: &mut (Vec3, f64)) {
        match self.nodes[node] {
            Node::Leaf { start, end } => {
                for p in &self.points[start..end] {
                    let d = (p - q).norm_squared();
                    if d < best.1 {
                        *best = (*p, d);
                    }
                }
            }
            Node::Split {
                axis,
                value,
                left,
                right,
            } => {
                let diff = q[axis] - value;
                let (near, far) = if diff < 0.0 { (left, right) } else { (right, left) };
                self.search(near, q, best);
                if diff * diff < best.1 {
                    self.search(far, q, best);
                }
            }
        }
    }

    /// Distance from every query to its nearest point.
    pub fn distances(&self, queries: &[Vec3]) -> Vec<f64> {
        queries
            .par_iter()
            .map(|q| self.nearest(q).map_or(f64::INFINITY, |(_, d)| d))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn matches_brute_force() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut pts: Vec<Vec3> = (0..2000)
            .map(|_| Vec3::new(rng.random(), rng.random(), rng.random()))
            .collect();
        pts.extend(std::iter::repeat(Vec3::new(0.5, 0.5, 0.5)).take(30));
        let tree = KdTree::new(&pts);
        for _ in 0..300 {
            let q = Vec3::new(rng.random_range(-0.2..1.2), rng.random(), rng.random());
            let brute = pts.iter().map(|p| (p - q).norm()).fold(f64::INFINITY, f64::min);
            let (_, d) = tree.nearest(&q).unwrap();
            assert_eq!(d, brute);
        }
    }

    #[test]
    fn empty_tree() {
        assert!(KdTree::new(&[]).nearest(&Vec3::zeros()).is_none());
    }
}
