//! Flat binary trees and the presorted greedy grower shared by all learners.

use rand::seq::index;
use rand_chacha::ChaCha8Rng;

use super::params::Criterion;

/// One node of a flat tree. Leaves have `feature_index == -1` and `-1` children.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Node {
    pub feature_index: i32,
    pub threshold: f64,
    pub left: i32,
    pub right: i32,
    /// Leaf output: a probability for dt/rf, a scaled weight for gbt, a mean for regression.
    pub leaf_value: f64,
    /// Weighted impurity decrease (dt/rf) or loss reduction (gbt) of this split.
    pub split_gain: f64,
}

impl Node {
    pub fn leaf(value: f64) -> Self {
        Node { feature_index: -1, threshold: 0.0, left: -1, right: -1, leaf_value: value, split_gain: 0.0 }
    }

    pub fn is_leaf(&self) -> bool {
        self.feature_index < 0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Tree {
    /// Preorder; `nodes[0]` is the root.
    pub nodes: Vec<Node>,
}

impl Tree {
    pub fn leaf(value: f64) -> Self {
        Tree { nodes: vec![Node::leaf(value)] }
    }

    pub fn root(&self) -> &Node {
        &self.nodes[0]
    }

    /// Leaf value reached by `row`; `x[f] <= threshold` goes left.
    pub fn predict(&self, row: &[f64]) -> f64 {
        let mut i = 0usize;
        loop {
            let n = &self.nodes[i];
            if n.is_leaf() {
                return n.leaf_value;
            }
            i = if row[n.feature_index as usize] <= n.threshold { n.left as usize } else { n.right as usize };
        }
    }

    pub fn depth(&self) -> usize {
        fn go(t: &Tree, i: usize) -> usize {
            let n = &t.nodes[i];
            if n.is_leaf() {
                0
            } else {
                1 + go(t, n.left as usize).max(go(t, n.right as usize))
            }
        }
        go(self, 0)
    }

    pub fn n_leaves(&self) -> usize {
        self.nodes.iter().filter(|n| n.is_leaf()).count()
    }

    pub(crate) fn accumulate_gain(&self, out: &mut [f64]) {
        for n in &self.nodes {
            if !n.is_leaf() {
                out[n.feature_index as usize] += n.split_gain;
            }
        }
    }

    /// Structural check for trees read from disk: every child index points
    /// forward, every non-root node has exactly one parent.
    pub fn validate(&self, n_features: usize) -> Result<(), String> {
        if self.nodes.is_empty() {
            return Err("tree has no nodes".into());
        }
        let mut parents = vec![0u32; self.nodes.len()];
        for (i, n) in self.nodes.iter().enumerate() {
            if !n.leaf_value.is_finite() || !n.threshold.is_finite() || !n.split_gain.is_finite() {
                return Err(format!("node {i} has a non-finite value"));
            }
            if n.is_leaf() {
                if n.feature_index != -1 || n.left != -1 || n.right != -1 {
                    return Err(format!("leaf {i} must use -1 sentinels"));
                }
                continue;
            }
            if n.feature_index as usize >= n_features {
                return Err(format!("node {i} splits on feature {} of {n_features}", n.feature_index));
            }
            for c in [n.left, n.right] {
                if c <= i as i32 || c as usize >= self.nodes.len() {
                    return Err(format!("node {i} has bad child {c}"));
                }
                parents[c as usize] += 1;
            }
        }
        if parents[0] != 0 || parents[1..].iter().any(|&p| p != 1) {
            return Err("nodes do not form a single tree".into());
        }
        Ok(())
    }
}

/// Split objective for the grower. Scores are "higher is better".
pub(crate) trait Objective {
    type Stats: Copy + Default;
    fn add(&self, st: &mut Self::Stats, sample: u32);
    fn sub(&self, a: &Self::Stats, b: &Self::Stats) -> Self::Stats;
    fn can_split(&self, st: &Self::Stats) -> bool;
    fn score(&self, parent: &Self::Stats, left: &Self::Stats, right: &Self::Stats) -> Option<f64>;
    fn gain(&self, parent: &Self::Stats, left: &Self::Stats, right: &Self::Stats, n_root: f64) -> f64;
    fn leaf_value(&self, st: &Self::Stats) -> f64;
    fn count(&self, st: &Self::Stats) -> f64;
}

/// Whether `candidate` beats `best` by more than rounding noise.
pub(crate) fn improves(candidate: f64, best: f64) -> bool {
    candidate > best + 1e-12 * (1.0 + best.abs())
}

/// Midpoint of two consecutive distinct values, never reaching `hi`.
pub(crate) fn midpoint(lo: f64, hi: f64) -> f64 {
    let mut t = (lo + hi) / 2.0;
    if !t.is_finite() {
        t = lo / 2.0 + hi / 2.0;
    }
    if t >= lo && t < hi {
        t
    } else {
        lo
    }
}

/// Sample positions sorted ascending by value, per column.
pub(crate) fn presort(cols: &[Vec<f64>]) -> Vec<Vec<u32>> {
    cols.iter()
        .map(|c| {
            let mut o: Vec<u32> = (0..c.len() as u32).collect();
            o.sort_by(|&a, &b| c[a as usize].total_cmp(&c[b as usize]));
            o
        })
        .collect()
}

pub(crate) struct Grower<'a, O: Objective> {
    /// Column values indexed by sample position, for every feature.
    cols: &'a [Vec<f64>],
    /// Features this tree may use, ascending.
    active: Vec<usize>,
    /// Sorted sample positions per active feature; a node owns a range.
    order: Vec<Vec<u32>>,
    obj: &'a O,
    max_depth: usize,
    per_node: usize,
    rng: &'a mut ChaCha8Rng,
    goes_left: Vec<bool>,
    scratch: Vec<u32>,
    nodes: Vec<Node>,
    n_root: f64,
}

struct Best<S> {
    score: f64,
    slot: usize,
    threshold: f64,
    split: usize,
    left: S,
}

impl<'a, O: Objective> Grower<'a, O> {
    /// `order` holds presorted positions for the `active` features only.
    pub(crate) fn new(
        cols: &'a [Vec<f64>],
        active: Vec<usize>,
        order: Vec<Vec<u32>>,
        obj: &'a O,
        max_depth: usize,
        per_node: usize,
        rng: &'a mut ChaCha8Rng,
    ) -> Self {
        let n = cols.first().map_or(0, Vec::len);
        let per_node = per_node.clamp(1, active.len().max(1));
        Grower {
            cols,
            active,
            order,
            obj,
            max_depth,
            per_node,
            rng,
            goes_left: vec![false; n],
            scratch: Vec::with_capacity(n),
            nodes: Vec::new(),
            n_root: 0.0,
        }
    }

    pub(crate) fn grow(mut self) -> Tree {
        let n = self.order.first().map_or(0, Vec::len);
        if self.active.is_empty() || n == 0 {
            let mut st = O::Stats::default();
            for s in 0..self.goes_left.len() as u32 {
                self.obj.add(&mut st, s);
            }
            return Tree::leaf(self.obj.leaf_value(&st));
        }
        self.grow_node(0, n, 0);
        Tree { nodes: self.nodes }
    }

    fn grow_node(&mut self, lo: usize, hi: usize, depth: usize) -> i32 {
        let mut stats = O::Stats::default();
        for &s in &self.order[0][lo..hi] {
            self.obj.add(&mut stats, s);
        }
        if depth == 0 {
            self.n_root = self.obj.count(&stats);
        }
        let id = self.nodes.len();
        self.nodes.push(Node::leaf(self.obj.leaf_value(&stats)));
        if depth >= self.max_depth || hi - lo < 2 || !self.obj.can_split(&stats) {
            return id as i32;
        }

        let slots: Vec<usize> = if self.per_node < self.active.len() {
            let mut v = index::sample(self.rng, self.active.len(), self.per_node).into_vec();
            v.sort_unstable();
            v
        } else {
            (0..self.active.len()).collect()
        };

        let mut best: Option<Best<O::Stats>> = None;
        for slot in slots {
            let col = &self.cols[self.active[slot]];
            let ord = &self.order[slot][lo..hi];
            let mut left = O::Stats::default();
            for i in 0..ord.len() - 1 {
                self.obj.add(&mut left, ord[i]);
                let v = col[ord[i] as usize];
                let vn = col[ord[i + 1] as usize];
                if vn <= v {
                    continue;
                }
                let right = self.obj.sub(&stats, &left);
                if let Some(sc) = self.obj.score(&stats, &left, &right) {
                    if best.as_ref().is_none_or(|b| improves(sc, b.score)) {
                        best = Some(Best { score: sc, slot, threshold: midpoint(v, vn), split: i + 1, left });
                    }
                }
            }
        }
        let Some(best) = best else {
            return id as i32;
        };

        let right = self.obj.sub(&stats, &best.left);
        {
            let node = &mut self.nodes[id];
            node.feature_index = self.active[best.slot] as i32;
            node.threshold = best.threshold;
            node.split_gain = self.obj.gain(&stats, &best.left, &right, self.n_root);
        }
        let mid = lo + best.split;
        for &s in &self.order[best.slot][lo..mid] {
            self.goes_left[s as usize] = true;
        }
        for slot in 0..self.order.len() {
            let range = &mut self.order[slot][lo..hi];
            self.scratch.clear();
            let mut w = 0;
            for i in 0..range.len() {
                let s = range[i];
                if self.goes_left[s as usize] {
                    range[w] = s;
                    w += 1;
                } else {
                    self.scratch.push(s);
                }
            }
            range[w..].copy_from_slice(&self.scratch);
        }
        for &s in &self.order[0][lo..mid] {
            self.goes_left[s as usize] = false;
        }

        let l = self.grow_node(lo, mid, depth + 1);
        let r = self.grow_node(mid, hi, depth + 1);
        self.nodes[id].left = l;
        self.nodes[id].right = r;
        id as i32
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub(crate) struct ClassStats {
    pub n: f64,
    pub pos: f64,
}

pub(crate) struct ClassObjective<'a> {
    pub y: &'a [f64],
    pub criterion: Criterion,
    pub min_leaf: f64,
    pub min_split: f64,
}

impl ClassObjective<'_> {
    fn weighted(&self, s: &ClassStats) -> f64 {
        s.n * self.criterion.impurity(s.n, s.pos)
    }
}

impl Objective for ClassObjective<'_> {
    type Stats = ClassStats;

    fn add(&self, st: &mut ClassStats, s: u32) {
        st.n += 1.0;
        st.pos += self.y[s as usize];
    }

    fn sub(&self, a: &ClassStats, b: &ClassStats) -> ClassStats {
        ClassStats { n: a.n - b.n, pos: a.pos - b.pos }
    }

    fn can_split(&self, st: &ClassStats) -> bool {
        st.n >= self.min_split && st.pos > 0.0 && st.pos < st.n
    }

    fn score(&self, _: &ClassStats, l: &ClassStats, r: &ClassStats) -> Option<f64> {
        if l.n < self.min_leaf || r.n < self.min_leaf {
            return None;
        }
        Some(-(self.weighted(l) + self.weighted(r)))
    }

    fn gain(&self, p: &ClassStats, l: &ClassStats, r: &ClassStats, n_root: f64) -> f64 {
        ((self.weighted(p) - self.weighted(l) - self.weighted(r)) / n_root).max(0.0)
    }

    fn leaf_value(&self, st: &ClassStats) -> f64 {
        if st.n > 0.0 {
            st.pos / st.n
        } else {
            0.5
        }
    }

    fn count(&self, st: &ClassStats) -> f64 {
        st.n
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub(crate) struct RegStats {
    pub n: f64,
    pub sum: f64,
    pub sumsq: f64,
}

pub(crate) struct RegObjective<'a> {
    pub t: &'a [f64],
    pub min_leaf: f64,
    pub min_split: f64,
}

impl Objective for RegObjective<'_> {
    type Stats = RegStats;

    fn add(&self, st: &mut RegStats, s: u32) {
        let v = self.t[s as usize];
        st.n += 1.0;
        st.sum += v;
        st.sumsq += v * v;
    }

    fn sub(&self, a: &RegStats, b: &RegStats) -> RegStats {
        RegStats { n: a.n - b.n, sum: a.sum - b.sum, sumsq: a.sumsq - b.sumsq }
    }

    fn can_split(&self, st: &RegStats) -> bool {
        let sse = st.sumsq - st.sum * st.sum / st.n;
        st.n >= self.min_split && sse > 1e-12 * (1.0 + st.sumsq)
    }

    fn score(&self, _: &RegStats, l: &RegStats, r: &RegStats) -> Option<f64> {
        if l.n < self.min_leaf || r.n < self.min_leaf {
            return None;
        }
        Some(l.sum * l.sum / l.n + r.sum * r.sum / r.n)
    }

    fn gain(&self, p: &RegStats, l: &RegStats, r: &RegStats, n_root: f64) -> f64 {
        let sc = l.sum * l.sum / l.n + r.sum * r.sum / r.n;
        ((sc - p.sum * p.sum / p.n) / n_root).max(0.0)
    }

    fn leaf_value(&self, st: &RegStats) -> f64 {
        if st.n > 0.0 {
            st.sum / st.n
        } else {
            0.0
        }
    }

    fn count(&self, st: &RegStats) -> f64 {
        st.n
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    #[test]
    fn midpoints() {
        assert_eq!(midpoint(1.0, 2.0), 1.5);
        let a = 1.0f64;
        let b = f64::from_bits(a.to_bits() + 1);
        assert_eq!(midpoint(a, b), a);
        let big = midpoint(f64::MAX * 0.75, f64::MAX);
        assert!(big.is_finite() && big >= f64::MAX * 0.75 && big < f64::MAX);
    }

    #[test]
    fn validate_rejects_cycles() {
        let mut t = Tree { nodes: vec![Node::leaf(0.0), Node::leaf(1.0), Node::leaf(0.0)] };
        t.nodes[0] = Node { feature_index: 0, threshold: 0.5, left: 1, right: 2, leaf_value: 0.5, split_gain: 1.0 };
        assert!(t.validate(1).is_ok());
        assert!(t.validate(0).is_err());
        t.nodes[0].right = 1;
        assert!(t.validate(1).is_err());
        t.nodes[0].right = 0;
        assert!(t.validate(1).is_err());
    }

    #[test]
    fn regression_grower_fits_step() {
        let cols = vec![vec![0.0, 1.0, 2.0, 3.0]];
        let t = [1.0, 1.0, 5.0, 5.0];
        let obj = RegObjective { t: &t, min_leaf: 1.0, min_split: 2.0 };
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let order = presort(&cols);
        let tree = Grower::new(&cols, vec![0], order, &obj, 4, 1, &mut rng).grow();
        assert_eq!(tree.nodes.len(), 3);
        assert_eq!(tree.predict(&[0.2]), 1.0);
        assert_eq!(tree.predict(&[2.7]), 5.0);
    }
}
