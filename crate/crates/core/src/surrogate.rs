//! Design sets and the k-nearest-neighbor surrogate m̂(θ).
//!
//! Neighbors are ranked by the pair (squared Euclidean distance, insertion
//! index), so ties always resolve towards the earlier node. The brute-force
//! scan in [`nearest_k`] defines the result; the kd-tree used by
//! [`KnnSurrogate`] for large design sets walks the same ordering and
//! returns identical neighbor lists, ties included.

use std::fmt::Write as _;
use std::io::{BufRead, Write};

use crate::density::BoundedDomain;
use crate::{Error, Result};

/// Default level of the surrogate before it has K nodes.
pub const DEFAULT_FALLBACK: f64 = 1.0;
/// Default positivity floor, relative to the fallback level.
pub const DEFAULT_RELATIVE_FLOOR: f64 = 1e-300;

/// Below this many nodes queries stay brute force.
const INDEX_MIN_NODES: usize = 512;
const LEAF_SIZE: usize = 16;

/// The ordered node set S = {(θᵢ, m̃ᵢ)}.
#[derive(Debug, Clone, PartialEq)]
pub struct DesignSet {
    dim: usize,
    coords: Vec<f64>,
    values: Vec<f64>,
}

impl DesignSet {
    pub fn new(dim: usize) -> Self {
        Self { dim, coords: Vec::new(), values: Vec::new() }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.coords[i * self.dim..(i + 1) * self.dim]
    }

    pub fn value(&self, i: usize) -> f64 {
        self.values[i]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn push(&mut self, theta: &[f64], value: f64) -> Result<()> {
        if theta.len() != self.dim {
            return Err(Error::Dimension { expected: self.dim, got: theta.len() });
        }
        if !(value >= 0.0 && value.is_finite()) {
            return Err(Error::InvalidParameter(format!("node value must be finite and >= 0, got {value}")));
        }
        self.coords.extend_from_slice(theta);
        self.values.push(value);
        Ok(())
    }

    /// One node per line: coordinates, then the value, space separated.
    pub fn write_text<W: Write>(&self, mut w: W) -> Result<()> {
        let mut line = String::new();
        for i in 0..self.len() {
            line.clear();
            for x in self.point(i) {
                write!(line, "{x} ").expect("string write");
            }
            write!(line, "{}", self.values[i]).expect("string write");
            writeln!(w, "{line}").map_err(|e| Error::Io(e.to_string()))?;
        }
        Ok(())
    }

    /// Inverse of [`DesignSet::write_text`]. Blank lines and lines starting
    /// with `#` are skipped.
    pub fn read_text<R: BufRead>(dim: usize, r: R) -> Result<Self> {
        let mut set = Self::new(dim);
        for (n, line) in r.lines().enumerate() {
            let line = line.map_err(|e| Error::Io(e.to_string()))?;
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let nums = line
                .split_whitespace()
                .map(|t| t.parse::<f64>())
                .collect::<std::result::Result<Vec<_>, _>>()
                .map_err(|e| Error::Parse { line: n + 1, msg: e.to_string() })?;
            if nums.len() != dim + 1 {
                return Err(Error::Parse {
                    line: n + 1,
                    msg: format!("expected {} fields, found {}", dim + 1, nums.len()),
                });
            }
            set.push(&nums[..dim], nums[dim]).map_err(|e| Error::Parse { line: n + 1, msg: e.to_string() })?;
        }
        Ok(set)
    }

    fn dist2(&self, i: usize, theta: &[f64]) -> f64 {
        let mut s = 0.0;
        for (a, b) in self.point(i).iter().zip(theta) {
            let d = a - b;
            s += d * d;
        }
        s
    }
}

/// Candidate (squared distance, index); the lexicographic order is the
/// neighbor ranking.
#[derive(Debug, Clone, Copy, PartialEq)]
struct Cand {
    d2: f64,
    idx: usize,
}

impl Cand {
    fn before(&self, other: &Cand) -> bool {
        self.d2 < other.d2 || (self.d2 == other.d2 && self.idx < other.idx)
    }
}

/// Bounded sorted list of the best k candidates seen so far.
struct TopK {
    k: usize,
    items: Vec<Cand>,
}

impl TopK {
    fn new(k: usize) -> Self {
        Self { k, items: Vec::with_capacity(k + 1) }
    }

    fn full(&self) -> bool {
        self.items.len() == self.k
    }

    fn worst_d2(&self) -> f64 {
        if self.full() {
            self.items[self.k - 1].d2
        } else {
            f64::INFINITY
        }
    }

    fn offer(&mut self, c: Cand) {
        if self.full() && !c.before(&self.items[self.k - 1]) {
            return;
        }
        let pos = self.items.partition_point(|x| x.before(&c));
        self.items.insert(pos, c);
        if self.items.len() > self.k {
            self.items.pop();
        }
    }
}

/// Exact k nearest nodes by brute force, among the first `len` nodes.
fn scan_prefix(design: &DesignSet, theta: &[f64], k: usize, len: usize) -> Vec<Cand> {
    let mut top = TopK::new(k);
    for i in 0..len {
        top.offer(Cand { d2: design.dist2(i, theta), idx: i });
    }
    top.items
}

/// Indices of the `k` nodes closest to θ, nearest first, ties by insertion
/// order. Brute-force reference implementation.
pub fn nearest_k(design: &DesignSet, theta: &[f64], k: usize) -> Result<Vec<usize>> {
    if theta.len() != design.dim() {
        return Err(Error::Dimension { expected: design.dim(), got: theta.len() });
    }
    if k == 0 || k > design.len() {
        return Err(Error::Size(format!("k = {k} with {} design nodes", design.len())));
    }
    Ok(scan_prefix(design, theta, k, design.len()).into_iter().map(|c| c.idx).collect())
}

#[derive(Debug, Clone)]
enum KdNode {
    Leaf { start: usize, end: usize },
    Split { axis: usize, value: f64, left: usize, right: usize },
}

/// Static kd-tree over the first `built` nodes of a design set.
#[derive(Debug, Clone)]
struct KdTree {
    perm: Vec<usize>,
    nodes: Vec<KdNode>,
    built: usize,
}

impl KdTree {
    fn build(design: &DesignSet) -> Self {
        let n = design.len();
        let mut tree = KdTree { perm: (0..n).collect(), nodes: Vec::new(), built: n };
        tree.build_range(design, 0, n);
        tree
    }

    fn build_range(&mut self, design: &DesignSet, start: usize, end: usize) -> usize {
        let id = self.nodes.len();
        if end - start <= LEAF_SIZE {
            self.nodes.push(KdNode::Leaf { start, end });
            return id;
        }
        let dim = design.dim();
        let mut axis = 0;
        let mut best_spread = -1.0;
        for a in 0..dim {
            let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
            for &i in &self.perm[start..end] {
                let x = design.point(i)[a];
                lo = lo.min(x);
                hi = hi.max(x);
            }
            if hi - lo > best_spread {
                best_spread = hi - lo;
                axis = a;
            }
        }
        let mid = start + (end - start) / 2;
        self.perm[start..end].select_nth_unstable_by(mid - start, |&i, &j| {
            design.point(i)[axis].total_cmp(&design.point(j)[axis])
        });
        let value = design.point(self.perm[mid])[axis];
        self.nodes.push(KdNode::Leaf { start: 0, end: 0 });
        let left = self.build_range(design, start, mid);
        let right = self.build_range(design, mid, end);
        self.nodes[id] = KdNode::Split { axis, value, left, right };
        id
    }

    /// Offers every indexed node with index < `len` that could enter the
    /// top-k. Subtrees are pruned only when strictly farther than the
    /// current k-th candidate, so equal-distance nodes are never skipped.
    fn query(&self, design: &DesignSet, theta: &[f64], len: usize, top: &mut TopK) {
        if self.nodes.is_empty() {
            return;
        }
        self.visit(0, design, theta, len, top);
    }

    fn visit(&self, node: usize, design: &DesignSet, theta: &[f64], len: usize, top: &mut TopK) {
        match self.nodes[node] {
            KdNode::Leaf { start, end } => {
                for &i in &self.perm[start..end] {
                    if i < len {
                        top.offer(Cand { d2: design.dist2(i, theta), idx: i });
                    }
                }
            }
            KdNode::Split { axis, value, left, right } => {
                let diff = theta[axis] - value;
                let (near, far) = if diff <= 0.0 { (left, right) } else { (right, left) };
                self.visit(near, design, theta, len, top);
                if diff * diff <= top.worst_d2() {
                    self.visit(far, design, theta, len, top);
                }
            }
        }
    }
}

/// kNN regression surrogate over a growing design set.
#[derive(Debug, Clone)]
pub struct KnnSurrogate {
    design: DesignSet,
    k: usize,
    fallback: f64,
    floor: f64,
    domain: BoundedDomain,
    accelerate: bool,
    tree: Option<KdTree>,
}

impl KnnSurrogate {
    /// Empty surrogate with the default fallback u = 1 and floor δ = 10⁻³⁰⁰·u.
    pub fn new(domain: BoundedDomain, k: usize) -> Result<Self> {
        Self::with_levels(domain, k, DEFAULT_FALLBACK, DEFAULT_RELATIVE_FLOOR * DEFAULT_FALLBACK)
    }

    pub fn with_levels(domain: BoundedDomain, k: usize, fallback: f64, floor: f64) -> Result<Self> {
        if k == 0 {
            return Err(Error::InvalidParameter("K must be at least 1".into()));
        }
        if !(fallback > 0.0 && floor > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "fallback and floor must be positive, got {fallback} and {floor}"
            )));
        }
        Ok(Self {
            design: DesignSet::new(domain.dim()),
            k,
            fallback,
            floor,
            domain,
            accelerate: true,
            tree: None,
        })
    }

    /// Seeds the surrogate with an existing design set.
    pub fn with_design(mut self, design: DesignSet) -> Result<Self> {
        if design.dim() != self.domain.dim() {
            return Err(Error::Dimension { expected: self.domain.dim(), got: design.dim() });
        }
        for i in 0..design.len() {
            self.domain.check(design.point(i))?;
        }
        self.design = design;
        self.tree = None;
        self.maybe_reindex();
        Ok(self)
    }

    /// Turns the kd-tree off; every query becomes a linear scan.
    pub fn brute_force(mut self) -> Self {
        self.accelerate = false;
        self.tree = None;
        self
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn floor(&self) -> f64 {
        self.floor
    }

    pub fn fallback(&self) -> f64 {
        self.fallback
    }

    pub fn domain(&self) -> &BoundedDomain {
        &self.domain
    }

    pub fn design(&self) -> &DesignSet {
        &self.design
    }

    pub fn len(&self) -> usize {
        self.design.len()
    }

    pub fn is_empty(&self) -> bool {
        self.design.is_empty()
    }

    /// m̂(θ) over the full design set.
    pub fn predict(&self, theta: &[f64]) -> Result<f64> {
        self.predict_prefix(theta, self.design.len())
    }

    /// m̂(θ) as it was when the design set held its first `len` nodes.
    pub fn predict_prefix(&self, theta: &[f64], len: usize) -> Result<f64> {
        self.domain.check(theta)?;
        if len > self.design.len() {
            return Err(Error::Size(format!("prefix {len} beyond {} nodes", self.design.len())));
        }
        if len < self.k {
            return Ok(self.fallback);
        }
        let nn = self.neighbors(theta, len);
        let sum: f64 = nn.iter().map(|c| self.design.value(c.idx)).sum();
        Ok((sum / self.k as f64).max(self.floor))
    }

    fn neighbors(&self, theta: &[f64], len: usize) -> Vec<Cand> {
        match &self.tree {
            Some(tree) => {
                let mut top = TopK::new(self.k);
                tree.query(&self.design, theta, len, &mut top);
                for i in tree.built..len {
                    top.offer(Cand { d2: self.design.dist2(i, theta), idx: i });
                }
                top.items
            }
            None => scan_prefix(&self.design, theta, self.k, len),
        }
    }

    /// Adds (θ, value) to the design set.
    pub fn insert(&mut self, theta: &[f64], value: f64) -> Result<()> {
        self.domain.check(theta)?;
        self.design.push(theta, value)?;
        self.maybe_reindex();
        Ok(())
    }

    fn maybe_reindex(&mut self) {
        if !self.accelerate || self.design.len() < INDEX_MIN_NODES {
            return;
        }
        let built = self.tree.as_ref().map_or(0, |t| t.built);
        let tail = self.design.len() - built;
        if tail >= (built / 4).max(256) {
            self.tree = Some(KdTree::build(&self.design));
        }
    }
}
