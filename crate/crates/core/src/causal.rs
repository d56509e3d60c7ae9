//! PC-algorithm causal discovery on top of an independence oracle.
//!
//! The skeleton search is the stable variant: every edge at a given depth is
//! tested against a snapshot of the adjacencies taken at the start of that
//! depth, and removals are applied only once the depth is finished. Tests are
//! issued with endpoints and conditioning sets ordered by column name, so the
//! output depends on the set of columns and not on their order.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use log::debug;
use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::citest::{run_test, TestSpec};
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::nulldist::NullCache;

/// Conditional independence oracle used by the skeleton search.
pub trait CiOracle: Sync {
    fn name(&self) -> &'static str;

    /// p-value of `x ⫫ y | cond` (columns of `data`).
    fn p_value(&self, data: &Dataset, x: usize, y: usize, cond: &[usize]) -> Result<f64>;

    /// Called once per depth before the parallel tests at that depth.
    fn prepare(&self, _data: &Dataset, _depth: usize) -> Result<()> {
        Ok(())
    }
}

/// The rho test, calibrated through a shared [`NullCache`]. At depth 0 it
/// runs the unconditional form.
pub struct RhoOracle<'a> {
    base: TestSpec,
    cache: &'a NullCache,
}

impl<'a> RhoOracle<'a> {
    /// `base` supplies kernel, bandwidth, replicate count and seeds; its column
    /// selections are replaced per test.
    pub fn new(base: TestSpec, cache: &'a NullCache) -> Self {
        Self { base, cache }
    }
}

impl CiOracle for RhoOracle<'_> {
    fn name(&self) -> &'static str {
        "rho"
    }

    fn p_value(&self, data: &Dataset, x: usize, y: usize, cond: &[usize]) -> Result<f64> {
        let name = |i: usize| data.names()[i].clone();
        let spec = TestSpec {
            x_cols: vec![name(x)],
            y_cols: vec![name(y)],
            z_cols: cond.iter().map(|&c| name(c)).collect(),
            ..self.base.clone()
        };
        Ok(run_test(data, &spec, self.cache)?.p_value)
    }

    fn prepare(&self, data: &Dataset, depth: usize) -> Result<()> {
        let dims = (1, 1, depth);
        self.cache.get_or_build(self.base.null_key(data.n(), dims)).map(|_| ())
    }
}

/// Fisher-z test of zero partial correlation, for cross-checks.
#[derive(Debug, Clone, Copy, Default)]
pub struct PartialCorrelationOracle;

/// Sample partial correlation of columns `x` and `y` given `cond`.
pub fn partial_correlation(data: &Dataset, x: usize, y: usize, cond: &[usize]) -> Result<f64> {
    let idx: Vec<usize> = [x, y].into_iter().chain(cond.iter().copied()).collect();
    let n = data.n() as f64;
    let cols: Vec<(f64, f64, &[f64])> = idx
        .iter()
        .map(|&i| {
            let c = data.column(i);
            let m = c.iter().sum::<f64>() / n;
            let sd = (c.iter().map(|v| (v - m).powi(2)).sum::<f64>() / n).sqrt();
            (m, sd, c)
        })
        .collect();
    if let Some(k) = cols.iter().position(|(_, sd, _)| *sd == 0.0) {
        return Err(Error::ConstantColumn(data.names()[idx[k]].clone()));
    }
    let k = idx.len();
    let corr = DMatrix::from_fn(k, k, |a, b| {
        let (ma, sa, ca) = cols[a];
        let (mb, sb, cb) = cols[b];
        ca.iter().zip(cb).map(|(u, v)| (u - ma) * (v - mb)).sum::<f64>() / (n * sa * sb)
    });
    let prec = corr
        .try_inverse()
        .ok_or_else(|| Error::DimensionMismatch("correlation matrix is singular".into()))?;
    Ok((-prec[(0, 1)] / (prec[(0, 0)] * prec[(1, 1)]).sqrt()).clamp(-1.0, 1.0))
}

impl CiOracle for PartialCorrelationOracle {
    fn name(&self) -> &'static str {
        "pcor"
    }

    fn p_value(&self, data: &Dataset, x: usize, y: usize, cond: &[usize]) -> Result<f64> {
        let dof = data.n() as f64 - cond.len() as f64 - 3.0;
        if dof <= 0.0 {
            return Err(Error::InsufficientSample {
                n: data.n(),
                min: cond.len() + 4,
            });
        }
        let r = partial_correlation(data, x, y, cond)?.clamp(-1.0 + 1e-15, 1.0 - 1e-15);
        let z = r.atanh() * dof.sqrt();
        let normal = Normal::standard();
        Ok(2.0 * (1.0 - normal.cdf(z.abs())))
    }
}

/// Ordered pair key with `a < b`.
fn key(a: usize, b: usize) -> (usize, usize) {
    (a.min(b), a.max(b))
}

/// Undirected skeleton with the separating sets found while pruning it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Skeleton {
    pub node_names: Vec<String>,
    pub edges: BTreeSet<(usize, usize)>,
    pub sepsets: BTreeMap<(usize, usize), Vec<usize>>,
    /// Number of oracle calls made.
    pub tests_run: usize,
}

impl Skeleton {
    pub fn adjacent(&self, a: usize, b: usize) -> bool {
        a != b && self.edges.contains(&key(a, b))
    }

    pub fn neighbors(&self, a: usize) -> Vec<usize> {
        (0..self.node_names.len()).filter(|&b| self.adjacent(a, b)).collect()
    }

    /// Edges as name pairs, each pair and the list sorted. Comparable across
    /// column orders.
    pub fn named_edges(&self) -> Vec<(String, String)> {
        named_pairs(&self.node_names, self.edges.iter().copied())
    }
}

fn named_pairs(names: &[String], edges: impl Iterator<Item = (usize, usize)>) -> Vec<(String, String)> {
    let mut out: Vec<(String, String)> = edges
        .map(|(a, b)| {
            let (x, y) = (names[a].clone(), names[b].clone());
            if x <= y {
                (x, y)
            } else {
                (y, x)
            }
        })
        .collect();
    out.sort();
    out
}

/// Subsets of `pool` of size `k`, in lexicographic order of positions.
fn subsets(pool: &[usize], k: usize) -> Vec<Vec<usize>> {
    fn rec(pool: &[usize], k: usize, start: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for i in start..pool.len() {
            if pool.len() - i < k - cur.len() {
                break;
            }
            cur.push(pool[i]);
            rec(pool, k, i + 1, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(pool, k, 0, &mut Vec::with_capacity(k), &mut out);
    out
}

/// Outcome of testing one edge at one depth.
struct EdgeOutcome {
    sepset: Option<Vec<usize>>,
    tests: usize,
}

/// Stable PC skeleton search over all columns of `data`.
pub fn pc_skeleton(data: &Dataset, alpha: f64, max_depth: usize, oracle: &dyn CiOracle) -> Result<Skeleton> {
    let p = data.n_cols();
    if p < 2 {
        return Err(Error::InvalidArgument(format!("causal discovery needs at least 2 columns, got {p}")));
    }
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::InvalidAlpha(alpha));
    }
    let names = data.names();
    // rank of each node in name order; all enumeration goes through it
    let mut by_name: Vec<usize> = (0..p).collect();
    by_name.sort_by(|&a, &b| names[a].cmp(&names[b]));
    let mut rank = vec![0; p];
    for (r, &i) in by_name.iter().enumerate() {
        rank[i] = r;
    }

    let mut edges: BTreeSet<(usize, usize)> = (0..p).flat_map(|a| (a + 1..p).map(move |b| (a, b))).collect();
    let mut sepsets = BTreeMap::new();
    let mut tests_run = 0;

    for depth in 0..=max_depth {
        let snapshot: Vec<Vec<usize>> = (0..p)
            .map(|a| {
                let mut nb: Vec<usize> = (0..p).filter(|&b| b != a && edges.contains(&key(a, b))).collect();
                nb.sort_by_key(|&b| rank[b]);
                nb
            })
            .collect();
        let candidates: Vec<(usize, usize)> = edges
            .iter()
            .copied()
            .filter(|&(a, b)| snapshot[a].len() > depth || snapshot[b].len() > depth)
            .collect();
        if candidates.is_empty() {
            break;
        }
        oracle.prepare(data, depth)?;
        debug!("pc depth {depth}: {} candidate edges", candidates.len());

        let outcomes: Vec<Result<EdgeOutcome>> = candidates
            .par_iter()
            .map(|&(a, b)| {
                let (x, y) = if rank[a] < rank[b] { (a, b) } else { (b, a) };
                let mut tried = BTreeSet::new();
                let mut tests = 0;
                for (from, other) in [(x, y), (y, x)] {
                    let pool: Vec<usize> = snapshot[from].iter().copied().filter(|&c| c != other).collect();
                    for s in subsets(&pool, depth) {
                        let mut sorted = s.clone();
                        sorted.sort_unstable();
                        if !tried.insert(sorted) {
                            continue;
                        }
                        tests += 1;
                        let pv = oracle.p_value(data, x, y, &s).map_err(|e| Error::Oracle {
                            x: names[x].clone(),
                            y: names[y].clone(),
                            cond: s.iter().map(|&c| names[c].as_str()).collect::<Vec<_>>().join(", "),
                            source: Box::new(e),
                        })?;
                        if pv > alpha {
                            return Ok(EdgeOutcome { sepset: Some(s), tests });
                        }
                    }
                }
                Ok(EdgeOutcome { sepset: None, tests })
            })
            .collect();

        for (&(a, b), outcome) in candidates.iter().zip(outcomes) {
            let outcome = outcome?;
            tests_run += outcome.tests;
            if let Some(mut s) = outcome.sepset {
                s.sort_unstable();
                edges.remove(&(a, b));
                sepsets.insert((a, b), s);
            }
        }
    }

    Ok(Skeleton {
        node_names: names.to_vec(),
        edges,
        sepsets,
        tests_run,
    })
}

/// Orientation of the edge between `a` and `b`, stored for `a < b`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mark {
    Undirected,
    /// `a -> b`
    Forward,
    /// `b -> a`
    Backward,
}

/// Partially directed graph with the separating sets of removed edges.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Cpdag {
    node_names: Vec<String>,
    edges: BTreeMap<(usize, usize), Mark>,
    sepsets: BTreeMap<(usize, usize), Vec<usize>>,
}

/// Serializable view of a [`Cpdag`] with nodes referred to by name.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CpdagDocument {
    pub nodes: Vec<String>,
    pub edges: Vec<EdgeRecord>,
    pub sepsets: Vec<SepsetRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EdgeRecord {
    pub from: String,
    pub to: String,
    pub directed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SepsetRecord {
    pub a: String,
    pub b: String,
    pub set: Vec<String>,
}

impl Cpdag {
    /// All edges undirected.
    pub fn from_skeleton(sk: &Skeleton) -> Self {
        Self {
            node_names: sk.node_names.clone(),
            edges: sk.edges.iter().map(|&e| (e, Mark::Undirected)).collect(),
            sepsets: sk.sepsets.clone(),
        }
    }

    /// Graph on `names` with the given `(from, to)` directed and `(a, b)`
    /// undirected edges.
    pub fn from_edges(names: Vec<String>, directed: &[(usize, usize)], undirected: &[(usize, usize)]) -> Result<Self> {
        let p = names.len();
        let mut g = Self {
            node_names: names,
            edges: BTreeMap::new(),
            sepsets: BTreeMap::new(),
        };
        for &(a, b) in directed.iter().chain(undirected) {
            if a == b || a >= p || b >= p {
                return Err(Error::InvalidArgument(format!("invalid edge ({a}, {b})")));
            }
            if g.edges.contains_key(&key(a, b)) {
                return Err(Error::InvalidArgument(format!("edge ({a}, {b}) listed twice")));
            }
            g.edges.insert(key(a, b), Mark::Undirected);
        }
        for &(a, b) in directed {
            g.set_directed(a, b);
        }
        Ok(g)
    }

    pub fn node_names(&self) -> &[String] {
        &self.node_names
    }

    pub fn n_nodes(&self) -> usize {
        self.node_names.len()
    }

    pub fn n_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn sepset(&self, a: usize, b: usize) -> Option<&[usize]> {
        self.sepsets.get(&key(a, b)).map(Vec::as_slice)
    }

    pub fn adjacent(&self, a: usize, b: usize) -> bool {
        a != b && self.edges.contains_key(&key(a, b))
    }

    /// `a -> b` present.
    pub fn directed(&self, a: usize, b: usize) -> bool {
        match self.edges.get(&key(a, b)) {
            Some(Mark::Forward) => a < b,
            Some(Mark::Backward) => a > b,
            _ => false,
        }
    }

    /// `a - b` present.
    pub fn undirected(&self, a: usize, b: usize) -> bool {
        a != b && self.edges.get(&key(a, b)) == Some(&Mark::Undirected)
    }

    fn set_directed(&mut self, from: usize, to: usize) {
        let mark = if from < to { Mark::Forward } else { Mark::Backward };
        self.edges.insert(key(from, to), mark);
    }

    fn set_undirected(&mut self, a: usize, b: usize) {
        self.edges.insert(key(a, b), Mark::Undirected);
    }

    fn nodes(&self) -> std::ops::Range<usize> {
        0..self.node_names.len()
    }

    /// Directed edges `(from, to)`.
    pub fn directed_edges(&self) -> Vec<(usize, usize)> {
        self.edges
            .iter()
            .filter_map(|(&(a, b), m)| match m {
                Mark::Forward => Some((a, b)),
                Mark::Backward => Some((b, a)),
                Mark::Undirected => None,
            })
            .collect()
    }

    pub fn undirected_edges(&self) -> Vec<(usize, usize)> {
        self.edges
            .iter()
            .filter(|(_, m)| **m == Mark::Undirected)
            .map(|(&e, _)| e)
            .collect()
    }

    /// Skeleton edges as sorted name pairs.
    pub fn skeleton_named(&self) -> Vec<(String, String)> {
        named_pairs(&self.node_names, self.edges.keys().copied())
    }

    fn reaches(&self, from: usize, to: usize) -> bool {
        let mut seen = vec![false; self.n_nodes()];
        let mut stack = vec![from];
        while let Some(a) = stack.pop() {
            if a == to {
                return true;
            }
            if std::mem::replace(&mut seen[a], true) {
                continue;
            }
            stack.extend(self.nodes().filter(|&b| self.directed(a, b) && !seen[b]));
        }
        false
    }

    /// Nodes of one directed cycle, if any.
    fn find_cycle(&self) -> Option<Vec<usize>> {
        // 0 unvisited, 1 on stack, 2 done
        fn dfs(g: &Cpdag, a: usize, state: &mut [u8], path: &mut Vec<usize>) -> Option<Vec<usize>> {
            state[a] = 1;
            path.push(a);
            for b in g.nodes().filter(|&b| g.directed(a, b)) {
                if state[b] == 1 {
                    let start = path.iter().position(|&v| v == b).unwrap_or(0);
                    return Some(path[start..].to_vec());
                }
                if state[b] == 0 {
                    if let Some(c) = dfs(g, b, state, path) {
                        return Some(c);
                    }
                }
            }
            path.pop();
            state[a] = 2;
            None
        }
        let mut state = vec![0u8; self.n_nodes()];
        for a in self.nodes() {
            if state[a] == 0 {
                if let Some(c) = dfs(self, a, &mut state, &mut Vec::new()) {
                    return Some(c);
                }
            }
        }
        None
    }

    pub fn has_cycle(&self) -> bool {
        self.find_cycle().is_some()
    }

    /// Orienting `from -> to` keeps the graph acyclic and adds no collider
    /// at `to` with a parent nonadjacent to `from`.
    fn can_orient(&self, from: usize, to: usize) -> bool {
        self.undirected(from, to)
            && !self.reaches(to, from)
            && !self
                .nodes()
                .any(|d| d != from && self.directed(d, to) && !self.adjacent(d, from))
    }

    pub fn to_document(&self) -> CpdagDocument {
        let name = |i: usize| self.node_names[i].clone();
        let edges = self
            .edges
            .iter()
            .map(|(&(a, b), m)| {
                let (from, to) = match m {
                    Mark::Backward => (b, a),
                    Mark::Forward => (a, b),
                    // undirected pairs are listed in name order
                    Mark::Undirected if self.node_names[b] < self.node_names[a] => (b, a),
                    Mark::Undirected => (a, b),
                };
                EdgeRecord {
                    from: name(from),
                    to: name(to),
                    directed: *m != Mark::Undirected,
                }
            })
            .collect();
        let sepsets = self
            .sepsets
            .iter()
            .map(|(&(a, b), s)| SepsetRecord {
                a: name(a),
                b: name(b),
                set: s.iter().map(|&c| name(c)).collect(),
            })
            .collect();
        CpdagDocument {
            nodes: self.node_names.clone(),
            edges,
            sepsets,
        }
    }

    /// One line per node listing its neighbors with the mark seen from that
    /// node: `->` outgoing, `<-` incoming, `--` undirected.
    ///
    /// ```text
    /// x1: -> x3
    /// x2: -> x3
    /// x3: <- x1, <- x2
    /// ```
    pub fn to_adjacency_text(&self) -> String {
        let mut out = String::new();
        for a in self.nodes() {
            let items: Vec<String> = self
                .nodes()
                .filter(|&b| self.adjacent(a, b))
                .map(|b| {
                    let mark = if self.directed(a, b) {
                        "->"
                    } else if self.directed(b, a) {
                        "<-"
                    } else {
                        "--"
                    };
                    format!("{mark} {}", self.node_names[b])
                })
                .collect();
            let _ = writeln!(out, "{}: {}", self.node_names[a], items.join(", "));
        }
        out
    }

    /// Graphviz rendering; undirected edges carry `dir=none`.
    pub fn to_dot(&self) -> String {
        let mut out = String::from("digraph cpdag {\n");
        for name in &self.node_names {
            let _ = writeln!(out, "  \"{name}\";");
        }
        for e in self.to_document().edges {
            let attr = if e.directed { "" } else { " [dir=none]" };
            let _ = writeln!(out, "  \"{}\" -> \"{}\"{attr};", e.from, e.to);
        }
        out.push_str("}\n");
        out
    }
}

/// Orients every unshielded triple `i - k - j` with `k` outside the sepset
/// of `(i, j)` as `i -> k <- j`. Edges proposed in both directions stay
/// undirected; directed cycles left by the remaining proposals are undone.
pub fn orient_v_structures(sk: &Skeleton) -> Cpdag {
    let mut g = Cpdag::from_skeleton(sk);
    let p = sk.node_names.len();
    let mut proposals: BTreeMap<(usize, usize), BTreeSet<Mark>> = BTreeMap::new();
    let mut propose = |from: usize, to: usize| {
        let mark = if from < to { Mark::Forward } else { Mark::Backward };
        proposals.entry(key(from, to)).or_default().insert(mark);
    };
    for k in 0..p {
        let nb = sk.neighbors(k);
        for (ai, &i) in nb.iter().enumerate() {
            for &j in &nb[ai + 1..] {
                if sk.adjacent(i, j) {
                    continue;
                }
                let in_sepset = sk.sepsets.get(&key(i, j)).is_some_and(|s| s.contains(&k));
                if !in_sepset {
                    propose(i, k);
                    propose(j, k);
                }
            }
        }
    }
    for (e, marks) in proposals {
        if marks.len() == 1 {
            let m = *marks.iter().next().unwrap_or(&Mark::Undirected);
            g.edges.insert(e, m);
        } else {
            debug!("conflicting orientations on {}-{}; left undirected", g.node_names[e.0], g.node_names[e.1]);
        }
    }
    while let Some(cycle) = g.find_cycle() {
        for w in 0..cycle.len() {
            g.set_undirected(cycle[w], cycle[(w + 1) % cycle.len()]);
        }
    }
    g
}

/// Applies Meek's rules R1-R4 until no edge changes. An orientation is made
/// only if it neither closes a directed cycle nor creates a new collider.
pub fn meek_rules(cpdag: &Cpdag) -> Cpdag {
    let mut g = cpdag.clone();
    loop {
        let mut changed = false;
        for (a, b) in g.undirected_edges() {
            for (from, to) in [(a, b), (b, a)] {
                if g.undirected(from, to) && rule_applies(&g, from, to) && g.can_orient(from, to) {
                    g.set_directed(from, to);
                    changed = true;
                }
            }
        }
        if !changed {
            return g;
        }
    }
}

/// Whether one of R1-R4 orients `a - b` as `a -> b`.
fn rule_applies(g: &Cpdag, a: usize, b: usize) -> bool {
    let nodes: Vec<usize> = g.nodes().collect();
    // R1: c -> a, c and b nonadjacent
    let r1 = nodes.iter().any(|&c| g.directed(c, a) && !g.adjacent(c, b));
    // R2: a -> c -> b
    let r2 = || nodes.iter().any(|&c| g.directed(a, c) && g.directed(c, b));
    // R3: a - c -> b, a - d -> b, c and d nonadjacent
    let r3 = || {
        let mids: Vec<usize> = nodes
            .iter()
            .copied()
            .filter(|&c| g.undirected(a, c) && g.directed(c, b))
            .collect();
        mids.iter()
            .enumerate()
            .any(|(i, &c)| mids[i + 1..].iter().any(|&d| !g.adjacent(c, d)))
    };
    // R4: a - d, d -> c -> b, a adjacent to c, d and b nonadjacent
    let r4 = || {
        nodes.iter().any(|&c| {
            g.adjacent(a, c)
                && g.directed(c, b)
                && nodes
                    .iter()
                    .any(|&d| g.undirected(a, d) && g.directed(d, c) && !g.adjacent(d, b))
        })
    };
    r1 || r2() || r3() || r4()
}

/// Full PC pipeline: skeleton, v-structures, Meek closure.
pub fn pc(data: &Dataset, alpha: f64, max_depth: usize, oracle: &dyn CiOracle) -> Result<Cpdag> {
    let sk = pc_skeleton(data, alpha, max_depth, oracle)?;
    let g = meek_rules(&orient_v_structures(&sk));
    debug_assert!(!g.has_cycle());
    Ok(g)
}

/// A known DAG. Edges are `(from, to)` with weights for linear models.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dag {
    pub node_names: Vec<String>,
    pub edges: Vec<(usize, usize)>,
    pub weights: Vec<f64>,
}

impl Dag {
    pub fn new(node_names: Vec<String>, edges: Vec<(usize, usize)>) -> Self {
        let weights = vec![1.0; edges.len()];
        Self {
            node_names,
            edges,
            weights,
        }
    }

    pub fn skeleton_named(&self) -> Vec<(String, String)> {
        named_pairs(&self.node_names, self.edges.iter().copied())
    }
}

/// Skeleton true and false positive rates of `estimated` against `truth`.
/// With no true edges the TPR is 1; with no true non-edges the FPR is 0.
pub fn tpr_fpr(estimated: &Cpdag, truth: &Dag) -> Result<(f64, f64)> {
    let mut a = estimated.node_names.clone();
    let mut b = truth.node_names.clone();
    a.sort();
    b.sort();
    if a != b {
        return Err(Error::NodeMismatch(format!("estimate has {a:?}, truth has {b:?}")));
    }
    let est: BTreeSet<(String, String)> = estimated.skeleton_named().into_iter().collect();
    let tru: BTreeSet<(String, String)> = truth.skeleton_named().into_iter().collect();
    let p = a.len();
    let pairs = p * (p - 1) / 2;
    let hits = est.intersection(&tru).count();
    let false_pos = est.difference(&tru).count();
    let non_edges = pairs - tru.len();
    let tpr = if tru.is_empty() { 1.0 } else { hits as f64 / tru.len() as f64 };
    let fpr = if non_edges == 0 { 0.0 } else { false_pos as f64 / non_edges as f64 };
    Ok((tpr, fpr))
}

/// Which oracle drives discovery.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OracleKind {
    Rho,
    Pcor,
}

impl std::str::FromStr for OracleKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "rho" => Ok(OracleKind::Rho),
            "pcor" => Ok(OracleKind::Pcor),
            _ => Err(Error::InvalidArgument(format!("unknown test `{s}` (rho or pcor)"))),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream_rng;
    use proptest::prelude::*;
    use rand::Rng;
    use rand_distr::StandardNormal;

    fn names(p: usize) -> Vec<String> {
        (1..=p).map(|i| format!("x{i}")).collect()
    }

    fn linear(seed: u64, n: usize, p: usize, edges: &[(usize, usize, f64)]) -> Dataset {
        let mut rng = stream_rng(seed, 0);
        let mut cols: Vec<Vec<f64>> = vec![Vec::with_capacity(n); p];
        for _ in 0..n {
            let mut row = vec![0.0; p];
            for j in 0..p {
                let parent: f64 = edges.iter().filter(|e| e.1 == j).map(|e| e.2 * row[e.0]).sum();
                row[j] = parent + rng.sample::<f64, _>(StandardNormal);
            }
            for (c, v) in cols.iter_mut().zip(row) {
                c.push(v);
            }
        }
        Dataset::continuous(names(p).into_iter().zip(cols)).unwrap()
    }

    fn pair(a: &str, b: &str) -> (String, String) {
        (a.to_string(), b.to_string())
    }

    #[test]
    fn subsets_enumerate_combinations() {
        assert_eq!(subsets(&[3, 5, 7], 2), vec![vec![3, 5], vec![3, 7], vec![5, 7]]);
        assert_eq!(subsets(&[1, 2], 0), vec![Vec::<usize>::new()]);
        assert!(subsets(&[1], 2).is_empty());
    }

    #[test]
    fn partial_correlation_of_chain_vanishes_given_middle() {
        let d = linear(1, 4000, 3, &[(0, 1, 0.8), (1, 2, 0.8)]);
        assert!(partial_correlation(&d, 0, 2, &[]).unwrap() > 0.3);
        assert!(partial_correlation(&d, 0, 2, &[1]).unwrap().abs() < 0.06);
    }

    #[test]
    fn chain_separates_ends_with_both_oracles() {
        let d = linear(2, 500, 3, &[(0, 1, 0.8), (1, 2, 0.8)]);
        let cache = NullCache::in_memory();
        let rho = RhoOracle::new(TestSpec::new(["x"], ["y"], ["z"]).reps(300), &cache);
        for oracle in [&rho as &dyn CiOracle, &PartialCorrelationOracle] {
            let sk = pc_skeleton(&d, 0.05, 2, oracle).unwrap();
            assert_eq!(sk.named_edges(), vec![pair("x1", "x2"), pair("x2", "x3")], "{}", oracle.name());
            assert_eq!(sk.sepsets.get(&(0, 2)), Some(&vec![1]), "{}", oracle.name());
            let g = pc(&d, 0.05, 2, oracle).unwrap();
            assert!(g.directed_edges().is_empty(), "{}", oracle.name());
        }
    }

    #[test]
    fn collider_is_oriented() {
        let d = linear(3, 500, 3, &[(0, 2, 0.8), (1, 2, 0.8)]);
        let cache = NullCache::in_memory();
        let rho = RhoOracle::new(TestSpec::new(["x"], ["y"], ["z"]).reps(300), &cache);
        let g = pc(&d, 0.05, 2, &rho).unwrap();
        assert_eq!(g.directed_edges(), vec![(0, 2), (1, 2)]);
        assert_eq!(g.sepset(0, 1), Some(&[][..]));
    }

    #[test]
    fn independent_pair_is_usually_separated() {
        let cache = NullCache::in_memory();
        let rho = RhoOracle::new(TestSpec::new(["x"], ["y"], ["z"]).reps(300), &cache);
        let empty = (0..20)
            .filter(|&s| pc_skeleton(&linear(100 + s, 500, 2, &[]), 0.05, 1, &rho).unwrap().edges.is_empty())
            .count();
        assert!(empty >= 18, "{empty}/20");
    }

    struct Recording(std::sync::Mutex<Vec<usize>>);

    impl CiOracle for Recording {
        fn name(&self) -> &'static str {
            "recording"
        }

        fn p_value(&self, _: &Dataset, _: usize, _: usize, cond: &[usize]) -> Result<f64> {
            self.0.lock().unwrap().push(cond.len());
            Ok(0.0)
        }
    }

    #[test]
    fn depth_zero_runs_only_unconditional_tests() {
        let rec = Recording(Default::default());
        let sk = pc_skeleton(&linear(4, 50, 4, &[]), 0.05, 0, &rec).unwrap();
        assert_eq!(sk.edges.len(), 6);
        let sizes = rec.0.lock().unwrap();
        assert_eq!(sizes.len(), 6);
        assert!(sizes.iter().all(|&s| s == 0));
    }

    struct Failing;

    impl CiOracle for Failing {
        fn name(&self) -> &'static str {
            "failing"
        }

        fn p_value(&self, _: &Dataset, _: usize, _: usize, _: &[usize]) -> Result<f64> {
            Err(Error::EmptyData)
        }
    }

    #[test]
    fn oracle_failure_names_the_triple() {
        let err = pc_skeleton(&linear(5, 30, 2, &[]), 0.05, 0, &Failing).unwrap_err();
        assert!(matches!(err, Error::Oracle { ref x, ref y, .. } if x == "x1" && y == "x2"));
        assert!(matches!(err.root(), Error::EmptyData));
    }

    #[test]
    fn skeleton_rejects_bad_arguments() {
        let one = Dataset::continuous([("a", vec![1.0, 2.0])]).unwrap();
        assert!(pc_skeleton(&one, 0.05, 1, &PartialCorrelationOracle).is_err());
        assert!(pc_skeleton(&linear(6, 30, 2, &[]), 1.5, 1, &PartialCorrelationOracle).is_err());
    }

    #[test]
    fn empty_skeleton_orients_nothing() {
        let sk = Skeleton {
            node_names: names(3),
            edges: BTreeSet::new(),
            sepsets: BTreeMap::new(),
            tests_run: 0,
        };
        let g = orient_v_structures(&sk);
        assert_eq!(g.n_edges(), 0);
        assert_eq!(meek_rules(&g), g);
    }

    #[test]
    fn conflicting_colliders_stay_undirected() {
        // path a - b - c - d with sepsets that make both b and c colliders
        let mut sepsets = BTreeMap::new();
        sepsets.insert((0, 2), vec![]);
        sepsets.insert((1, 3), vec![]);
        sepsets.insert((0, 3), vec![1, 2]);
        let sk = Skeleton {
            node_names: names(4),
            edges: [(0, 1), (1, 2), (2, 3)].into_iter().collect(),
            sepsets,
            tests_run: 0,
        };
        let g = orient_v_structures(&sk);
        assert!(g.directed(0, 1) && g.directed(3, 2));
        assert!(g.undirected(1, 2));
    }

    #[test]
    fn meek_r1_propagates() {
        let g = Cpdag::from_edges(names(3), &[(0, 1)], &[(1, 2)]).unwrap();
        let m = meek_rules(&g);
        assert!(m.directed(1, 2));
    }

    #[test]
    fn meek_r2_avoids_cycle() {
        let g = Cpdag::from_edges(names(3), &[(0, 1), (1, 2)], &[(0, 2)]).unwrap();
        assert!(meek_rules(&g).directed(0, 2));
    }

    #[test]
    fn meek_r3_orients_into_collider() {
        // a - c -> b, a - d -> b, a - b, c and d nonadjacent
        let g = Cpdag::from_edges(names(4), &[(2, 1), (3, 1)], &[(0, 1), (0, 2), (0, 3)]).unwrap();
        let m = meek_rules(&g);
        assert!(m.directed(0, 1));
        assert!(m.undirected(0, 2) && m.undirected(0, 3));
    }

    #[test]
    fn meek_r4_orients() {
        // a - b, a - d, a - c, d -> c -> b, d and b nonadjacent
        let g = Cpdag::from_edges(names(4), &[(3, 2), (2, 1)], &[(0, 1), (0, 3), (0, 2)]).unwrap();
        assert!(meek_rules(&g).directed(0, 1));
    }

    #[test]
    fn undirected_triangle_is_fixed() {
        let g = Cpdag::from_edges(names(3), &[], &[(0, 1), (1, 2), (0, 2)]).unwrap();
        assert_eq!(meek_rules(&g), g);
    }

    #[test]
    fn rates_on_degenerate_estimates() {
        let truth = Dag::new(names(5), vec![(0, 1), (1, 2), (2, 3), (3, 4)]);
        let exact = Cpdag::from_edges(names(5), &truth.edges, &[]).unwrap();
        assert_eq!(tpr_fpr(&exact, &truth).unwrap(), (1.0, 0.0));
        let empty = Cpdag::from_edges(names(5), &[], &[]).unwrap();
        assert_eq!(tpr_fpr(&empty, &truth).unwrap(), (0.0, 0.0));
        let all: Vec<(usize, usize)> = (0..5).flat_map(|a| (a + 1..5).map(move |b| (a, b))).collect();
        let complete = Cpdag::from_edges(names(5), &[], &all).unwrap();
        assert_eq!(tpr_fpr(&complete, &truth).unwrap(), (1.0, 1.0));
        let other = Dag::new(names(4), vec![]);
        assert!(matches!(tpr_fpr(&empty, &other), Err(Error::NodeMismatch(_))));
    }

    #[test]
    fn renderings_list_every_edge() {
        let g = Cpdag::from_edges(names(3), &[(0, 2), (1, 2)], &[]).unwrap();
        assert_eq!(g.to_adjacency_text(), "x1: -> x3\nx2: -> x3\nx3: <- x1, <- x2\n");
        let dot = g.to_dot();
        assert!(dot.contains("\"x1\" -> \"x3\";") && dot.contains("\"x2\" -> \"x3\";"));
        let doc = g.to_document();
        let back: CpdagDocument = serde_json::from_str(&serde_json::to_string(&doc).unwrap()).unwrap();
        assert_eq!(back, doc);
    }

    fn random_graph(seed: u64) -> (Vec<(usize, usize, f64)>, Dataset) {
        let mut rng = stream_rng(seed, 1);
        let mut edges = Vec::new();
        for a in 0..5 {
            for b in a + 1..5 {
                if rng.random::<f64>() < 0.4 {
                    edges.push((a, b, rng.random_range(0.1..1.0)));
                }
            }
        }
        let d = linear(seed, 200, 5, &edges);
        (edges, d)
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(12))]
        #[test]
        fn column_order_does_not_change_output(seed in 0u64..1000, perm in Just((0..5).collect::<Vec<usize>>()).prop_shuffle()) {
            let (_, d) = random_graph(seed);
            let permuted = d.select_columns(&perm);
            let cache = NullCache::in_memory();
            let rho = RhoOracle::new(TestSpec::new(["x"], ["y"], ["z"]).reps(200), &cache);
            let a = pc(&d, 0.05, 3, &rho).unwrap();
            let b = pc(&permuted, 0.05, 3, &rho).unwrap();
            prop_assert_eq!(a.skeleton_named(), b.skeleton_named());
            let doc = |g: &Cpdag| {
                let mut e: Vec<_> = g.to_document().edges.into_iter().map(|e| (e.from, e.to, e.directed)).collect();
                e.sort();
                e
            };
            prop_assert_eq!(doc(&a), doc(&b));
            prop_assert!(!a.has_cycle() && !b.has_cycle());
        }

        #[test]
        fn meek_closure_is_idempotent_and_acyclic(seed in 0u64..5000) {
            let (_, d) = random_graph(seed);
            let g = pc(&d, 0.05, 3, &PartialCorrelationOracle).unwrap();
            prop_assert!(!g.has_cycle());
            prop_assert_eq!(meek_rules(&g), g);
        }
    }
}
