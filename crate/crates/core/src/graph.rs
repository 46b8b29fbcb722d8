//! Simple undirected graphs with a fixed neighbor order and a canonical
//! enumeration of directed edges.
//!
//! Every undirected edge `e = (a, b)` with `a < b` owns the directed ids
//! `2e` (for `a -> b`) and `2e + 1` (for `b -> a`), so the reverse of a
//! directed edge is `id ^ 1`. Neighbor lists are sorted ascending and site
//! tensors index their virtual legs in that order.

use std::collections::{BTreeMap, HashMap, VecDeque};
use std::fmt;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Retry budget for the pairing model.
pub const RANDOM_REGULAR_ATTEMPTS: usize = 1000;
/// Largest cycle length `count_cycles` accepts.
pub const MAX_CYCLE_LEN: usize = 12;
/// Largest vertex count for the exhaustive expansion scan.
pub const MAX_EXPANSION_VERTICES: usize = 20;

#[derive(Clone, PartialEq, Eq)]
pub struct Graph {
    n: usize,
    adjacency: Vec<Vec<usize>>,
    edges: Vec<(usize, usize)>,
    edge_index: HashMap<(usize, usize), usize>,
}

impl fmt::Debug for Graph {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Graph")
            .field("n", &self.n)
            .field("edges", &self.edges)
            .finish()
    }
}

/// A directed edge `from -> to` together with its canonical id.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct DirectedEdge {
    pub id: usize,
    pub from: usize,
    pub to: usize,
}

impl Graph {
    /// Builds a graph from an edge list. Edges may be given in any order and
    /// orientation; self-loops and duplicates are rejected.
    pub fn from_edges(n: usize, edges: &[(usize, usize)]) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidArgument("graph needs at least one vertex".into()));
        }
        let mut canon: Vec<(usize, usize)> = Vec::with_capacity(edges.len());
        for &(a, b) in edges {
            if a >= n || b >= n {
                return Err(Error::InvalidArgument(format!(
                    "edge ({a}, {b}) references a vertex outside 0..{n}"
                )));
            }
            if a == b {
                return Err(Error::InvalidArgument(format!("self-loop at vertex {a}")));
            }
            canon.push((a.min(b), a.max(b)));
        }
        canon.sort_unstable();
        if let Some(w) = canon.windows(2).find(|w| w[0] == w[1]) {
            return Err(Error::InvalidArgument(format!(
                "duplicate edge ({}, {})",
                w[0].0, w[0].1
            )));
        }
        let mut adjacency = vec![Vec::new(); n];
        let mut edge_index = HashMap::with_capacity(canon.len());
        for (e, &(a, b)) in canon.iter().enumerate() {
            adjacency[a].push(b);
            adjacency[b].push(a);
            edge_index.insert((a, b), e);
        }
        for nbrs in &mut adjacency {
            nbrs.sort_unstable();
        }
        Ok(Graph {
            n,
            adjacency,
            edges: canon,
            edge_index,
        })
    }

    /// Uniformly paired random `r`-regular simple graph (configuration model
    /// with rejection of self-loops and multi-edges).
    pub fn random_regular(n: usize, r: usize, seed: u64) -> Result<Self> {
        if n == 0 || r == 0 {
            return Err(Error::InfeasibleGraph("n and r must be positive".into()));
        }
        if !(n * r).is_multiple_of(2) {
            return Err(Error::InfeasibleGraph("n*r must be even".into()));
        }
        if r >= n {
            return Err(Error::InfeasibleGraph(format!("degree {r} must be below n = {n}")));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut stubs: Vec<usize> = (0..n).flat_map(|v| std::iter::repeat_n(v, r)).collect();
        'attempt: for _ in 0..RANDOM_REGULAR_ATTEMPTS {
            stubs.shuffle(&mut rng);
            let mut seen = std::collections::HashSet::with_capacity(n * r / 2);
            let mut edges = Vec::with_capacity(n * r / 2);
            for pair in stubs.chunks_exact(2) {
                let (a, b) = (pair[0].min(pair[1]), pair[0].max(pair[1]));
                if a == b || !seen.insert((a, b)) {
                    continue 'attempt;
                }
                edges.push((a, b));
            }
            return Graph::from_edges(n, &edges);
        }
        Err(Error::GenerationFailed {
            attempts: RANDOM_REGULAR_ATTEMPTS,
        })
    }

    /// Complete `branching`-ary tree filled in breadth-first order: vertex
    /// `i > 0` hangs below `(i - 1) / branching`.
    pub fn build_tree(n: usize, branching: usize) -> Result<Self> {
        if branching == 0 && n > 1 {
            return Err(Error::InvalidArgument("branching must be positive".into()));
        }
        let edges: Vec<_> = (1..n).map(|i| ((i - 1) / branching, i)).collect();
        Graph::from_edges(n, &edges)
    }

    pub fn path(n: usize) -> Result<Self> {
        Graph::build_tree(n, 1)
    }

    pub fn cycle(n: usize) -> Result<Self> {
        if n < 3 {
            return Err(Error::InvalidArgument("a cycle needs at least 3 vertices".into()));
        }
        let edges: Vec<_> = (0..n).map(|i| (i, (i + 1) % n)).collect();
        Graph::from_edges(n, &edges)
    }

    pub fn complete(n: usize) -> Result<Self> {
        let mut edges = Vec::new();
        for a in 0..n {
            for b in a + 1..n {
                edges.push((a, b));
            }
        }
        Graph::from_edges(n, &edges)
    }

    /// Star with center 0 and `leaves` leaves.
    pub fn star(leaves: usize) -> Result<Self> {
        let edges: Vec<_> = (1..=leaves).map(|i| (0, i)).collect();
        Graph::from_edges(leaves + 1, &edges)
    }

    /// Open-boundary square lattice, vertex `(row, col)` has id `row * cols + col`.
    pub fn grid(rows: usize, cols: usize) -> Result<Self> {
        let mut edges = Vec::new();
        for r in 0..rows {
            for c in 0..cols {
                let v = r * cols + c;
                if c + 1 < cols {
                    edges.push((v, v + 1));
                }
                if r + 1 < rows {
                    edges.push((v, v + cols));
                }
            }
        }
        Graph::from_edges(rows * cols, &edges)
    }

    pub fn n_vertices(&self) -> usize {
        self.n
    }

    pub fn n_edges(&self) -> usize {
        self.edges.len()
    }

    /// Undirected edges as `(a, b)` with `a < b`, sorted.
    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn neighbors(&self, a: usize) -> &[usize] {
        &self.adjacency[a]
    }

    pub fn degree(&self, a: usize) -> usize {
        self.adjacency[a].len()
    }

    pub fn has_edge(&self, a: usize, b: usize) -> bool {
        self.edge_id(a, b).is_some()
    }

    /// Index of the undirected edge `{a, b}`.
    pub fn edge_id(&self, a: usize, b: usize) -> Option<usize> {
        self.edge_index.get(&(a.min(b), a.max(b))).copied()
    }

    /// Position of `b` in the neighbor list of `a`, i.e. the virtual leg of
    /// the site tensor at `a` that points at `b`.
    pub fn leg(&self, a: usize, b: usize) -> Option<usize> {
        self.adjacency[a].binary_search(&b).ok()
    }

    pub fn n_directed_edges(&self) -> usize {
        2 * self.edges.len()
    }

    /// Id of the directed edge `from -> to`.
    pub fn directed_id(&self, from: usize, to: usize) -> Option<usize> {
        self.edge_id(from, to)
            .map(|e| if from < to { 2 * e } else { 2 * e + 1 })
    }

    pub fn directed_edge(&self, id: usize) -> DirectedEdge {
        let (a, b) = self.edges[id / 2];
        if id.is_multiple_of(2) {
            DirectedEdge { id, from: a, to: b }
        } else {
            DirectedEdge { id, from: b, to: a }
        }
    }

    pub fn directed_edges(&self) -> impl Iterator<Item = DirectedEdge> + '_ {
        (0..self.n_directed_edges()).map(|id| self.directed_edge(id))
    }

    pub fn reverse(id: usize) -> usize {
        id ^ 1
    }

    /// Directed edge ids `k -> a` for every neighbor `k`, in leg order.
    pub fn incoming(&self, a: usize) -> impl Iterator<Item = usize> + '_ {
        self.adjacency[a]
            .iter()
            .map(move |&k| self.directed_id(k, a).expect("adjacency is symmetric"))
    }

    pub fn is_connected(&self) -> bool {
        self.bfs_distances(0).iter().all(|d| d.is_some())
    }

    /// True iff connected with exactly `n - 1` edges.
    pub fn is_tree(&self) -> bool {
        self.edges.len() + 1 == self.n && self.is_connected()
    }

    /// Whether the vertex set induces a connected subgraph.
    pub fn induces_connected(&self, sites: &[usize]) -> bool {
        if sites.is_empty() {
            return false;
        }
        let mut reached = vec![false; sites.len()];
        reached[0] = true;
        let mut queue = vec![0];
        while let Some(i) = queue.pop() {
            for (j, &s) in sites.iter().enumerate() {
                if !reached[j] && self.has_edge(sites[i], s) {
                    reached[j] = true;
                    queue.push(j);
                }
            }
        }
        reached.into_iter().all(|r| r)
    }

    fn bfs_distances(&self, source: usize) -> Vec<Option<usize>> {
        let mut dist = vec![None; self.n];
        dist[source] = Some(0);
        let mut queue = VecDeque::from([source]);
        while let Some(v) = queue.pop_front() {
            let d = dist[v].unwrap();
            for &w in &self.adjacency[v] {
                if dist[w].is_none() {
                    dist[w] = Some(d + 1);
                    queue.push_back(w);
                }
            }
        }
        dist
    }

    /// Longest shortest path, or `None` when the graph is disconnected.
    pub fn diameter(&self) -> Option<usize> {
        let mut best = 0;
        for v in 0..self.n {
            for d in self.bfs_distances(v) {
                best = best.max(d?);
            }
        }
        Some(best)
    }

    pub fn degree_histogram(&self) -> BTreeMap<usize, usize> {
        let mut hist = BTreeMap::new();
        for nbrs in &self.adjacency {
            *hist.entry(nbrs.len()).or_insert(0) += 1;
        }
        hist
    }

    /// Exact number of simple cycles of each length `3..=max_len`.
    ///
    /// Each cycle is enumerated once from its smallest vertex, and of its two
    /// traversal directions only the one whose second vertex is smaller than
    /// its last vertex is kept.
    pub fn count_cycles(&self, max_len: usize) -> Result<BTreeMap<usize, usize>> {
        if max_len > MAX_CYCLE_LEN {
            return Err(Error::TooLarge {
                what: "cycle length",
                limit: MAX_CYCLE_LEN,
                got: max_len,
            });
        }
        let mut counts: BTreeMap<usize, usize> = (3..=max_len).map(|l| (l, 0)).collect();
        let mut on_path = vec![false; self.n];
        let mut path = Vec::with_capacity(max_len);
        for start in 0..self.n {
            path.clear();
            path.push(start);
            on_path[start] = true;
            self.extend_cycles(start, max_len, &mut path, &mut on_path, &mut counts);
            on_path[start] = false;
        }
        Ok(counts)
    }

    fn extend_cycles(
        &self,
        start: usize,
        max_len: usize,
        path: &mut Vec<usize>,
        on_path: &mut [bool],
        counts: &mut BTreeMap<usize, usize>,
    ) {
        let last = *path.last().unwrap();
        for &next in &self.adjacency[last] {
            if next == start {
                if path.len() >= 3 && path[1] < last {
                    *counts.get_mut(&path.len()).unwrap() += 1;
                }
            } else if next > start && !on_path[next] && path.len() < max_len {
                on_path[next] = true;
                path.push(next);
                self.extend_cycles(start, max_len, path, on_path, counts);
                path.pop();
                on_path[next] = false;
            }
        }
    }

    /// Edge expansion `min |∂S| / |S|` over nonempty `S` with `|S| <= n/2`,
    /// by scanning all subsets.
    pub fn expansion_bruteforce(&self) -> Result<Ratio> {
        if self.n > MAX_EXPANSION_VERTICES {
            return Err(Error::TooLarge {
                what: "vertex count for exhaustive expansion",
                limit: MAX_EXPANSION_VERTICES,
                got: self.n,
            });
        }
        if self.n < 2 {
            return Err(Error::InvalidArgument(
                "expansion needs at least two vertices".into(),
            ));
        }
        let half = self.n / 2;
        let mut best: Option<Ratio> = None;
        for mask in 1u32..(1u32 << self.n) {
            let size = mask.count_ones() as usize;
            if size > half {
                continue;
            }
            let cut = self
                .edges
                .iter()
                .filter(|&&(a, b)| ((mask >> a) & 1) != ((mask >> b) & 1))
                .count();
            let candidate = Ratio::new(cut, size);
            if best.is_none_or(|b| candidate < b) {
                best = Some(candidate);
            }
        }
        Ok(best.expect("at least one subset of size 1"))
    }

    pub fn diagnostics(&self, max_cycle_len: usize) -> Result<GraphDiagnostics> {
        let expansion = if self.n <= MAX_EXPANSION_VERTICES && self.n >= 2 {
            Some(self.expansion_bruteforce()?)
        } else {
            None
        };
        Ok(GraphDiagnostics {
            n_vertices: self.n,
            n_edges: self.edges.len(),
            degree_histogram: self.degree_histogram(),
            cycle_counts: self.count_cycles(max_cycle_len)?,
            expansion,
            diameter: self.diameter(),
        })
    }

    pub fn to_json(&self) -> GraphJson {
        GraphJson {
            n: self.n,
            edges: self.edges.iter().map(|&(a, b)| [a, b]).collect(),
        }
    }

    pub fn from_json(json: &GraphJson) -> Result<Self> {
        let edges: Vec<_> = json.edges.iter().map(|e| (e[0], e[1])).collect();
        Graph::from_edges(json.n, &edges)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let text = serde_json::to_string_pretty(&self.to_json())?;
        std::fs::write(path, text)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let json: GraphJson = serde_json::from_str(&text)?;
        Graph::from_json(&json)
    }
}

/// On-disk graph format: 0-based ids, edges sorted with `a < b`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GraphJson {
    pub n: usize,
    pub edges: Vec<[usize; 2]>,
}

impl Serialize for Graph {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.to_json().serialize(s)
    }
}

impl<'de> Deserialize<'de> for Graph {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let json = GraphJson::deserialize(d)?;
        Graph::from_json(&json).map_err(serde::de::Error::custom)
    }
}

/// Nonnegative rational `num / den` kept in lowest terms.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Ratio {
    pub num: usize,
    pub den: usize,
}

impl Ratio {
    pub fn new(num: usize, den: usize) -> Self {
        assert!(den > 0, "zero denominator");
        let g = gcd(num, den);
        Ratio {
            num: num / g,
            den: den / g,
        }
    }

    pub fn value(&self) -> f64 {
        self.num as f64 / self.den as f64
    }
}

impl PartialOrd for Ratio {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Ratio {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        (self.num * other.den).cmp(&(other.num * self.den))
    }
}

impl fmt::Display for Ratio {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.num, self.den)
    }
}

fn gcd(mut a: usize, mut b: usize) -> usize {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a.max(1)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GraphDiagnostics {
    pub n_vertices: usize,
    pub n_edges: usize,
    pub degree_histogram: BTreeMap<usize, usize>,
    pub cycle_counts: BTreeMap<usize, usize>,
    /// Only computed for graphs small enough for the subset scan.
    pub expansion: Option<Ratio>,
    /// `None` marks a disconnected graph.
    pub diameter: Option<usize>,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn random_regular_degrees_and_edges() {
        let g = Graph::random_regular(10, 3, 5).unwrap();
        assert_eq!(g.n_edges(), 15);
        assert!((0..10).all(|v| g.degree(v) == 3));
    }

    #[test]
    fn random_regular_k4_is_complete() {
        for seed in 0..5 {
            let g = Graph::random_regular(4, 3, seed).unwrap();
            assert_eq!(g, Graph::complete(4).unwrap());
        }
    }

    #[test]
    fn random_regular_deterministic() {
        let a = Graph::random_regular(40, 3, 11).unwrap();
        let b = Graph::random_regular(40, 3, 11).unwrap();
        assert_eq!(a, b);
        let c = Graph::random_regular(40, 3, 12).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn random_regular_infeasible() {
        assert!(matches!(
            Graph::random_regular(5, 3, 0),
            Err(Error::InfeasibleGraph(_))
        ));
        assert!(matches!(
            Graph::random_regular(4, 4, 0),
            Err(Error::InfeasibleGraph(_))
        ));
    }

    #[test]
    fn trees() {
        let t = Graph::build_tree(7, 2).unwrap();
        assert_eq!(t.n_edges(), 6);
        assert!(t.is_tree());
        assert_eq!(t.neighbors(0), &[1, 2]);
        let single = Graph::build_tree(1, 3).unwrap();
        assert_eq!(single.n_edges(), 0);
        assert!(single.is_tree());
        assert_eq!(Graph::build_tree(5, 1).unwrap(), Graph::path(5).unwrap());
    }

    #[test]
    fn is_tree_examples() {
        assert!(Graph::path(5).unwrap().is_tree());
        assert!(!Graph::cycle(4).unwrap().is_tree());
        assert!(!Graph::complete(4).unwrap().is_tree());
        let forest = Graph::from_edges(4, &[(0, 1), (2, 3)]).unwrap();
        assert!(!forest.is_tree());
    }

    #[test]
    fn rejects_bad_edges() {
        assert!(Graph::from_edges(3, &[(0, 0)]).is_err());
        assert!(Graph::from_edges(3, &[(0, 1), (1, 0)]).is_err());
        assert!(Graph::from_edges(3, &[(0, 3)]).is_err());
    }

    #[test]
    fn cycles_k4() {
        let counts = Graph::complete(4).unwrap().count_cycles(4).unwrap();
        assert_eq!(counts[&3], 4);
        assert_eq!(counts[&4], 3);
    }

    #[test]
    fn cycles_c8_and_tree() {
        let counts = Graph::cycle(8).unwrap().count_cycles(8).unwrap();
        for (len, c) in counts {
            assert_eq!(c, usize::from(len == 8), "length {len}");
        }
        let tree = Graph::build_tree(15, 2).unwrap();
        assert!(tree.count_cycles(12).unwrap().values().all(|&c| c == 0));
        assert!(tree.count_cycles(13).is_err());
    }

    #[test]
    fn expansion_examples() {
        assert_eq!(Graph::cycle(8).unwrap().expansion_bruteforce().unwrap(), Ratio::new(1, 2));
        assert_eq!(Graph::complete(4).unwrap().expansion_bruteforce().unwrap(), Ratio::new(2, 1));
        // two leaves cut two edges, as does any single leaf
        assert_eq!(Graph::star(4).unwrap().expansion_bruteforce().unwrap(), Ratio::new(1, 1));
        assert!(Graph::cycle(21).unwrap().expansion_bruteforce().is_err());
    }

    #[test]
    fn directed_edge_indexing() {
        let g = Graph::random_regular(12, 3, 3).unwrap();
        for de in g.directed_edges() {
            assert_eq!(g.directed_id(de.from, de.to), Some(de.id));
            let rev = g.directed_edge(Graph::reverse(de.id));
            assert_eq!((rev.from, rev.to), (de.to, de.from));
            assert_eq!(g.neighbors(de.from)[g.leg(de.from, de.to).unwrap()], de.to);
        }
        for a in 0..12 {
            for (leg, k) in g.incoming(a).enumerate() {
                let de = g.directed_edge(k);
                assert_eq!(de.to, a);
                assert_eq!(de.from, g.neighbors(a)[leg]);
            }
        }
    }

    #[test]
    fn diameter_and_connectivity() {
        assert_eq!(Graph::path(5).unwrap().diameter(), Some(4));
        assert_eq!(Graph::cycle(8).unwrap().diameter(), Some(4));
        let forest = Graph::from_edges(4, &[(0, 1), (2, 3)]).unwrap();
        assert_eq!(forest.diameter(), None);
    }

    #[test]
    fn json_round_trip() {
        let g = Graph::random_regular(20, 3, 9).unwrap();
        let text = serde_json::to_string(&g).unwrap();
        let back: Graph = serde_json::from_str(&text).unwrap();
        assert_eq!(g, back);
        let json = g.to_json();
        assert!(json.edges.windows(2).all(|w| w[0] < w[1]));
        assert!(json.edges.iter().all(|e| e[0] < e[1]));
    }
}
