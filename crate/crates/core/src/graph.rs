//! Graphs, edge-weighted instances and XOR games.

use std::collections::{HashSet, VecDeque};
use std::fmt::Write as _;
use std::path::Path;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

/// Simple undirected graph on `0..n`. Edges are stored as `(u, v)` with `u < v`
/// in insertion order.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Graph {
    n: usize,
    edges: Vec<(usize, usize)>,
    adj: Vec<Vec<usize>>,
}

impl Graph {
    pub fn new(n: usize, edges: impl IntoIterator<Item = (usize, usize)>) -> Result<Graph> {
        let mut seen = HashSet::new();
        let mut list = Vec::new();
        let mut adj = vec![Vec::new(); n];
        for (u, v) in edges {
            if u >= n || v >= n {
                return Err(invalid(format!("edge ({u}, {v}) out of range for n = {n}")));
            }
            if u == v {
                return Err(invalid(format!("loop at vertex {u}")));
            }
            let e = (u.min(v), u.max(v));
            if !seen.insert(e) {
                return Err(invalid(format!("duplicate edge ({}, {})", e.0, e.1)));
            }
            list.push(e);
            adj[u].push(v);
            adj[v].push(u);
        }
        Ok(Graph {
            n,
            edges: list,
            adj,
        })
    }

    pub fn complete(n: usize) -> Graph {
        let edges = (0..n).flat_map(|u| (u + 1..n).map(move |v| (u, v)));
        Graph::new(n, edges).expect("valid complete graph")
    }

    pub fn cycle(n: usize) -> Result<Graph> {
        if n < 3 {
            return Err(invalid("a cycle needs at least 3 vertices"));
        }
        Graph::new(n, (0..n).map(|u| (u, (u + 1) % n)))
    }

    /// Complete multipartite graph with the given part sizes; parts are
    /// consecutive vertex ranges.
    pub fn complete_multipartite(parts: &[usize]) -> Graph {
        let mut part_of = Vec::new();
        for (i, &p) in parts.iter().enumerate() {
            part_of.extend(std::iter::repeat_n(i, p));
        }
        let n = part_of.len();
        let edges: Vec<(usize, usize)> = (0..n)
            .flat_map(|u| (u + 1..n).map(move |v| (u, v)))
            .filter(|&(u, v)| part_of[u] != part_of[v])
            .collect();
        Graph::new(n, edges).expect("valid multipartite graph")
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn neighbors(&self, u: usize) -> &[usize] {
        &self.adj[u]
    }

    pub fn has_edge(&self, u: usize, v: usize) -> bool {
        u < self.n && self.adj[u].contains(&v)
    }

    pub fn adjacency_matrix(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.n, self.n);
        for &(u, v) in &self.edges {
            m[(u, v)] = 1.0;
            m[(v, u)] = 1.0;
        }
        m
    }
}

/// Box graph of `Z^d` with nearest-neighbour edges. Vertex index is the
/// row-major encoding of the coordinates (last coordinate fastest).
pub fn lattice_graph(dims: &[usize]) -> Result<Graph> {
    if dims.is_empty() {
        return Err(invalid("lattice needs at least one dimension"));
    }
    if dims.contains(&0) {
        return Err(invalid("lattice extents must be >= 1"));
    }
    let n: usize = dims.iter().product();
    let mut strides = vec![1usize; dims.len()];
    for i in (0..dims.len() - 1).rev() {
        strides[i] = strides[i + 1] * dims[i + 1];
    }
    let mut edges = Vec::new();
    for u in 0..n {
        for (axis, &stride) in strides.iter().enumerate() {
            let coord = (u / stride) % dims[axis];
            if coord + 1 < dims[axis] {
                edges.push((u, u + stride));
            }
        }
    }
    Graph::new(n, edges)
}

/// Coordinates of vertex `u` in a lattice built by [`lattice_graph`].
pub fn lattice_coordinates(dims: &[usize], mut u: usize) -> Vec<usize> {
    let mut out = vec![0; dims.len()];
    for i in (0..dims.len()).rev() {
        out[i] = u % dims[i];
        u /= dims[i];
    }
    out
}

/// Edge weights for [`lattice_instance`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Couplings {
    /// Every weight `+1`.
    Ferro,
    /// Every weight `-1`.
    Antiferro,
    /// Independent uniform `+-1`.
    Random,
}

impl std::str::FromStr for Couplings {
    type Err = Error;

    fn from_str(s: &str) -> Result<Couplings> {
        match s {
            "ferro" => Ok(Couplings::Ferro),
            "antiferro" => Ok(Couplings::Antiferro),
            "random" => Ok(Couplings::Random),
            _ => Err(invalid(format!("couplings must be ferro, antiferro or random, got '{s}'"))),
        }
    }
}

/// Lattice box with `+-1` weights; `seed` only matters for random couplings.
pub fn lattice_instance(dims: &[usize], couplings: Couplings, seed: u64) -> Result<WeightedInstance> {
    let g = lattice_graph(dims)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let weights = (0..g.num_edges())
        .map(|_| match couplings {
            Couplings::Ferro => 1.0,
            Couplings::Antiferro => -1.0,
            Couplings::Random => {
                if rng.random_bool(0.5) {
                    1.0
                } else {
                    -1.0
                }
            }
        })
        .collect();
    WeightedInstance::new(g, weights)
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Bipartition {
    /// Side (0 or 1) of every vertex.
    Bipartite(Vec<u8>),
    /// Vertices of an odd closed walk, in order.
    OddCycle(Vec<usize>),
}

impl Bipartition {
    pub fn is_bipartite(&self) -> bool {
        matches!(self, Bipartition::Bipartite(_))
    }
}

/// BFS 2-colouring, or an odd cycle witness.
pub fn is_bipartite(g: &Graph) -> Bipartition {
    let mut side: Vec<Option<u8>> = vec![None; g.n];
    let mut parent = vec![usize::MAX; g.n];
    for s in 0..g.n {
        if side[s].is_some() {
            continue;
        }
        side[s] = Some(0);
        let mut queue = VecDeque::from([s]);
        while let Some(u) = queue.pop_front() {
            let su = side[u].unwrap();
            for &v in &g.adj[u] {
                match side[v] {
                    None => {
                        side[v] = Some(1 - su);
                        parent[v] = u;
                        queue.push_back(v);
                    }
                    Some(sv) if sv == su => return Bipartition::OddCycle(odd_cycle(&parent, u, v)),
                    _ => {}
                }
            }
        }
    }
    Bipartition::Bipartite(side.into_iter().map(|s| s.unwrap()).collect())
}

/// Closes the two BFS-tree paths from `u` and `v` to their common ancestor.
fn odd_cycle(parent: &[usize], u: usize, v: usize) -> Vec<usize> {
    let path = |mut x: usize| {
        let mut p = vec![x];
        while parent[x] != usize::MAX {
            x = parent[x];
            p.push(x);
        }
        p
    };
    let pu = path(u);
    let pv = path(v);
    let on_u: HashSet<usize> = pu.iter().copied().collect();
    let meet = *pv.iter().find(|x| on_u.contains(x)).expect("same BFS tree");
    let mut cycle: Vec<usize> = pu.iter().copied().take_while(|&x| x != meet).collect();
    cycle.push(meet);
    let back: Vec<usize> = pv.iter().copied().take_while(|&x| x != meet).collect();
    cycle.extend(back.into_iter().rev());
    cycle
}

/// Smallest-last (degeneracy) vertex order.
fn degeneracy_order(g: &Graph) -> Vec<usize> {
    let mut deg: Vec<usize> = (0..g.n).map(|u| g.adj[u].len()).collect();
    let mut removed = vec![false; g.n];
    let mut order = Vec::with_capacity(g.n);
    for _ in 0..g.n {
        let u = (0..g.n)
            .filter(|&u| !removed[u])
            .min_by_key(|&u| (deg[u], u))
            .unwrap();
        removed[u] = true;
        order.push(u);
        for &v in &g.adj[u] {
            if !removed[v] {
                deg[v] -= 1;
            }
        }
    }
    order.reverse();
    order
}

/// Proper colouring by first-fit in degeneracy order. Colours are `0..k`.
pub fn greedy_coloring(g: &Graph) -> Vec<usize> {
    let mut color = vec![usize::MAX; g.n];
    for u in degeneracy_order(g) {
        let used: HashSet<usize> = g.adj[u].iter().map(|&v| color[v]).collect();
        color[u] = (0..).find(|c| !used.contains(c)).unwrap();
    }
    color
}

/// Number of colours used by [`greedy_coloring`]; an upper bound on `chi(G)`.
pub fn greedy_chromatic_upper_bound(g: &Graph) -> usize {
    greedy_coloring(g).into_iter().max().map_or(0, |c| c + 1)
}

/// Searches for a proper colouring with at most `k` colours (DSatur-ordered
/// backtracking, capped at `node_limit` search nodes).
pub fn k_coloring(g: &Graph, k: usize, node_limit: usize) -> Option<Vec<usize>> {
    let greedy = greedy_coloring(g);
    if greedy.iter().all(|&c| c < k) {
        return Some(greedy);
    }
    let mut color = vec![usize::MAX; g.n];
    let mut nodes = 0usize;
    if dsatur_search(g, k, &mut color, &mut nodes, node_limit) {
        Some(color)
    } else {
        None
    }
}

fn dsatur_search(
    g: &Graph,
    k: usize,
    color: &mut [usize],
    nodes: &mut usize,
    limit: usize,
) -> bool {
    *nodes += 1;
    if *nodes > limit {
        return false;
    }
    let pick = (0..g.n)
        .filter(|&u| color[u] == usize::MAX)
        .max_by_key(|&u| {
            let sat: HashSet<usize> = g.adj[u]
                .iter()
                .map(|&v| color[v])
                .filter(|&c| c != usize::MAX)
                .collect();
            (sat.len(), g.adj[u].len(), usize::MAX - u)
        });
    let Some(u) = pick else {
        return true;
    };
    let used: HashSet<usize> = g.adj[u].iter().map(|&v| color[v]).collect();
    let highest = color.iter().filter(|&&c| c != usize::MAX).max().map_or(0, |c| c + 1);
    // colours above the highest used one are interchangeable; try only one
    for c in 0..k.min(highest + 1) {
        if used.contains(&c) {
            continue;
        }
        color[u] = c;
        if dsatur_search(g, k, color, nodes, limit) {
            return true;
        }
    }
    color[u] = usize::MAX;
    false
}

/// A maximal clique grown greedily from every start vertex; the largest found.
pub fn greedy_clique(g: &Graph) -> Vec<usize> {
    let mut best = Vec::new();
    for s in 0..g.n {
        let mut clique = vec![s];
        let mut cand: Vec<usize> = g.adj[s].clone();
        cand.sort_by_key(|&v| std::cmp::Reverse(g.adj[v].len()));
        for v in cand {
            if clique.iter().all(|&c| g.has_edge(c, v)) {
                clique.push(v);
            }
        }
        if clique.len() > best.len() {
            best = clique;
        }
    }
    best
}

/// Graph plus a weight `A(u, v)` per edge, aligned with `graph.edges()`.
#[derive(Clone, Debug, PartialEq)]
pub struct WeightedInstance {
    graph: Graph,
    weights: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct InstanceDocument {
    n: usize,
    edges: Vec<(usize, usize, f64)>,
}

impl WeightedInstance {
    pub fn new(graph: Graph, weights: Vec<f64>) -> Result<WeightedInstance> {
        if weights.len() != graph.num_edges() {
            return Err(invalid(format!(
                "{} weights for {} edges",
                weights.len(),
                graph.num_edges()
            )));
        }
        if weights.iter().any(|w| !w.is_finite()) {
            return Err(invalid("weights must be finite"));
        }
        Ok(WeightedInstance { graph, weights })
    }

    pub fn from_weighted_edges(n: usize, edges: &[(usize, usize, f64)]) -> Result<WeightedInstance> {
        let graph = Graph::new(n, edges.iter().map(|&(u, v, _)| (u, v)))?;
        WeightedInstance::new(graph, edges.iter().map(|e| e.2).collect())
    }

    /// Every edge weighted `w`.
    pub fn uniform(graph: Graph, w: f64) -> WeightedInstance {
        let m = graph.num_edges();
        WeightedInstance::new(graph, vec![w; m]).expect("finite weight")
    }

    pub fn graph(&self) -> &Graph {
        &self.graph
    }

    pub fn n(&self) -> usize {
        self.graph.n
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// `(u, v, A(u, v))` for every edge.
    pub fn weighted_edges(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        self.graph
            .edges
            .iter()
            .zip(&self.weights)
            .map(|(&(u, v), &w)| (u, v, w))
    }

    /// Symmetric `A~` with `A~(u,v) = A~(v,u) = A(u,v)` on edges; the objective is
    /// `<A~, X>/2`.
    pub fn dense_matrix(&self) -> DMatrix<f64> {
        let n = self.n();
        let mut m = DMatrix::zeros(n, n);
        for (u, v, w) in self.weighted_edges() {
            m[(u, v)] = w;
            m[(v, u)] = w;
        }
        m
    }

    /// Per-vertex lists of `(neighbour, weight)`.
    pub fn weighted_adjacency(&self) -> Vec<Vec<(usize, f64)>> {
        let mut adj = vec![Vec::new(); self.n()];
        for (u, v, w) in self.weighted_edges() {
            adj[u].push((v, w));
            adj[v].push((u, w));
        }
        adj
    }

    /// Edge-list text: `n m`, then `u v w` per line, weights with 17
    /// significant digits.
    pub fn to_text(&self) -> String {
        let mut out = format!("{} {}\n", self.n(), self.graph.num_edges());
        for (u, v, w) in self.weighted_edges() {
            writeln!(out, "{u} {v} {w:.16e}").unwrap();
        }
        out
    }

    /// Parses the edge-list format; blank lines and lines starting with `#` are
    /// ignored.
    pub fn from_text(text: &str) -> Result<WeightedInstance> {
        let mut lines = text
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l.trim()))
            .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));
        let perr = |line: usize, msg: String| Error::Parse { line, msg };
        let (hl, header) = lines.next().ok_or_else(|| perr(1, "empty file".into()))?;
        let head: Vec<&str> = header.split_whitespace().collect();
        if head.len() != 2 {
            return Err(perr(hl, format!("expected 'n m', got '{header}'")));
        }
        let n: usize = head[0]
            .parse()
            .map_err(|e| perr(hl, format!("bad vertex count: {e}")))?;
        let m: usize = head[1]
            .parse()
            .map_err(|e| perr(hl, format!("bad edge count: {e}")))?;
        let mut edges = Vec::with_capacity(m);
        let mut seen = HashSet::new();
        for (ln, line) in lines {
            let f: Vec<&str> = line.split_whitespace().collect();
            if f.len() != 3 {
                return Err(perr(ln, format!("expected 'u v w', got '{line}'")));
            }
            let u: usize = f[0].parse().map_err(|e| perr(ln, format!("bad vertex: {e}")))?;
            let v: usize = f[1].parse().map_err(|e| perr(ln, format!("bad vertex: {e}")))?;
            let w: f64 = f[2].parse().map_err(|e| perr(ln, format!("bad weight: {e}")))?;
            if u >= n || v >= n {
                return Err(perr(ln, format!("vertex out of range for n = {n}")));
            }
            if u == v {
                return Err(perr(ln, format!("loop at vertex {u}")));
            }
            if !w.is_finite() {
                return Err(perr(ln, "weight must be finite".into()));
            }
            if !seen.insert((u.min(v), u.max(v))) {
                return Err(perr(ln, format!("duplicate edge ({u}, {v})")));
            }
            edges.push((u, v, w));
        }
        if edges.len() != m {
            return Err(perr(hl, format!("header says {m} edges, found {}", edges.len())));
        }
        WeightedInstance::from_weighted_edges(n, &edges)
    }

    pub fn to_json(&self) -> Result<String> {
        let doc = InstanceDocument {
            n: self.n(),
            edges: self.weighted_edges().collect(),
        };
        Ok(serde_json::to_string_pretty(&doc)?)
    }

    pub fn from_json(s: &str) -> Result<WeightedInstance> {
        let doc: InstanceDocument = serde_json::from_str(s)?;
        WeightedInstance::from_weighted_edges(doc.n, &doc.edges)
    }

    /// Reads JSON when the path ends in `.json`, the edge-list format otherwise.
    pub fn load(path: &Path) -> Result<WeightedInstance> {
        let text = std::fs::read_to_string(path)?;
        if path.extension().is_some_and(|e| e == "json") {
            WeightedInstance::from_json(&text)
        } else {
            WeightedInstance::from_text(&text)
        }
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let text = if path.extension().is_some_and(|e| e == "json") {
            self.to_json()?
        } else {
            self.to_text()
        };
        std::fs::write(path, text)?;
        Ok(())
    }
}

/// Two-player XOR game: the referee asks `(u, v)` with probability `pi[u][v]`
/// and the players win when their answers XOR to `g[u][v]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct XorGame {
    pub pi: Vec<Vec<f64>>,
    pub g: Vec<Vec<u8>>,
}

impl XorGame {
    pub fn new(pi: Vec<Vec<f64>>, g: Vec<Vec<u8>>) -> Result<XorGame> {
        let game = XorGame { pi, g };
        game.validate()?;
        Ok(game)
    }

    /// Clauser–Horne–Shimony–Holt game: uniform questions, win iff `a ^ b = x & y`.
    pub fn chsh() -> XorGame {
        XorGame {
            pi: vec![vec![0.25; 2]; 2],
            g: vec![vec![0, 0], vec![0, 1]],
        }
    }

    pub fn s(&self) -> usize {
        self.pi.len()
    }

    pub fn t(&self) -> usize {
        self.pi.first().map_or(0, |r| r.len())
    }

    pub fn validate(&self) -> Result<()> {
        let (s, t) = (self.s(), self.t());
        if s == 0 || t == 0 {
            return Err(invalid("empty question sets"));
        }
        if self.pi.iter().any(|r| r.len() != t) || self.g.len() != s || self.g.iter().any(|r| r.len() != t) {
            return Err(invalid("pi and g must both be s x t"));
        }
        if self.pi.iter().flatten().any(|&p| !(p >= 0.0) || !p.is_finite()) {
            return Err(invalid("probabilities must be finite and >= 0"));
        }
        if self.g.iter().flatten().any(|&b| b > 1) {
            return Err(invalid("g entries must be 0 or 1"));
        }
        let total: f64 = self.pi.iter().flatten().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(invalid(format!("probabilities sum to {total}, not 1")));
        }
        Ok(())
    }

    pub fn from_json(s: &str) -> Result<XorGame> {
        let game: XorGame = serde_json::from_str(s)?;
        game.validate()?;
        Ok(game)
    }

    pub fn load(path: &Path) -> Result<XorGame> {
        XorGame::from_json(&std::fs::read_to_string(path)?)
    }
}

/// Complete bipartite instance on `s + t` vertices (questions of the first
/// player first) with `A(u, s+v) = (-1)^{g(u,v)} pi(u,v) / 2`.
pub fn xor_game_instance(game: &XorGame) -> Result<WeightedInstance> {
    game.validate()?;
    let (s, t) = (game.s(), game.t());
    let mut edges = Vec::with_capacity(s * t);
    for u in 0..s {
        for v in 0..t {
            let sign = if game.g[u][v] == 1 { -1.0 } else { 1.0 };
            edges.push((u, s + v, sign * game.pi[u][v] / 2.0));
        }
    }
    WeightedInstance::from_weighted_edges(s + t, &edges)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::{any, prop_assert, prop_assert_eq, proptest};

    #[test]
    fn lattice_examples() {
        let p = lattice_graph(&[2]).unwrap();
        assert_eq!((p.n(), p.num_edges()), (2, 1));
        let c4 = lattice_graph(&[2, 2]).unwrap();
        assert_eq!((c4.n(), c4.num_edges()), (4, 4));
        let cube = lattice_graph(&[4, 4, 4]).unwrap();
        assert_eq!((cube.n(), cube.num_edges()), (64, 144));
        assert!(lattice_graph(&[]).is_err());
        assert!(lattice_graph(&[3, 0]).is_err());
    }

    #[test]
    fn bipartite_examples() {
        assert!(is_bipartite(&Graph::cycle(4).unwrap()).is_bipartite());
        match is_bipartite(&Graph::complete(3)) {
            Bipartition::OddCycle(c) => assert_eq!(c.len() % 2, 1),
            _ => panic!("triangle is not bipartite"),
        }
        let dims = [3, 3];
        let g = lattice_graph(&dims).unwrap();
        let Bipartition::Bipartite(side) = is_bipartite(&g) else {
            panic!("lattice is bipartite");
        };
        for u in 0..g.n() {
            let parity = lattice_coordinates(&dims, u).iter().sum::<usize>() % 2;
            assert_eq!(side[u] as usize, parity ^ side[0] as usize);
        }
    }

    #[test]
    fn odd_cycle_witness_is_a_cycle() {
        let g = Graph::cycle(7).unwrap();
        let Bipartition::OddCycle(c) = is_bipartite(&g) else {
            panic!("C7 is not bipartite");
        };
        assert_eq!(c.len() % 2, 1);
        for i in 0..c.len() {
            assert!(g.has_edge(c[i], c[(i + 1) % c.len()]));
        }
    }

    #[test]
    fn chromatic_bounds() {
        assert_eq!(greedy_chromatic_upper_bound(&lattice_graph(&[4, 5]).unwrap()), 2);
        assert_eq!(greedy_chromatic_upper_bound(&Graph::cycle(5).unwrap()), 3);
        assert_eq!(greedy_chromatic_upper_bound(&Graph::complete(5)), 5);
        let tri = Graph::complete_multipartite(&[3, 2, 4]);
        let col = k_coloring(&tri, 3, 100_000).unwrap();
        assert!(tri.edges().iter().all(|&(u, v)| col[u] != col[v]));
        assert!(k_coloring(&Graph::complete(4), 3, 100_000).is_none());
        assert_eq!(greedy_clique(&Graph::complete(5)).len(), 5);
        assert_eq!(greedy_clique(&tri).len(), 3);
    }

    #[test]
    fn xor_game_weights() {
        let single = XorGame::new(vec![vec![1.0]], vec![vec![0]]).unwrap();
        let inst = xor_game_instance(&single).unwrap();
        assert_eq!(inst.weights(), &[0.5]);
        let chsh = xor_game_instance(&XorGame::chsh()).unwrap();
        assert_eq!(chsh.n(), 4);
        let neg: Vec<f64> = chsh.weights().iter().copied().filter(|&w| w < 0.0).collect();
        assert_eq!(neg, vec![-0.125]);
        assert!(chsh.weights().iter().all(|w| w.abs() == 0.125));
        assert!(XorGame::new(vec![vec![0.5]], vec![vec![0]]).is_err());
    }

    #[test]
    fn lattice_instances() {
        let ferro = lattice_instance(&[3, 3], Couplings::Ferro, 0).unwrap();
        assert!(ferro.weights().iter().all(|&w| w == 1.0));
        let a = lattice_instance(&[4, 4, 4], Couplings::Random, 7).unwrap();
        let b = lattice_instance(&[4, 4, 4], Couplings::Random, 7).unwrap();
        assert_eq!(a, b);
        assert!(a.weights().iter().all(|&w| w.abs() == 1.0));
        assert!(a.weights().iter().any(|&w| w < 0.0) && a.weights().iter().any(|&w| w > 0.0));
        assert_eq!("antiferro".parse::<Couplings>().unwrap(), Couplings::Antiferro);
        assert!("spin".parse::<Couplings>().is_err());
    }

    #[test]
    fn text_format_errors() {
        let err = WeightedInstance::from_text("2 1\n0 0 1.0\n").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }));
        let err = WeightedInstance::from_text("3 2\n0 1 1\n1 0 2\n").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 3, .. }));
        assert!(WeightedInstance::from_text("3 2\n0 1 1\n").is_err());
        assert!(WeightedInstance::from_text("3 1\n0 1 x\n").is_err());
        let c4 = WeightedInstance::from_text("4 4\n0 1 1\n1 2 -1\n2 3 1\n3 0 -1\n").unwrap();
        assert_eq!(c4.graph().num_edges(), 4);
    }

    #[test]
    fn dense_matrix_is_symmetric() {
        let inst = WeightedInstance::from_weighted_edges(3, &[(0, 1, 2.0), (2, 1, -1.5)]).unwrap();
        let m = inst.dense_matrix();
        assert_eq!(m, m.transpose());
        assert_eq!(m[(1, 2)], -1.5);
    }

    proptest! {
        #[test]
        fn lattice_edge_count(dims in proptest::collection::vec(1usize..6, 1..4)) {
            let g = lattice_graph(&dims).unwrap();
            let expected: usize = (0..dims.len())
                .map(|i| (dims[i] - 1) * dims.iter().enumerate().filter(|&(j, _)| j != i).map(|(_, &e)| e).product::<usize>())
                .sum();
            prop_assert_eq!(g.num_edges(), expected);
            prop_assert!(is_bipartite(&g).is_bipartite());
        }

        #[test]
        fn text_round_trip_is_bit_exact(
            ws in proptest::collection::vec(-1e6f64..1e6, 1..12),
        ) {
            let n = ws.len() + 1;
            let edges: Vec<(usize, usize, f64)> = ws.iter().enumerate().map(|(i, &w)| (i, i + 1, w)).collect();
            let inst = WeightedInstance::from_weighted_edges(n, &edges).unwrap();
            let back = WeightedInstance::from_text(&inst.to_text()).unwrap();
            prop_assert_eq!(&back, &inst);
            let back = WeightedInstance::from_json(&inst.to_json().unwrap()).unwrap();
            prop_assert_eq!(back, inst);
        }

        #[test]
        fn greedy_coloring_is_proper(n in 2usize..20, seed in any::<u64>()) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let edges: Vec<(usize, usize)> = (0..n)
                .flat_map(|u| (u + 1..n).map(move |v| (u, v)))
                .filter(|_| rng.random_bool(0.4))
                .collect();
            let g = Graph::new(n, edges).unwrap();
            let c = greedy_coloring(&g);
            prop_assert!(g.edges().iter().all(|&(u, v)| c[u] != c[v]));
            prop_assert!(greedy_clique(&g).len() <= greedy_chromatic_upper_bound(&g));
        }
    }
}
