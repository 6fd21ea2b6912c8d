//! Undirected simple graphs: generators, SNAP edge-list I/O and degree
//! statistics.
//!
//! Graphs are stored in compressed sparse row form with each adjacency list
//! sorted, so identical inputs always give byte-identical layouts. A graph
//! is immutable once built and can be shared freely between simulation
//! workers.

use std::collections::{BTreeMap, HashMap};
use std::io::{BufRead, Write};

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::GraphError;
use crate::rng::{rng_from_seed, SimRng};

/// Attempts at a fresh configuration-model pairing before giving up.
const REGULAR_RESTARTS: usize = 200;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Graph {
    offsets: Vec<usize>,
    targets: Vec<u32>,
    edge_count: usize,
    /// Original identifiers for loaded graphs, indexed by dense node id.
    labels: Option<Vec<u64>>,
}

impl Graph {
    /// Builds a graph from an explicit edge list. Rejects self-loops,
    /// duplicates (in either orientation) and out-of-range endpoints.
    pub fn from_edges(node_count: usize, edges: &[(usize, usize)]) -> Result<Self, GraphError> {
        if node_count == 0 {
            return Err(GraphError::Empty);
        }
        if node_count > u32::MAX as usize {
            return Err(GraphError::Invariant("node count exceeds u32 range".into()));
        }
        let mut degree = vec![0usize; node_count];
        for &(u, v) in edges {
            if u == v || u >= node_count || v >= node_count {
                return Err(GraphError::InvalidEdge { u, v });
            }
            degree[u] += 1;
            degree[v] += 1;
        }
        let mut offsets = Vec::with_capacity(node_count + 1);
        offsets.push(0);
        for d in &degree {
            offsets.push(offsets.last().unwrap() + d);
        }
        let mut cursor = offsets[..node_count].to_vec();
        let mut targets = vec![0u32; offsets[node_count]];
        for &(u, v) in edges {
            targets[cursor[u]] = v as u32;
            cursor[u] += 1;
            targets[cursor[v]] = u as u32;
            cursor[v] += 1;
        }
        for v in 0..node_count {
            let adj = &mut targets[offsets[v]..offsets[v + 1]];
            adj.sort_unstable();
            if let Some(w) = adj.windows(2).find(|w| w[0] == w[1]) {
                return Err(GraphError::InvalidEdge { u: v, v: w[0] as usize });
            }
        }
        Ok(Graph {
            offsets,
            targets,
            edge_count: edges.len(),
            labels: None,
        })
    }

    pub fn node_count(&self) -> usize {
        self.offsets.len() - 1
    }

    pub fn edge_count(&self) -> usize {
        self.edge_count
    }

    #[inline]
    pub fn neighbors(&self, v: usize) -> &[u32] {
        &self.targets[self.offsets[v]..self.offsets[v + 1]]
    }

    #[inline]
    pub fn degree(&self, v: usize) -> usize {
        self.offsets[v + 1] - self.offsets[v]
    }

    pub fn max_degree(&self) -> usize {
        (0..self.node_count()).map(|v| self.degree(v)).max().unwrap_or(0)
    }

    pub fn min_degree(&self) -> usize {
        (0..self.node_count()).map(|v| self.degree(v)).min().unwrap_or(0)
    }

    pub fn has_edge(&self, u: usize, v: usize) -> bool {
        self.neighbors(u).binary_search(&(v as u32)).is_ok()
    }

    /// Original identifier of a node (the dense index for generated graphs).
    pub fn label(&self, v: usize) -> u64 {
        match &self.labels {
            Some(l) => l[v],
            None => v as u64,
        }
    }

    /// Edges as `(u, v)` with `u < v`, in sorted order.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        (0..self.node_count()).flat_map(move |u| {
            self.neighbors(u)
                .iter()
                .map(move |&v| (u, v as usize))
                .filter(|&(u, v)| u < v)
        })
    }

    /// Full scan of the simple-undirected-graph invariants.
    pub fn check_invariants(&self) -> Result<(), GraphError> {
        let mut degree_sum = 0usize;
        for u in 0..self.node_count() {
            let adj = self.neighbors(u);
            degree_sum += adj.len();
            for (i, &v) in adj.iter().enumerate() {
                let v = v as usize;
                if v == u {
                    return Err(GraphError::Invariant(format!("self-loop at {u}")));
                }
                if v >= self.node_count() {
                    return Err(GraphError::Invariant(format!("neighbour {v} of {u} out of range")));
                }
                if i > 0 && adj[i - 1] >= adj[i] {
                    return Err(GraphError::Invariant(format!("adjacency of {u} unsorted or duplicated")));
                }
                if !self.has_edge(v, u) {
                    return Err(GraphError::Invariant(format!("edge {u}->{v} has no reverse")));
                }
            }
        }
        if degree_sum != 2 * self.edge_count {
            return Err(GraphError::Invariant(format!(
                "degree sum {degree_sum} != 2 * edge count {}",
                self.edge_count
            )));
        }
        Ok(())
    }

    /// Writes one `u v` pair per line (`u < v`, sorted), using original
    /// identifiers where the graph was loaded from a file.
    pub fn write_edge_list<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        for (u, v) in self.edges() {
            writeln!(out, "{} {}", self.label(u), self.label(v))?;
        }
        out.flush()
    }

    pub fn degree_stats(&self) -> DegreeStats {
        DegreeStats::from_degrees((0..self.node_count()).map(|v| self.degree(v)))
    }
}

/// Empirical degree distribution summary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DegreeStats {
    pub node_count: usize,
    pub mean_degree: f64,
    /// E[k^2] over nodes.
    pub second_moment: f64,
    pub histogram: BTreeMap<usize, usize>,
    /// Power-law exponent, set only for scale-free generators.
    pub exponent_hint: Option<f64>,
}

impl DegreeStats {
    pub fn from_degrees(degrees: impl IntoIterator<Item = usize>) -> Self {
        let mut histogram = BTreeMap::new();
        let (mut n, mut sum, mut sum_sq) = (0usize, 0u128, 0u128);
        for d in degrees {
            *histogram.entry(d).or_insert(0) += 1;
            n += 1;
            sum += d as u128;
            sum_sq += (d as u128) * (d as u128);
        }
        let (mean_degree, second_moment) = if n == 0 {
            (0.0, 0.0)
        } else {
            (sum as f64 / n as f64, sum_sq as f64 / n as f64)
        };
        DegreeStats {
            node_count: n,
            mean_degree,
            second_moment,
            histogram,
            exponent_hint: None,
        }
    }

    pub fn with_exponent_hint(mut self, xi: f64) -> Self {
        self.exponent_hint = Some(xi);
        self
    }

    /// Moments of a k-regular graph.
    pub fn regular(node_count: usize, k: usize) -> Self {
        Self::from_degrees(std::iter::repeat_n(k, node_count))
    }

    /// Mean degree of the endpoint of a uniformly random edge, E[k^2]/E[k].
    pub fn moment_ratio(&self) -> f64 {
        self.second_moment / self.mean_degree
    }

    pub fn variance(&self) -> f64 {
        self.second_moment - self.mean_degree * self.mean_degree
    }

    pub fn max_degree(&self) -> usize {
        self.histogram.keys().next_back().copied().unwrap_or(0)
    }

    pub fn min_degree(&self) -> usize {
        self.histogram.keys().next().copied().unwrap_or(0)
    }
}

/// Random `k`-regular graph by the configuration model, with random pair
/// rewiring to remove self-loops and multi-edges.
pub fn build_regular(n: usize, k: usize, seed: u64) -> Result<Graph, GraphError> {
    if k < 3 {
        return Err(GraphError::InfeasibleRegular { n, k, reason: "need k >= 3" });
    }
    if k >= n {
        return Err(GraphError::InfeasibleRegular { n, k, reason: "need k < n" });
    }
    if !(n * k).is_multiple_of(2) {
        return Err(GraphError::InfeasibleRegular { n, k, reason: "n*k must be even" });
    }
    let mut rng = rng_from_seed(seed);
    for _ in 0..REGULAR_RESTARTS {
        if let Some(edges) = pair_stubs(n, k, &mut rng) {
            return Graph::from_edges(n, &edges);
        }
    }
    Err(GraphError::SamplingFailed { n, k, attempts: REGULAR_RESTARTS })
}

fn ordered(u: usize, v: usize) -> (usize, usize) {
    if u < v {
        (u, v)
    } else {
        (v, u)
    }
}

fn pair_stubs(n: usize, k: usize, rng: &mut SimRng) -> Option<Vec<(usize, usize)>> {
    let mut stubs: Vec<usize> = (0..n).flat_map(|v| std::iter::repeat_n(v, k)).collect();
    stubs.shuffle(rng);
    let mut edges: Vec<(usize, usize)> = stubs.chunks_exact(2).map(|c| ordered(c[0], c[1])).collect();
    let mut multiplicity: HashMap<(usize, usize), u32> = HashMap::with_capacity(edges.len());
    for &e in &edges {
        *multiplicity.entry(e).or_insert(0) += 1;
    }
    let is_bad = |e: (usize, usize), mult: &HashMap<(usize, usize), u32>| e.0 == e.1 || mult[&e] > 1;

    let mut budget = 50 * edges.len() + 1000;
    loop {
        let bad: Vec<usize> = (0..edges.len()).filter(|&i| is_bad(edges[i], &multiplicity)).collect();
        if bad.is_empty() {
            return Some(edges);
        }
        for i in bad {
            if !is_bad(edges[i], &multiplicity) {
                continue;
            }
            loop {
                if budget == 0 {
                    return None;
                }
                budget -= 1;
                let j = rng.gen_range(0..edges.len());
                if j == i {
                    continue;
                }
                let (u, v) = edges[i];
                let (x, y) = if rng.gen::<bool>() { edges[j] } else { (edges[j].1, edges[j].0) };
                let (a, b) = (ordered(u, x), ordered(v, y));
                if a.0 == a.1 || b.0 == b.1 || a == b {
                    continue;
                }
                let free = |e: (usize, usize), m: &HashMap<(usize, usize), u32>| {
                    m.get(&e).copied().unwrap_or(0) == 0
                };
                if !free(a, &multiplicity) || !free(b, &multiplicity) {
                    continue;
                }
                for old in [edges[i], edges[j]] {
                    let c = multiplicity.get_mut(&old).unwrap();
                    *c -= 1;
                    if *c == 0 {
                        multiplicity.remove(&old);
                    }
                }
                *multiplicity.entry(a).or_insert(0) += 1;
                *multiplicity.entry(b).or_insert(0) += 1;
                edges[i] = a;
                edges[j] = b;
                break;
            }
        }
    }
}

/// G(n, p) with `p = mean_degree / (n - 1)`.
pub fn build_erdos_renyi(n: usize, mean_degree: f64, seed: u64) -> Result<Graph, GraphError> {
    let max = n.saturating_sub(1) as f64;
    if n < 2 || !(mean_degree > 0.0 && mean_degree <= max) {
        return Err(GraphError::InvalidMeanDegree { n, mean_degree, max });
    }
    let p = mean_degree / max;
    let mut rng = rng_from_seed(seed);
    let mut edges = Vec::with_capacity((mean_degree * n as f64 / 2.0 * 1.1) as usize);
    for u in 0..n {
        for v in (u + 1)..n {
            if rng.gen::<f64>() < p {
                edges.push((u, v));
            }
        }
    }
    Graph::from_edges(n, &edges)
}

/// Preferential attachment grown from a complete graph on `m` nodes. Each
/// new node links to `m` distinct existing nodes chosen with probability
/// proportional to their current degree.
pub fn build_barabasi_albert(n: usize, m: usize, seed: u64) -> Result<Graph, GraphError> {
    if m < 2 || m >= n {
        return Err(GraphError::InvalidAttachment { n, m });
    }
    let mut rng = rng_from_seed(seed);
    let mut edges = Vec::with_capacity(m * (m - 1) / 2 + m * (n - m));
    // every edge contributes both endpoints, so uniform picks are degree-weighted
    let mut endpoints = Vec::with_capacity(2 * edges.capacity());
    for u in 0..m {
        for v in (u + 1)..m {
            edges.push((u, v));
            endpoints.extend([u, v]);
        }
    }
    let mut chosen = Vec::with_capacity(m);
    for v in m..n {
        chosen.clear();
        while chosen.len() < m {
            let t = endpoints[rng.gen_range(0..endpoints.len())];
            if !chosen.contains(&t) {
                chosen.push(t);
            }
        }
        for &t in &chosen {
            edges.push((t, v));
            endpoints.extend([t, v]);
        }
    }
    Graph::from_edges(n, &edges)
}

/// Generator family plus parameters; the seed is supplied per realisation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum GraphSpec {
    Regular { n: usize, k: usize },
    ErdosRenyi { n: usize, mean_degree: f64 },
    BarabasiAlbert { n: usize, m: usize },
}

impl GraphSpec {
    pub fn generate(&self, seed: u64) -> Result<Graph, GraphError> {
        match *self {
            GraphSpec::Regular { n, k } => build_regular(n, k, seed),
            GraphSpec::ErdosRenyi { n, mean_degree } => build_erdos_renyi(n, mean_degree, seed),
            GraphSpec::BarabasiAlbert { n, m } => build_barabasi_albert(n, m, seed),
        }
    }

    pub fn node_count(&self) -> usize {
        match *self {
            GraphSpec::Regular { n, .. }
            | GraphSpec::ErdosRenyi { n, .. }
            | GraphSpec::BarabasiAlbert { n, .. } => n,
        }
    }

    /// Target mean degree: `k`, the ER target, or `2m` for preferential
    /// attachment.
    pub fn nominal_mean_degree(&self) -> f64 {
        match *self {
            GraphSpec::Regular { k, .. } => k as f64,
            GraphSpec::ErdosRenyi { mean_degree, .. } => mean_degree,
            GraphSpec::BarabasiAlbert { m, .. } => 2.0 * m as f64,
        }
    }
}

/// A graph read from an edge list, with the records that were discarded.
#[derive(Debug, Clone)]
pub struct LoadedGraph {
    pub graph: Graph,
    pub self_loops_dropped: usize,
    pub duplicates_dropped: usize,
}

impl LoadedGraph {
    pub fn dropped(&self) -> usize {
        self.self_loops_dropped + self.duplicates_dropped
    }
}

/// Reads a whitespace-separated edge list (SNAP format). `#` lines and blank
/// lines are skipped. Node ids are remapped to `0..N` in ascending id order.
pub fn read_edge_list<R: BufRead>(reader: R) -> Result<LoadedGraph, GraphError> {
    let mut raw = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line_no = idx + 1;
        let line = line?;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let mut tokens = trimmed.split_whitespace();
        let parse = |tok: Option<&str>| -> Result<u64, GraphError> {
            let tok = tok.ok_or_else(|| GraphError::Parse {
                line: line_no,
                message: format!("expected two node ids, got {trimmed:?}"),
            })?;
            tok.parse::<u64>().map_err(|_| GraphError::Parse {
                line: line_no,
                message: format!("{tok:?} is not a non-negative integer"),
            })
        };
        let u = parse(tokens.next())?;
        let v = parse(tokens.next())?;
        if tokens.next().is_some() {
            return Err(GraphError::Parse {
                line: line_no,
                message: format!("expected two node ids, got {trimmed:?}"),
            });
        }
        raw.push((u, v));
    }

    let mut ids: Vec<u64> = raw.iter().flat_map(|&(u, v)| [u, v]).collect();
    ids.sort_unstable();
    ids.dedup();
    if ids.is_empty() {
        return Err(GraphError::Empty);
    }
    let index: HashMap<u64, usize> = ids.iter().enumerate().map(|(i, &id)| (id, i)).collect();

    let mut self_loops = 0;
    let mut edges: Vec<(usize, usize)> = Vec::with_capacity(raw.len());
    for (u, v) in raw {
        if u == v {
            self_loops += 1;
            continue;
        }
        edges.push(ordered(index[&u], index[&v]));
    }
    let before = edges.len();
    edges.sort_unstable();
    edges.dedup();
    let duplicates = before - edges.len();

    let mut graph = Graph::from_edges(ids.len(), &edges)?;
    graph.labels = Some(ids);
    Ok(LoadedGraph {
        graph,
        self_loops_dropped: self_loops,
        duplicates_dropped: duplicates,
    })
}

pub fn parse_edge_list(text: &str) -> Result<LoadedGraph, GraphError> {
    read_edge_list(text.as_bytes())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn path3() -> Graph {
        Graph::from_edges(3, &[(0, 1), (1, 2)]).unwrap()
    }

    #[test]
    fn regular_on_four_nodes_is_k4() {
        for seed in 0..20 {
            let g = build_regular(4, 3, seed).unwrap();
            assert_eq!(g.edge_count(), 6);
            for u in 0..4 {
                for v in 0..4 {
                    assert_eq!(g.has_edge(u, v), u != v);
                }
            }
        }
    }

    #[test]
    fn regular_thousand_twenty() {
        let g = build_regular(1000, 20, 7).unwrap();
        assert_eq!(g.node_count(), 1000);
        assert_eq!(g.edge_count(), 10_000);
        assert_eq!(g.min_degree(), 20);
        assert_eq!(g.max_degree(), 20);
        g.check_invariants().unwrap();
    }

    #[test]
    fn regular_rejects_infeasible() {
        assert!(matches!(build_regular(5, 3, 1), Err(GraphError::InfeasibleRegular { .. })));
        assert!(matches!(build_regular(4, 4, 1), Err(GraphError::InfeasibleRegular { .. })));
        assert!(matches!(build_regular(10, 2, 1), Err(GraphError::InfeasibleRegular { .. })));
    }

    #[test]
    fn regular_is_deterministic() {
        let a = build_regular(200, 6, 11).unwrap();
        let b = build_regular(200, 6, 11).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, build_regular(200, 6, 12).unwrap());
    }

    #[test]
    fn er_two_nodes_full_probability() {
        for seed in 0..5 {
            let g = build_erdos_renyi(2, 1.0, seed).unwrap();
            assert_eq!(g.edge_count(), 1);
        }
    }

    #[test]
    fn er_rejects_bad_mean_degree() {
        assert!(build_erdos_renyi(1000, 0.0, 1).is_err());
        assert!(build_erdos_renyi(1000, -2.0, 1).is_err());
        assert!(build_erdos_renyi(1000, 1000.0, 1).is_err());
        assert!(build_erdos_renyi(1000, f64::NAN, 1).is_err());
    }

    #[test]
    fn er_mean_degree_close_to_target() {
        let g = build_erdos_renyi(1000, 20.0, 1).unwrap();
        g.check_invariants().unwrap();
        let mean = g.degree_stats().mean_degree;
        assert!((mean - 20.0).abs() < 1.0, "mean {mean}");
    }

    #[test]
    fn ba_edge_count_matches_construction() {
        let (n, m) = (1000, 10);
        let g = build_barabasi_albert(n, m, 3).unwrap();
        g.check_invariants().unwrap();
        assert_eq!(g.edge_count(), m * (m - 1) / 2 + m * (n - m));
        let mean = g.degree_stats().mean_degree;
        assert!((19.0..=20.0).contains(&mean), "mean {mean}");
        // heavy tail: hubs far above the mean
        assert!(g.max_degree() > 60, "max degree {}", g.max_degree());
    }

    #[test]
    fn ba_minimal_graph_is_complete() {
        let g = build_barabasi_albert(6, 5, 0).unwrap();
        assert_eq!(g.edge_count(), 15);
        assert!(matches!(build_barabasi_albert(1000, 1, 0), Err(GraphError::InvalidAttachment { .. })));
        assert!(matches!(build_barabasi_albert(5, 5, 0), Err(GraphError::InvalidAttachment { .. })));
    }

    #[test]
    fn load_path_graph() {
        let loaded = parse_edge_list("0 1\n1 2\n").unwrap();
        assert_eq!(loaded.graph.node_count(), 3);
        assert_eq!(loaded.graph.edge_count(), 2);
        assert_eq!(loaded.dropped(), 0);
    }

    #[test]
    fn load_drops_self_loops_and_duplicates() {
        let loaded = parse_edge_list("0 0\n0 1\n0 1\n").unwrap();
        assert_eq!(loaded.graph.node_count(), 2);
        assert_eq!(loaded.graph.edge_count(), 1);
        assert_eq!(loaded.self_loops_dropped, 1);
        assert_eq!(loaded.duplicates_dropped, 1);
        assert_eq!(loaded.dropped(), 2);
        // reverse orientation counts as a duplicate too
        assert_eq!(parse_edge_list("3 9\n9 3\n").unwrap().duplicates_dropped, 1);
    }

    #[test]
    fn load_remaps_sparse_ids_in_sorted_order() {
        let loaded = parse_edge_list("# comment\n\n100 7\n   \n7 42\n").unwrap();
        let g = &loaded.graph;
        assert_eq!(g.node_count(), 3);
        assert_eq!((g.label(0), g.label(1), g.label(2)), (7, 42, 100));
        assert!(g.has_edge(0, 2) && g.has_edge(0, 1) && !g.has_edge(1, 2));
        let mut out = Vec::new();
        g.write_edge_list(&mut out).unwrap();
        assert_eq!(String::from_utf8(out).unwrap(), "7 42\n7 100\n");
    }

    #[test]
    fn load_reports_line_of_malformed_record() {
        let err = parse_edge_list("0 1\n# ok\n1 x\n").unwrap_err();
        assert_eq!(err, GraphError::Parse { line: 3, message: "\"x\" is not a non-negative integer".into() });
        assert!(matches!(parse_edge_list("0 1\n5\n"), Err(GraphError::Parse { line: 2, .. })));
        assert!(matches!(parse_edge_list("0 1 2\n"), Err(GraphError::Parse { line: 1, .. })));
        assert!(matches!(parse_edge_list("-1 2\n"), Err(GraphError::Parse { line: 1, .. })));
    }

    #[test]
    fn degree_stats_examples() {
        let k4 = build_regular(4, 3, 0).unwrap().degree_stats();
        assert_eq!((k4.mean_degree, k4.second_moment), (3.0, 9.0));
        let p = path3().degree_stats();
        assert!((p.mean_degree - 4.0 / 3.0).abs() < 1e-15);
        assert!((p.second_moment - 2.0).abs() < 1e-15);
        assert_eq!(p.histogram.values().sum::<usize>(), 3);
        let r = build_regular(1000, 20, 7).unwrap().degree_stats();
        assert_eq!((r.mean_degree, r.second_moment, r.moment_ratio()), (20.0, 400.0, 20.0));
    }

    #[test]
    fn from_edges_rejects_bad_input() {
        assert!(Graph::from_edges(3, &[(0, 0)]).is_err());
        assert!(Graph::from_edges(3, &[(0, 1), (1, 0)]).is_err());
        assert!(Graph::from_edges(3, &[(0, 3)]).is_err());
        assert_eq!(Graph::from_edges(0, &[]), Err(GraphError::Empty));
    }
}
