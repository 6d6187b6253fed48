//! Correlation-distance transform, minimum spanning tree filtering and
//! unweighted network statistics.

use std::collections::{HashMap, VecDeque};
use std::io::{BufRead, Write};
use std::path::Path;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::market_data::CorrelationMatrix;
use crate::textio::{self, fmt9};

/// Weight given to a tree edge whose correlation is not strictly positive.
pub const MIN_EDGE_WEIGHT: f64 = 1e-6;

/// `d[i][j] = sqrt(2 (1 - rho[i][j]))`, symmetric, zero diagonal, in `[0, 2]`.
#[derive(Debug, Clone, PartialEq)]
pub struct DistanceMatrix {
    tickers: Vec<String>,
    d: DMatrix<f64>,
}

impl DistanceMatrix {
    pub fn tickers(&self) -> &[String] {
        &self.tickers
    }

    pub fn d(&self) -> &DMatrix<f64> {
        &self.d
    }
}

pub fn correlation_distance(rho: f64) -> f64 {
    (2.0 * (1.0 - rho)).max(0.0).sqrt()
}

pub fn to_distance(corr: &CorrelationMatrix) -> DistanceMatrix {
    let n = corr.len();
    let d = DMatrix::from_fn(n, n, |i, j| {
        if i == j {
            0.0
        } else {
            correlation_distance(corr.rho()[(i, j)])
        }
    });
    DistanceMatrix {
        tickers: corr.tickers().to_vec(),
        d,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WeightKind {
    Distance,
    Correlation,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Edge {
    /// Always `a < b`.
    pub a: usize,
    pub b: usize,
    pub weight: f64,
}

/// Sparse undirected graph over named nodes with canonically ordered edges.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightedGraph {
    nodes: Vec<String>,
    edges: Vec<Edge>,
    kind: WeightKind,
}

impl WeightedGraph {
    /// Validates the edge list: endpoints in range, no self-loops, no
    /// duplicates, finite weights. Edges are stored with `a < b`, sorted.
    pub fn new(nodes: Vec<String>, edges: Vec<Edge>, kind: WeightKind) -> Result<Self> {
        let n = nodes.len();
        let mut canon = Vec::with_capacity(edges.len());
        for e in edges {
            if e.a >= n || e.b >= n {
                return Err(Error::InvalidData(format!(
                    "edge ({}, {}) references a node outside 0..{n}",
                    e.a, e.b
                )));
            }
            if e.a == e.b {
                return Err(Error::InvalidData(format!("self-loop on '{}'", nodes[e.a])));
            }
            if !e.weight.is_finite() {
                return Err(Error::InvalidData(format!(
                    "non-finite weight on edge {}-{}",
                    nodes[e.a], nodes[e.b]
                )));
            }
            canon.push(Edge {
                a: e.a.min(e.b),
                b: e.a.max(e.b),
                weight: e.weight,
            });
        }
        canon.sort_by_key(|e| (e.a, e.b));
        if let Some(w) = canon
            .windows(2)
            .find(|w| (w[0].a, w[0].b) == (w[1].a, w[1].b))
        {
            return Err(Error::InvalidData(format!(
                "duplicate edge {}-{}",
                nodes[w[0].a], nodes[w[0].b]
            )));
        }
        Ok(Self {
            nodes,
            edges: canon,
            kind,
        })
    }

    pub fn nodes(&self) -> &[String] {
        &self.nodes
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn kind(&self) -> WeightKind {
        self.kind
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    /// Neighbor lists `(node, weight)` sorted by node index.
    pub fn adjacency(&self) -> Vec<Vec<(usize, f64)>> {
        let mut adj = vec![Vec::new(); self.nodes.len()];
        for e in &self.edges {
            adj[e.a].push((e.b, e.weight));
            adj[e.b].push((e.a, e.weight));
        }
        for list in &mut adj {
            list.sort_by_key(|&(v, _)| v);
        }
        adj
    }

    pub fn total_weight(&self) -> f64 {
        self.edges.iter().map(|e| e.weight).sum()
    }

    /// Writes `ticker_i<TAB>ticker_j<TAB>weight` lines in canonical edge order.
    pub fn write_edge_list<W: Write>(
        &self,
        mut out: W,
        header: Option<&str>,
    ) -> std::io::Result<()> {
        textio::write_header(&mut out, header)?;
        for e in &self.edges {
            writeln!(
                out,
                "{}\t{}\t{}",
                self.nodes[e.a],
                self.nodes[e.b],
                fmt9(e.weight)
            )?;
        }
        out.flush()
    }

    pub fn save_edge_list(&self, path: &Path, header: Option<&str>) -> Result<()> {
        let out = textio::create(path)?;
        self.write_edge_list(out, header)
            .map_err(|e| Error::io(path, e))
    }

    /// Reads an edge list. Node order is order of first appearance.
    pub fn read_edge_list<R: BufRead>(reader: R, source: &str, kind: WeightKind) -> Result<Self> {
        let mut nodes: Vec<String> = Vec::new();
        let mut index: HashMap<String, usize> = HashMap::new();
        let mut edges = Vec::new();
        let mut intern = |name: &str, nodes: &mut Vec<String>| -> usize {
            *index.entry(name.to_string()).or_insert_with(|| {
                nodes.push(name.to_string());
                nodes.len() - 1
            })
        };
        for item in textio::content_lines(reader, source) {
            let (line, text) = item?;
            let fields: Vec<&str> = text.split('\t').collect();
            if fields.len() != 3 {
                return Err(Error::parse(
                    source,
                    line,
                    format!("expected 3 tab-separated fields, found {}", fields.len()),
                ));
            }
            let weight: f64 = fields[2].trim().parse().map_err(|_| {
                Error::parse_cell(
                    source,
                    line,
                    "weight",
                    format!("invalid weight '{}'", fields[2]),
                )
            })?;
            let a = intern(fields[0].trim(), &mut nodes);
            let b = intern(fields[1].trim(), &mut nodes);
            edges.push(Edge { a, b, weight });
        }
        Self::new(nodes, edges, kind).map_err(|e| Error::parse(source, 0, e.to_string()))
    }

    pub fn load_edge_list(path: &Path, kind: WeightKind) -> Result<Self> {
        let reader = textio::open(path)?;
        Self::read_edge_list(reader, &path.display().to_string(), kind)
    }
}

struct UnionFind {
    parent: Vec<usize>,
    rank: Vec<u8>,
}

impl UnionFind {
    fn new(n: usize) -> Self {
        Self {
            parent: (0..n).collect(),
            rank: vec![0; n],
        }
    }

    fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    /// Returns false when `a` and `b` were already connected.
    fn union(&mut self, a: usize, b: usize) -> bool {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra == rb {
            return false;
        }
        match self.rank[ra].cmp(&self.rank[rb]) {
            std::cmp::Ordering::Less => self.parent[ra] = rb,
            std::cmp::Ordering::Greater => self.parent[rb] = ra,
            std::cmp::Ordering::Equal => {
                self.parent[rb] = ra;
                self.rank[ra] += 1;
            }
        }
        true
    }
}

/// Kruskal over the complete distance graph with ties broken by `(d, i, j)`.
/// Returns the tree edges with their distances, in acceptance order.
pub fn minimum_spanning_tree(dist: &DistanceMatrix) -> Vec<Edge> {
    let n = dist.tickers.len();
    let mut candidates: Vec<Edge> = Vec::with_capacity(n * n.saturating_sub(1) / 2);
    for i in 0..n {
        for j in i + 1..n {
            candidates.push(Edge {
                a: i,
                b: j,
                weight: dist.d[(i, j)],
            });
        }
    }
    candidates.sort_by(|x, y| {
        x.weight
            .total_cmp(&y.weight)
            .then(x.a.cmp(&y.a))
            .then(x.b.cmp(&y.b))
    });
    let mut uf = UnionFind::new(n);
    let mut tree = Vec::with_capacity(n.saturating_sub(1));
    for e in candidates {
        if uf.union(e.a, e.b) {
            tree.push(e);
            if tree.len() + 1 == n {
                break;
            }
        }
    }
    tree
}

/// MST of the distance graph, with each surviving edge re-weighted by its
/// correlation. Non-positive correlations are clamped to
/// [`MIN_EDGE_WEIGHT`] with a warning.
pub fn build_filtered_graph(
    dist: &DistanceMatrix,
    corr: &CorrelationMatrix,
) -> Result<WeightedGraph> {
    let n = dist.tickers.len();
    if n < 2 {
        return Err(Error::InvalidArgument(format!(
            "need at least 2 nodes to filter, got {n}"
        )));
    }
    if dist.tickers != corr.tickers() {
        return Err(Error::InvalidArgument(
            "distance and correlation matrices have different tickers".into(),
        ));
    }
    let edges = minimum_spanning_tree(dist)
        .into_iter()
        .map(|e| {
            let rho = corr.rho()[(e.a, e.b)];
            let weight = if rho > 0.0 {
                rho
            } else {
                log::warn!(
                    "tree edge {}-{} has correlation {rho}; clamping weight to {MIN_EDGE_WEIGHT}",
                    dist.tickers[e.a],
                    dist.tickers[e.b]
                );
                MIN_EDGE_WEIGHT
            };
            Edge { weight, ..e }
        })
        .collect();
    WeightedGraph::new(dist.tickers.clone(), edges, WeightKind::Correlation)
}

/// Unweighted (hop-count) statistics.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkStats {
    pub nodes: usize,
    pub edges: usize,
    pub average_degree: f64,
    pub diameter: usize,
    pub average_shortest_path: f64,
}

impl NetworkStats {
    pub fn write_csv<W: Write>(&self, mut out: W, header: Option<&str>) -> std::io::Result<()> {
        textio::write_header(&mut out, header)?;
        writeln!(out, "quantity,value")?;
        writeln!(out, "nodes,{}", self.nodes)?;
        writeln!(out, "edges,{}", self.edges)?;
        writeln!(out, "average_degree,{}", fmt9(self.average_degree))?;
        writeln!(out, "diameter,{}", self.diameter)?;
        writeln!(
            out,
            "average_shortest_path,{}",
            fmt9(self.average_shortest_path)
        )?;
        out.flush()
    }
}

fn bfs_hops(adj: &[Vec<(usize, f64)>], source: usize) -> Vec<Option<usize>> {
    let mut hops = vec![None; adj.len()];
    hops[source] = Some(0);
    let mut queue = VecDeque::from([source]);
    while let Some(u) = queue.pop_front() {
        let next = hops[u].unwrap() + 1;
        for &(v, _) in &adj[u] {
            if hops[v].is_none() {
                hops[v] = Some(next);
                queue.push_back(v);
            }
        }
    }
    hops
}

/// Node/edge counts, average degree, diameter and mean shortest path over
/// all unordered node pairs, by BFS from every node.
pub fn network_stats(g: &WeightedGraph) -> Result<NetworkStats> {
    let n = g.node_count();
    if n == 0 {
        return Err(Error::InvalidArgument("graph has no nodes".into()));
    }
    let adj = g.adjacency();
    let mut diameter = 0;
    let mut total: u64 = 0;
    for s in 0..n {
        for (t, h) in bfs_hops(&adj, s).into_iter().enumerate() {
            let h = h.ok_or(Error::Disconnected)?;
            if t > s {
                total += h as u64;
                diameter = diameter.max(h);
            }
        }
    }
    let pairs = n * (n - 1) / 2;
    Ok(NetworkStats {
        nodes: n,
        edges: g.edges().len(),
        average_degree: 2.0 * g.edges().len() as f64 / n as f64,
        diameter,
        average_shortest_path: if pairs == 0 {
            0.0
        } else {
            total as f64 / pairs as f64
        },
    })
}

pub fn is_connected(g: &WeightedGraph) -> bool {
    g.node_count() > 0 && bfs_hops(&g.adjacency(), 0).iter().all(Option::is_some)
}

/// True when the graph is a spanning tree: `n - 1` edges, no cycle, one
/// component.
pub fn is_spanning_tree(g: &WeightedGraph) -> bool {
    let n = g.node_count();
    if n == 0 || g.edges().len() + 1 != n {
        return false;
    }
    let mut uf = UnionFind::new(n);
    if !g.edges().iter().all(|e| uf.union(e.a, e.b)) {
        return false;
    }
    is_connected(g)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn names(n: usize) -> Vec<String> {
        (0..n)
            .map(|i| ((b'A' + i as u8) as char).to_string())
            .collect()
    }

    fn corr(n: usize, upper: &[(usize, usize, f64)]) -> CorrelationMatrix {
        let mut m = DMatrix::zeros(n, n);
        for &(i, j, v) in upper {
            m[(i, j)] = v;
        }
        CorrelationMatrix::from_upper(names(n), m).unwrap()
    }

    fn graph(n: usize, edges: &[(usize, usize)]) -> WeightedGraph {
        let edges = edges
            .iter()
            .map(|&(a, b)| Edge { a, b, weight: 1.0 })
            .collect();
        WeightedGraph::new(names(n), edges, WeightKind::Correlation).unwrap()
    }

    #[test]
    fn distance_examples() {
        assert_eq!(correlation_distance(1.0), 0.0);
        assert_eq!(correlation_distance(-1.0), 2.0);
        assert!((correlation_distance(0.0) - std::f64::consts::SQRT_2).abs() < 1e-15);
        let d = to_distance(&corr(3, &[(0, 1, 0.3), (0, 2, -0.4), (1, 2, 1.0)]));
        assert_eq!(d.d()[(1, 1)], 0.0);
        assert_eq!(d.d()[(0, 2)], d.d()[(2, 0)]);
        assert_eq!(d.d()[(1, 2)], 0.0);
    }

    #[test]
    fn three_node_tree_keeps_strong_links() {
        let c = corr(3, &[(0, 1, 0.9), (0, 2, 0.8), (1, 2, 0.1)]);
        let g = build_filtered_graph(&to_distance(&c), &c).unwrap();
        let got: Vec<_> = g.edges().iter().map(|e| (e.a, e.b, e.weight)).collect();
        assert_eq!(got, vec![(0, 1, 0.9), (0, 2, 0.8)]);
    }

    #[test]
    fn two_nodes_single_edge() {
        let c = corr(2, &[(0, 1, -0.2)]);
        let g = build_filtered_graph(&to_distance(&c), &c).unwrap();
        assert_eq!(g.edges().len(), 1);
        // Negative correlation is clamped to a small positive weight.
        assert_eq!(g.edges()[0].weight, MIN_EDGE_WEIGHT);
    }

    #[test]
    fn single_node_is_rejected() {
        let c = corr(1, &[]);
        assert!(build_filtered_graph(&to_distance(&c), &c).is_err());
    }

    #[test]
    fn ties_break_by_index() {
        // All distances equal: Kruskal accepts (0,1), (0,2), (0,3).
        let c = corr(
            4,
            &[
                (0, 1, 0.5),
                (0, 2, 0.5),
                (0, 3, 0.5),
                (1, 2, 0.5),
                (1, 3, 0.5),
                (2, 3, 0.5),
            ],
        );
        let g = build_filtered_graph(&to_distance(&c), &c).unwrap();
        let got: Vec<_> = g.edges().iter().map(|e| (e.a, e.b)).collect();
        assert_eq!(got, vec![(0, 1), (0, 2), (0, 3)]);
    }

    #[test]
    fn path_and_star_stats() {
        let s = network_stats(&graph(3, &[(0, 1), (1, 2)])).unwrap();
        assert_eq!(s.diameter, 2);
        assert!((s.average_shortest_path - 4.0 / 3.0).abs() < 1e-15);
        assert!((s.average_degree - 4.0 / 3.0).abs() < 1e-15);

        let s = network_stats(&graph(5, &[(0, 1), (0, 2), (0, 3), (0, 4)])).unwrap();
        assert_eq!(s.diameter, 2);
        assert!((s.average_degree - 8.0 / 5.0).abs() < 1e-15);
        assert_eq!(s.edges, 4);
    }

    #[test]
    fn disconnected_stats_fail() {
        let err = network_stats(&graph(4, &[(0, 1), (2, 3)])).unwrap_err();
        assert!(matches!(err, Error::Disconnected));
    }

    #[test]
    fn graph_validation() {
        let bad = |edges: Vec<Edge>| WeightedGraph::new(names(3), edges, WeightKind::Distance);
        assert!(bad(vec![Edge {
            a: 1,
            b: 1,
            weight: 1.0
        }])
        .is_err());
        assert!(bad(vec![
            Edge {
                a: 0,
                b: 1,
                weight: 1.0
            },
            Edge {
                a: 1,
                b: 0,
                weight: 2.0
            }
        ])
        .is_err());
        assert!(bad(vec![Edge {
            a: 0,
            b: 3,
            weight: 1.0
        }])
        .is_err());
        let g = bad(vec![Edge {
            a: 2,
            b: 0,
            weight: 1.0,
        }])
        .unwrap();
        assert_eq!((g.edges()[0].a, g.edges()[0].b), (0, 2));
    }

    #[test]
    fn spanning_tree_check() {
        assert!(is_spanning_tree(&graph(3, &[(0, 1), (1, 2)])));
        assert!(!is_spanning_tree(&graph(3, &[(0, 1)])));
        assert!(!is_spanning_tree(&graph(4, &[(0, 1), (1, 2), (0, 2)])));
    }

    #[test]
    fn edge_list_format() {
        let c = corr(3, &[(0, 1, 0.9), (0, 2, 0.8), (1, 2, 0.1)]);
        let g = build_filtered_graph(&to_distance(&c), &c).unwrap();
        let mut buf = Vec::new();
        g.write_edge_list(&mut buf, Some("provenance")).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text, "# provenance\nA\tB\t0.9\nA\tC\t0.8\n");
        let back =
            WeightedGraph::read_edge_list(text.as_bytes(), "mem", WeightKind::Correlation).unwrap();
        assert_eq!(back, g);
    }
}
