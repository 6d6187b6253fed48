//! Second-order biased random walks (node2vec) over a weighted graph.
//!
//! A walk in state `(t -> v)` moves to neighbor `x` of `v` with probability
//! proportional to `w(v, x) * alpha(t, x)` where `alpha` is `1/p` when
//! `x == t`, `1` when `x` is adjacent to `t`, and `1/q` otherwise. The first
//! step from a start node is proportional to edge weight alone.

use std::collections::HashMap;
use std::io::{BufRead, Write};
use std::path::Path;

use rand::Rng;
use rayon::prelude::*;

use crate::corr_graph::WeightedGraph;
use crate::error::{Error, Result};
use crate::rng;
use crate::sampling::Discrete;
use crate::textio;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WalkParams {
    pub walks_per_node: usize,
    /// Number of nodes in every walk.
    pub walk_length: usize,
    /// Return parameter; larger values discourage stepping back.
    pub p: f64,
    /// In-out parameter; smaller values push the walk outward.
    pub q: f64,
    pub seed: u64,
}

impl Default for WalkParams {
    fn default() -> Self {
        Self {
            walks_per_node: 50,
            walk_length: 100,
            p: 2.0,
            q: 0.5,
            seed: 0,
        }
    }
}

impl WalkParams {
    pub fn validate(&self) -> Result<()> {
        if self.walks_per_node < 1 {
            return Err(Error::InvalidArgument("walks_per_node must be >= 1".into()));
        }
        if self.walk_length < 2 {
            return Err(Error::InvalidArgument("walk_length must be >= 2".into()));
        }
        if !(self.p > 0.0 && self.p.is_finite()) || !(self.q > 0.0 && self.q.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "p and q must be positive and finite (p={}, q={})",
                self.p, self.q
            )));
        }
        Ok(())
    }
}

/// Precomputed first- and second-order transition distributions.
///
/// Adjacency is stored in CSR form with neighbors sorted by index. The
/// second-order distribution for state `(t -> v)` lives at the CSR slot of
/// `v` in `t`'s neighbor list, so a walk can carry its slot forward without
/// lookups.
#[derive(Debug, Clone)]
pub struct TransitionModel {
    nodes: Vec<String>,
    offsets: Vec<usize>,
    neighbors: Vec<usize>,
    weights: Vec<f64>,
    first: Vec<Discrete>,
    second: Vec<Discrete>,
    p: f64,
    q: f64,
}

impl TransitionModel {
    pub fn nodes(&self) -> &[String] {
        &self.nodes
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn neighbors(&self, v: usize) -> &[usize] {
        &self.neighbors[self.offsets[v]..self.offsets[v + 1]]
    }

    fn neighbor_weights(&self, v: usize) -> &[f64] {
        &self.weights[self.offsets[v]..self.offsets[v + 1]]
    }

    fn slot(&self, t: usize, v: usize) -> Option<usize> {
        self.neighbors(t)
            .binary_search(&v)
            .ok()
            .map(|k| self.offsets[t] + k)
    }

    pub fn is_edge(&self, a: usize, b: usize) -> bool {
        self.slot(a, b).is_some()
    }

    /// Unnormalized masses `w(v, x) * alpha(t, x)` over the neighbors of `v`.
    pub fn second_order_masses(&self, t: usize, v: usize) -> Option<Vec<(usize, f64)>> {
        self.slot(t, v)?;
        Some(
            self.neighbors(v)
                .iter()
                .zip(self.neighbor_weights(v))
                .map(|(&x, &w)| (x, w * self.bias(t, x)))
                .collect(),
        )
    }

    fn bias(&self, t: usize, x: usize) -> f64 {
        if x == t {
            1.0 / self.p
        } else if self.is_edge(t, x) {
            1.0
        } else {
            1.0 / self.q
        }
    }

    /// Normalized probabilities of moving from state `(t -> v)` to each
    /// neighbor of `v`; `None` when `t-v` is not an edge.
    pub fn transition_probs(&self, t: usize, v: usize) -> Option<Vec<(usize, f64)>> {
        let slot = self.slot(t, v)?;
        Some(
            self.neighbors(v)
                .iter()
                .copied()
                .zip(self.second[slot].probs().iter().copied())
                .collect(),
        )
    }

    pub fn first_step_probs(&self, v: usize) -> Vec<(usize, f64)> {
        self.neighbors(v)
            .iter()
            .copied()
            .zip(self.first[v].probs().iter().copied())
            .collect()
    }

    /// Draws the next node from state `(t -> v)`.
    pub fn sample_next<R: Rng + ?Sized>(&self, t: usize, v: usize, rng: &mut R) -> Option<usize> {
        let slot = self.slot(t, v)?;
        Some(self.neighbors(v)[self.second[slot].sample(rng)])
    }

    fn walk<R: Rng + ?Sized>(&self, start: usize, length: usize, rng: &mut R) -> Vec<u32> {
        let mut walk = Vec::with_capacity(length);
        walk.push(start as u32);
        let k = self.first[start].sample(rng);
        let mut slot = self.offsets[start] + k;
        let mut cur = self.neighbors[slot];
        walk.push(cur as u32);
        while walk.len() < length {
            let j = self.second[slot].sample(rng);
            slot = self.offsets[cur] + j;
            cur = self.neighbors[slot];
            walk.push(cur as u32);
        }
        walk
    }
}

/// Builds every transition distribution. The graph must be connected with
/// at least two nodes and strictly positive weights.
pub fn precompute_transitions(g: &WeightedGraph, params: &WalkParams) -> Result<TransitionModel> {
    params.validate()?;
    let n = g.node_count();
    if n < 2 {
        return Err(Error::InvalidArgument(format!(
            "walks need at least 2 nodes, got {n}"
        )));
    }
    if let Some(e) = g
        .edges()
        .iter()
        .find(|e| e.weight.is_nan() || e.weight <= 0.0)
    {
        return Err(Error::InvalidData(format!(
            "edge {}-{} has non-positive weight {}",
            g.nodes()[e.a],
            g.nodes()[e.b],
            e.weight
        )));
    }
    if !crate::corr_graph::is_connected(g) {
        return Err(Error::Disconnected);
    }

    let adj = g.adjacency();
    let mut offsets = Vec::with_capacity(n + 1);
    let mut neighbors = Vec::new();
    let mut weights = Vec::new();
    offsets.push(0);
    for list in &adj {
        neighbors.extend(list.iter().map(|&(v, _)| v));
        weights.extend(list.iter().map(|&(_, w)| w));
        offsets.push(neighbors.len());
    }

    let mut model = TransitionModel {
        nodes: g.nodes().to_vec(),
        offsets,
        neighbors,
        weights,
        first: Vec::with_capacity(n),
        second: Vec::new(),
        p: params.p,
        q: params.q,
    };
    model.first = (0..n)
        .map(|v| Discrete::from_masses(model.neighbor_weights(v)))
        .collect::<Result<_>>()?;
    let mut second = Vec::with_capacity(model.neighbors.len());
    for t in 0..n {
        for &v in model.neighbors(t) {
            let masses: Vec<f64> = model
                .second_order_masses(t, v)
                .expect("v is a neighbor of t")
                .into_iter()
                .map(|(_, m)| m)
                .collect();
            second.push(Discrete::from_masses(&masses)?);
        }
    }
    model.second = second;
    Ok(model)
}

/// Walks as indices into a shared node-name table.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WalkCorpus {
    names: Vec<String>,
    walks: Vec<Vec<u32>>,
}

impl WalkCorpus {
    pub fn new(names: Vec<String>, walks: Vec<Vec<u32>>) -> Result<Self> {
        if let Some(bad) = walks.iter().flatten().find(|&&i| i as usize >= names.len()) {
            return Err(Error::InvalidData(format!(
                "walk token {bad} outside name table of {}",
                names.len()
            )));
        }
        Ok(Self { names, walks })
    }

    /// Builds a corpus from walks of identifiers; name-table order is order
    /// of first appearance.
    pub fn from_tokens<S: AsRef<str>>(walks: &[Vec<S>]) -> Self {
        let mut names = Vec::new();
        let mut index: HashMap<String, u32> = HashMap::new();
        let walks = walks
            .iter()
            .map(|w| {
                w.iter()
                    .map(|tok| {
                        let tok = tok.as_ref();
                        *index.entry(tok.to_string()).or_insert_with(|| {
                            names.push(tok.to_string());
                            (names.len() - 1) as u32
                        })
                    })
                    .collect()
            })
            .collect();
        Self { names, walks }
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn walks(&self) -> &[Vec<u32>] {
        &self.walks
    }

    pub fn len(&self) -> usize {
        self.walks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.walks.is_empty()
    }

    pub fn token_count(&self) -> usize {
        self.walks.iter().map(Vec::len).sum()
    }

    pub fn walk_tokens(&self, i: usize) -> impl Iterator<Item = &str> {
        self.walks[i]
            .iter()
            .map(|&t| self.names[t as usize].as_str())
    }

    /// One walk per line, identifiers separated by single spaces.
    pub fn write<W: Write>(&self, mut out: W, header: Option<&str>) -> std::io::Result<()> {
        textio::write_header(&mut out, header)?;
        for walk in &self.walks {
            let mut first = true;
            for &t in walk {
                if !first {
                    out.write_all(b" ")?;
                }
                out.write_all(self.names[t as usize].as_bytes())?;
                first = false;
            }
            out.write_all(b"\n")?;
        }
        out.flush()
    }

    pub fn save(&self, path: &Path, header: Option<&str>) -> Result<()> {
        let out = textio::create(path)?;
        self.write(out, header).map_err(|e| Error::io(path, e))
    }

    pub fn read<R: BufRead>(reader: R, source: &str) -> Result<Self> {
        let mut walks: Vec<Vec<String>> = Vec::new();
        for item in textio::content_lines(reader, source) {
            let (_, line) = item?;
            walks.push(line.split_whitespace().map(str::to_string).collect());
        }
        Ok(Self::from_tokens(&walks))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let reader = textio::open(path)?;
        Self::read(reader, &path.display().to_string())
    }
}

/// Generates `walks_per_node` walks of `walk_length` nodes from every node.
///
/// Each walk draws from its own stream seeded by `(seed, start, index)`, so
/// the corpus is identical however the work is scheduled. Output order is
/// by start node, then walk index.
pub fn generate_walks(model: &TransitionModel, params: &WalkParams) -> Result<WalkCorpus> {
    params.validate()?;
    let n = model.node_count();
    let r = params.walks_per_node;
    let walks: Vec<Vec<u32>> = (0..n * r)
        .into_par_iter()
        .map(|k| {
            let (start, index) = (k / r, k % r);
            let mut rng = rng::stream(params.seed, &[start as u64, index as u64]);
            model.walk(start, params.walk_length, &mut rng)
        })
        .collect();
    WalkCorpus::new(model.nodes.clone(), walks)
}

/// A center token and the tokens inside its window.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ContextTarget {
    /// Preceding tokens then following tokens, in walk order.
    pub context: Vec<u32>,
    pub target: u32,
}

/// Context of `walk[pos]` with a symmetric window of `w` tokens each side.
pub fn context_window(walk: &[u32], pos: usize, w: usize) -> impl Iterator<Item = u32> + '_ {
    let lo = pos.saturating_sub(w);
    let hi = (pos + w + 1).min(walk.len());
    walk[lo..pos].iter().chain(&walk[pos + 1..hi]).copied()
}

/// One record per token position of every walk.
pub fn extract_context_target(corpus: &WalkCorpus, w: usize) -> Result<Vec<ContextTarget>> {
    if w < 1 {
        return Err(Error::InvalidArgument("window must be >= 1".into()));
    }
    Ok(corpus
        .walks
        .iter()
        .flat_map(|walk| {
            (0..walk.len()).map(move |pos| ContextTarget {
                context: context_window(walk, pos, w).collect(),
                target: walk[pos],
            })
        })
        .collect())
}

/// Writes `context<TAB>target` rows with comma-joined context identifiers.
pub fn write_context_targets<W: Write>(
    corpus: &WalkCorpus,
    records: &[ContextTarget],
    mut out: W,
) -> std::io::Result<()> {
    writeln!(out, "context\ttarget")?;
    for rec in records {
        let ctx: Vec<&str> = rec
            .context
            .iter()
            .map(|&t| corpus.names[t as usize].as_str())
            .collect();
        writeln!(
            out,
            "{}\t{}",
            ctx.join(","),
            corpus.names[rec.target as usize]
        )?;
    }
    out.flush()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corr_graph::{Edge, WeightKind};

    fn graph(n: usize, edges: &[(usize, usize, f64)]) -> WeightedGraph {
        let names = (0..n)
            .map(|i| ((b'A' + i as u8) as char).to_string())
            .collect();
        let edges = edges
            .iter()
            .map(|&(a, b, weight)| Edge { a, b, weight })
            .collect();
        WeightedGraph::new(names, edges, WeightKind::Correlation).unwrap()
    }

    fn params(p: f64, q: f64) -> WalkParams {
        WalkParams {
            walks_per_node: 3,
            walk_length: 6,
            p,
            q,
            seed: 9,
        }
    }

    fn prob_of(probs: &[(usize, f64)], x: usize) -> f64 {
        probs.iter().find(|&&(v, _)| v == x).unwrap().1
    }

    #[test]
    fn unbiased_path() {
        let g = graph(3, &[(0, 1, 1.0), (1, 2, 1.0)]);
        let m = precompute_transitions(&g, &params(1.0, 1.0)).unwrap();
        let probs = m.transition_probs(0, 1).unwrap();
        assert_eq!(prob_of(&probs, 0), 0.5);
        assert_eq!(prob_of(&probs, 2), 0.5);
    }

    #[test]
    fn biased_path() {
        let g = graph(3, &[(0, 1, 1.0), (1, 2, 1.0)]);
        let m = precompute_transitions(&g, &params(2.0, 0.5)).unwrap();
        let probs = m.transition_probs(0, 1).unwrap();
        assert!((prob_of(&probs, 0) - 0.2).abs() < 1e-12);
        assert!((prob_of(&probs, 2) - 0.8).abs() < 1e-12);
    }

    #[test]
    fn star_return_probability() {
        let g = graph(4, &[(0, 1, 1.0), (0, 2, 1.0), (0, 3, 1.0)]);
        let m = precompute_transitions(&g, &params(4.0, 1.0)).unwrap();
        let probs = m.transition_probs(1, 0).unwrap();
        assert!((prob_of(&probs, 1) - 1.0 / 9.0).abs() < 1e-12);
    }

    #[test]
    fn triangle_uses_unit_bias() {
        let g = graph(3, &[(0, 1, 1.0), (1, 2, 1.0), (0, 2, 1.0)]);
        let m = precompute_transitions(&g, &params(2.0, 0.5)).unwrap();
        let masses = m.second_order_masses(0, 1).unwrap();
        assert_eq!(masses, vec![(0, 0.5), (2, 1.0)]);
    }

    #[test]
    fn first_step_follows_weights() {
        let g = graph(3, &[(0, 1, 1.0), (0, 2, 3.0)]);
        let m = precompute_transitions(&g, &params(1.0, 1.0)).unwrap();
        assert_eq!(m.first_step_probs(0), vec![(1, 0.25), (2, 0.75)]);
    }

    #[test]
    fn rejects_bad_inputs() {
        let g = graph(3, &[(0, 1, 1.0), (1, 2, 0.0)]);
        assert!(precompute_transitions(&g, &params(1.0, 1.0)).is_err());
        let g = graph(4, &[(0, 1, 1.0), (2, 3, 1.0)]);
        assert!(matches!(
            precompute_transitions(&g, &params(1.0, 1.0)),
            Err(Error::Disconnected)
        ));
        let g = graph(2, &[(0, 1, 1.0)]);
        assert!(precompute_transitions(&g, &params(0.0, 1.0)).is_err());
        let mut short = params(1.0, 1.0);
        short.walk_length = 1;
        assert!(precompute_transitions(&g, &short).is_err());
    }

    #[test]
    fn two_node_walks_alternate() {
        let g = graph(2, &[(0, 1, 0.7)]);
        let mut p = params(2.0, 0.5);
        p.walk_length = 4;
        let m = precompute_transitions(&g, &p).unwrap();
        let corpus = generate_walks(&m, &p).unwrap();
        assert_eq!(corpus.len(), 6);
        for walk in corpus.walks() {
            let expected: Vec<u32> = (0..4).map(|i| (walk[0] + i) % 2).collect();
            assert_eq!(walk, &expected);
        }
    }

    #[test]
    fn corpus_is_seed_deterministic() {
        let g = graph(5, &[(0, 1, 0.9), (1, 2, 0.5), (1, 3, 0.7), (3, 4, 0.2)]);
        let p = params(2.0, 0.5);
        let m = precompute_transitions(&g, &p).unwrap();
        let a = generate_walks(&m, &p).unwrap();
        let b = generate_walks(&m, &p).unwrap();
        let (mut ba, mut bb) = (Vec::new(), Vec::new());
        a.write(&mut ba, None).unwrap();
        b.write(&mut bb, None).unwrap();
        assert_eq!(ba, bb);
        let other = generate_walks(&m, &WalkParams { seed: 10, ..p }).unwrap();
        assert_ne!(a, other);
    }

    #[test]
    fn context_target_records() {
        let corpus = WalkCorpus::from_tokens(&[vec!["A", "B", "C"]]);
        let recs = extract_context_target(&corpus, 1).unwrap();
        assert_eq!(
            recs,
            vec![
                ContextTarget {
                    context: vec![1],
                    target: 0
                },
                ContextTarget {
                    context: vec![0, 2],
                    target: 1
                },
                ContextTarget {
                    context: vec![1],
                    target: 2
                },
            ]
        );
        let corpus = WalkCorpus::from_tokens(&[vec!["A", "B", "C", "D", "E"]]);
        let recs = extract_context_target(&corpus, 2).unwrap();
        assert_eq!(recs[2].context, vec![0, 1, 3, 4]);
        assert!(extract_context_target(&corpus, 0).is_err());

        let mut buf = Vec::new();
        write_context_targets(&corpus, &recs[2..3], &mut buf).unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            "context\ttarget\nA,B,D,E\tC\n"
        );
    }

    #[test]
    fn corpus_file_roundtrip() {
        let corpus = WalkCorpus::from_tokens(&[vec!["X", "Y", "X"], vec!["Y", "Z", "Y"]]);
        let mut buf = Vec::new();
        corpus.write(&mut buf, Some("v1")).unwrap();
        assert_eq!(
            String::from_utf8(buf.clone()).unwrap(),
            "# v1\nX Y X\nY Z Y\n"
        );
        assert_eq!(WalkCorpus::read(&buf[..], "mem").unwrap(), corpus);
    }
}
