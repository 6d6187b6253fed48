//! End-to-end orchestration behind the command-line subcommands.
//!
//! Every artifact starts with a `# <tool> <version> config=<digest>` line.
//! All randomness flows from the master seed through [`rng::derive_seed`]:
//! stream `WALK_STREAM` seeds the walks, `TRAIN_STREAM` the trainer and
//! `EVAL_STREAM` the K-means restarts.

mod config;
mod sweep;

use std::io::Write;
use std::path::{Path, PathBuf};

pub use config::{PipelineConfig, SweepGrid};
pub use sweep::{cmd_sweep, GridPoint, SweepResult, SweepRow};

use crate::cluster_eval::{evaluate_embedding, EvalReport, LabelTable};
use crate::corr_graph::{
    build_filtered_graph, network_stats, to_distance, NetworkStats, WeightKind, WeightedGraph,
};
use crate::embedding::EmbeddingMatrix;
use crate::error::{Error, Result};
use crate::market_data::{compute_correlation, compute_log_returns, load_price_panel, PricePanel};
use crate::query;
use crate::rng;
use crate::sgns::{train, TrainConfig};
use crate::walk_gen::{generate_walks, precompute_transitions, WalkCorpus, WalkParams};

pub const WALK_STREAM: u64 = 0;
pub const TRAIN_STREAM: u64 = 1;
pub const EVAL_STREAM: u64 = 2;

pub const GRAPH_FILE: &str = "graph.tsv";
pub const STATS_FILE: &str = "stats.csv";
pub const CORPUS_FILE: &str = "corpus.txt";
pub const EMBEDDING_FILE: &str = "embedding.txt";
pub const EVAL_FILE: &str = "eval.csv";
pub const SWEEP_FILE: &str = "sweep.csv";

/// Seeds for the three random stages of one pipeline run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StageSeeds {
    pub walk: u64,
    pub train: u64,
    pub eval: u64,
}

impl StageSeeds {
    pub fn from_master(seed: u64) -> Self {
        Self {
            walk: rng::derive_seed(seed, &[WALK_STREAM]),
            train: rng::derive_seed(seed, &[TRAIN_STREAM]),
            eval: rng::derive_seed(seed, &[EVAL_STREAM]),
        }
    }
}

/// Returns, correlation, distance and MST filtering in one step.
pub fn graph_from_panel(panel: &PricePanel) -> Result<WeightedGraph> {
    let corr = compute_correlation(&compute_log_returns(panel))?;
    build_filtered_graph(&to_distance(&corr), &corr)
}

pub fn walk_corpus(graph: &WeightedGraph, params: &WalkParams) -> Result<WalkCorpus> {
    let model = precompute_transitions(graph, params)?;
    generate_walks(&model, params)
}

/// Walks plus training on an in-memory graph.
pub fn embed_graph(
    graph: &WeightedGraph,
    walk: &WalkParams,
    train_config: &TrainConfig,
) -> Result<(WalkCorpus, EmbeddingMatrix)> {
    let corpus = walk_corpus(graph, walk)?;
    let emb = train(&corpus, train_config)?;
    Ok((corpus, emb))
}

fn with_context<T>(path: &Path, r: Result<T>) -> Result<T> {
    r.map_err(|e| match e {
        e @ (Error::Io { .. } | Error::Parse { .. }) => e,
        other => Error::InvalidData(format!("{}: {other}", path.display())),
    })
}

fn required<'a>(p: &'a Option<PathBuf>, key: &str) -> Result<&'a Path> {
    p.as_deref()
        .ok_or_else(|| Error::InvalidArgument(format!("missing required setting '{key}'")))
}

fn load_graph(cfg: &PipelineConfig) -> Result<WeightedGraph> {
    if let Some(g) = &cfg.graph {
        return WeightedGraph::load_edge_list(g, WeightKind::Correlation);
    }
    let prices = required(&cfg.prices, "paths.prices")?;
    let panel = load_price_panel(prices)?;
    with_context(prices, graph_from_panel(&panel))
}

fn save_with<F>(path: &Path, write: F) -> Result<()>
where
    F: FnOnce(&mut dyn Write) -> std::io::Result<()>,
{
    let mut out = crate::textio::create(path)?;
    write(&mut out).map_err(|e| Error::io(path, e))
}

#[derive(Debug, Clone)]
pub struct GraphArtifacts {
    pub graph: WeightedGraph,
    pub stats: NetworkStats,
    pub graph_path: PathBuf,
    pub stats_path: PathBuf,
}

/// Prices to filtered graph: writes `graph.tsv` and `stats.csv`.
pub fn cmd_graph(cfg: &PipelineConfig) -> Result<GraphArtifacts> {
    let prices = required(&cfg.prices, "paths.prices")?;
    let panel = load_price_panel(prices)?;
    let graph = with_context(prices, graph_from_panel(&panel))?;
    let stats = network_stats(&graph)?;
    let header = cfg.provenance();
    let graph_path = cfg.out.join(GRAPH_FILE);
    let stats_path = cfg.out.join(STATS_FILE);
    graph.save_edge_list(&graph_path, Some(&header))?;
    save_with(&stats_path, |w| stats.write_csv(w, Some(&header)))?;
    Ok(GraphArtifacts {
        graph,
        stats,
        graph_path,
        stats_path,
    })
}

/// Network statistics of `paths.graph`, or of the graph built from prices.
pub fn cmd_stats(cfg: &PipelineConfig) -> Result<NetworkStats> {
    network_stats(&load_graph(cfg)?)
}

fn walk_params(cfg: &PipelineConfig, seeds: StageSeeds) -> WalkParams {
    WalkParams {
        seed: seeds.walk,
        ..cfg.walk
    }
}

fn train_config(cfg: &PipelineConfig, seeds: StageSeeds) -> TrainConfig {
    TrainConfig {
        seed: seeds.train,
        ..cfg.train
    }
}

/// Graph to walk corpus: writes `corpus.txt`.
pub fn cmd_walks(cfg: &PipelineConfig) -> Result<(WalkCorpus, PathBuf)> {
    cfg.validate()?;
    let graph = load_graph(cfg)?;
    let seeds = StageSeeds::from_master(cfg.seed);
    let corpus = walk_corpus(&graph, &walk_params(cfg, seeds))?;
    let path = cfg.out.join(CORPUS_FILE);
    corpus.save(&path, Some(&cfg.provenance()))?;
    Ok((corpus, path))
}

#[derive(Debug, Clone)]
pub struct TrainArtifacts {
    pub corpus: WalkCorpus,
    pub embedding: EmbeddingMatrix,
    /// `None` when the corpus was read from `paths.corpus`.
    pub corpus_path: Option<PathBuf>,
    pub embedding_path: PathBuf,
}

/// Corpus (from `paths.corpus`, or freshly walked) to embedding: writes
/// `corpus.txt` when walks were generated, and `embedding.txt`.
pub fn cmd_train(cfg: &PipelineConfig) -> Result<TrainArtifacts> {
    cfg.validate()?;
    let seeds = StageSeeds::from_master(cfg.seed);
    let header = cfg.provenance();
    let (corpus, corpus_path) = match &cfg.corpus {
        Some(path) => (WalkCorpus::load(path)?, None),
        None => {
            let graph = load_graph(cfg)?;
            let corpus = walk_corpus(&graph, &walk_params(cfg, seeds))?;
            let path = cfg.out.join(CORPUS_FILE);
            corpus.save(&path, Some(&header))?;
            (corpus, Some(path))
        }
    };
    let embedding = train(&corpus, &train_config(cfg, seeds))?;
    let embedding_path = cfg.out.join(EMBEDDING_FILE);
    embedding.save(&embedding_path, Some(&header))?;
    Ok(TrainArtifacts {
        corpus,
        embedding,
        corpus_path,
        embedding_path,
    })
}

/// Embedding + labels to `eval.csv`.
pub fn cmd_eval(cfg: &PipelineConfig) -> Result<(EvalReport, PathBuf)> {
    cfg.validate()?;
    let emb_path = match &cfg.embedding {
        Some(p) => p.clone(),
        None => cfg.out.join(EMBEDDING_FILE),
    };
    let emb = EmbeddingMatrix::load(&emb_path)?;
    let labels = LabelTable::load(required(&cfg.labels, "paths.labels")?)?;
    let seeds = StageSeeds::from_master(cfg.seed);
    let report = evaluate_embedding(&emb, &labels, cfg.restarts, seeds.eval)?;
    let path = cfg.out.join(EVAL_FILE);
    save_with(&path, |w| report.write_csv(w, Some(&cfg.provenance())))?;
    Ok((report, path))
}

/// A parsed `query` subcommand.
#[derive(Debug, Clone, PartialEq)]
pub enum Query {
    Similar {
        ticker: String,
        k: usize,
    },
    Analogy {
        a: String,
        b: String,
        c: String,
        k: usize,
    },
    OddOneOut {
        tickers: Vec<String>,
    },
    BestMatch {
        query: String,
        candidates: Vec<String>,
    },
    Pca {
        components: usize,
    },
}

impl Query {
    /// Parses `similar T k`, `analogy A B C k`, `oddone T1 T2 T3 ...`,
    /// `match Q C1 C2 ...` or `pca [components]`.
    pub fn parse(words: &[String]) -> Result<Self> {
        let bad = |m: &str| Error::InvalidArgument(m.to_string());
        let (head, rest) = words.split_first().ok_or_else(|| bad("empty query"))?;
        let num = |s: &String| -> Result<usize> {
            s.parse()
                .map_err(|_| Error::InvalidArgument(format!("expected a count, found '{s}'")))
        };
        match (head.as_str(), rest) {
            ("similar", [t]) => Ok(Query::Similar { ticker: t.clone(), k: 10 }),
            ("similar", [t, k]) => Ok(Query::Similar { ticker: t.clone(), k: num(k)? }),
            ("analogy", [a, b, c]) => Ok(Query::Analogy { a: a.clone(), b: b.clone(), c: c.clone(), k: 1 }),
            ("analogy", [a, b, c, k]) => Ok(Query::Analogy {
                a: a.clone(),
                b: b.clone(),
                c: c.clone(),
                k: num(k)?,
            }),
            ("oddone", ts) if ts.len() >= 3 => Ok(Query::OddOneOut { tickers: ts.to_vec() }),
            ("match", [q, cs @ ..]) if !cs.is_empty() => Ok(Query::BestMatch {
                query: q.clone(),
                candidates: cs.to_vec(),
            }),
            ("pca", []) => Ok(Query::Pca { components: 3 }),
            ("pca", [c]) => Ok(Query::Pca { components: num(c)? }),
            _ => Err(bad(
                "usage: similar T [k] | analogy A B C [k] | oddone T1 T2 T3 ... | match Q C1 [C2 ...] | pca [n]",
            )),
        }
    }
}

/// Runs a query and writes its CSV result. `pca` without an explicit
/// count uses `min(3, dim)` components.
pub fn run_query<W: Write>(
    emb: &EmbeddingMatrix,
    q: &Query,
    machine: bool,
    mut out: W,
) -> Result<()> {
    let io = |e| Error::io("<stdout>", e);
    let fmt = |s: f64| {
        if machine {
            crate::textio::fmt9(s)
        } else {
            format!("{s:.3}")
        }
    };
    match q {
        Query::Similar { ticker, k } => query::most_similar(emb, ticker, *k)?
            .write_csv(out, machine)
            .map_err(io),
        Query::Analogy { a, b, c, k } => query::analogy(emb, a, b, c, *k)?
            .write_csv(out, machine)
            .map_err(io),
        Query::OddOneOut { tickers } => {
            let refs: Vec<&str> = tickers.iter().map(String::as_str).collect();
            let odd = query::odd_one_out(emb, &refs)?;
            writeln!(out, "ticker\n{odd}").map_err(io)
        }
        Query::BestMatch {
            query: qt,
            candidates,
        } => {
            let refs: Vec<&str> = candidates.iter().map(String::as_str).collect();
            let (t, s) = query::best_match_from_set(emb, qt, &refs)?;
            writeln!(out, "ticker,score\n{t},{}", fmt(s)).map_err(io)
        }
        Query::Pca { components } => {
            let c = (*components).min(emb.dim());
            query::pca_project(emb, c)?.write_csv(out, None).map_err(io)
        }
    }
}
