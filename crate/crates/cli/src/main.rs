//! `corrnet`: correlation-network asset embeddings from the command line.

use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use corrnet_embed::embedding::EmbeddingMatrix;
use corrnet_embed::pipeline::{self, PipelineConfig, Query};
use corrnet_embed::Error;

#[derive(Parser, Debug)]
#[command(
    name = "corrnet",
    version,
    about = "Embed assets from a price-correlation network"
)]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct Global {
    /// Key/value config file (`section.key = value` lines).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Master seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads; 1 runs everything on a single thread.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Override any config key, e.g. `--set walk.p=2`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE", global = true)]
    overrides: Vec<String>,
    #[arg(long, global = true)]
    prices: Option<PathBuf>,
    #[arg(long, global = true)]
    labels: Option<PathBuf>,
    /// Filtered edge list to use instead of building one from prices.
    #[arg(long, global = true)]
    graph: Option<PathBuf>,
    /// Walk corpus to train on instead of generating walks.
    #[arg(long, global = true)]
    corpus: Option<PathBuf>,
    #[arg(long, global = true)]
    embedding: Option<PathBuf>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Build the MST-filtered graph and its statistics.
    Graph,
    /// Generate the random-walk corpus.
    Walks,
    /// Generate walks (unless --corpus is given) and train embeddings.
    Train,
    /// Cluster the embedding and score it against the labels.
    Eval,
    /// Train and evaluate every point of the sweep grid.
    Sweep,
    /// Query an embedding: similar T [k] | analogy A B C [k] |
    /// oddone T1 T2 T3 ... | match Q C1 [C2 ...] | pca [n].
    Query {
        /// Full-precision scores.
        #[arg(long)]
        machine: bool,
        #[arg(required = true, num_args = 1..)]
        words: Vec<String>,
    },
    /// Print network statistics of a graph.
    Stats,
}

fn config(g: &Global) -> corrnet_embed::Result<PipelineConfig> {
    let mut cfg = match &g.config {
        Some(path) => PipelineConfig::load(path)?,
        None => PipelineConfig::default(),
    };
    for kv in &g.overrides {
        cfg.apply_override(kv)?;
    }
    if let Some(seed) = g.seed {
        cfg.seed = seed;
    }
    if let Some(out) = &g.out {
        cfg.out = out.clone();
    }
    let paths = [
        (&g.prices, &mut cfg.prices),
        (&g.labels, &mut cfg.labels),
        (&g.graph, &mut cfg.graph),
        (&g.corpus, &mut cfg.corpus),
        (&g.embedding, &mut cfg.embedding),
    ];
    for (flag, slot) in paths {
        if flag.is_some() {
            *slot = flag.clone();
        }
    }
    cfg.validate()?;
    Ok(cfg)
}

fn run(cli: Cli) -> corrnet_embed::Result<()> {
    if let Some(n) = cli.global.threads {
        if n == 0 {
            return Err(Error::InvalidArgument(
                "--threads must be at least 1".into(),
            ));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Error::InvalidArgument(format!("thread pool: {e}")))?;
    }
    let cfg = config(&cli.global)?;
    let stdout = std::io::stdout();
    let mut out = stdout.lock();
    let io = |e| Error::io("<stdout>", e);
    match cli.command {
        Command::Graph => {
            let a = pipeline::cmd_graph(&cfg)?;
            log::info!(
                "wrote {} and {}",
                a.graph_path.display(),
                a.stats_path.display()
            );
            a.stats.write_csv(&mut out, None).map_err(io)?;
        }
        Command::Walks => {
            let (corpus, path) = pipeline::cmd_walks(&cfg)?;
            log::info!("wrote {} walks to {}", corpus.len(), path.display());
        }
        Command::Train => {
            let a = pipeline::cmd_train(&cfg)?;
            log::info!(
                "trained {} x {} embedding from {} walks -> {}",
                a.embedding.len(),
                a.embedding.dim(),
                a.corpus.len(),
                a.embedding_path.display()
            );
        }
        Command::Eval => {
            let (report, path) = pipeline::cmd_eval(&cfg)?;
            log::info!("wrote {}", path.display());
            report.write_csv(&mut out, None).map_err(io)?;
        }
        Command::Sweep => {
            let (result, path) = pipeline::cmd_sweep(&cfg)?;
            log::info!("{} grid points -> {}", result.rows.len(), path.display());
            result.write_csv(&mut out, None).map_err(io)?;
        }
        Command::Query { machine, words } => {
            let q = Query::parse(&words)?;
            let path = cfg
                .embedding
                .clone()
                .unwrap_or_else(|| cfg.out.join(pipeline::EMBEDDING_FILE));
            let emb = EmbeddingMatrix::load(&path)?;
            pipeline::run_query(&emb, &q, machine, &mut out)?;
        }
        Command::Stats => {
            let stats = pipeline::cmd_stats(&cfg)?;
            stats.write_csv(&mut out, None).map_err(io)?;
        }
    }
    out.flush().map_err(io)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let msg = e.to_string().replace('\n', " ");
            eprintln!("error: {}: {msg}", e.kind());
            ExitCode::FAILURE
        }
    }
}
