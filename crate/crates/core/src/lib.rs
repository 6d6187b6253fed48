//! Learn low-dimensional embeddings of assets from their return-correlation
//! network.
//!
//! The pipeline runs in five stages, each in its own module:
//!
//! 1. [`market_data`]: load adjusted-close prices, compute log returns and
//!    the Pearson correlation matrix.
//! 2. [`corr_graph`]: map correlations to distances `d = sqrt(2 (1 - rho))`,
//!    keep the minimum spanning tree and re-weight its edges with correlations.
//! 3. [`walk_gen`]: sample second-order biased (node2vec) random walks.
//! 4. [`sgns`]: train skip-gram / CBOW embeddings with negative sampling.
//! 5. [`cluster_eval`] and [`query`]: score embeddings against a label
//!    taxonomy with K-means + V-measure, and answer similarity, analogy and
//!    odd-one-out queries.
//!
//! [`pipeline`] ties the stages together behind a serializable configuration.

pub mod cluster_eval;
pub mod corr_graph;
pub mod embedding;
pub mod error;
pub mod market_data;
pub mod pipeline;
pub mod query;
pub mod rng;
pub mod sampling;
pub mod sgns;
pub mod synthetic;
pub mod textio;
pub mod walk_gen;

pub use error::{Error, Result};
