//! Approximate single-source SimRank with a hub index and variance-bounded
//! backward walks.

pub mod cli;
pub mod error;
pub mod eval;
pub mod experiment;
pub mod gen;
pub mod graph;
pub mod index;
pub mod pagerank;
pub mod query;
pub mod sampler;

pub use error::{Error, Result};
pub use graph::{Graph, LoadOptions, NodeId};
pub use index::{build_index, HubIndex, HubSelection};
pub use pagerank::{reverse_pagerank, PageRankVector};
pub use query::{single_source, single_source_index_free, QueryParams, QueryResult, ScoreVector};
pub use sampler::Rng;
