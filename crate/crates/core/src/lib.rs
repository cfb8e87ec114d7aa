//! Hierarchical clustering from ordinal comparisons.
//!
//! Items are never observed directly. Algorithms only see answers to
//! questions of the form "is pair `(i,j)` more similar than pair `(k,l)`?",
//! either queried on demand ([`oracle::ActiveOracle`]) or sampled up front
//! ([`oracle::QuadrupletSet`]). From these the crate builds dendrograms with
//! single and complete linkage, average linkage on quadruplet kernels, and a
//! quadruplet-native average linkage (4-AL), and scores them against planted
//! hierarchies or cosine similarities.

pub mod dendrogram;
pub mod engine;
pub mod error;
pub mod eval;
pub mod four_al;
pub mod harness;
pub mod io;
pub mod kernel;
pub mod oracle;
pub mod ordinal;
pub mod pairs;
pub mod planted;
pub mod plot;

pub use dendrogram::{Dendrogram, Merge};
pub use engine::{Linkage, LinkageStrategy, Partition};
pub use error::{Error, Result};
pub use oracle::{ActiveOracle, Quadruplet, QuadrupletSet};
pub use pairs::PairId;
pub use planted::{GroundTruthHierarchy, PlantedConfig, SimilarityMatrix};
