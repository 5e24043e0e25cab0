//! Tree Mover's Distance, linear-time tree norms and coreset selection for
//! attributed graph datasets.

pub mod cache;
pub mod cli;
pub mod error;
pub mod gnn;
pub mod graph;
pub mod io;
pub mod matching;
pub mod medoids;
pub mod nodes;
pub mod synthetic;
pub mod tmd;
pub mod treenorm;

pub use error::{Error, Result};
pub use graph::{Dataset, Graph};
pub use tmd::{tmd, DistanceMatrix, FeatureNorm, TmdConfig, WeightFn};
pub use treenorm::{tree_norm, TreeNormReport};
