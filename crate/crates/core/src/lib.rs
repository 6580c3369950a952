//! Mixed-type Bayesian networks for sparse tabular data: structure and
//! parameter learning, analogue search, gap restoration and anomaly scoring.

pub mod dataset;
pub mod dot;
pub mod error;
pub mod evaluation;
pub mod graph;
pub mod inference;
pub mod model;
pub mod parameters;
pub mod similarity;
pub mod structure;
pub mod synth;

pub use dataset::{ColumnKind, ColumnSchema, Dataset, Schema, Value};
pub use error::{Error, Result};
pub use graph::{Dag, EdgeConstraints};
pub use model::BayesianNetworkModel;
pub use parameters::{mixlearn, LearnConfig};
