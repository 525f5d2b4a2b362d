//! Ramsey theory on complete binary trees.
//!
//! The crate is organised bottom-up:
//!
//! * [`tree`] addresses vertices by root-to-vertex bit paths and enumerates
//!   subtree embeddings.
//! * [`types`] computes closures and canonical subset types.
//! * [`coloring`] holds extensional and generator-backed colorings.
//! * [`pigeonhole`] finds monochromatic subtrees of vertex colorings.
//! * [`finders`] runs the constructive searches for pairs, chains and general
//!   m-subsets, next to an exhaustive oracle that certifies them.
//! * [`bounds`] does exact arithmetic on towers of twos.
//! * [`privacy`] simulates comparison-based learners and the interior-point
//!   reduction.

pub mod bounds;
pub mod coloring;
mod error;
pub mod finders;
pub mod pigeonhole;
pub mod privacy;
pub mod tree;
pub mod types;

pub use bounds::TowerValue;
pub use coloring::{Coloring, Scope};
pub use error::{Error, Result};
pub use finders::{FinderResult, Witness};

pub use tree::{HostTree, Relation, SubtreeEmbedding, VertexPath};
pub use types::{ChainType, SubsetType};

/// Version tag written into every JSON document the crate produces.
pub const SCHEMA_VERSION: u32 = 1;
