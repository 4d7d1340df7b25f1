//! Document clustering on named-entity features.
//!
//! Documents annotated with named entities are represented by four tf.idf
//! vectors (entity names, types, name-type pairs, identifiers), clustered
//! top-down with seeded spherical k-means, labeled by their most significant
//! feature values, and scored by cluster/class entropy.

pub mod cli;
pub mod corpus;
pub mod error;
pub mod eval;
pub mod hierarchy;
pub mod kb;
pub mod kmeans;
pub mod report;
pub mod synth;
pub mod vsm;

pub use corpus::{Annotation, Corpus, Document};
pub use error::{Error, Result};
pub use eval::{doc_label, entropies, tune_k, DocLabel, EntropyReport, TuneOptions};
pub use hierarchy::{hierarchical_cluster, ClusterConfig, ClusterNode, Hierarchy, KChoice, PhaseSpec};
pub use kb::KnowledgeBase;
pub use kmeans::{kmeans, kmeans_best_of, Assignment};
pub use vsm::{cosine, FeatureSpace, SparseVector, Term, TermIndex};
