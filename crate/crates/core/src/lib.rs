//! Concept recognition over a hierarchical semantic index.
//!
//! Concepts are clustered into a label tree whose root-to-leaf paths become
//! short digit identifiers. A scorer then emits those identifiers under a
//! trie grammar that only permits valid ones, and the decoded concept sets are
//! scored against gold annotations. An exact nearest-neighbour search serves
//! as the baseline.

pub mod augment;
pub mod codec;
pub mod config;
pub mod decoder;
pub mod embedding;
pub mod error;
pub mod eval;
pub mod indexer;
pub mod jsonl;
pub mod knn;
pub mod ontology;
pub mod ssid;

pub use augment::{emit_training_pairs, match_claims};
pub use codec::{parse_sequence, SsidVocabulary, Token};
pub use decoder::{constrained_beam_search, BeamConfig, Scorer};
pub use embedding::EmbeddingMatrix;
pub use error::{Error, Result};
pub use eval::{evaluate_run, micro_prf, EvalReport};
pub use indexer::{assign_ssids, build_label_tree, IndexerConfig, LabelTree};
pub use knn::{knn_batch, knn_query, KnnConfig};
pub use ontology::ConceptCatalog;
pub use ssid::{SsId, SsidMap};
