//! Coreference resolution with linguistically routed pairwise experts.
//!
//! Mention pairs are routed by deterministic rules to one of six category
//! experts that score alongside a shared antecedent scorer. The crate covers
//! corpus ingestion, the model and its manual gradients, training, inference
//! and the standard coreference metrics.

pub mod categorizer;
pub mod checkpoint;
pub mod corpus;
pub mod diagnostics;
pub mod encoder;
pub mod error;
pub mod inference;
pub mod metrics;
pub mod model;
pub mod numerics;
pub mod scorers;
pub mod synthdata;
pub mod training;

pub use categorizer::{categorize, categorize_random, Category};
pub use checkpoint::Checkpoint;
pub use corpus::{enumerate_spans, parse_conll2012, parse_jsonl, write_jsonl, Document, MentionPair, Span, Token};
pub use error::{Error, Result};
pub use inference::{build_clusters, link_antecedents, predict, predict_corpus, Clustering, Link};
pub use metrics::{evaluate, pairwise_by_category, permutation_test, EvalReport, Prf};
pub use model::Model;
pub use synthdata::{generate, SynthSpec};
pub use scorers::{pair_score, score_matrix_masked, PairScoreBreakdown};
pub use training::{train, train_model, LossMode, RoutingMode, TrainConfig};
