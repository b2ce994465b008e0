//! Discovery of new relations between two ontology classes from open
//! information extraction output, with grounding against an existing schema
//! and a co-occurrence clustering baseline.
//!
//! The stages are independent modules; [`pipeline::run_pipeline`] wires them
//! together and persists every intermediate artifact.

pub mod artifacts;
pub mod baseline;
pub mod corpus;
pub mod discover;
pub mod embed;
pub mod error;
pub mod eval;
pub mod ground;
pub mod lexsim;
pub mod pipeline;
pub mod schema;
pub mod text;
pub mod triples;

pub use baseline::{run_baseline, BaselineRun, BaselineSettings};
pub use corpus::{build_corpus, ClassSpec, Corpus, DirectedTriple, Direction, PatternKey, RawTriple};
pub use discover::{discover_relations, single_pass_cluster, RelationCluster, SimilarityInput};
pub use embed::{contextual_filter, cosine, load_embeddings, EmbeddingStore};
pub use error::{DartError, Result};
pub use eval::{compare_runs, evaluate_accuracy, EvaluationSheet};
pub use ground::{ground_all, GroundingDecision, Verdict};
pub use lexsim::{load_lexical_db, text_similarity, LexicalDatabase, TextSimilarityParams};
pub use pipeline::{run_pipeline, PipelineConfig, RunReport, Stage};
pub use schema::{parse_schema, OntologySchema};
pub use text::FunctionWords;
pub use triples::{generate_triples, GeneratedTriple};
