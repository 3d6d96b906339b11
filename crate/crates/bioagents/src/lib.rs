//! Multi-agent retrieval-augmented QA engine for bioinformatics workflow
//! questions.
//!
//! The engine ingests three corpora (forum QA pairs, container-registry tool
//! help docs, workflow module docs plus ontologies), indexes them for cosine
//! retrieval, and answers questions with a three-agent pipeline: a tool
//! specialist, a retrieval-augmented workflow specialist, and a reasoning
//! agent that synthesizes the specialist outputs and self-rates the result,
//! looping until the rating clears a threshold or a round cap is hit.
//!
//! Modules map to pipeline stages:
//!
//! - [`ingest`] — corpus acquisition: forum dumps, registry tools + help
//!   docs, workflow docs, and the fine-tuning dataset builder.
//! - [`ontology`] — OBO / ontology-JSON parsing and JSON-LD output.
//! - [`index`] — chunking, pluggable embeddings, exact cosine top-k search
//!   with binary persistence.
//! - [`gateway`] — one abstraction over chat-completion backends (remote
//!   OpenAI-compatible endpoints and deterministic scripted mocks).
//! - [`orchestrator`] — the specialist/reasoning pipeline with the
//!   self-evaluation loop and full per-round tracing.
//! - [`eval`] — from-scratch ROUGE metrics, the benchmark runner, the
//!   built-in task suite, and the human-scoring rubric aggregation.
//! - [`app`] — configuration, CLI, HTTP service, and trace storage.
//! - [`testing`] — in-process fixture HTTP servers for offline tests and
//!   examples.
//!
//! Every example in `examples/` runs offline against scripted backends and
//! the fixture corpus under `fixtures/`; start with `ask_pipeline`:
//!
//! ```bash
//! cargo run -p bioagents --example ask_pipeline
//! ```

pub mod app;
pub mod eval;
pub mod gateway;
pub mod index;
pub mod ingest;
pub mod ontology;
pub mod orchestrator;
pub mod testing;

pub use gateway::{ChatBackend, ChatMessage, GenConfig, Role};
pub use orchestrator::{run_pipeline, OrchestrationTrace, PipelineConfig, PipelineDeps};
