//! Corpus acquisition: forum QA dumps, registry tools with command-line help
//! docs, workflow documentation trees, and the fine-tuning dataset built
//! from them.

mod biostars;
mod finetune;
mod helpdocs;
mod nfcore;
mod registry;
mod tags;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use biostars::{load_biostars, BiostarsLoad, SkippedLine};
pub use finetune::{build_finetune_dataset, write_finetune_jsonl, FinetuneRecord};
pub use helpdocs::{
    collect_help_docs, collect_help_docs_all, CollectedHelp, ContainerHelpProvider,
    FixtureHelpProvider, HelpProvider, HELP_FLAG_ORDER,
};
pub use nfcore::{ingest_nfcore, NfcoreIngest};
pub use registry::TrsClient;
pub use tags::{categorize_tags, CategorizedTag, CATEGORY_PROMPT_RETRIES};

pub use crate::ontology::ParseMode;

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("malformed line {line}: {message}")]
    MalformedLine { line: usize, message: String },
    #[error("registry request failed after {attempts} attempts: {last}")]
    RegistryUnreachable { attempts: usize, last: String },
    #[error("registry returned HTTP {status}: {body}")]
    RegistryHttp { status: u16, body: String },
    #[error("registry pagination cursor loop detected at cursor {0:?}")]
    CursorLoop(String),
    #[error("fetch count must be at least 1")]
    BadFetchCount,
    #[error("directory missing: {0}")]
    DirMissing(String),
    #[error("classification backend failed for tag {tag}: {message}")]
    Classifier { tag: String, message: String },
}

/// One retained forum answer. The upvote filter is applied at load time, so
/// any stored record satisfies the corpus minimum.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnswerRecord {
    pub text: String,
    pub upvotes: u32,
    #[serde(default)]
    pub accepted: bool,
}

/// A forum question with its upvote-filtered answers.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QARecord {
    pub id: String,
    pub title: String,
    pub body: String,
    pub tags: Vec<String>,
    pub answers: Vec<AnswerRecord>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub created_at: Option<String>,
}

/// The five-way tag taxonomy. Every tag maps to exactly one category;
/// anything unclassifiable lands in `Other`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TagCategory {
    Tool,
    Analysis,
    DataFormat,
    Programming,
    Other,
}

impl TagCategory {
    pub const ALL: [TagCategory; 5] = [
        TagCategory::Tool,
        TagCategory::Analysis,
        TagCategory::DataFormat,
        TagCategory::Programming,
        TagCategory::Other,
    ];

    pub fn label(self) -> &'static str {
        match self {
            TagCategory::Tool => "tool",
            TagCategory::Analysis => "analysis",
            TagCategory::DataFormat => "data format",
            TagCategory::Programming => "programming",
            TagCategory::Other => "other",
        }
    }

    /// Parse a classifier reply; anything that is not one of the five
    /// category names maps to `Other`.
    pub fn from_reply(reply: &str) -> TagCategory {
        let normalized: String = reply
            .to_lowercase()
            .chars()
            .map(|c| if c.is_alphanumeric() { c } else { ' ' })
            .collect();
        let normalized = normalized.split_whitespace().collect::<Vec<_>>().join(" ");
        match normalized.as_str() {
            "tool" => TagCategory::Tool,
            "analysis" => TagCategory::Analysis,
            "data format" | "dataformat" => TagCategory::DataFormat,
            "programming" => TagCategory::Programming,
            _ => TagCategory::Other,
        }
    }
}

/// Source provenance of a captured help text.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum HelpSource {
    LiveContainer,
    Fixture,
}

/// Captured command-line help output for one tool version.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HelpDoc {
    pub tool_name: String,
    pub version: String,
    pub text: String,
    pub source: HelpSource,
}

/// A registry tool, ranked by download count.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ToolRecord {
    pub name: String,
    pub rank: u32,
    pub downloads: u64,
    pub versions: Vec<String>,
    #[serde(default)]
    pub help_docs: Vec<HelpDoc>,
}

/// A normalized documentation file ready for chunking and indexing.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SourceDoc {
    /// Stable id: the path relative to the ingest root, `/`-separated.
    pub id: String,
    pub title: String,
    pub text: String,
    pub origin: std::path::PathBuf,
}

/// Normalize tags: lowercase and deduplicate, preserving first-seen order.
pub(crate) fn normalize_tags(tags: Vec<String>) -> Vec<String> {
    let mut seen = BTreeMap::new();
    let mut out = Vec::new();
    for tag in tags {
        let tag = tag.to_lowercase();
        if seen.insert(tag.clone(), ()).is_none() {
            out.push(tag);
        }
    }
    out
}
