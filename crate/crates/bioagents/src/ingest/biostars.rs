//! Forum dump loading: one JSON object per line, with the answer upvote
//! filter applied on the way in.

use std::io::{BufRead, BufReader};
use std::path::Path;

use serde::Deserialize;

use super::{normalize_tags, AnswerRecord, IngestError, QARecord};
use crate::ontology::ParseMode;

/// A line that failed to parse in lenient mode.
#[derive(Debug, Clone)]
pub struct SkippedLine {
    pub line: usize,
    pub reason: String,
}

#[derive(Debug, Clone)]
pub struct BiostarsLoad {
    pub records: Vec<QARecord>,
    pub skipped: Vec<SkippedLine>,
}

#[derive(Debug, Deserialize)]
struct RawQuestion {
    id: String,
    title: String,
    body: String,
    #[serde(default)]
    tags: Vec<String>,
    #[serde(default)]
    answers: Vec<AnswerRecord>,
    #[serde(default)]
    created_at: Option<String>,
}

/// Load a JSON-lines question dump, keeping only answers with at least
/// `min_upvotes` upvotes and only questions that retain at least one answer.
/// Input order is preserved. Malformed lines abort in strict mode and are
/// skipped with a count in lenient mode; duplicate or empty ids count as
/// malformed.
pub fn load_biostars(
    path: &Path,
    min_upvotes: u32,
    mode: ParseMode,
) -> Result<BiostarsLoad, IngestError> {
    let file = std::fs::File::open(path)
        .map_err(|source| IngestError::Io { path: path.display().to_string(), source })?;
    let reader = BufReader::new(file);

    let mut records: Vec<QARecord> = Vec::new();
    let mut seen_ids = std::collections::HashSet::new();
    let mut skipped = Vec::new();

    for (idx, line) in reader.lines().enumerate() {
        let lineno = idx + 1;
        let line = line
            .map_err(|source| IngestError::Io { path: path.display().to_string(), source })?;
        if line.trim().is_empty() {
            continue;
        }
        let raw: RawQuestion = match serde_json::from_str(&line) {
            Ok(raw) => raw,
            Err(e) => {
                if matches!(mode, ParseMode::Strict) {
                    return Err(IngestError::MalformedLine { line: lineno, message: e.to_string() });
                }
                skipped.push(SkippedLine { line: lineno, reason: e.to_string() });
                continue;
            }
        };
        if raw.id.is_empty() || !seen_ids.insert(raw.id.clone()) {
            let message = if raw.id.is_empty() {
                "empty question id".to_string()
            } else {
                format!("duplicate question id {}", raw.id)
            };
            if matches!(mode, ParseMode::Strict) {
                return Err(IngestError::MalformedLine { line: lineno, message });
            }
            skipped.push(SkippedLine { line: lineno, reason: message });
            continue;
        }
        let answers: Vec<AnswerRecord> =
            raw.answers.into_iter().filter(|a| a.upvotes >= min_upvotes).collect();
        if answers.is_empty() {
            continue;
        }
        records.push(QARecord {
            id: raw.id,
            title: raw.title,
            body: raw.body,
            tags: normalize_tags(raw.tags),
            answers,
            created_at: raw.created_at,
        });
    }

    Ok(BiostarsLoad { records, skipped })
}
