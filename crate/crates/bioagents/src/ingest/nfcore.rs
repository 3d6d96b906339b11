//! Workflow documentation ingest: walk a directory tree of module/pipeline
//! docs and normalize each file into a `SourceDoc`.

use std::path::Path;

use walkdir::WalkDir;

use super::{IngestError, SourceDoc};

const DOC_EXTENSIONS: [&str; 5] = ["md", "txt", "yml", "yaml", "nf"];

#[derive(Debug, Clone)]
pub struct NfcoreIngest {
    pub docs: Vec<SourceDoc>,
    /// Files that were unreadable or empty.
    pub skipped: usize,
}

/// Read every documentation file under `dir` into a `SourceDoc` with a
/// stable id (the `/`-separated relative path). Files with only whitespace
/// and unreadable files are skipped and counted. Output is sorted by id.
pub fn ingest_nfcore(dir: &Path) -> Result<NfcoreIngest, IngestError> {
    if !dir.is_dir() {
        return Err(IngestError::DirMissing(dir.display().to_string()));
    }
    let mut docs = Vec::new();
    let mut skipped = 0usize;
    for entry in WalkDir::new(dir).sort_by_file_name() {
        let entry = match entry {
            Ok(e) => e,
            Err(e) => {
                log::warn!("unreadable entry under {}: {e}", dir.display());
                skipped += 1;
                continue;
            }
        };
        if !entry.file_type().is_file() {
            continue;
        }
        let ext = entry.path().extension().and_then(|e| e.to_str()).unwrap_or_default();
        if !DOC_EXTENSIONS.contains(&ext) {
            continue;
        }
        let text = match std::fs::read_to_string(entry.path()) {
            Ok(t) => t,
            Err(e) => {
                log::warn!("unreadable file {}: {e}", entry.path().display());
                skipped += 1;
                continue;
            }
        };
        if text.trim().is_empty() {
            skipped += 1;
            continue;
        }
        let rel = entry
            .path()
            .strip_prefix(dir)
            .expect("walked path under root")
            .components()
            .map(|c| c.as_os_str().to_string_lossy())
            .collect::<Vec<_>>()
            .join("/");
        docs.push(SourceDoc {
            id: rel,
            title: doc_title(&text, entry.path()),
            text,
            origin: entry.path().to_path_buf(),
        });
    }
    docs.sort_by(|a, b| a.id.cmp(&b.id));
    Ok(NfcoreIngest { docs, skipped })
}

/// First markdown heading when present, otherwise the file stem.
fn doc_title(text: &str, path: &Path) -> String {
    text.lines()
        .find_map(|l| l.strip_prefix("# ").map(|h| h.trim().to_string()))
        .filter(|t| !t.is_empty())
        .unwrap_or_else(|| {
            path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default()
        })
}
