//! Retrieval substrate: document chunking, pluggable embedding backends, and
//! exact cosine top-k search over a persistent vector index.
//!
//! Search is a brute-force linear scan over L2-normalized vectors. At the
//! corpus sizes this engine targets (thousands of chunks) that is faster to
//! build, exact, and directly checkable against an oracle; approximate
//! structures are a non-goal.

use std::collections::{BTreeMap, HashSet};
use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::ingest::SourceDoc;

/// On-disk format version written by [`persist_index`].
pub const INDEX_FORMAT_VERSION: u32 = 1;
const INDEX_MAGIC: &[u8; 4] = b"VIDX";

/// Default retrieval depth; the expanded variant retrieves four matches
/// instead of relying solely on the top-ranked one.
pub const DEFAULT_RETRIEVAL_K: usize = 1;
pub const EXPANDED_RETRIEVAL_K: usize = 4;

/// Documented default model name for the remote embedding backend.
pub const DEFAULT_EMBEDDING_MODEL: &str = "text-embedding-ada-002";

#[derive(Debug, Error)]
pub enum IndexError {
    #[error("duplicate chunk id: {0}")]
    DuplicateChunkId(String),
    #[error("dimension mismatch: index has {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("embedding contains non-finite values")]
    NonFinite,
    #[error("embedding is the zero vector")]
    ZeroVector,
    #[error("embedding backend error: {0}")]
    Backend(String),
    #[error("unsupported index format version {found} (supported: {supported})")]
    VersionMismatch { found: u32, supported: u32 },
    #[error("index file corrupt: {0}")]
    Corrupt(String),
    #[error("invalid chunk policy: max_chars must exceed overlap_chars")]
    BadChunkPolicy,
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// One indexed retrieval unit.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DocChunk {
    pub chunk_id: String,
    pub source_id: String,
    pub text: String,
    pub meta: BTreeMap<String, String>,
}

/// Fixed-dimension, L2-normalized embedding.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingVector {
    pub values: Vec<f64>,
}

impl EmbeddingVector {
    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn norm(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn dot(&self, other: &EmbeddingVector) -> f64 {
        self.values.iter().zip(&other.values).map(|(a, b)| a * b).sum()
    }
}

/// Produces raw embeddings; normalization and invariant checks happen in
/// [`embed_batch`], not in the backend.
pub trait EmbeddingBackend: Send + Sync {
    /// Declared output dimension.
    fn dim(&self) -> Result<usize, IndexError>;
    /// Maximum number of inputs per call; larger batches are split.
    fn batch_limit(&self) -> usize;
    fn embed(&self, texts: &[String]) -> Result<Vec<Vec<f64>>, IndexError>;
}

/// Deterministic token-hash bag-of-words embedder: each whitespace token is
/// FNV-hashed to a coordinate with a hashed sign, then the vector is
/// L2-normalized downstream. Fully reproducible with no network.
pub struct HashEmbeddingBackend {
    dim: usize,
    batch_limit: usize,
    calls: AtomicUsize,
}

impl Default for HashEmbeddingBackend {
    fn default() -> Self {
        Self::new(64, 1000)
    }
}

impl HashEmbeddingBackend {
    pub fn new(dim: usize, batch_limit: usize) -> Self {
        assert!(dim > 0 && batch_limit > 0);
        Self { dim, batch_limit, calls: AtomicUsize::new(0) }
    }

    pub fn calls(&self) -> usize {
        self.calls.load(Ordering::SeqCst)
    }

    fn embed_one(&self, text: &str) -> Vec<f64> {
        let mut values = vec![0.0; self.dim];
        let mut any = false;
        for token in text.to_lowercase().split_whitespace() {
            let h = fnv1a(token.as_bytes());
            let idx = (h % self.dim as u64) as usize;
            let sign = if (h >> 32) & 1 == 0 { 1.0 } else { -1.0 };
            values[idx] += sign;
            any = true;
        }
        // A tokenless text still needs a non-zero vector.
        if !any || values.iter().all(|v| *v == 0.0) {
            values[0] = 1.0;
        }
        values
    }
}

fn fnv1a(bytes: &[u8]) -> u64 {
    let mut hash: u64 = 0xcbf29ce484222325;
    for b in bytes {
        hash ^= u64::from(*b);
        hash = hash.wrapping_mul(0x100000001b3);
    }
    hash
}

impl EmbeddingBackend for HashEmbeddingBackend {
    fn dim(&self) -> Result<usize, IndexError> {
        Ok(self.dim)
    }

    fn batch_limit(&self) -> usize {
        self.batch_limit
    }

    fn embed(&self, texts: &[String]) -> Result<Vec<Vec<f64>>, IndexError> {
        self.calls.fetch_add(1, Ordering::SeqCst);
        Ok(texts.iter().map(|t| self.embed_one(t)).collect())
    }
}

/// Client for `POST {base_url}/v1/embeddings` (OpenAI-compatible shape).
/// The dimension is learned from the first response, never assumed.
pub struct RemoteEmbeddingBackend {
    base_url: String,
    model: String,
    api_key: Option<String>,
    batch_limit: usize,
    learned_dim: std::sync::OnceLock<usize>,
}

impl RemoteEmbeddingBackend {
    pub fn new(base_url: impl Into<String>, model: impl Into<String>) -> Self {
        Self {
            base_url: base_url.into().trim_end_matches('/').to_string(),
            model: model.into(),
            api_key: std::env::var(crate::gateway::API_KEY_ENV).ok(),
            batch_limit: 1000,
            learned_dim: std::sync::OnceLock::new(),
        }
    }

    fn call(&self, texts: &[String]) -> Result<Vec<Vec<f64>>, IndexError> {
        #[derive(Serialize)]
        struct Req<'a> {
            model: &'a str,
            input: &'a [String],
        }
        #[derive(Deserialize)]
        struct Resp {
            data: Vec<Item>,
        }
        #[derive(Deserialize)]
        struct Item {
            embedding: Vec<f64>,
        }

        let client = reqwest::blocking::Client::new();
        let mut req = client
            .post(format!("{}/v1/embeddings", self.base_url))
            .json(&Req { model: &self.model, input: texts });
        if let Some(key) = &self.api_key {
            req = req.bearer_auth(key);
        }
        let resp = req.send().map_err(|e| IndexError::Backend(e.to_string()))?;
        if !resp.status().is_success() {
            return Err(IndexError::Backend(format!(
                "HTTP {}: {}",
                resp.status(),
                resp.text().unwrap_or_default()
            )));
        }
        let parsed: Resp = resp.json().map_err(|e| IndexError::Backend(e.to_string()))?;
        Ok(parsed.data.into_iter().map(|i| i.embedding).collect())
    }
}

impl EmbeddingBackend for RemoteEmbeddingBackend {
    fn dim(&self) -> Result<usize, IndexError> {
        if let Some(dim) = self.learned_dim.get() {
            return Ok(*dim);
        }
        let probe = self.call(&["dimension probe".to_string()])?;
        let dim = probe
            .first()
            .map(|v| v.len())
            .ok_or_else(|| IndexError::Backend("empty embeddings response".into()))?;
        Ok(*self.learned_dim.get_or_init(|| dim))
    }

    fn batch_limit(&self) -> usize {
        self.batch_limit
    }

    fn embed(&self, texts: &[String]) -> Result<Vec<Vec<f64>>, IndexError> {
        let out = self.call(texts)?;
        if let Some(first) = out.first() {
            let _ = self.learned_dim.get_or_init(|| first.len());
        }
        Ok(out)
    }
}

/// Embed a list of texts, splitting into backend-sized batches, preserving
/// order, and L2-normalizing each vector on receipt.
pub fn embed_batch(
    texts: &[String],
    backend: &dyn EmbeddingBackend,
) -> Result<Vec<EmbeddingVector>, IndexError> {
    let dim = backend.dim()?;
    let limit = backend.batch_limit().max(1);
    let mut out = Vec::with_capacity(texts.len());
    for batch in texts.chunks(limit) {
        for raw in backend.embed(batch)? {
            if raw.len() != dim {
                return Err(IndexError::DimensionMismatch { expected: dim, got: raw.len() });
            }
            if raw.iter().any(|v| !v.is_finite()) {
                return Err(IndexError::NonFinite);
            }
            let norm = raw.iter().map(|v| v * v).sum::<f64>().sqrt();
            if norm == 0.0 {
                return Err(IndexError::ZeroVector);
            }
            out.push(EmbeddingVector { values: raw.iter().map(|v| v / norm).collect() });
        }
    }
    Ok(out)
}

/// Character budgets for [`chunk_document`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChunkPolicy {
    pub max_chars: usize,
    pub overlap_chars: usize,
}

impl Default for ChunkPolicy {
    fn default() -> Self {
        Self { max_chars: 1200, overlap_chars: 200 }
    }
}

impl ChunkPolicy {
    pub fn validate(&self) -> Result<(), IndexError> {
        if self.max_chars > self.overlap_chars {
            Ok(())
        } else {
            Err(IndexError::BadChunkPolicy)
        }
    }
}

/// Split a document into overlapping chunks that are exact substrings of the
/// source text. Cut points prefer paragraph breaks, then sentence ends, then
/// whitespace. Each chunk records its starting character offset in
/// `meta["offset"]`, so concatenating chunks with overlaps removed
/// reconstructs the document.
pub fn chunk_document(doc: &SourceDoc, policy: ChunkPolicy) -> Result<Vec<DocChunk>, IndexError> {
    policy.validate()?;
    let text = doc.text.as_str();
    if text.is_empty() {
        return Ok(Vec::new());
    }
    let char_starts: Vec<usize> = text.char_indices().map(|(b, _)| b).collect();
    let n = char_starts.len();
    let byte_at = |char_idx: usize| -> usize {
        if char_idx >= n {
            text.len()
        } else {
            char_starts[char_idx]
        }
    };
    let char_at = |char_idx: usize| -> char { text[byte_at(char_idx)..].chars().next().unwrap() };

    let mut spans: Vec<(usize, usize)> = Vec::new();
    let mut start = 0usize;
    loop {
        let ideal_end = (start + policy.max_chars).min(n);
        let end = if ideal_end == n {
            n
        } else {
            pick_boundary(start, ideal_end, &char_at)
        };
        spans.push((start, end));
        if end == n {
            break;
        }
        // Guaranteed progress even when a boundary lands close to `start`.
        start = (end.saturating_sub(policy.overlap_chars)).max(start + 1);
    }

    Ok(spans
        .into_iter()
        .enumerate()
        .map(|(ordinal, (s, e))| {
            let mut meta = BTreeMap::new();
            meta.insert("offset".to_string(), s.to_string());
            DocChunk {
                chunk_id: format!("{}#{ordinal:04}", doc.id),
                source_id: doc.id.clone(),
                text: text[byte_at(s)..byte_at(e)].to_string(),
                meta,
            }
        })
        .collect())
}

/// Best cut position in `(start, ideal_end]`, by descending preference:
/// after a blank line, after sentence punctuation plus whitespace, after any
/// whitespace, else the hard budget limit.
fn pick_boundary(start: usize, ideal_end: usize, char_at: &dyn Fn(usize) -> char) -> usize {
    let mut sentence = None;
    let mut whitespace = None;
    for p in (start + 1..=ideal_end).rev() {
        let prev = char_at(p - 1);
        if prev == '\n' && p >= 2 && char_at(p - 2) == '\n' {
            return p;
        }
        if whitespace.is_none() && prev.is_whitespace() {
            whitespace = Some(p);
        }
        if sentence.is_none()
            && prev.is_whitespace()
            && p >= 2
            && matches!(char_at(p - 2), '.' | '!' | '?')
        {
            sentence = Some(p);
        }
    }
    sentence.or(whitespace).unwrap_or(ideal_end)
}

/// One search result.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchHit {
    pub chunk_id: String,
    pub score: f64,
    pub chunk: DocChunk,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndexEntry {
    pub vector: EmbeddingVector,
    pub chunk: DocChunk,
}

/// In-memory vector index; also the persisted snapshot shape.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VectorIndex {
    pub version: u32,
    pub dim: usize,
    pub entries: Vec<IndexEntry>,
}

impl VectorIndex {
    pub fn new(dim: usize) -> Self {
        Self { version: INDEX_FORMAT_VERSION, dim, entries: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Embed and insert chunks. Fails before any mutation on a duplicate id
    /// or a dimension mismatch.
    pub fn add_chunks(
        &mut self,
        chunks: &[DocChunk],
        backend: &dyn EmbeddingBackend,
    ) -> Result<(), IndexError> {
        let mut ids: HashSet<&str> =
            self.entries.iter().map(|e| e.chunk.chunk_id.as_str()).collect();
        for chunk in chunks {
            if !ids.insert(chunk.chunk_id.as_str()) {
                return Err(IndexError::DuplicateChunkId(chunk.chunk_id.clone()));
            }
        }
        let texts: Vec<String> = chunks.iter().map(|c| c.text.clone()).collect();
        let vectors = embed_batch(&texts, backend)?;
        for v in &vectors {
            if v.dim() != self.dim {
                return Err(IndexError::DimensionMismatch { expected: self.dim, got: v.dim() });
            }
        }
        for (vector, chunk) in vectors.into_iter().zip(chunks.iter().cloned()) {
            self.entries.push(IndexEntry { vector, chunk });
        }
        Ok(())
    }

    /// Exact top-k by cosine similarity, sorted score-descending with ties
    /// broken by chunk id. An empty index yields an empty result.
    pub fn search(
        &self,
        query: &str,
        k: usize,
        backend: &dyn EmbeddingBackend,
    ) -> Result<Vec<SearchHit>, IndexError> {
        if self.is_empty() {
            log::warn!("search on empty index");
            return Ok(Vec::new());
        }
        let query_vec = embed_batch(&[query.to_string()], backend)?
            .into_iter()
            .next()
            .ok_or_else(|| IndexError::Backend("no query embedding".into()))?;
        if query_vec.dim() != self.dim {
            return Err(IndexError::DimensionMismatch {
                expected: self.dim,
                got: query_vec.dim(),
            });
        }
        let mut hits: Vec<SearchHit> = self
            .entries
            .iter()
            .map(|e| SearchHit {
                chunk_id: e.chunk.chunk_id.clone(),
                score: query_vec.dot(&e.vector),
                chunk: e.chunk.clone(),
            })
            .collect();
        hits.sort_by(|a, b| {
            b.score
                .partial_cmp(&a.score)
                .unwrap_or(std::cmp::Ordering::Equal)
                .then_with(|| a.chunk_id.cmp(&b.chunk_id))
        });
        hits.truncate(k.min(self.entries.len()));
        Ok(hits)
    }
}

// --- persistence: length-prefixed binary with a trailing SHA-256 ---

fn put_u32(buf: &mut Vec<u8>, v: u32) {
    buf.extend_from_slice(&v.to_le_bytes());
}

fn put_u64(buf: &mut Vec<u8>, v: u64) {
    buf.extend_from_slice(&v.to_le_bytes());
}

fn put_str(buf: &mut Vec<u8>, s: &str) {
    put_u32(buf, s.len() as u32);
    buf.extend_from_slice(s.as_bytes());
}

struct ByteReader<'a> {
    data: &'a [u8],
    pos: usize,
}

impl<'a> ByteReader<'a> {
    fn take(&mut self, len: usize) -> Result<&'a [u8], IndexError> {
        let end = self
            .pos
            .checked_add(len)
            .filter(|e| *e <= self.data.len())
            .ok_or_else(|| IndexError::Corrupt("unexpected end of file".into()))?;
        let slice = &self.data[self.pos..end];
        self.pos = end;
        Ok(slice)
    }

    fn u32(&mut self) -> Result<u32, IndexError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64, IndexError> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn f64(&mut self) -> Result<f64, IndexError> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn string(&mut self) -> Result<String, IndexError> {
        let len = self.u32()? as usize;
        String::from_utf8(self.take(len)?.to_vec())
            .map_err(|_| IndexError::Corrupt("invalid utf-8".into()))
    }
}

/// Write the index to `path`: header `{magic, version, dim, count}`, the
/// entries, then a SHA-256 of everything preceding it. Vectors round-trip
/// bit-exact.
pub fn persist_index(index: &VectorIndex, path: &Path) -> Result<(), IndexError> {
    let mut buf = Vec::new();
    buf.extend_from_slice(INDEX_MAGIC);
    put_u32(&mut buf, index.version);
    put_u32(&mut buf, index.dim as u32);
    put_u64(&mut buf, index.entries.len() as u64);
    for entry in &index.entries {
        put_str(&mut buf, &entry.chunk.chunk_id);
        put_str(&mut buf, &entry.chunk.source_id);
        put_str(&mut buf, &entry.chunk.text);
        put_u32(&mut buf, entry.chunk.meta.len() as u32);
        for (k, v) in &entry.chunk.meta {
            put_str(&mut buf, k);
            put_str(&mut buf, v);
        }
        for value in &entry.vector.values {
            buf.extend_from_slice(&value.to_le_bytes());
        }
    }
    let digest = Sha256::digest(&buf);
    buf.extend_from_slice(&digest);
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent)?;
        }
    }
    std::fs::write(path, buf)?;
    Ok(())
}

/// Load a snapshot written by [`persist_index`], verifying the checksum and
/// format version.
pub fn load_index(path: &Path) -> Result<VectorIndex, IndexError> {
    let data = std::fs::read(path)?;
    if data.len() < INDEX_MAGIC.len() + 4 + 4 + 8 + 32 {
        return Err(IndexError::Corrupt("file too short".into()));
    }
    let (payload, stored_digest) = data.split_at(data.len() - 32);
    let digest = Sha256::digest(payload);
    if digest.as_slice() != stored_digest {
        return Err(IndexError::Corrupt("checksum mismatch".into()));
    }
    let mut reader = ByteReader { data: payload, pos: 0 };
    if reader.take(4)? != INDEX_MAGIC {
        return Err(IndexError::Corrupt("bad magic".into()));
    }
    let version = reader.u32()?;
    if version != INDEX_FORMAT_VERSION {
        return Err(IndexError::VersionMismatch { found: version, supported: INDEX_FORMAT_VERSION });
    }
    let dim = reader.u32()? as usize;
    let count = reader.u64()? as usize;
    let mut entries = Vec::with_capacity(count);
    for _ in 0..count {
        let chunk_id = reader.string()?;
        let source_id = reader.string()?;
        let text = reader.string()?;
        let meta_len = reader.u32()? as usize;
        let mut meta = BTreeMap::new();
        for _ in 0..meta_len {
            let k = reader.string()?;
            let v = reader.string()?;
            meta.insert(k, v);
        }
        let mut values = Vec::with_capacity(dim);
        for _ in 0..dim {
            values.push(reader.f64()?);
        }
        entries.push(IndexEntry {
            vector: EmbeddingVector { values },
            chunk: DocChunk { chunk_id, source_id, text, meta },
        });
    }
    Ok(VectorIndex { version, dim, entries })
}
