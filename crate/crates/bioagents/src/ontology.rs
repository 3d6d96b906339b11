//! Ontology parsing: OBO 1.2 stanzas and OBO-Graphs-style JSON, normalized
//! to `(id, name, definition)` terms, plus JSON-LD knowledge-base output.
//!
//! Only the fields the retrieval corpus needs are extracted; relationships,
//! synonyms, and xrefs-as-data are out of scope.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// `@context` IRIs for the JSON-LD output.
pub const NAME_IRI: &str = "http://schema.org/name";
pub const DESCRIPTION_IRI: &str = "http://schema.org/description";

#[derive(Debug, Error)]
pub enum OntologyError {
    #[error("stanza at line {line} missing required field `{field}`")]
    StanzaMissingField { line: usize, field: &'static str },
    #[error("invalid ontology JSON at line {line}, column {column}: {message}")]
    Json { line: usize, column: usize, message: String },
    #[error("duplicate term ids: {}", .0.join(", "))]
    DuplicateIds(Vec<String>),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Where a term was parsed from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TermSource {
    Obo,
    Json,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OntologyTerm {
    pub id: String,
    pub name: String,
    pub definition: String,
    pub definition_missing: bool,
    pub source: TermSource,
    pub ontology_name: String,
}

/// Abort on the first bad record, or skip it and keep a count.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ParseMode {
    Strict,
    #[default]
    Lenient,
}

/// Parse result carrying whatever was skipped in lenient mode.
#[derive(Debug, Clone)]
pub struct ParsedTerms {
    pub terms: Vec<OntologyTerm>,
    pub skipped: usize,
}

/// Parse OBO 1.2 text: `[Term]` stanzas with `id:`, `name:`, and `def:`
/// lines. Obsolete stanzas are dropped unless `keep_obsolete` is set;
/// non-Term stanzas are ignored.
pub fn parse_obo(text: &str, mode: ParseMode, keep_obsolete: bool) -> Result<ParsedTerms, OntologyError> {
    let mut ontology_name = String::new();
    let mut terms = Vec::new();
    let mut skipped = 0usize;

    let mut in_term = false;
    let mut stanza_line = 0usize;
    let mut id: Option<String> = None;
    let mut name: Option<String> = None;
    let mut def: Option<String> = None;
    let mut obsolete = false;

    let mut flush = |in_term: bool,
                     stanza_line: usize,
                     id: &mut Option<String>,
                     name: &mut Option<String>,
                     def: &mut Option<String>,
                     obsolete: bool,
                     terms: &mut Vec<OntologyTerm>,
                     skipped: &mut usize,
                     ontology_name: &str|
     -> Result<(), OntologyError> {
        if !in_term {
            return Ok(());
        }
        if obsolete && !keep_obsolete {
            id.take();
            name.take();
            def.take();
            return Ok(());
        }
        match (id.take(), name.take()) {
            (Some(id), Some(name)) if !id.is_empty() && !name.is_empty() => {
                let definition = def.take().unwrap_or_default();
                terms.push(OntologyTerm {
                    id,
                    name,
                    definition_missing: definition.is_empty(),
                    definition,
                    source: TermSource::Obo,
                    ontology_name: ontology_name.to_string(),
                });
                Ok(())
            }
            (got_id, _) => {
                def.take();
                let field = if got_id.is_none() { "id" } else { "name" };
                if matches!(mode, ParseMode::Strict) {
                    Err(OntologyError::StanzaMissingField { line: stanza_line, field })
                } else {
                    *skipped += 1;
                    Ok(())
                }
            }
        }
    };

    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.starts_with('[') && line.ends_with(']') {
            flush(in_term, stanza_line, &mut id, &mut name, &mut def, obsolete, &mut terms, &mut skipped, &ontology_name)?;
            in_term = line == "[Term]";
            stanza_line = lineno + 1;
            obsolete = false;
            continue;
        }
        if line.is_empty() || line.starts_with('!') {
            continue;
        }
        let Some((key, value)) = line.split_once(':') else { continue };
        let key = key.trim();
        let value = value.trim();
        if !in_term {
            // Header block: the only directive used is the ontology name.
            if key == "ontology" {
                ontology_name = value.to_string();
            }
            continue;
        }
        match key {
            "id" => id = Some(value.to_string()),
            "name" => name = Some(value.to_string()),
            "def" => def = Some(parse_def_value(value)),
            "is_obsolete" => obsolete = value.eq_ignore_ascii_case("true"),
            _ => {}
        }
    }
    flush(in_term, stanza_line, &mut id, &mut name, &mut def, obsolete, &mut terms, &mut skipped, &ontology_name)?;

    Ok(ParsedTerms { terms, skipped })
}

/// Extract the quoted payload of a `def:` value, unescaping `\"` and `\\`
/// and dropping any trailing xref bracket.
fn parse_def_value(value: &str) -> String {
    let value = value.trim();
    let Some(rest) = value.strip_prefix('"') else {
        // Unquoted definition: take everything before an xref bracket.
        return value.split('[').next().unwrap_or(value).trim().to_string();
    };
    let mut out = String::new();
    let mut chars = rest.chars();
    while let Some(c) = chars.next() {
        match c {
            '\\' => {
                if let Some(escaped) = chars.next() {
                    out.push(escaped);
                }
            }
            '"' => break,
            other => out.push(other),
        }
    }
    out
}

// --- OBO-Graphs-style JSON ---

#[derive(Debug, Deserialize)]
struct GraphDoc {
    #[serde(default)]
    graphs: Vec<Graph>,
}

#[derive(Debug, Deserialize)]
struct Graph {
    #[serde(default)]
    id: Option<String>,
    #[serde(default)]
    nodes: Vec<Node>,
}

#[derive(Debug, Deserialize)]
struct Node {
    #[serde(default)]
    id: Option<String>,
    #[serde(default)]
    lbl: Option<String>,
    #[serde(default)]
    meta: Option<NodeMeta>,
    #[serde(default)]
    description: Option<String>,
}

#[derive(Debug, Deserialize)]
struct NodeMeta {
    #[serde(default)]
    definition: Option<MetaDefinition>,
}

#[derive(Debug, Deserialize)]
struct MetaDefinition {
    #[serde(default)]
    val: Option<String>,
}

/// Parse an ontology-JSON document: `graphs[].nodes[]` with `id`, `lbl`, and
/// `meta.definition.val`. Nodes lacking an id or label are skipped and
/// counted.
pub fn parse_onto_json(text: &str) -> Result<ParsedTerms, OntologyError> {
    let doc: GraphDoc = serde_json::from_str(text).map_err(|e| OntologyError::Json {
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })?;

    let mut terms = Vec::new();
    let mut skipped = 0usize;
    for graph in doc.graphs {
        let ontology_name = graph.id.unwrap_or_default();
        for node in graph.nodes {
            let (Some(id), Some(lbl)) = (node.id, node.lbl) else {
                skipped += 1;
                continue;
            };
            if id.is_empty() || lbl.is_empty() {
                skipped += 1;
                continue;
            }
            let definition = node
                .meta
                .and_then(|m| m.definition)
                .and_then(|d| d.val)
                .or(node.description)
                .unwrap_or_default();
            terms.push(OntologyTerm {
                id,
                name: lbl,
                definition_missing: definition.is_empty(),
                definition,
                source: TermSource::Json,
                ontology_name: ontology_name.clone(),
            });
        }
    }
    Ok(ParsedTerms { terms, skipped })
}

// --- JSON-LD ---

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct JsonLdNode {
    #[serde(rename = "@id")]
    pub id: String,
    pub description: String,
    pub name: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct JsonLdDoc {
    #[serde(rename = "@context")]
    pub context: BTreeMap<String, String>,
    #[serde(rename = "@graph")]
    pub graph: Vec<JsonLdNode>,
}

impl JsonLdDoc {
    pub fn parse(text: &str) -> Result<Self, OntologyError> {
        serde_json::from_str(text).map_err(|e| OntologyError::Json {
            line: e.line(),
            column: e.column(),
            message: e.to_string(),
        })
    }
}

impl fmt::Display for JsonLdDoc {
    /// Canonical serialization: fixed key order, LF line endings, trailing
    /// newline.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let body = serde_json::to_string_pretty(self).map_err(|_| fmt::Error)?;
        writeln!(f, "{body}")
    }
}

/// Map terms to a JSON-LD document with one `@graph` node per term, sorted
/// by `@id`. Duplicate ids are an error.
pub fn to_jsonld(terms: &[OntologyTerm]) -> Result<JsonLdDoc, OntologyError> {
    let mut seen = BTreeMap::new();
    let mut duplicates = Vec::new();
    for term in terms {
        if seen.insert(term.id.clone(), ()).is_some() {
            duplicates.push(term.id.clone());
        }
    }
    if !duplicates.is_empty() {
        duplicates.sort();
        duplicates.dedup();
        return Err(OntologyError::DuplicateIds(duplicates));
    }

    let mut graph: Vec<JsonLdNode> = terms
        .iter()
        .map(|t| JsonLdNode {
            id: t.id.clone(),
            description: t.definition.clone(),
            name: t.name.clone(),
        })
        .collect();
    graph.sort_by(|a, b| a.id.cmp(&b.id));

    let context = BTreeMap::from([
        ("description".to_string(), DESCRIPTION_IRI.to_string()),
        ("name".to_string(), NAME_IRI.to_string()),
    ]);
    Ok(JsonLdDoc { context, graph })
}
