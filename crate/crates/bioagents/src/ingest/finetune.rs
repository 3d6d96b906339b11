//! Instruction-tuning dataset builder: one chat record per captured
//! `(tool, version)` help doc, plus one per software-ontology term.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::gateway::{approx_token_count, ChatMessage};
use crate::ontology::OntologyTerm;

use super::ToolRecord;

/// One chat-format training record.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FinetuneRecord {
    pub messages: Vec<ChatMessage>,
    #[serde(skip)]
    pub token_estimate: usize,
    #[serde(skip)]
    pub truncated: bool,
}

impl FinetuneRecord {
    fn new(user: String, assistant: String, cap: usize) -> Self {
        let user_tokens = approx_token_count(&user);
        // Invert the estimate to find how many assistant tokens fit: the
        // estimate is ceil(words * 13 / 10), so words <= floor(cap*10/13).
        let word_budget = (cap * 10 / 13).saturating_sub(user.split_whitespace().count());
        let (assistant, truncated) = truncate_words(&assistant, word_budget);
        let token_estimate = approx_token_count(&format!("{user} {assistant}"));
        Self {
            messages: vec![ChatMessage::user(user), ChatMessage::assistant(assistant)],
            token_estimate,
            truncated,
        }
    }
}

/// Keep the first `budget` whitespace tokens, cutting at the original
/// whitespace boundary so internal spacing is preserved.
fn truncate_words(text: &str, budget: usize) -> (String, bool) {
    let words = text.split_whitespace().count();
    if words <= budget {
        return (text.to_string(), false);
    }
    let mut kept = 0usize;
    let mut end = 0usize;
    let mut in_word = false;
    for (i, c) in text.char_indices() {
        if c.is_whitespace() {
            if in_word {
                kept += 1;
                if kept == budget {
                    end = i;
                    break;
                }
            }
            in_word = false;
        } else {
            in_word = true;
        }
    }
    (text[..end].to_string(), true)
}

/// Build the dataset: for each tool (by rank) and each captured version one
/// usage record, then one definition record per term (by id). Records whose
/// estimate would exceed `cap` have the assistant text truncated at a
/// whitespace boundary and are flagged. The result is a pure function of its
/// inputs.
pub fn build_finetune_dataset(
    tools: &[ToolRecord],
    terms: &[OntologyTerm],
    cap: usize,
) -> Vec<FinetuneRecord> {
    assert!(cap > 0, "token cap must be positive");
    if tools.is_empty() && terms.is_empty() {
        log::warn!("building fine-tune dataset from zero inputs");
    }

    let mut sorted_tools: Vec<&ToolRecord> = tools.iter().collect();
    sorted_tools.sort_by(|a, b| a.rank.cmp(&b.rank).then_with(|| a.name.cmp(&b.name)));
    let mut sorted_terms: Vec<&OntologyTerm> = terms.iter().collect();
    sorted_terms.sort_by(|a, b| a.id.cmp(&b.id));

    let mut records = Vec::new();
    for tool in sorted_tools {
        for doc in &tool.help_docs {
            let user = format!(
                "How do I use the bioinformatics tool {} (version {})? Describe its command-line usage.",
                doc.tool_name, doc.version
            );
            records.push(FinetuneRecord::new(user, doc.text.clone(), cap));
        }
    }
    for term in sorted_terms {
        let user = format!("What is {} and what is it used for?", term.name);
        let assistant = if term.definition_missing {
            format!("{} is a term from the {} ontology.", term.name, term.ontology_name)
        } else {
            term.definition.clone()
        };
        records.push(FinetuneRecord::new(user, assistant, cap));
    }
    records
}

/// Write records as JSON lines, one `{"messages": [...]}` object per line.
pub fn write_finetune_jsonl<W: Write>(
    records: &[FinetuneRecord],
    mut writer: W,
) -> std::io::Result<()> {
    for record in records {
        let line = serde_json::to_string(record).expect("serializable record");
        writeln!(writer, "{line}")?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::{HelpDoc, HelpSource};
    use crate::ontology::TermSource;

    fn tool_with_versions(name: &str, rank: u32, versions: &[&str]) -> ToolRecord {
        ToolRecord {
            name: name.to_string(),
            rank,
            downloads: 0,
            versions: versions.iter().map(|v| v.to_string()).collect(),
            help_docs: versions
                .iter()
                .map(|v| HelpDoc {
                    tool_name: name.to_string(),
                    version: v.to_string(),
                    text: format!("Usage: {name} [options]\n  -h  show help"),
                    source: HelpSource::Fixture,
                })
                .collect(),
        }
    }

    fn term(id: &str, name: &str, definition: &str) -> OntologyTerm {
        OntologyTerm {
            id: id.to_string(),
            name: name.to_string(),
            definition: definition.to_string(),
            definition_missing: definition.is_empty(),
            source: TermSource::Obo,
            ontology_name: "swo".to_string(),
        }
    }

    #[test]
    fn two_tools_two_versions_three_terms_is_seven_records() {
        let tools = vec![
            tool_with_versions("samtools", 1, &["1.9", "1.17"]),
            tool_with_versions("bwa", 2, &["0.7.17", "0.7.18"]),
        ];
        let terms = vec![
            term("SWO:1", "aligner", "Aligns reads."),
            term("SWO:2", "caller", "Calls variants."),
            term("SWO:3", "trimmer", "Trims adapters."),
        ];
        let records = build_finetune_dataset(&tools, &terms, 1000);
        assert_eq!(records.len(), 7);
        for r in &records {
            assert!(r.token_estimate <= 1000);
            assert_eq!(r.messages.first().unwrap().role, crate::gateway::Role::User);
            assert_eq!(r.messages.last().unwrap().role, crate::gateway::Role::Assistant);
        }
    }

    #[test]
    fn oversized_help_text_is_truncated_and_flagged() {
        let mut tool = tool_with_versions("samtools", 1, &["1.9"]);
        tool.help_docs[0].text = "word ".repeat(5000);
        let records = build_finetune_dataset(&[tool], &[], 100);
        assert!(records[0].truncated);
        assert!(records[0].token_estimate <= 100);
        // Cut on a whitespace boundary: no partial token at the end.
        assert!(!records[0].messages[1].content.ends_with(char::is_whitespace));
        assert!(records[0].messages[1].content.ends_with("word"));
    }

    #[test]
    fn output_is_byte_identical_across_runs() {
        let tools = vec![tool_with_versions("bwa", 2, &["0.7.17"])];
        let terms = vec![term("SWO:1", "aligner", "Aligns reads.")];
        let mut a = Vec::new();
        write_finetune_jsonl(&build_finetune_dataset(&tools, &terms, 1000), &mut a).unwrap();
        let mut b = Vec::new();
        write_finetune_jsonl(&build_finetune_dataset(&tools, &terms, 1000), &mut b).unwrap();
        assert_eq!(a, b);
        let first_line = String::from_utf8(a).unwrap().lines().next().unwrap().to_string();
        assert!(first_line.starts_with("{\"messages\":[{\"role\":\"user\""));
    }

    #[test]
    fn order_is_tools_by_rank_then_terms_by_id() {
        let tools = vec![
            tool_with_versions("zeta", 2, &["1.0"]),
            tool_with_versions("alpha", 1, &["1.0"]),
        ];
        let terms = vec![term("SWO:2", "b", "B."), term("SWO:1", "a", "A.")];
        let records = build_finetune_dataset(&tools, &terms, 1000);
        assert!(records[0].messages[0].content.contains("alpha"));
        assert!(records[1].messages[0].content.contains("zeta"));
        assert!(records[2].messages[0].content.contains("what is a used for") || records[2].messages[0].content.contains("What is a"));
        assert!(records[3].messages[0].content.contains("What is b"));
    }

    #[test]
    fn zero_inputs_yield_empty_dataset() {
        assert!(build_finetune_dataset(&[], &[], 1000).is_empty());
    }
}
