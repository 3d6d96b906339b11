//! Tag categorization through a chat backend, one call per unique tag.

use std::collections::BTreeMap;

use crate::gateway::{ChatBackend, ChatMessage, GenConfig};

use super::TagCategory;

/// Re-ask attempts before a tag falls back to `other`.
pub const CATEGORY_PROMPT_RETRIES: usize = 2;

const CATEGORIZER_SYSTEM: &str = "You classify bioinformatics forum tags into exactly one of five categories:\n\
 - tool: bioinformatics software programs and packages\n\
 - analysis: pipelines and analyses such as rna-seq, alignment, variant calling\n\
 - data format: genomics and other -omics data formats\n\
 - programming: programming languages (including wdl, nextflow, snakemake) and operating systems\n\
 - other: everything else\n\
Reply with the category name only.";

/// One categorized tag. `fell_back` marks tags whose backend calls failed
/// and were defaulted to `other`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CategorizedTag {
    pub tag: String,
    pub category: TagCategory,
    pub fell_back: bool,
}

/// Categorize every input tag, caching by tag so repeated tags cost one
/// backend call. The output is aligned with the input, one entry per tag.
pub fn categorize_tags(
    tags: &[String],
    classifier: &dyn ChatBackend,
    gen: &GenConfig,
) -> Vec<CategorizedTag> {
    let mut cache: BTreeMap<String, (TagCategory, bool)> = BTreeMap::new();
    let mut out = Vec::with_capacity(tags.len());
    for tag in tags {
        let key = tag.to_lowercase();
        let (category, fell_back) = match cache.get(&key) {
            Some(hit) => *hit,
            None => {
                let result = classify_one(&key, classifier, gen);
                cache.insert(key.clone(), result);
                result
            }
        };
        out.push(CategorizedTag { tag: key, category, fell_back });
    }
    out
}

fn classify_one(
    tag: &str,
    classifier: &dyn ChatBackend,
    gen: &GenConfig,
) -> (TagCategory, bool) {
    let messages = [
        ChatMessage::system(CATEGORIZER_SYSTEM),
        ChatMessage::user(format!("Tag: {tag}")),
    ];
    for _ in 0..=CATEGORY_PROMPT_RETRIES {
        match classifier.complete(&messages, gen) {
            Ok(reply) => return (TagCategory::from_reply(&reply), false),
            Err(e) => log::warn!("tag classifier call failed for {tag}: {e}"),
        }
    }
    (TagCategory::Other, true)
}
