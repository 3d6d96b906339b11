//! ROUGE-1/2, ROUGE-L, and summary-level ROUGE-Lsum, built from scratch.
//!
//! Tokenization is lowercase with splits on runs of non-alphanumeric
//! characters; no stemming, no stopword removal. Sentences split on newlines
//! and on sentence punctuation followed by whitespace (the regex pattern
//! `[.!?]+\s+|\n+`). Both choices are deliberate constants so scores are
//! comparable across runs.

use std::collections::HashMap;
use std::sync::OnceLock;

use regex::Regex;
use serde::{Deserialize, Serialize};

use super::EvalError;

/// Precision / recall / F1 triple, each in `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RougeScore {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

impl RougeScore {
    const ZERO: RougeScore = RougeScore { precision: 0.0, recall: 0.0, f1: 0.0 };

    fn from_counts(matches: usize, cand_total: usize, ref_total: usize) -> Self {
        let precision = if cand_total > 0 { matches as f64 / cand_total as f64 } else { 0.0 };
        let recall = if ref_total > 0 { matches as f64 / ref_total as f64 } else { 0.0 };
        let f1 = if precision + recall > 0.0 {
            2.0 * precision * recall / (precision + recall)
        } else {
            0.0
        };
        Self { precision, recall, f1 }
    }
}

/// Lowercase and split on runs of non-alphanumeric characters.
pub fn tokenize(text: &str) -> Vec<String> {
    text.to_lowercase()
        .split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(str::to_string)
        .collect()
}

/// Split into sentences on newlines and on `[.!?]` runs followed by
/// whitespace.
pub fn split_sentences(text: &str) -> Vec<String> {
    static SPLITTER: OnceLock<Regex> = OnceLock::new();
    let splitter = SPLITTER.get_or_init(|| Regex::new(r"[.!?]+\s+|\n+").expect("valid regex"));
    splitter
        .split(text)
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(str::to_string)
        .collect()
}

fn ngram_counts(tokens: &[String], n: usize) -> HashMap<&[String], usize> {
    let mut counts: HashMap<&[String], usize> = HashMap::new();
    if tokens.len() >= n {
        for gram in tokens.windows(n) {
            *counts.entry(gram).or_default() += 1;
        }
    }
    counts
}

/// Clipped n-gram overlap: matches are summed as
/// `min(count_candidate, count_reference)` per n-gram.
pub fn rouge_n(candidate: &str, reference: &str, n: usize) -> Result<RougeScore, EvalError> {
    if !(1..=2).contains(&n) {
        return Err(EvalError::BadNgramOrder(n));
    }
    let cand_tokens = tokenize(candidate);
    let ref_tokens = tokenize(reference);
    let cand_counts = ngram_counts(&cand_tokens, n);
    let ref_counts = ngram_counts(&ref_tokens, n);

    let matches: usize = cand_counts
        .iter()
        .map(|(gram, count)| (*count).min(ref_counts.get(gram).copied().unwrap_or(0)))
        .sum();
    let cand_total = cand_tokens.len().saturating_sub(n - 1);
    let ref_total = ref_tokens.len().saturating_sub(n - 1);
    Ok(RougeScore::from_counts(matches, cand_total, ref_total))
}

fn lcs_length(a: &[String], b: &[String]) -> usize {
    if a.is_empty() || b.is_empty() {
        return 0;
    }
    let mut prev = vec![0usize; b.len() + 1];
    let mut curr = vec![0usize; b.len() + 1];
    for ai in a {
        for (j, bj) in b.iter().enumerate() {
            curr[j + 1] = if ai == bj { prev[j] + 1 } else { curr[j].max(prev[j + 1]) };
        }
        std::mem::swap(&mut prev, &mut curr);
    }
    prev[b.len()]
}

/// Longest-common-subsequence overlap over whole token sequences.
pub fn rouge_l(candidate: &str, reference: &str) -> RougeScore {
    let cand_tokens = tokenize(candidate);
    let ref_tokens = tokenize(reference);
    if cand_tokens.is_empty() || ref_tokens.is_empty() {
        return RougeScore::ZERO;
    }
    let lcs = lcs_length(&cand_tokens, &ref_tokens);
    RougeScore::from_counts(lcs, cand_tokens.len(), ref_tokens.len())
}

/// Indices of `a` participating in one LCS of `a` and `b` (standard
/// backtrack, preferring the `a` side on ties so the choice is
/// deterministic).
fn lcs_indices(a: &[String], b: &[String]) -> Vec<usize> {
    let m = a.len();
    let n = b.len();
    let mut dp = vec![vec![0usize; n + 1]; m + 1];
    for i in 0..m {
        for j in 0..n {
            dp[i + 1][j + 1] =
                if a[i] == b[j] { dp[i][j] + 1 } else { dp[i + 1][j].max(dp[i][j + 1]) };
        }
    }
    let mut out = Vec::new();
    let (mut i, mut j) = (m, n);
    while i > 0 && j > 0 {
        if a[i - 1] == b[j - 1] {
            out.push(i - 1);
            i -= 1;
            j -= 1;
        } else if dp[i - 1][j] >= dp[i][j - 1] {
            i -= 1;
        } else {
            j -= 1;
        }
    }
    out.reverse();
    out
}

/// Summary-level LCS: for each reference sentence, the union of LCS token
/// positions against every candidate sentence; hits are clipped so each
/// candidate token (and each reference token) is creditable once.
pub fn rouge_lsum(candidate: &str, reference: &str) -> RougeScore {
    let cand_sentences: Vec<Vec<String>> =
        split_sentences(candidate).iter().map(|s| tokenize(s)).collect();
    let ref_sentences: Vec<Vec<String>> =
        split_sentences(reference).iter().map(|s| tokenize(s)).collect();

    let cand_total: usize = cand_sentences.iter().map(Vec::len).sum();
    let ref_total: usize = ref_sentences.iter().map(Vec::len).sum();
    if cand_total == 0 || ref_total == 0 {
        return RougeScore::ZERO;
    }

    let mut cand_budget: HashMap<&str, usize> = HashMap::new();
    for sentence in &cand_sentences {
        for token in sentence {
            *cand_budget.entry(token).or_default() += 1;
        }
    }
    let mut ref_budget: HashMap<&str, usize> = HashMap::new();
    for sentence in &ref_sentences {
        for token in sentence {
            *ref_budget.entry(token).or_default() += 1;
        }
    }

    let mut hits = 0usize;
    for ref_sentence in &ref_sentences {
        let mut union: Vec<bool> = vec![false; ref_sentence.len()];
        for cand_sentence in &cand_sentences {
            for idx in lcs_indices(ref_sentence, cand_sentence) {
                union[idx] = true;
            }
        }
        for (idx, hit) in union.iter().enumerate() {
            if !hit {
                continue;
            }
            let token = ref_sentence[idx].as_str();
            let cand_left = cand_budget.get_mut(token);
            let Some(cand_left) = cand_left else { continue };
            if *cand_left == 0 {
                continue;
            }
            let ref_left = ref_budget.get_mut(token).expect("token came from reference");
            if *ref_left == 0 {
                continue;
            }
            *cand_left -= 1;
            *ref_left -= 1;
            hits += 1;
        }
    }
    RougeScore::from_counts(hits, cand_total, ref_total)
}

#[cfg(test)]
mod tests {
    use super::*;

    const EPS: f64 = 1e-9;

    #[test]
    fn rouge1_hand_counted() {
        let s = rouge_n("the cat sat", "the cat sat on the mat", 1).unwrap();
        assert!((s.precision - 1.0).abs() < EPS);
        assert!((s.recall - 0.5).abs() < EPS);
        assert!((s.f1 - 2.0 / 3.0).abs() < EPS);
    }

    #[test]
    fn identity_scores_one() {
        for text in ["hello world", "a. b. c.", "Multi\nline text with, punctuation!"] {
            for score in [
                rouge_n(text, text, 1).unwrap(),
                rouge_n(text, text, 2).unwrap(),
                rouge_l(text, text),
                rouge_lsum(text, text),
            ] {
                assert!((score.precision - 1.0).abs() < EPS, "{text}");
                assert!((score.recall - 1.0).abs() < EPS);
                assert!((score.f1 - 1.0).abs() < EPS);
            }
        }
    }

    #[test]
    fn disjoint_bigrams_are_zero() {
        let s = rouge_n("a b", "c d", 2).unwrap();
        assert_eq!(s, RougeScore { precision: 0.0, recall: 0.0, f1: 0.0 });
    }

    #[test]
    fn rouge_l_hand_lcs() {
        let s = rouge_l("the cat sat", "the cat on the mat sat");
        assert!((s.precision - 1.0).abs() < EPS);
        assert!((s.recall - 0.5).abs() < EPS);
        assert!((s.f1 - 2.0 / 3.0).abs() < EPS);
    }

    #[test]
    fn rouge1_is_permutation_invariant() {
        let reference = "quality metrics on fastq files";
        let a = rouge_n("run fastqc on fastq files", reference, 1).unwrap();
        let b = rouge_n("files fastq on fastqc run", reference, 1).unwrap();
        assert!((a.f1 - b.f1).abs() < EPS);
    }

    #[test]
    fn lsum_reduces_to_l_on_single_sentences() {
        let cand = "align reads with star";
        let reference = "align rna reads with hisat2";
        let l = rouge_l(cand, reference);
        let lsum = rouge_lsum(cand, reference);
        assert!((l.f1 - lsum.f1).abs() < EPS);
    }

    #[test]
    fn lsum_perfect_on_ordered_concatenation() {
        let reference = "Trim the reads. Align them to the genome.";
        let candidate = "Trim the reads. Align them to the genome.";
        let s = rouge_lsum(candidate, reference);
        assert!((s.f1 - 1.0).abs() < EPS);
    }

    #[test]
    fn lsum_hand_union_computation() {
        // Reference sentences: r1 = [a b c], r2 = [d e f]
        // Candidate sentences: c1 = [a b x], c2 = [d f y]
        // Union LCS hits: r1 matches {a, b} via c1; r2 matches {d, f} via c2.
        // hits = 4, candidate tokens = 6, reference tokens = 6
        // p = r = 4/6, f1 = 2/3.
        let reference = "a b c. d e f.";
        let candidate = "a b x. d f y.";
        let s = rouge_lsum(candidate, reference);
        assert!((s.precision - 4.0 / 6.0).abs() < EPS);
        assert!((s.recall - 4.0 / 6.0).abs() < EPS);
        assert!((s.f1 - 2.0 / 3.0).abs() < EPS);
    }

    #[test]
    fn lsum_clips_candidate_token_credit() {
        // One candidate token "a" cannot be credited to two reference hits.
        let reference = "a b. a c.";
        let candidate = "a x.";
        let s = rouge_lsum(candidate, reference);
        // hits = 1 (single candidate "a"), cand tokens 2, ref tokens 4.
        assert!((s.precision - 0.5).abs() < EPS);
        assert!((s.recall - 0.25).abs() < EPS);
    }

    #[test]
    fn degenerate_inputs_yield_zeros() {
        assert_eq!(rouge_l("", "some text"), RougeScore::ZERO);
        assert_eq!(rouge_lsum("some text", ""), RougeScore::ZERO);
        assert_eq!(rouge_n("", "", 1).unwrap(), RougeScore::ZERO);
        assert_eq!(rouge_n("?!", ".,", 2).unwrap(), RougeScore::ZERO);
    }

    #[test]
    fn bad_ngram_order_rejected() {
        assert!(matches!(rouge_n("a", "a", 3), Err(EvalError::BadNgramOrder(3))));
        assert!(matches!(rouge_n("a", "a", 0), Err(EvalError::BadNgramOrder(0))));
    }

    #[test]
    fn tokenizer_lowercases_and_splits_on_non_alnum() {
        assert_eq!(tokenize("RNA-seq, FASTQ!"), vec!["rna", "seq", "fastq"]);
        assert_eq!(tokenize("  "), Vec::<String>::new());
    }

    #[test]
    fn sentence_split_pattern() {
        assert_eq!(
            split_sentences("First one. Second!\nThird line"),
            vec!["First one", "Second", "Third line"]
        );
        assert_eq!(split_sentences("no terminator"), vec!["no terminator"]);
    }

    /// Independent recursive-memo LCS oracle over short token slices.
    fn lcs_oracle(a: &[String], b: &[String]) -> usize {
        fn go<'a>(
            a: &'a [String],
            b: &'a [String],
            memo: &mut HashMap<(usize, usize), usize>,
        ) -> usize {
            if a.is_empty() || b.is_empty() {
                return 0;
            }
            let key = (a.len(), b.len());
            if let Some(v) = memo.get(&key) {
                return *v;
            }
            let v = if a[a.len() - 1] == b[b.len() - 1] {
                go(&a[..a.len() - 1], &b[..b.len() - 1], memo) + 1
            } else {
                go(&a[..a.len() - 1], b, memo).max(go(a, &b[..b.len() - 1], memo))
            };
            memo.insert(key, v);
            v
        }
        let mut memo = HashMap::new();
        go(a, b, &mut memo)
    }

    #[test]
    fn lcs_matches_recursive_oracle_on_random_pairs() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let vocab = ["a", "b", "c", "d", "e"];
        for _ in 0..200 {
            let len_a = rng.random_range(0..=8);
            let len_b = rng.random_range(0..=8);
            let a: Vec<String> =
                (0..len_a).map(|_| vocab[rng.random_range(0..vocab.len())].to_string()).collect();
            let b: Vec<String> =
                (0..len_b).map(|_| vocab[rng.random_range(0..vocab.len())].to_string()).collect();
            assert_eq!(lcs_length(&a, &b), lcs_oracle(&a, &b));
        }
    }
}
