//! The built-in task suite: three difficulty levels, each with a conceptual
//! question and a code-generation counterpart.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TaskLevel {
    Easy,
    Medium,
    Hard,
}

impl TaskLevel {
    pub fn label(self) -> &'static str {
        match self {
            TaskLevel::Easy => "easy",
            TaskLevel::Medium => "medium",
            TaskLevel::Hard => "hard",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s.trim().to_lowercase().as_str() {
            "easy" => Some(TaskLevel::Easy),
            "medium" => Some(TaskLevel::Medium),
            "hard" => Some(TaskLevel::Hard),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TaskKind {
    Concept,
    Code,
}

impl TaskKind {
    pub fn label(self) -> &'static str {
        match self {
            TaskKind::Concept => "concept",
            TaskKind::Code => "code",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s.trim().to_lowercase().as_str() {
            "concept" => Some(TaskKind::Concept),
            "code" => Some(TaskKind::Code),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TaskSpec {
    pub level: TaskLevel,
    pub kind: TaskKind,
    pub prompt: String,
}

/// The six built-in task prompts (3 levels x {concept, code}).
pub fn builtin_tasks() -> Vec<TaskSpec> {
    let mk = |level, kind, prompt: &str| TaskSpec { level, kind, prompt: prompt.to_string() };
    vec![
        mk(
            TaskLevel::Easy,
            TaskKind::Concept,
            "How would I provide quality metrics on FASTQ files?",
        ),
        mk(
            TaskLevel::Easy,
            TaskKind::Code,
            "What code or workflow do I need to write to provide quality metrics on FASTQ files?",
        ),
        mk(
            TaskLevel::Medium,
            TaskKind::Concept,
            "How do I align RNA-seq data against a human reference genome?",
        ),
        mk(
            TaskLevel::Medium,
            TaskKind::Code,
            "What code or workflow do I need to write to align RNA-seq data against a human reference genome?",
        ),
        mk(
            TaskLevel::Hard,
            TaskKind::Concept,
            "How can I assemble, annotate, and analyze SARS-CoV-2 genomes from sequencing data to identify and characterize different variants of the virus?",
        ),
        mk(
            TaskLevel::Hard,
            TaskKind::Code,
            "What code or workflow do I need to write to assemble, annotate, and analyze SARS-CoV-2 genomes from sequencing data to identify and characterize different variants of the virus?",
        ),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exactly_six_tasks_covering_the_grid() {
        let tasks = builtin_tasks();
        assert_eq!(tasks.len(), 6);
        let mut cells: Vec<(TaskLevel, TaskKind)> =
            tasks.iter().map(|t| (t.level, t.kind)).collect();
        cells.sort();
        cells.dedup();
        assert_eq!(cells.len(), 6);
    }

    #[test]
    fn easy_concept_prompt_is_verbatim() {
        let tasks = builtin_tasks();
        let easy = tasks
            .iter()
            .find(|t| t.level == TaskLevel::Easy && t.kind == TaskKind::Concept)
            .unwrap();
        assert_eq!(easy.prompt, "How would I provide quality metrics on FASTQ files?");
    }

    #[test]
    fn hard_code_prompt_mentions_the_virus() {
        let tasks = builtin_tasks();
        let hard = tasks
            .iter()
            .find(|t| t.level == TaskLevel::Hard && t.kind == TaskKind::Code)
            .unwrap();
        assert!(hard.prompt.contains("SARS-CoV-2"));
        assert!(hard.prompt.starts_with("What code or workflow"));
    }
}
