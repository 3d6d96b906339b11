//! Evaluation: from-scratch ROUGE metrics, the benchmark runner over QA
//! pairs, the built-in task suite, and human-rubric aggregation.

mod bench;
mod rouge;
mod rubric;
mod tasks;

use thiserror::Error;

pub use bench::{render_table, run_benchmark, BenchReport, BenchRow, MetricVariant};
pub use rouge::{rouge_l, rouge_lsum, rouge_n, split_sentences, tokenize, RougeScore};
pub use rubric::{aggregate_rubric, read_rubric_csv, render_rubric, RubricCell, RubricScore, Subject};
pub use tasks::{builtin_tasks, TaskKind, TaskLevel, TaskSpec};

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("n-gram order must be 1 or 2, got {0}")]
    BadNgramOrder(usize),
    #[error("benchmark needs at least one QA pair")]
    NoPairs,
    #[error("benchmark needs at least one backend")]
    NoBackends,
    #[error("QA pair {0} has no answers")]
    PairWithoutAnswers(String),
    #[error("score {value} for {field} outside 1-5 (row {row})")]
    ScoreOutOfRange { row: usize, field: &'static str, value: i64 },
    #[error("rubric csv: {0}")]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
