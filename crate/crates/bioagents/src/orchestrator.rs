//! The answer pipeline: a tool specialist and a retrieval-augmented workflow
//! specialist run independently per round, a reasoning agent synthesizes
//! their outputs and rates the result, and the loop repeats until the rating
//! clears the threshold or the round cap is reached.
//!
//! The trace records every round. The final answer comes from the
//! highest-rated round (earliest on ties) rather than the last one: repeated
//! reprocessing shows diminishing returns, so best-so-far is the safer
//! default, with `return_last` preserving the alternative.

use std::path::Path;
use std::sync::Arc;
use std::time::Instant;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::gateway::{ChatBackend, ChatMessage, GatewayError, GenConfig};
use crate::index::{EmbeddingBackend, SearchHit, VectorIndex};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AgentRole {
    ToolAgent,
    WorkflowAgent,
    ReasoningAgent,
}

impl std::fmt::Display for AgentRole {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let label = match self {
            AgentRole::ToolAgent => "tool_agent",
            AgentRole::WorkflowAgent => "workflow_agent",
            AgentRole::ReasoningAgent => "reasoning_agent",
        };
        f.write_str(label)
    }
}

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("{role} failed: {source}")]
    Agent {
        role: AgentRole,
        #[source]
        source: GatewayError,
    },
    #[error("query must be non-empty")]
    EmptyQuery,
    #[error("answer must be non-empty")]
    EmptyAnswer,
    #[error("expected exactly one tool_agent and one workflow_agent response")]
    MissingSpecialist,
    #[error("self-rating reply had no integer: {0:?}")]
    UnparsableRating(String),
    #[error("self-rating {0} outside 1-5")]
    RatingOutOfRange(i64),
    #[error("invalid pipeline config: {0}")]
    BadConfig(String),
    #[error("retrieval failed: {0}")]
    Retrieval(#[from] crate::index::IndexError),
}

/// A pipeline failure with whatever rounds completed before it, for
/// diagnosis.
#[derive(Debug, Error)]
#[error("{source}")]
pub struct AbortedRun {
    #[source]
    pub source: PipelineError,
    pub partial: OrchestrationTrace,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentResponse {
    pub role: AgentRole,
    pub text: String,
    /// Populated for the workflow agent only.
    pub retrieved: Vec<SearchHit>,
    pub latency_ms: u64,
    pub round: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundRecord {
    pub round: u32,
    /// Exactly two entries: the tool agent's and the workflow agent's.
    pub specialist_responses: Vec<AgentResponse>,
    pub synthesized: String,
    pub self_rating: u8,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrchestrationTrace {
    pub query: String,
    pub rounds: Vec<RoundRecord>,
    pub final_answer: String,
    /// The round whose answer was returned.
    pub final_round: u32,
    pub config_snapshot: PipelineConfig,
    #[serde(default)]
    pub warnings: Vec<String>,
}

/// The named prompt template set. Templates are data: the built-in set is
/// embedded from `prompts/`, and any directory with the same file names can
/// replace it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PromptSet {
    pub tool_agent: String,
    pub workflow_agent: String,
    pub reasoning_agent: String,
    pub self_rate: String,
}

impl Default for PromptSet {
    fn default() -> Self {
        Self {
            tool_agent: include_str!("../prompts/tool_agent.txt").to_string(),
            workflow_agent: include_str!("../prompts/workflow_agent.txt").to_string(),
            reasoning_agent: include_str!("../prompts/reasoning_agent.txt").to_string(),
            self_rate: include_str!("../prompts/self_rate.txt").to_string(),
        }
    }
}

impl PromptSet {
    /// Load `tool_agent.txt`, `workflow_agent.txt`, `reasoning_agent.txt`,
    /// and `self_rate.txt` from a directory.
    pub fn load_dir(dir: &Path) -> std::io::Result<Self> {
        Ok(Self {
            tool_agent: std::fs::read_to_string(dir.join("tool_agent.txt"))?,
            workflow_agent: std::fs::read_to_string(dir.join("workflow_agent.txt"))?,
            reasoning_agent: std::fs::read_to_string(dir.join("reasoning_agent.txt"))?,
            self_rate: std::fs::read_to_string(dir.join("self_rate.txt"))?,
        })
    }
}

/// Replace `{{key}}` placeholders.
pub fn render_template(template: &str, vars: &[(&str, &str)]) -> String {
    let mut out = template.to_string();
    for (key, value) in vars {
        out = out.replace(&format!("{{{{{key}}}}}"), value);
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PipelineConfig {
    /// Self-rating that ends the loop, on the 1-5 scale.
    pub threshold: u8,
    pub max_rounds: u32,
    pub retrieval_k: usize,
    /// Return the last round's answer instead of the best-rated one.
    pub return_last: bool,
    pub prompts: PromptSet,
    pub gen: GenConfig,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            threshold: 4,
            max_rounds: 3,
            retrieval_k: crate::index::DEFAULT_RETRIEVAL_K,
            return_last: false,
            prompts: PromptSet::default(),
            gen: GenConfig::default(),
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<(), PipelineError> {
        if !(1..=5).contains(&self.threshold) {
            return Err(PipelineError::BadConfig("threshold must be in 1-5".into()));
        }
        if !(1..=10).contains(&self.max_rounds) {
            return Err(PipelineError::BadConfig("max_rounds must be in 1-10".into()));
        }
        if self.retrieval_k == 0 {
            return Err(PipelineError::BadConfig("retrieval_k must be at least 1".into()));
        }
        Ok(())
    }
}

/// Everything a pipeline run needs: one chat backend per agent role, plus
/// the retrieval index and its embedder.
pub struct PipelineDeps {
    pub tool_backend: Arc<dyn ChatBackend>,
    pub workflow_backend: Arc<dyn ChatBackend>,
    pub reasoning_backend: Arc<dyn ChatBackend>,
    pub index: Arc<VectorIndex>,
    pub embedder: Arc<dyn EmbeddingBackend>,
}

fn salt_line(round: u32) -> String {
    if round <= 1 {
        String::new()
    } else {
        format!("\n\nAttempt {round}: reconsider the question from scratch.")
    }
}

/// Ask the tool specialist. The prompt is the tool-agent system template
/// plus the bare query; no retrieval is attached.
pub fn ask_tool_agent(
    query: &str,
    backend: &dyn ChatBackend,
    config: &PipelineConfig,
    round: u32,
) -> Result<AgentResponse, PipelineError> {
    if query.trim().is_empty() {
        return Err(PipelineError::EmptyQuery);
    }
    let messages = [
        ChatMessage::system(render_template(&config.prompts.tool_agent, &[("round", &round.to_string())])),
        ChatMessage::user(format!("{query}{}", salt_line(round))),
    ];
    let start = Instant::now();
    let text = backend
        .complete(&messages, &config.gen)
        .map_err(|source| PipelineError::Agent { role: AgentRole::ToolAgent, source })?;
    Ok(AgentResponse {
        role: AgentRole::ToolAgent,
        text,
        retrieved: Vec::new(),
        latency_ms: start.elapsed().as_millis() as u64,
        round,
    })
}

/// Ask the workflow specialist: retrieve `retrieval_k` chunks for the query,
/// label each as a numbered context block, and complete with the augmented
/// prompt. An empty index degrades to a no-context prompt with a warning.
pub fn ask_workflow_agent(
    query: &str,
    index: &VectorIndex,
    backend: &dyn ChatBackend,
    embedder: &dyn EmbeddingBackend,
    config: &PipelineConfig,
    round: u32,
) -> Result<(AgentResponse, Option<String>), PipelineError> {
    if query.trim().is_empty() {
        return Err(PipelineError::EmptyQuery);
    }
    let mut warning = None;
    let hits = if index.is_empty() {
        warning = Some("workflow retrieval degraded: index is empty".to_string());
        Vec::new()
    } else {
        index.search(query, config.retrieval_k, embedder)?
    };

    let mut context = String::new();
    for (i, hit) in hits.iter().enumerate() {
        context.push_str(&format!("[{}] ({})\n{}\n\n", i + 1, hit.chunk_id, hit.chunk.text));
    }
    if context.is_empty() {
        context.push_str("(no retrieved context)\n\n");
    }
    let user = format!("{context}Question: {query}{}", salt_line(round));
    let messages = [
        ChatMessage::system(render_template(&config.prompts.workflow_agent, &[("round", &round.to_string())])),
        ChatMessage::user(user),
    ];
    let start = Instant::now();
    let text = backend
        .complete(&messages, &config.gen)
        .map_err(|source| PipelineError::Agent { role: AgentRole::WorkflowAgent, source })?;
    Ok((
        AgentResponse {
            role: AgentRole::WorkflowAgent,
            text,
            retrieved: hits,
            latency_ms: start.elapsed().as_millis() as u64,
            round,
        },
        warning,
    ))
}

/// Synthesize the final response: the reasoning prompt presents the query
/// and each specialist's output in its own labeled section, never merged.
pub fn synthesize(
    query: &str,
    responses: &[AgentResponse],
    backend: &dyn ChatBackend,
    config: &PipelineConfig,
) -> Result<String, PipelineError> {
    let tool = responses.iter().find(|r| r.role == AgentRole::ToolAgent);
    let workflow = responses.iter().find(|r| r.role == AgentRole::WorkflowAgent);
    let (Some(tool), Some(workflow)) = (tool, workflow) else {
        return Err(PipelineError::MissingSpecialist);
    };
    if responses.len() != 2 {
        return Err(PipelineError::MissingSpecialist);
    }
    let prompt = render_template(
        &config.prompts.reasoning_agent,
        &[
            ("query", query),
            ("tool_answer", &tool.text),
            ("workflow_answer", &workflow.text),
        ],
    );
    backend
        .complete(&[ChatMessage::user(prompt)], &config.gen)
        .map_err(|source| PipelineError::Agent { role: AgentRole::ReasoningAgent, source })
}

/// First contiguous digit run in the reply.
fn first_integer(reply: &str) -> Option<i64> {
    let digits: String = reply
        .chars()
        .skip_while(|c| !c.is_ascii_digit())
        .take_while(|c| c.is_ascii_digit())
        .collect();
    digits.parse().ok()
}

/// Ask the reasoning agent to rate an answer 1-5. The first integer token in
/// the reply is accepted; an unparsable reply is re-asked once before
/// erroring, and an out-of-range integer errors immediately.
pub fn self_rate(
    query: &str,
    answer: &str,
    backend: &dyn ChatBackend,
    config: &PipelineConfig,
) -> Result<u8, PipelineError> {
    if answer.trim().is_empty() {
        return Err(PipelineError::EmptyAnswer);
    }
    let prompt =
        render_template(&config.prompts.self_rate, &[("query", query), ("answer", answer)]);
    let messages = [ChatMessage::user(prompt)];
    let mut last_reply = String::new();
    for _ in 0..2 {
        let reply = backend
            .complete(&messages, &config.gen)
            .map_err(|source| PipelineError::Agent { role: AgentRole::ReasoningAgent, source })?;
        match first_integer(&reply) {
            Some(n @ 1..=5) => return Ok(n as u8),
            Some(n) => return Err(PipelineError::RatingOutOfRange(n)),
            None => last_reply = reply,
        }
    }
    Err(PipelineError::UnparsableRating(last_reply))
}

/// Run the full loop. Per round the two specialists run concurrently, each
/// seeing only the original query; the reasoning agent synthesizes and
/// rates; the loop stops at the first rating at or above the threshold or at
/// `max_rounds`. Any agent failure aborts with the partial trace attached.
pub fn run_pipeline(
    query: &str,
    config: &PipelineConfig,
    deps: &PipelineDeps,
) -> Result<OrchestrationTrace, Box<AbortedRun>> {
    let mut trace = OrchestrationTrace {
        query: query.to_string(),
        rounds: Vec::new(),
        final_answer: String::new(),
        final_round: 0,
        config_snapshot: config.clone(),
        warnings: Vec::new(),
    };
    let abort = |source: PipelineError, trace: &OrchestrationTrace| {
        Box::new(AbortedRun { source, partial: trace.clone() })
    };

    if let Err(e) = config.validate() {
        return Err(abort(e, &trace));
    }
    if query.trim().is_empty() {
        return Err(abort(PipelineError::EmptyQuery, &trace));
    }

    for round in 1..=config.max_rounds {
        let (tool_result, workflow_result) = std::thread::scope(|scope| {
            let tool = scope.spawn(|| ask_tool_agent(query, &*deps.tool_backend, config, round));
            let workflow = scope.spawn(|| {
                ask_workflow_agent(
                    query,
                    &deps.index,
                    &*deps.workflow_backend,
                    &*deps.embedder,
                    config,
                    round,
                )
            });
            (tool.join().expect("tool agent thread"), workflow.join().expect("workflow thread"))
        });

        let tool = tool_result.map_err(|e| abort(e, &trace))?;
        let (workflow, warning) = workflow_result.map_err(|e| abort(e, &trace))?;
        if let Some(w) = warning {
            trace.warnings.push(format!("round {round}: {w}"));
        }

        let specialists = vec![tool, workflow];
        let synthesized = synthesize(query, &specialists, &*deps.reasoning_backend, config)
            .map_err(|e| abort(e, &trace))?;
        let rating = self_rate(query, &synthesized, &*deps.reasoning_backend, config)
            .map_err(|e| abort(e, &trace))?;

        trace.rounds.push(RoundRecord {
            round,
            specialist_responses: specialists,
            synthesized,
            self_rating: rating,
        });

        if rating >= config.threshold {
            break;
        }
    }

    let chosen = if config.return_last {
        trace.rounds.last().expect("at least one round")
    } else {
        trace
            .rounds
            .iter()
            .max_by(|a, b| {
                // Earliest wins ties: strictly-greater comparison only.
                a.self_rating.cmp(&b.self_rating).then(b.round.cmp(&a.round))
            })
            .expect("at least one round")
    };
    trace.final_round = chosen.round;
    trace.final_answer = chosen.synthesized.clone();
    Ok(trace)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gateway::ScriptedBackend;
    use crate::index::HashEmbeddingBackend;

    fn empty_index_deps(
        tool: ScriptedBackend,
        workflow: ScriptedBackend,
        reasoning: ScriptedBackend,
    ) -> PipelineDeps {
        PipelineDeps {
            tool_backend: Arc::new(tool),
            workflow_backend: Arc::new(workflow),
            reasoning_backend: Arc::new(reasoning),
            index: Arc::new(VectorIndex::new(64)),
            embedder: Arc::new(HashEmbeddingBackend::default()),
        }
    }

    /// Reasoning backend scripted for `n` rounds: alternating synthesis
    /// replies and the given ratings.
    fn reasoning_script(ratings: &[u8]) -> ScriptedBackend {
        let mut replies = Vec::new();
        for (i, r) in ratings.iter().enumerate() {
            replies.push(format!("synthesized answer {}", i + 1));
            replies.push(r.to_string());
        }
        ScriptedBackend::queue(replies)
    }

    #[test]
    fn tool_agent_round_trip() {
        let backend = ScriptedBackend::queue(["Use FastQC"]);
        let out = ask_tool_agent("How to QC fastq?", &backend, &PipelineConfig::default(), 1)
            .unwrap();
        assert_eq!(out.role, AgentRole::ToolAgent);
        assert_eq!(out.text, "Use FastQC");
        assert!(out.retrieved.is_empty());
    }

    #[test]
    fn empty_query_rejected() {
        let backend = ScriptedBackend::queue(["x"]);
        let err =
            ask_tool_agent("  ", &backend, &PipelineConfig::default(), 1).unwrap_err();
        assert!(matches!(err, PipelineError::EmptyQuery));
    }

    #[test]
    fn synthesis_prompt_has_labeled_sections() {
        let echo = ScriptedBackend::echo();
        let responses = vec![
            AgentResponse {
                role: AgentRole::ToolAgent,
                text: "tool says A".into(),
                retrieved: vec![],
                latency_ms: 0,
                round: 1,
            },
            AgentResponse {
                role: AgentRole::WorkflowAgent,
                text: "workflow says B".into(),
                retrieved: vec![],
                latency_ms: 0,
                round: 1,
            },
        ];
        let out = synthesize("q?", &responses, &echo, &PipelineConfig::default()).unwrap();
        assert!(out.contains("TOOL AGENT"));
        assert!(out.contains("WORKFLOW AGENT"));
        assert!(out.contains("tool says A"));
        assert!(out.contains("workflow says B"));
    }

    #[test]
    fn synthesis_requires_both_specialists() {
        let echo = ScriptedBackend::echo();
        let only_tool = vec![AgentResponse {
            role: AgentRole::ToolAgent,
            text: "t".into(),
            retrieved: vec![],
            latency_ms: 0,
            round: 1,
        }];
        let err = synthesize("q", &only_tool, &echo, &PipelineConfig::default()).unwrap_err();
        assert!(matches!(err, PipelineError::MissingSpecialist));
    }

    #[test]
    fn rating_parses_first_integer() {
        let config = PipelineConfig::default();
        let plain = ScriptedBackend::queue(["4"]);
        assert_eq!(self_rate("q", "a", &plain, &config).unwrap(), 4);
        let wordy = ScriptedBackend::queue(["Rating: 3/5 because it is decent"]);
        assert_eq!(self_rate("q", "a", &wordy, &config).unwrap(), 3);
    }

    #[test]
    fn unparsable_rating_errors_after_reask() {
        let config = PipelineConfig::default();
        let backend = ScriptedBackend::queue(["excellent", "excellent"]);
        let err = self_rate("q", "a", &backend, &config).unwrap_err();
        assert!(matches!(err, PipelineError::UnparsableRating(_)));
        assert_eq!(backend.calls(), 2);
    }

    #[test]
    fn out_of_range_rating_errors() {
        let config = PipelineConfig::default();
        let backend = ScriptedBackend::queue(["10"]);
        let err = self_rate("q", "a", &backend, &config).unwrap_err();
        assert!(matches!(err, PipelineError::RatingOutOfRange(10)));
    }

    #[test]
    fn immediate_pass_stops_after_one_round() {
        let deps = empty_index_deps(
            ScriptedBackend::constant("tool answer"),
            ScriptedBackend::constant("workflow answer"),
            reasoning_script(&[4]),
        );
        let trace = run_pipeline("q?", &PipelineConfig::default(), &deps).unwrap();
        assert_eq!(trace.rounds.len(), 1);
        assert_eq!(trace.final_round, 1);
        assert_eq!(trace.rounds[0].self_rating, 4);
    }

    #[test]
    fn rising_ratings_run_to_pass_on_round_three() {
        let deps = empty_index_deps(
            ScriptedBackend::constant("tool answer"),
            ScriptedBackend::constant("workflow answer"),
            reasoning_script(&[2, 3, 5]),
        );
        let trace = run_pipeline("q?", &PipelineConfig::default(), &deps).unwrap();
        assert_eq!(trace.rounds.len(), 3);
        assert_eq!(trace.final_round, 3);
        assert_eq!(trace.final_answer, "synthesized answer 3");
    }

    #[test]
    fn falling_ratings_return_best_so_far() {
        let deps = empty_index_deps(
            ScriptedBackend::constant("tool answer"),
            ScriptedBackend::constant("workflow answer"),
            reasoning_script(&[3, 2, 1]),
        );
        let trace = run_pipeline("q?", &PipelineConfig::default(), &deps).unwrap();
        assert_eq!(trace.rounds.len(), 3);
        assert_eq!(trace.final_round, 1);
        assert_eq!(trace.final_answer, "synthesized answer 1");
    }

    #[test]
    fn return_last_flag_overrides_best() {
        let deps = empty_index_deps(
            ScriptedBackend::constant("tool answer"),
            ScriptedBackend::constant("workflow answer"),
            reasoning_script(&[3, 2, 1]),
        );
        let config = PipelineConfig { return_last: true, ..Default::default() };
        let trace = run_pipeline("q?", &config, &deps).unwrap();
        assert_eq!(trace.final_round, 3);
    }

    #[test]
    fn agent_failure_carries_partial_trace() {
        // Reasoning queue runs dry in round two.
        let deps = empty_index_deps(
            ScriptedBackend::constant("tool answer"),
            ScriptedBackend::constant("workflow answer"),
            reasoning_script(&[2]),
        );
        let err = run_pipeline("q?", &PipelineConfig::default(), &deps).unwrap_err();
        assert_eq!(err.partial.rounds.len(), 1);
        assert!(matches!(
            err.source,
            PipelineError::Agent { role: AgentRole::ReasoningAgent, .. }
        ));
    }

    #[test]
    fn empty_index_degrades_with_warning() {
        let deps = empty_index_deps(
            ScriptedBackend::constant("tool answer"),
            ScriptedBackend::constant("workflow answer"),
            reasoning_script(&[5]),
        );
        let trace = run_pipeline("q?", &PipelineConfig::default(), &deps).unwrap();
        assert_eq!(trace.warnings.len(), 1);
        assert!(trace.warnings[0].contains("index is empty"));
    }

    #[test]
    fn trace_serializes_and_reloads() {
        let deps = empty_index_deps(
            ScriptedBackend::constant("tool answer"),
            ScriptedBackend::constant("workflow answer"),
            reasoning_script(&[4]),
        );
        let trace = run_pipeline("q?", &PipelineConfig::default(), &deps).unwrap();
        let json = serde_json::to_string_pretty(&trace).unwrap();
        let reloaded: OrchestrationTrace = serde_json::from_str(&json).unwrap();
        assert_eq!(trace, reloaded);
    }
}
