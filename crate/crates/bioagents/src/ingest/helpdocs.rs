//! Command-line help capture, through a pluggable provider: a live provider
//! that runs containerized tools, or a fixture provider reading captured
//! text files.

use std::collections::VecDeque;
use std::path::PathBuf;
use std::process::Command;
use std::sync::Mutex;

use super::{HelpDoc, HelpSource, ToolRecord};

/// Help flags tried against a live container, in order; the first invocation
/// with non-empty captured output wins.
pub const HELP_FLAG_ORDER: [&[&str]; 3] = [&["--help"], &["-h"], &[]];

/// Yields the help text for one `(tool, version)` pair.
pub trait HelpProvider: Send + Sync {
    /// Whether the provider can run at all (e.g. a container runtime is on
    /// PATH). When false, whole tools are skipped with a warning.
    fn available(&self) -> bool;
    fn source(&self) -> HelpSource;
    fn help_text(&self, tool: &str, version: &str) -> Result<String, String>;
}

/// Reads captured help output from `<root>/<tool>/<version>.txt`.
pub struct FixtureHelpProvider {
    root: PathBuf,
}

impl FixtureHelpProvider {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        Self { root: root.into() }
    }
}

impl HelpProvider for FixtureHelpProvider {
    fn available(&self) -> bool {
        self.root.is_dir()
    }

    fn source(&self) -> HelpSource {
        HelpSource::Fixture
    }

    fn help_text(&self, tool: &str, version: &str) -> Result<String, String> {
        let path = self.root.join(tool).join(format!("{version}.txt"));
        std::fs::read_to_string(&path).map_err(|e| format!("{}: {e}", path.display()))
    }
}

/// Runs `docker run --rm <registry>/<tool>:<version>` with each help flag in
/// [`HELP_FLAG_ORDER`], capturing stdout and stderr.
pub struct ContainerHelpProvider {
    runtime: String,
    image_prefix: String,
}

impl ContainerHelpProvider {
    pub fn new() -> Self {
        Self {
            runtime: "docker".to_string(),
            image_prefix: "quay.io/biocontainers".to_string(),
        }
    }

    pub fn with_runtime(mut self, runtime: impl Into<String>) -> Self {
        self.runtime = runtime.into();
        self
    }

    pub fn with_image_prefix(mut self, prefix: impl Into<String>) -> Self {
        self.image_prefix = prefix.into();
        self
    }
}

impl Default for ContainerHelpProvider {
    fn default() -> Self {
        Self::new()
    }
}

impl HelpProvider for ContainerHelpProvider {
    fn available(&self) -> bool {
        Command::new(&self.runtime)
            .arg("--version")
            .output()
            .map(|o| o.status.success())
            .unwrap_or(false)
    }

    fn source(&self) -> HelpSource {
        HelpSource::LiveContainer
    }

    fn help_text(&self, tool: &str, version: &str) -> Result<String, String> {
        let image = format!("{}/{tool}:{version}", self.image_prefix);
        let mut last_err = String::new();
        for flags in HELP_FLAG_ORDER {
            let output = Command::new(&self.runtime)
                .args(["run", "--rm", &image, tool])
                .args(flags)
                .output()
                .map_err(|e| format!("{} not runnable: {e}", self.runtime))?;
            let mut text = String::from_utf8_lossy(&output.stdout).into_owned();
            text.push_str(&String::from_utf8_lossy(&output.stderr));
            if !text.trim().is_empty() {
                return Ok(text);
            }
            last_err = format!("empty output with flags {flags:?}");
        }
        Err(last_err)
    }
}

/// Per-tool collection result: the captured docs plus the versions that
/// yielded nothing, with reasons.
#[derive(Debug, Clone, Default)]
pub struct CollectedHelp {
    pub docs: Vec<HelpDoc>,
    pub skipped: Vec<(String, String)>,
}

/// Capture help docs for every version of one tool. Per-version failures and
/// empty outputs are recorded, not fatal; an unavailable provider skips the
/// whole tool with a warning.
pub fn collect_help_docs(tool: &ToolRecord, runner: &dyn HelpProvider) -> CollectedHelp {
    let mut collected = CollectedHelp::default();
    if !runner.available() {
        log::warn!("help provider unavailable; skipping tool {}", tool.name);
        return collected;
    }
    for version in &tool.versions {
        match runner.help_text(&tool.name, version) {
            Ok(text) if !text.trim().is_empty() => collected.docs.push(HelpDoc {
                tool_name: tool.name.clone(),
                version: version.clone(),
                text,
                source: runner.source(),
            }),
            Ok(_) => collected.skipped.push((version.clone(), "empty help output".into())),
            Err(reason) => collected.skipped.push((version.clone(), reason)),
        }
    }
    collected
}

/// Fill `help_docs` for a batch of tools, running up to `max_in_flight`
/// provider calls concurrently. Results are merged back in input order, so
/// the output is deterministic.
pub fn collect_help_docs_all(
    tools: Vec<ToolRecord>,
    runner: &dyn HelpProvider,
    max_in_flight: usize,
) -> Vec<ToolRecord> {
    let work: Mutex<VecDeque<(usize, ToolRecord)>> =
        Mutex::new(tools.into_iter().enumerate().collect());
    let total = work.lock().unwrap().len();
    let done: Mutex<Vec<Option<ToolRecord>>> = Mutex::new(vec![None; total]);

    std::thread::scope(|scope| {
        for _ in 0..max_in_flight.max(1).min(total.max(1)) {
            scope.spawn(|| loop {
                let item = work.lock().unwrap().pop_front();
                let Some((idx, mut tool)) = item else { break };
                tool.help_docs = collect_help_docs(&tool, runner).docs;
                done.lock().unwrap()[idx] = Some(tool);
            });
        }
    });

    done.into_inner().unwrap().into_iter().flatten().collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fixture_root() -> PathBuf {
        PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures/help")
    }

    fn tool(name: &str, versions: &[&str]) -> ToolRecord {
        ToolRecord {
            name: name.to_string(),
            rank: 1,
            downloads: 0,
            versions: versions.iter().map(|v| v.to_string()).collect(),
            help_docs: Vec::new(),
        }
    }

    #[test]
    fn fixture_provider_skips_empty_version() {
        let provider = FixtureHelpProvider::new(fixture_root());
        let collected =
            collect_help_docs(&tool("fastqc", &["0.11.9", "0.12.0", "0.12.1"]), &provider);
        assert_eq!(collected.docs.len(), 2);
        assert_eq!(collected.skipped.len(), 1);
        assert_eq!(collected.skipped[0].0, "0.12.1");
        assert!(collected.docs.iter().all(|d| d.source == HelpSource::Fixture));
    }

    #[test]
    fn zero_versions_yields_nothing() {
        let provider = FixtureHelpProvider::new(fixture_root());
        let collected = collect_help_docs(&tool("samtools", &[]), &provider);
        assert!(collected.docs.is_empty());
        assert!(collected.skipped.is_empty());
    }

    #[test]
    fn unavailable_provider_skips_whole_tool() {
        let provider = FixtureHelpProvider::new("/nonexistent/help");
        let collected = collect_help_docs(&tool("samtools", &["1.9"]), &provider);
        assert!(collected.docs.is_empty());
    }

    #[test]
    fn batch_collection_preserves_order() {
        let provider = FixtureHelpProvider::new(fixture_root());
        let tools = vec![
            tool("samtools", &["1.9", "1.17"]),
            tool("bwa", &["0.7.17", "0.7.18"]),
        ];
        let filled = collect_help_docs_all(tools, &provider, 4);
        assert_eq!(filled[0].name, "samtools");
        assert_eq!(filled[0].help_docs.len(), 2);
        assert_eq!(filled[1].name, "bwa");
        assert_eq!(filled[1].help_docs.len(), 2);
    }

    #[test]
    fn live_container_help_when_runtime_present() {
        let provider = ContainerHelpProvider::new();
        if !provider.available() {
            eprintln!("no container runtime on PATH; skipping live capture test");
            return;
        }
        let collected = collect_help_docs(&tool("samtools", &["1.17--h00cdaf9_0"]), &provider);
        if let Some(doc) = collected.docs.first() {
            assert_eq!(doc.source, HelpSource::LiveContainer);
            assert!(!doc.text.trim().is_empty());
        }
    }
}
