//! Unified error type for the pipeline.
//!
//! Agents and infrastructure share one error enum so that task results can
//! classify failures uniformly (`infra_error` vs. content-level failures that
//! flow into fix loops).

use crate::lang::SubjectLanguage;

/// Convenience alias used throughout the crate.
pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// The subject program does not parse.
    #[error("syntax error{}: {message}", fmt_line(.line))]
    Syntax { line: Option<usize>, message: String },

    /// The requested entry function is not defined in the program.
    #[error("entry function `{entry}` not found")]
    EntryNotFound { entry: String },

    /// A construct outside the supported subject subset (e.g. `match`,
    /// `switch`, `do/while`, inline single-line suites).
    #[error("unsupported construct at line {line}: {construct}")]
    UnsupportedConstruct { line: usize, construct: String },

    /// A probe could not be placed for the given block.
    #[error("cannot instrument block {block_id}: {reason}")]
    InstrumentationFailure { block_id: usize, reason: String },

    /// Required toolchain binary is missing or not executable.
    #[error("toolchain for {language} unavailable: {detail}")]
    ToolchainMissing {
        language: SubjectLanguage,
        detail: String,
    },

    /// A toolchain invocation (not the subject program) timed out.
    #[error("toolchain invocation timed out after {ms} ms")]
    ToolchainTimeout { ms: u64 },

    /// An operation is not supported for this subject language in the
    /// current build/environment (e.g. Java execution without a JDK).
    #[error("{operation} is not supported for {language}: {detail}")]
    CapabilityUnsupported {
        language: SubjectLanguage,
        operation: String,
        detail: String,
    },

    /// A sentinel-prefixed stdout line failed to parse as a trace record.
    #[error("malformed trace line {line_no}: {detail}")]
    MalformedTraceLine { line_no: usize, detail: String },

    /// The chat backend cannot serve requests (transport/auth/protocol).
    #[error("LLM backend unavailable: {detail}")]
    BackendUnavailable { detail: String, transient: bool },

    /// The replay store has no transcript for this request digest.
    #[error("replay miss for request digest {digest}")]
    ReplayMiss { digest: String },

    /// A prompt template slot was left unfilled.
    #[error("prompt template `{template}` is missing slot `{name}`")]
    MissingSlot { template: String, name: String },

    /// No fenced code region could be extracted from a model response,
    /// even after one re-prompt.
    #[error("no code region found in model response for `{label}`")]
    ExtractionFailure { label: String },

    /// The alignment response could not be parsed even after a re-prompt.
    #[error("could not parse block mapping: {detail}")]
    MappingParseFailure { detail: String },

    /// The alignment response violates mapping invariants irreparably.
    #[error("invalid block mapping: {reason}")]
    MappingInvalid { reason: String },

    /// Source and target traces cannot be compared index-for-index.
    #[error("traces misaligned for test `{test_id}` at instance {seq}: {detail}")]
    TraceMisaligned {
        test_id: String,
        seq: usize,
        detail: String,
    },

    /// A semantic patch produced a program that no longer passes syntax
    /// validation; the patch is rejected.
    #[error("spliced program fails syntax check: {detail}")]
    SpliceSyntaxError { detail: String },

    /// Test generation produced no input on which the source runs cleanly.
    #[error("no valid test inputs survived source execution")]
    NoValidTests,

    /// A benchmark directory contains no task manifests.
    #[error("no task manifests found under {dir}")]
    EmptyBenchmark { dir: String },

    /// Malformed task manifest or pipeline configuration.
    #[error("configuration error: {detail}")]
    Config { detail: String },

    /// Wrapper for toolchain/backend faults surfaced by the orchestrator.
    #[error("infrastructure error: {detail}")]
    Infra { detail: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// True when retrying the same operation could plausibly succeed
    /// (used by the LLM client's bounded retry loop).
    pub fn is_transient(&self) -> bool {
        matches!(
            self,
            Error::BackendUnavailable {
                transient: true,
                ..
            }
        )
    }
}

fn fmt_line(line: &Option<usize>) -> String {
    match line {
        Some(n) => format!(" at line {n}"),
        None => String::new(),
    }
}
