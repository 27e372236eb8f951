//! Task orchestration: manifests in, artifacts and benchmark reports out.
//!
//! [`run_task`] drives one translation through the agent chain (suite
//! assembly, direct translation, syntax fixing, block alignment, semantic
//! fixing) under a wall-clock budget, then persists everything a
//! post-mortem needs under `<out_dir>/<task_id>/`. [`run_benchmark`] fans
//! tasks out over a small worker pool and aggregates computational
//! accuracy per language pair.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use crate::aligner::{self, MappingReport};
use crate::error::{Error, Result};
use crate::exec::{self, TestCase};
use crate::frontend::{self, BlockPartition};
use crate::instrument;
use crate::lang::{InputEncoding, SourceUnit, SubjectLanguage};
use crate::llm::{LlmClient, LlmSettings};
use crate::runner::{Limits, Toolchains};
use crate::semantic_fixer::{self, FixAttemptLog, SemanticContext, SemanticOutcome};
use crate::syntax_fixer::{self, SyntaxAttempt, SyntaxStop};
use crate::trace::FloatTolerance;
use crate::translator::{self, ProvidedTest, TestGenReport, TranslationTask};

/// Outer translate→fix rounds before a task is abandoned.
pub const DEFAULT_OUTER_ITERATIONS: usize = 3;

// ---------- configuration ----------

/// Whole-pipeline configuration, loaded from a single TOML file. Every
/// field has a default, so an empty file is a valid configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PipelineConfig {
    pub llm: LlmSettings,
    pub budgets: Budgets,
    pub timeouts: Timeouts,
    pub tests: TestPolicy,
    pub tolerance: FloatTolerance,
    /// Artifact root; each task writes under `<out_dir>/<task_id>/`.
    pub out_dir: PathBuf,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            llm: LlmSettings::default(),
            budgets: Budgets::default(),
            timeouts: Timeouts::default(),
            tests: TestPolicy::default(),
            tolerance: FloatTolerance::default(),
            out_dir: PathBuf::from("out"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct Budgets {
    /// Syntax-fix attempts per syntax pass.
    pub syntax_iterations: usize,
    /// Global semantic patch-generation budget per semantic pass.
    pub semantic_patches: usize,
    /// Patch attempts per localized block.
    pub per_block_attempts: usize,
    /// Outer syntax-pass + semantic-pass rounds.
    pub outer_iterations: usize,
}

impl Default for Budgets {
    fn default() -> Self {
        Budgets {
            syntax_iterations: syntax_fixer::DEFAULT_BUDGET,
            semantic_patches: semantic_fixer::DEFAULT_PATCH_BUDGET,
            per_block_attempts: semantic_fixer::DEFAULT_BLOCK_ATTEMPTS,
            outer_iterations: DEFAULT_OUTER_ITERATIONS,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct Timeouts {
    /// Per-subprocess run timeout.
    pub run_timeout_ms: u64,
    /// Whole-task wall-clock budget.
    pub task_budget_ms: u64,
    pub max_output_bytes: usize,
}

impl Default for Timeouts {
    fn default() -> Self {
        let limits = Limits::default();
        Timeouts {
            run_timeout_ms: limits.run_timeout_ms,
            task_budget_ms: 120_000,
            max_output_bytes: limits.max_output_bytes,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct TestPolicy {
    /// Model-proposed inputs to request on top of manifest tests; zero
    /// runs on manifest tests alone.
    pub generated: usize,
}

impl Default for TestPolicy {
    fn default() -> Self {
        TestPolicy {
            generated: translator::DEFAULT_GENERATED,
        }
    }
}

impl PipelineConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::Config {
            detail: format!("cannot read {}: {e}", path.display()),
        })?;
        let config: PipelineConfig = toml::from_str(&text).map_err(|e| Error::Config {
            detail: format!("{}: {e}", path.display()),
        })?;
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |name: &str, v: usize| {
            if v == 0 {
                Err(Error::Config {
                    detail: format!("budgets.{name} must be at least 1"),
                })
            } else {
                Ok(())
            }
        };
        positive("syntax_iterations", self.budgets.syntax_iterations)?;
        positive("semantic_patches", self.budgets.semantic_patches)?;
        positive("per_block_attempts", self.budgets.per_block_attempts)?;
        positive("outer_iterations", self.budgets.outer_iterations)?;
        if self.timeouts.run_timeout_ms == 0 || self.timeouts.task_budget_ms == 0 {
            return Err(Error::Config {
                detail: "timeouts must be positive".to_string(),
            });
        }
        Ok(())
    }

    pub fn limits(&self) -> Limits {
        Limits {
            run_timeout_ms: self.timeouts.run_timeout_ms,
            max_output_bytes: self.timeouts.max_output_bytes,
        }
    }
}

// ---------- task manifests ----------

/// `task.json`, as found in a task directory next to `source.<ext>`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskManifest {
    pub id: String,
    pub source_language: SubjectLanguage,
    pub target_language: SubjectLanguage,
    pub entry_name: String,
    pub input_encoding: InputEncoding,
    #[serde(default)]
    pub tests: Vec<ProvidedTest>,
}

#[derive(Debug, Clone)]
pub struct LoadedTask {
    pub manifest: TaskManifest,
    pub source: SourceUnit,
    pub dir: PathBuf,
}

/// Read a task directory: the manifest plus the source program it names.
pub fn load_task(dir: &Path) -> Result<LoadedTask> {
    let manifest_path = dir.join("task.json");
    let raw = fs::read_to_string(&manifest_path).map_err(|e| Error::Config {
        detail: format!("cannot read {}: {e}", manifest_path.display()),
    })?;
    let manifest: TaskManifest = serde_json::from_str(&raw).map_err(|e| Error::Config {
        detail: format!("{}: {e}", manifest_path.display()),
    })?;
    if manifest.id.trim().is_empty() {
        return Err(Error::Config {
            detail: format!("{}: task id is empty", manifest_path.display()),
        });
    }
    let source_path = dir.join(format!(
        "source.{}",
        manifest.source_language.file_extension()
    ));
    let text = fs::read_to_string(&source_path).map_err(|e| Error::Config {
        detail: format!("cannot read {}: {e}", source_path.display()),
    })?;
    let source = SourceUnit::new(manifest.source_language, text, &manifest.entry_name);
    Ok(LoadedTask {
        manifest,
        source,
        dir: dir.to_path_buf(),
    })
}

// ---------- results ----------

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TaskStatus {
    /// The final program passes every test in the suite.
    PassAll,
    /// The syntax fixer could not reach a compiling program.
    SyntaxFail,
    /// The program compiles but the suite still fails.
    SemanticFail,
    /// Toolchain, backend, or IO fault; the verdict says nothing about
    /// the translation itself.
    InfraError,
}

impl std::fmt::Display for TaskStatus {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            TaskStatus::PassAll => "pass_all",
            TaskStatus::SyntaxFail => "syntax_fail",
            TaskStatus::SemanticFail => "semantic_fail",
            TaskStatus::InfraError => "infra_error",
        })
    }
}

/// Everything `result.json` records about one task run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TaskResult {
    pub task_id: String,
    /// Absent when the manifest itself could not be read.
    pub source_language: Option<SubjectLanguage>,
    pub target_language: Option<SubjectLanguage>,
    pub status: TaskStatus,
    /// Last candidate program, present whenever translation produced code.
    pub final_program: Option<SourceUnit>,
    pub tests_total: usize,
    pub tests_passed: usize,
    pub outer_iterations_used: usize,
    /// Syntax-fix attempts summed over all passes.
    pub syntax_iterations_used: usize,
    /// Semantic patch generations summed over all passes.
    pub semantic_patches_used: usize,
    /// Completions served while this task ran.
    pub llm_calls: u64,
    pub stage_timings_ms: BTreeMap<String, u64>,
    pub wall_ms: u64,
    #[serde(default)]
    pub notes: Vec<String>,
    pub error: Option<String>,
}

impl TaskResult {
    fn blank(task_id: String) -> Self {
        TaskResult {
            task_id,
            source_language: None,
            target_language: None,
            status: TaskStatus::InfraError,
            final_program: None,
            tests_total: 0,
            tests_passed: 0,
            outer_iterations_used: 0,
            syntax_iterations_used: 0,
            semantic_patches_used: 0,
            llm_calls: 0,
            stage_timings_ms: BTreeMap::new(),
            wall_ms: 0,
            notes: Vec::new(),
            error: None,
        }
    }
}

/// One syntax pass as recorded in `fixlog.json`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SyntaxPassLog {
    pub outer_iteration: usize,
    pub clean: bool,
    pub iterations: usize,
    pub stop: SyntaxStop,
    pub attempts: Vec<SyntaxAttempt>,
}

/// `fixlog.json`: every fixing decision, in order, with no timestamps,
/// so two replay runs of the same task produce identical bytes.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct FixLog {
    pub syntax: Vec<SyntaxPassLog>,
    pub semantic: Vec<FixAttemptLog>,
}

#[derive(Serialize)]
struct TestsArtifact<'a> {
    suite: &'a [TestCase],
    generation: &'a TestGenReport,
}

// ---------- single-task execution ----------

/// Run one task directory end to end with a client built from the
/// configuration. Errors are returned only when the manifest cannot be
/// loaded or the LLM settings are unusable; everything after that is
/// folded into the [`TaskResult`].
pub fn run_task(task_dir: &Path, config: &PipelineConfig) -> Result<TaskResult> {
    let client = LlmClient::from_settings(&config.llm)?;
    run_task_with(task_dir, config, &client)
}

/// [`run_task`] with an injected client (tests drive this with scripted
/// backends). A panic anywhere in the stage chain is caught and reported
/// as an infrastructure error rather than unwinding into the caller.
pub fn run_task_with(
    task_dir: &Path,
    config: &PipelineConfig,
    client: &LlmClient,
) -> Result<TaskResult> {
    let loaded = load_task(task_dir)?;
    let outcome = std::panic::catch_unwind(std::panic::AssertUnwindSafe(|| {
        execute(&loaded, config, client)
    }));
    Ok(outcome.unwrap_or_else(|payload| {
        let detail = payload
            .downcast_ref::<&str>()
            .map(|s| s.to_string())
            .or_else(|| payload.downcast_ref::<String>().cloned())
            .unwrap_or_else(|| "opaque panic payload".to_string());
        let mut result = TaskResult::blank(loaded.manifest.id.clone());
        result.source_language = Some(loaded.manifest.source_language);
        result.target_language = Some(loaded.manifest.target_language);
        result.error = Some(format!("internal panic: {detail}"));
        result
    }))
}

fn execute(loaded: &LoadedTask, config: &PipelineConfig, client: &LlmClient) -> TaskResult {
    let started = Instant::now();
    let calls_before = client.calls();
    let mut result = TaskResult::blank(loaded.manifest.id.clone());
    result.source_language = Some(loaded.manifest.source_language);
    result.target_language = Some(loaded.manifest.target_language);

    let workdir = match tempfile::tempdir() {
        Ok(d) => d,
        Err(e) => {
            result.error = Some(format!("cannot create working directory: {e}"));
            result.wall_ms = started.elapsed().as_millis() as u64;
            return result;
        }
    };

    let mut run = TaskRun {
        loaded,
        config,
        client,
        tc: Toolchains::detect(),
        limits: config.limits(),
        deadline: started + Duration::from_millis(config.timeouts.task_budget_ms),
        workdir,
        timings: BTreeMap::new(),
        fixlog: FixLog::default(),
        suite: Vec::new(),
        test_report: TestGenReport::default(),
        partition: None,
        mapping_report: None,
        program: None,
        tests_passed: 0,
        outer_iterations_used: 0,
        notes: Vec::new(),
    };

    match run.drive() {
        Ok(status) => result.status = status,
        Err(e) => {
            result.status = TaskStatus::InfraError;
            result.error = Some(e.to_string());
        }
    }
    result.final_program = run.program.clone();
    result.tests_total = run.suite.len();
    result.tests_passed = run.tests_passed;
    result.outer_iterations_used = run.outer_iterations_used;
    result.syntax_iterations_used = run.fixlog.syntax.iter().map(|p| p.iterations).sum();
    result.semantic_patches_used = run.fixlog.semantic.iter().map(|l| l.attempts_spent).sum();
    result.notes.append(&mut run.notes);

    match result.status {
        // Both pass verdicts come straight from a full suite run.
        TaskStatus::PassAll => result.tests_passed = result.tests_total,
        TaskStatus::SyntaxFail | TaskStatus::SemanticFail => {
            run.reverify(&mut result);
        }
        TaskStatus::InfraError => {}
    }

    result.llm_calls = client.calls() - calls_before;
    result.wall_ms = started.elapsed().as_millis() as u64;
    result.stage_timings_ms = run.timings.clone();
    run.persist(&mut result);
    result
}

/// What a candidate suite run told the driver.
enum SuiteVerdict {
    AllPass,
    SomeFail,
    /// The candidate cannot even be staged or executed; the note says why.
    CannotRun(String),
}

struct TaskRun<'a> {
    loaded: &'a LoadedTask,
    config: &'a PipelineConfig,
    client: &'a LlmClient,
    tc: Toolchains,
    limits: Limits,
    deadline: Instant,
    workdir: tempfile::TempDir,
    timings: BTreeMap<String, u64>,
    fixlog: FixLog,
    suite: Vec<TestCase>,
    test_report: TestGenReport,
    partition: Option<BlockPartition>,
    mapping_report: Option<MappingReport>,
    program: Option<SourceUnit>,
    tests_passed: usize,
    outer_iterations_used: usize,
    notes: Vec<String>,
}

impl TaskRun<'_> {
    fn charge(&mut self, stage: &str, t0: Instant) {
        *self.timings.entry(stage.to_string()).or_insert(0) += t0.elapsed().as_millis() as u64;
    }

    fn over_deadline(&self) -> bool {
        Instant::now() >= self.deadline
    }

    /// The staged agent chain. `Err` here means infrastructure; every
    /// content-level dead end maps to a failure status instead.
    fn drive(&mut self) -> Result<TaskStatus> {
        let manifest = &self.loaded.manifest;
        self.tc.require(manifest.source_language)?;
        self.tc.require(manifest.target_language)?;

        // Suite assembly: manifest tests re-derived against the source,
        // plus generated inputs. The source is the oracle throughout.
        let t0 = Instant::now();
        let assembled = translator::generate_tests(
            self.client,
            &self.tc,
            &self.loaded.source,
            manifest.input_encoding,
            self.config.tests.generated,
            &manifest.tests,
            self.workdir.path(),
            self.limits,
            self.config.tolerance,
        );
        self.charge("tests", t0);
        let (suite, report) = assembled?;
        self.suite = suite;
        self.test_report = report;

        let t0 = Instant::now();
        let task = TranslationTask {
            source: self.loaded.source.clone(),
            target_language: manifest.target_language,
            encoding: manifest.input_encoding,
            tests: self.suite.clone(),
        };
        let translated = translator::translate(self.client, &task);
        self.charge("translate", t0);
        self.program = Some(translated?);

        for outer in 1..=self.config.budgets.outer_iterations {
            self.outer_iterations_used = outer;
            if self.over_deadline() {
                self.notes.push(format!(
                    "task budget of {} ms exhausted before iteration {outer}",
                    self.config.timeouts.task_budget_ms
                ));
                return Ok(TaskStatus::SemanticFail);
            }

            // Syntax pass.
            let candidate = self.program.clone().expect("translation set a candidate");
            let t0 = Instant::now();
            let fixed = syntax_fixer::fix_syntax(
                self.client,
                &self.tc,
                &candidate,
                self.config.budgets.syntax_iterations,
                self.limits,
            );
            self.charge("syntax", t0);
            let fixed = fixed?;
            self.fixlog.syntax.push(SyntaxPassLog {
                outer_iteration: outer,
                clean: fixed.clean,
                iterations: fixed.iterations,
                stop: fixed.stop.clone(),
                attempts: fixed.attempts.clone(),
            });
            if fixed.iterations > 0 {
                // The text changed line-wise; any earlier alignment is stale.
                self.mapping_report = None;
            }
            self.program = Some(fixed.program);
            if !fixed.clean {
                return Ok(TaskStatus::SyntaxFail);
            }

            // Run the suite before aligning: a passing candidate must not
            // cost a single alignment or fixing call.
            match self.run_candidate_suite()? {
                SuiteVerdict::AllPass => return Ok(TaskStatus::PassAll),
                SuiteVerdict::SomeFail => {}
                SuiteVerdict::CannotRun(note) => {
                    self.notes.push(note);
                    return Ok(TaskStatus::SemanticFail);
                }
            }
            if self.over_deadline() {
                self.notes.push(format!(
                    "task budget of {} ms exhausted before semantic stage",
                    self.config.timeouts.task_budget_ms
                ));
                return Ok(TaskStatus::SemanticFail);
            }

            // Align once per target text; semantic splices keep the
            // mapping current, so later iterations reuse it.
            if self.mapping_report.is_none() {
                if let Some(status) = self.align_candidate()? {
                    return Ok(status);
                }
            }

            match self.semantic_pass()? {
                Some(status) => return Ok(status),
                // next_block: the pass ran out of budget while still
                // advancing; a fresh iteration continues from its program.
                None => continue,
            }
        }
        Ok(TaskStatus::SemanticFail)
    }

    fn run_candidate_suite(&mut self) -> Result<SuiteVerdict> {
        let program = self.program.clone().expect("candidate exists");
        let t0 = Instant::now();
        let run = exec::run_suite(
            &self.tc,
            &program,
            self.loaded.manifest.input_encoding,
            &self.suite,
            self.workdir.path(),
            self.limits,
            self.config.tolerance,
        );
        self.charge("execute", t0);
        match run {
            Ok(outcome) => {
                self.tests_passed = outcome.passed_count();
                Ok(if outcome.all_passed {
                    SuiteVerdict::AllPass
                } else {
                    SuiteVerdict::SomeFail
                })
            }
            Err(e) if is_candidate_content_error(&e) => Ok(SuiteVerdict::CannotRun(format!(
                "candidate cannot be executed: {e}"
            ))),
            Err(e) => Err(e),
        }
    }

    /// Align the current candidate. `Ok(Some(status))` is a content-level
    /// dead end; `Ok(None)` means the mapping is ready.
    fn align_candidate(&mut self) -> Result<Option<TaskStatus>> {
        if self.partition.is_none() {
            // A source outside the supported subset is a task-input
            // fault, so the error propagates as infrastructure.
            let t0 = Instant::now();
            let partition = frontend::partition(&self.loaded.source);
            self.charge("align", t0);
            self.partition = Some(partition?);
        }
        let program = self.program.clone().expect("candidate exists");
        let t0 = Instant::now();
        let aligned = aligner::align(
            self.client,
            &self.loaded.source,
            self.partition.as_ref().expect("partition just set"),
            &program,
        );
        self.charge("align", t0);
        match aligned {
            Ok(report) => {
                self.mapping_report = Some(report);
                Ok(None)
            }
            Err(e) if is_candidate_content_error(&e) => {
                self.notes.push(format!("alignment failed: {e}"));
                Ok(Some(TaskStatus::SemanticFail))
            }
            Err(e) => Err(e),
        }
    }

    /// One semantic-fixing pass. `Ok(Some(status))` ends the task;
    /// `Ok(None)` asks for another outer iteration.
    fn semantic_pass(&mut self) -> Result<Option<TaskStatus>> {
        let program = self.program.clone().expect("candidate exists");
        let mapping = self
            .mapping_report
            .as_ref()
            .expect("aligned before semantic pass")
            .mapping
            .clone();
        let t0 = Instant::now();
        let fixed = {
            let ctx = SemanticContext {
                client: self.client,
                tc: &self.tc,
                source: &self.loaded.source,
                partition: self.partition.as_ref().expect("aligned"),
                encoding: self.loaded.manifest.input_encoding,
                suite: &self.suite,
                workdir: self.workdir.path(),
                limits: self.limits,
                tol: self.config.tolerance,
                block_attempts: self.config.budgets.per_block_attempts,
                patch_budget: self.config.budgets.semantic_patches,
            };
            semantic_fixer::fix_semantics(&ctx, &program, &mapping)
        };
        self.charge("semantic", t0);
        let fixed = match fixed {
            Ok(f) => f,
            Err(e) if is_candidate_content_error(&e) => {
                self.notes.push(format!("semantic stage aborted: {e}"));
                return Ok(Some(TaskStatus::SemanticFail));
            }
            Err(e) => return Err(e),
        };
        self.fixlog.semantic.push(fixed.log.clone());
        self.program = Some(fixed.program);
        if let Some(report) = self.mapping_report.as_mut() {
            report.mapping = fixed.mapping;
        }
        if fixed.all_tests_pass {
            return Ok(Some(TaskStatus::PassAll));
        }
        match fixed.log.outcome {
            SemanticOutcome::Failed => Ok(Some(TaskStatus::SemanticFail)),
            SemanticOutcome::Fixed | SemanticOutcome::NextBlock => Ok(None),
        }
    }

    /// Re-run the suite on the final candidate of a failed task so the
    /// reported pass count describes the program actually persisted.
    fn reverify(&mut self, result: &mut TaskResult) {
        if self.suite.is_empty() || self.over_deadline() {
            return;
        }
        let Some(program) = self.program.clone() else {
            return;
        };
        let t0 = Instant::now();
        let rerun = exec::run_suite(
            &self.tc,
            &program,
            self.loaded.manifest.input_encoding,
            &self.suite,
            self.workdir.path(),
            self.limits,
            self.config.tolerance,
        );
        self.charge("execute", t0);
        if let Ok(outcome) = rerun {
            result.tests_passed = outcome.passed_count();
            if outcome.all_passed {
                result.status = TaskStatus::PassAll;
                result
                    .notes
                    .push("final candidate passes the full suite; status upgraded".to_string());
            }
        }
    }

    /// Write the task's artifact directory. IO problems are noted on the
    /// result, never fatal. `result.json` goes last so it reflects every
    /// note the other writes produced.
    fn persist(&self, result: &mut TaskResult) {
        let dir = self.config.out_dir.join(&self.loaded.manifest.id);
        if let Err(e) = fs::create_dir_all(dir.join("traces")) {
            result.notes.push(format!(
                "cannot create artifact directory {}: {e}",
                dir.display()
            ));
            return;
        }
        if let Some(program) = &result.final_program {
            let name = format!("target.{}", program.language.file_extension());
            if let Err(e) = fs::write(dir.join(&name), &program.text) {
                result.notes.push(format!("cannot write {name}: {e}"));
            }
        }
        if let Some(report) = &self.mapping_report {
            write_json(&dir.join("mapping.json"), report, &mut result.notes);
        }
        write_json(&dir.join("fixlog.json"), &self.fixlog, &mut result.notes);
        write_json(
            &dir.join("tests.json"),
            &TestsArtifact {
                suite: &self.suite,
                generation: &self.test_report,
            },
            &mut result.notes,
        );
        self.persist_traces(&dir, result);
        write_json(&dir.join("result.json"), result, &mut Vec::new());
    }

    /// Best-effort final trace bundles for both sides, for post-mortems.
    fn persist_traces(&self, dir: &Path, result: &mut TaskResult) {
        let (Some(program), Some(report), Some(partition)) = (
            &result.final_program,
            &self.mapping_report,
            &self.partition,
        ) else {
            return;
        };
        if self.over_deadline() {
            result
                .notes
                .push("trace artifacts skipped: task budget exhausted".to_string());
            return;
        }
        let collected = (|| -> Result<()> {
            let encoding = self.loaded.manifest.input_encoding;
            let src_instr = instrument::instrument_source(&self.loaded.source, partition)?;
            let src = exec::collect_traces(
                &self.tc,
                &src_instr,
                &self.loaded.source.entry_name,
                encoding,
                &self.suite,
                self.workdir.path(),
                self.limits,
            )?;
            write_json(&dir.join("traces/source.json"), &src, &mut result.notes);
            let tgt_instr =
                instrument::instrument_target(program, &report.mapping.span_tuples())?;
            let tgt = exec::collect_traces(
                &self.tc,
                &tgt_instr,
                &program.entry_name,
                encoding,
                &self.suite,
                self.workdir.path(),
                self.limits,
            )?;
            write_json(&dir.join("traces/target.json"), &tgt, &mut result.notes);
            Ok(())
        })();
        if let Err(e) = collected {
            result.notes.push(format!("trace artifacts skipped: {e}"));
        }
    }
}

fn write_json<T: Serialize>(path: &Path, value: &T, notes: &mut Vec<String>) {
    let rendered = match serde_json::to_string_pretty(value) {
        Ok(s) => s,
        Err(e) => {
            notes.push(format!("cannot serialize {}: {e}", path.display()));
            return;
        }
    };
    if let Err(e) = fs::write(path, rendered + "\n") {
        notes.push(format!("cannot write {}: {e}", path.display()));
    }
}

/// Faults attributable to the translation (or the model's view of it)
/// rather than to the machine running the pipeline. These turn into
/// failure statuses; everything else propagates as infrastructure.
fn is_candidate_content_error(e: &Error) -> bool {
    matches!(
        e,
        Error::Syntax { .. }
            | Error::EntryNotFound { .. }
            | Error::UnsupportedConstruct { .. }
            | Error::InstrumentationFailure { .. }
            | Error::MalformedTraceLine { .. }
            | Error::TraceMisaligned { .. }
            | Error::SpliceSyntaxError { .. }
            | Error::ExtractionFailure { .. }
            | Error::MappingParseFailure { .. }
            | Error::MappingInvalid { .. }
    )
}

// ---------- benchmarks ----------

/// Aggregate over one source→target language pair.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PairReport {
    pub source_language: SubjectLanguage,
    pub target_language: SubjectLanguage,
    pub tasks: usize,
    pub pass_all: usize,
    pub computational_accuracy: f64,
    pub mean_wall_ms: u64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BenchmarkReport {
    pub pairs: Vec<PairReport>,
    pub total_tasks: usize,
    pub pass_all: usize,
    pub computational_accuracy: f64,
    pub results: Vec<TaskResult>,
}

impl BenchmarkReport {
    /// Fixed-width summary table for terminal output.
    pub fn render_table(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!(
            "{:<24} {:>6} {:>9} {:>7} {:>13}\n",
            "pair", "tasks", "pass_all", "CA", "mean wall ms"
        ));
        for p in &self.pairs {
            out.push_str(&format!(
                "{:<24} {:>6} {:>9} {:>7.3} {:>13}\n",
                format!(
                    "{} -> {}",
                    p.source_language.name(),
                    p.target_language.name()
                ),
                p.tasks,
                p.pass_all,
                p.computational_accuracy,
                p.mean_wall_ms,
            ));
        }
        out.push_str(&format!(
            "{:<24} {:>6} {:>9} {:>7.3}\n",
            "overall", self.total_tasks, self.pass_all, self.computational_accuracy
        ));
        out
    }
}

/// Fraction of tasks whose final program passes every test.
pub fn compute_ca(results: &[TaskResult]) -> f64 {
    if results.is_empty() {
        return 0.0;
    }
    let pass = results
        .iter()
        .filter(|r| r.status == TaskStatus::PassAll)
        .count();
    pass as f64 / results.len() as f64
}

/// Run every task directory under `dir` (any subdirectory holding a
/// `task.json`), `jobs` at a time, each with its own client.
pub fn run_benchmark(dir: &Path, config: &PipelineConfig, jobs: usize) -> Result<BenchmarkReport> {
    // Surface unusable LLM settings once, up front, instead of once per task.
    LlmClient::from_settings(&config.llm)?;
    run_benchmark_with(dir, config, jobs, &|| LlmClient::from_settings(&config.llm))
}

/// [`run_benchmark`] with an injected per-task client factory.
pub fn run_benchmark_with(
    dir: &Path,
    config: &PipelineConfig,
    jobs: usize,
    make_client: &(dyn Fn() -> Result<LlmClient> + Sync),
) -> Result<BenchmarkReport> {
    let mut task_dirs: Vec<PathBuf> = Vec::new();
    let entries = fs::read_dir(dir).map_err(|e| Error::Config {
        detail: format!("cannot read benchmark directory {}: {e}", dir.display()),
    })?;
    for entry in entries {
        let path = entry?.path();
        if path.is_dir() && path.join("task.json").is_file() {
            task_dirs.push(path);
        }
    }
    task_dirs.sort();
    if task_dirs.is_empty() {
        return Err(Error::EmptyBenchmark {
            dir: dir.display().to_string(),
        });
    }

    let jobs = jobs.clamp(1, task_dirs.len());
    let next = AtomicUsize::new(0);
    let collected: Mutex<Vec<(usize, TaskResult)>> = Mutex::new(Vec::new());
    std::thread::scope(|scope| {
        for _ in 0..jobs {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                let Some(task_dir) = task_dirs.get(i) else {
                    break;
                };
                let result = make_client()
                    .and_then(|client| run_task_with(task_dir, config, &client))
                    .unwrap_or_else(|e| failed_task(task_dir, &e));
                collected
                    .lock()
                    .expect("result collection poisoned")
                    .push((i, result));
            });
        }
    });
    let mut indexed = collected.into_inner().expect("result collection poisoned");
    indexed.sort_by_key(|(i, _)| *i);
    let results: Vec<TaskResult> = indexed.into_iter().map(|(_, r)| r).collect();
    Ok(summarize(results))
}

/// Result for a task that never got far enough to produce its own.
fn failed_task(task_dir: &Path, e: &Error) -> TaskResult {
    let task_id = task_dir
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_else(|| task_dir.display().to_string());
    let mut result = TaskResult::blank(task_id);
    result.error = Some(e.to_string());
    result
}

fn summarize(results: Vec<TaskResult>) -> BenchmarkReport {
    let mut groups: BTreeMap<String, Vec<&TaskResult>> = BTreeMap::new();
    for r in &results {
        if let (Some(s), Some(t)) = (r.source_language, r.target_language) {
            groups
                .entry(format!("{} -> {}", s.name(), t.name()))
                .or_default()
                .push(r);
        }
    }
    let pairs = groups
        .into_values()
        .map(|rs| {
            let pass = rs
                .iter()
                .filter(|r| r.status == TaskStatus::PassAll)
                .count();
            PairReport {
                source_language: rs[0].source_language.expect("grouped on Some"),
                target_language: rs[0].target_language.expect("grouped on Some"),
                tasks: rs.len(),
                pass_all: pass,
                computational_accuracy: pass as f64 / rs.len() as f64,
                mean_wall_ms: rs.iter().map(|r| r.wall_ms).sum::<u64>() / rs.len() as u64,
            }
        })
        .collect();
    let pass_all = results
        .iter()
        .filter(|r| r.status == TaskStatus::PassAll)
        .count();
    BenchmarkReport {
        pairs,
        total_tasks: results.len(),
        pass_all,
        computational_accuracy: compute_ca(&results),
        results,
    }
}
