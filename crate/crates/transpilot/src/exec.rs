//! Test-suite execution glue shared by the agents.
//!
//! Wraps the instrumenter's prepare/run machinery into suite-level
//! operations: run a candidate over every test and judge outputs, or
//! run an instrumented program over every test and bundle the traces.
//! All judging goes through [`trace::outputs_match`], so a target is
//! accepted exactly when its observable output matches the source's,
//! JSON-canonically where both sides parse as JSON.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::instrument::{self, InstrumentedProgram};
use crate::lang::{InputEncoding, SourceUnit};
use crate::runner::{Limits, RunResult, Toolchains};
use crate::trace::{self, FloatTolerance, TraceBundle};

/// One executable test: an encoded input and the output the source
/// program produced on it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TestCase {
    /// Suite ordinal t_k, 1-based.
    pub id: usize,
    /// For `args` encoding, a JSON argument array; for `stdin`, raw text.
    pub input: String,
    /// Canonical expected output, derived from source execution.
    pub expected_output: String,
}

/// A program staged under a working directory: driver attached, written
/// to disk, compiled when the language needs it.
pub struct StagedProgram {
    prepared: instrument::PreparedProgram,
}

/// Attach the task's I/O driver and write/compile the program once.
pub fn stage(
    tc: &Toolchains,
    unit: &SourceUnit,
    encoding: InputEncoding,
    workdir: &Path,
    limits: Limits,
) -> Result<StagedProgram> {
    let full = instrument::with_driver(unit, encoding)?;
    let prepared = instrument::prepare_program(tc, unit.language, &full, workdir, limits)?;
    Ok(StagedProgram { prepared })
}

impl StagedProgram {
    /// One run; both encodings deliver the input text on stdin.
    pub fn run(&self, tc: &Toolchains, input: &str, limits: Limits) -> Result<RunResult> {
        self.prepared.run(tc, Some(input), limits)
    }
}

/// Judgment for one test of one candidate program.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestOutcome {
    pub test_id: usize,
    pub passed: bool,
    /// Program stdout with any probe lines stripped.
    pub actual: String,
    pub clean_exit: bool,
    pub duration_ms: u64,
}

/// Suite-level verdict.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteOutcome {
    pub outcomes: Vec<TestOutcome>,
    pub all_passed: bool,
}

impl SuiteOutcome {
    pub fn passed_count(&self) -> usize {
        self.outcomes.iter().filter(|o| o.passed).count()
    }

    /// Ids of failing tests, in suite order.
    pub fn failing(&self) -> Vec<usize> {
        self.outcomes
            .iter()
            .filter(|o| !o.passed)
            .map(|o| o.test_id)
            .collect()
    }
}

/// Run `unit` against the whole suite and judge each output against the
/// test's expectation.
pub fn run_suite(
    tc: &Toolchains,
    unit: &SourceUnit,
    encoding: InputEncoding,
    suite: &[TestCase],
    workdir: &Path,
    limits: Limits,
    tol: FloatTolerance,
) -> Result<SuiteOutcome> {
    let staged = stage(tc, unit, encoding, workdir, limits)?;
    let mut outcomes = Vec::with_capacity(suite.len());
    for test in suite {
        let run = staged.run(tc, &test.input, limits)?;
        let actual = trace::strip_trace(&run.stdout);
        let passed =
            run.clean_exit() && trace::outputs_match(&test.expected_output, &actual, tol);
        outcomes.push(TestOutcome {
            test_id: test.id,
            passed,
            actual,
            clean_exit: run.clean_exit(),
            duration_ms: run.duration_ms,
        });
    }
    let all_passed = outcomes.iter().all(|o| o.passed);
    Ok(SuiteOutcome {
        outcomes,
        all_passed,
    })
}

/// Run an instrumented program over the suite and parse one execution
/// trace per test. Crashing or timing out on a test is a normal outcome
/// here: the trace gains its synthetic null instance and localization
/// takes over.
pub fn collect_traces(
    tc: &Toolchains,
    instrumented: &InstrumentedProgram,
    entry_name: &str,
    encoding: InputEncoding,
    suite: &[TestCase],
    workdir: &Path,
    limits: Limits,
) -> Result<TraceBundle> {
    let unit = SourceUnit::new(instrumented.language, instrumented.text.clone(), entry_name);
    let staged = stage(tc, &unit, encoding, workdir, limits)?;
    let mut bundle = TraceBundle::default();
    for test in suite {
        let run = staged.run(tc, &test.input, limits)?;
        let trace = trace::parse_trace_output(&run.stdout, run.clean_exit(), test.id)?;
        bundle.insert(trace);
    }
    Ok(bundle)
}
