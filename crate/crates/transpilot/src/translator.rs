//! Initial code translator: test-suite assembly plus direct translation.
//!
//! The source program is the oracle. Whatever a test's manifest claims,
//! its expected output is what the source actually prints on that input;
//! a disagreeing manifest expectation is kept as a warning, not trusted.
//! Model-proposed inputs earn a place in the suite only by running
//! cleanly against the source. The assembled suite then rides along in
//! the translation prompt and stays fixed for the rest of the pipeline.

use std::collections::BTreeSet;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::{self, StagedProgram, TestCase};
use crate::lang::{InputEncoding, SourceUnit, SubjectLanguage};
use crate::llm::{extract_code, prompts, LlmClient};
use crate::runner::{Limits, Toolchains};
use crate::trace::{self, CanonicalValue, FloatTolerance};

/// Number of model-proposed inputs requested per task.
pub const DEFAULT_GENERATED: usize = 5;
/// Cap on manifest-supplied tests folded into the suite.
pub const MAX_PROVIDED: usize = 10;

/// A manifest-supplied test before validation.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProvidedTest {
    pub input: String,
    pub expected_output: String,
}

/// The unit of work flowing into translation and onward through the
/// fix loops: source program, target language, and the frozen suite.
#[derive(Debug, Clone)]
pub struct TranslationTask {
    pub source: SourceUnit,
    pub target_language: SubjectLanguage,
    pub encoding: InputEncoding,
    pub tests: Vec<TestCase>,
}

/// Bookkeeping from suite assembly, persisted with task artifacts.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TestGenReport {
    pub provided_kept: usize,
    pub provided_dropped: usize,
    pub generated_kept: usize,
    pub generated_dropped: usize,
    pub warnings: Vec<String>,
}

/// Assemble the task's test suite.
///
/// Manifest tests come first (capped at [`MAX_PROVIDED`]), then up to
/// `generated_count` model-proposed inputs (zero skips the model call
/// entirely). Every input is executed against the source: a crash or
/// timeout drops the test, a clean run defines its expected output.
/// Duplicate inputs (after canonicalizing `args` arrays) are dropped.
/// Ids are assigned 1..=N in final order.
#[allow(clippy::too_many_arguments)]
pub fn generate_tests(
    client: &LlmClient,
    tc: &Toolchains,
    source: &SourceUnit,
    encoding: InputEncoding,
    generated_count: usize,
    provided: &[ProvidedTest],
    workdir: &Path,
    limits: Limits,
    tol: FloatTolerance,
) -> Result<(Vec<TestCase>, TestGenReport)> {
    let staged = exec::stage(tc, source, encoding, workdir, limits)?;
    let mut report = TestGenReport::default();
    let mut seen: BTreeSet<String> = BTreeSet::new();
    let mut tests: Vec<TestCase> = Vec::new();

    if provided.len() > MAX_PROVIDED {
        report.warnings.push(format!(
            "manifest supplies {} tests; keeping the first {MAX_PROVIDED}",
            provided.len()
        ));
    }
    for p in provided.iter().take(MAX_PROVIDED) {
        let input = match normalize_input(&p.input, encoding) {
            Ok(i) => i,
            Err(detail) => {
                report.provided_dropped += 1;
                report.warnings.push(format!("dropped provided test: {detail}"));
                continue;
            }
        };
        if !seen.insert(input.clone()) {
            report.provided_dropped += 1;
            report
                .warnings
                .push(format!("dropped provided test: duplicate input {input}"));
            continue;
        }
        match derive_expected(&staged, tc, &input, limits)? {
            Some(actual) => {
                if !trace::outputs_match(&p.expected_output, &actual, tol) {
                    report.warnings.push(format!(
                        "provided expectation {:?} for input {input} disagrees with source \
                         execution; using executed output {actual:?}",
                        p.expected_output
                    ));
                }
                tests.push(pending(input, actual));
                report.provided_kept += 1;
            }
            None => {
                report.provided_dropped += 1;
                report.warnings.push(format!(
                    "dropped provided test: source did not exit cleanly on input {input}"
                ));
            }
        }
    }

    if generated_count > 0 {
        let req = prompts::TEST_INPUTS.render(&[
            ("count", &generated_count.to_string()),
            ("language", source.language.name()),
            ("encoding_rules", &encoding_rules(encoding, &source.entry_name)),
            ("code", &source.text),
        ])?;
        let reply = client.complete(&req)?;
        match parse_proposed_inputs(&reply.text) {
            Some(items) => {
                for item in items {
                    let input = match encode_proposed(&item, encoding) {
                        Ok(i) => i,
                        Err(detail) => {
                            report.generated_dropped += 1;
                            report
                                .warnings
                                .push(format!("dropped generated input {item}: {detail}"));
                            continue;
                        }
                    };
                    if !seen.insert(input.clone()) {
                        report.generated_dropped += 1;
                        continue;
                    }
                    match derive_expected(&staged, tc, &input, limits)? {
                        Some(actual) => {
                            tests.push(pending(input, actual));
                            report.generated_kept += 1;
                        }
                        None => {
                            report.generated_dropped += 1;
                            report.warnings.push(format!(
                                "dropped generated input {input}: source did not exit cleanly"
                            ));
                        }
                    }
                }
            }
            None => {
                report.warnings.push(format!(
                    "test-input response was not a JSON array; no generated tests ({:.60})",
                    reply.text.replace('\n', " ")
                ));
            }
        }
    }

    if tests.is_empty() {
        return Err(Error::NoValidTests);
    }
    for (i, t) in tests.iter_mut().enumerate() {
        t.id = i + 1;
    }
    Ok((tests, report))
}

/// Produce the initial target program for `task`.
///
/// The reply's fenced code is taken verbatim as the candidate; it is
/// deliberately *not* validated here — the syntax fixer owns that.
pub fn translate(client: &LlmClient, task: &TranslationTask) -> Result<SourceUnit> {
    if task.tests.is_empty() {
        return Err(Error::NoValidTests);
    }
    let req = prompts::DIRECT_TRANSLATE.render(&[
        ("source_language", task.source.language.name()),
        ("target_language", task.target_language.name()),
        ("entry", &task.source.entry_name),
        ("tests", &render_tests(&task.tests)),
        ("code", &task.source.text),
    ])?;
    let code = client.complete_code(&req, "direct translation")?;
    Ok(SourceUnit::new(
        task.target_language,
        code,
        task.source.entry_name.clone(),
    ))
}

/// The suite as prompt lines: `input [2, 3] -> expected output 5`.
pub fn render_tests(tests: &[TestCase]) -> String {
    tests
        .iter()
        .map(|t| {
            format!(
                "input {} -> expected output {}",
                prompt_literal(&t.input),
                prompt_literal(&t.expected_output)
            )
        })
        .collect::<Vec<_>>()
        .join("\n")
}

fn pending(input: String, expected_output: String) -> TestCase {
    TestCase {
        id: 0, // assigned after assembly
        input,
        expected_output,
    }
}

/// Run one input against the staged source; `None` means unclean exit.
fn derive_expected(
    staged: &StagedProgram,
    tc: &Toolchains,
    input: &str,
    limits: Limits,
) -> Result<Option<String>> {
    let run = staged.run(tc, input, limits)?;
    if !run.clean_exit() {
        return Ok(None);
    }
    Ok(Some(trace::strip_trace(&run.stdout).trim_end().to_string()))
}

/// Canonicalize an input's on-the-wire text. For `args` the input must
/// be a JSON array (one element per parameter); for `stdin` it is raw.
fn normalize_input(input: &str, encoding: InputEncoding) -> std::result::Result<String, String> {
    match encoding {
        InputEncoding::Stdin => Ok(input.to_string()),
        InputEncoding::Args => {
            let v: serde_json::Value = serde_json::from_str(input.trim())
                .map_err(|e| format!("input is not JSON: {e}"))?;
            if !v.is_array() {
                return Err(format!("args input must be a JSON array, got {v}"));
            }
            Ok(CanonicalValue::from_json(&v).to_canonical_string())
        }
    }
}

/// Interpret one element of the model's proposed-inputs array.
fn encode_proposed(
    item: &serde_json::Value,
    encoding: InputEncoding,
) -> std::result::Result<String, String> {
    match encoding {
        InputEncoding::Args => {
            if !item.is_array() {
                return Err("expected a JSON argument array".to_string());
            }
            Ok(CanonicalValue::from_json(item).to_canonical_string())
        }
        InputEncoding::Stdin => match item {
            serde_json::Value::String(s) => Ok(s.clone()),
            _ => Err("expected a JSON string of stdin text".to_string()),
        },
    }
}

/// Pull a JSON array out of the reply: fenced block if present, whole
/// text otherwise. `None` when neither parses.
fn parse_proposed_inputs(reply: &str) -> Option<Vec<serde_json::Value>> {
    let candidate = extract_code(reply).unwrap_or_else(|| reply.trim().to_string());
    serde_json::from_str::<Vec<serde_json::Value>>(candidate.trim()).ok()
}

fn encoding_rules(encoding: InputEncoding, entry: &str) -> String {
    match encoding {
        InputEncoding::Args => format!(
            "Each input is a JSON array holding the arguments for one call of `{entry}`, \
             in order."
        ),
        InputEncoding::Stdin => "Each input is a JSON string; its contents are fed to the \
                                 program on standard input."
            .to_string(),
    }
}

/// Multi-line values are JSON-quoted so each prompt test stays one line.
fn prompt_literal(s: &str) -> String {
    if s.contains('\n') {
        serde_json::Value::from(s).to_string()
    } else {
        s.to_string()
    }
}
