//! Syntax error fixer: iterate toolchain validation with model patches.
//!
//! One diagnostic at a time: only the *first* compiler/interpreter
//! diagnostic goes to the model — the way a developer works down a
//! compile log — which plans a fix in one turn and then produces a
//! whole replacement program in a second turn. The loop stops on a
//! clean check, when a (signature, location) pair recurs, or at the
//! attempt budget. Signatures strip file names, columns, and embedded
//! line references so a message can be recognized across iterations;
//! the location component carries position separately, so the same
//! message surfacing at a *new* line still counts as progress.

use std::sync::LazyLock;

use regex::Regex;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lang::SourceUnit;
use crate::llm::{prompts, LlmClient};
use crate::runner::{self, Diagnostic, Limits, Toolchains};

/// Default cap on patch attempts per program.
pub const DEFAULT_BUDGET: usize = 6;

/// Why the fix loop ended.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SyntaxStop {
    /// Validation passed.
    Clean,
    /// The same (signature, location) came back after a patch.
    RepeatedDiagnostic,
    /// The attempt budget ran out with diagnostics remaining.
    BudgetExhausted,
    /// The model produced no usable patch (no code block after a
    /// re-prompt); the loop keeps its best candidate and stops.
    ModelFailure { detail: String },
}

/// One plan/patch round, as recorded in fix logs.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SyntaxAttempt {
    /// 1-based attempt number.
    pub iteration: usize,
    /// The diagnostic driving the attempt, verbatim.
    pub message: String,
    /// Normalized message used for repeat detection.
    pub signature: String,
    pub line: Option<usize>,
    /// The model's fixing plan (free text).
    pub plan: String,
}

/// Final state of one syntax-fixing run.
#[derive(Debug, Clone)]
pub struct SyntaxFixOutcome {
    /// The best candidate seen: the first validated program with the
    /// fewest diagnostics (zero when `clean`).
    pub program: SourceUnit,
    pub clean: bool,
    /// Patch attempts actually made (`<= budget`).
    pub iterations: usize,
    pub attempts: Vec<SyntaxAttempt>,
    pub stop: SyntaxStop,
}

/// Drive validate→plan→patch rounds until `candidate` is clean, a
/// diagnostic repeats, or `budget` attempts have been spent.
///
/// Infrastructure faults (missing toolchain, backend transport) and
/// replay misses propagate as errors; a model that merely fails to
/// produce a code block ends the loop gracefully with
/// [`SyntaxStop::ModelFailure`].
pub fn fix_syntax(
    client: &LlmClient,
    tc: &Toolchains,
    candidate: &SourceUnit,
    budget: usize,
    limits: Limits,
) -> Result<SyntaxFixOutcome> {
    let mut current = candidate.clone();
    let mut best: Option<(usize, SourceUnit)> = None;
    let mut attempts: Vec<SyntaxAttempt> = Vec::new();
    let mut seen: Vec<(String, Option<usize>)> = Vec::new();

    let stop = loop {
        let check = runner::check_syntax(tc, current.language, &current.text, limits)?;
        if check.ok {
            return Ok(SyntaxFixOutcome {
                program: current,
                clean: true,
                iterations: attempts.len(),
                attempts,
                stop: SyntaxStop::Clean,
            });
        }
        let diag = first_diagnostic(&check.diagnostics, &check.raw);
        if best.as_ref().map_or(true, |(n, _)| check.diagnostics.len() < *n) {
            best = Some((check.diagnostics.len().max(1), current.clone()));
        }
        let signature = diagnostic_signature(&diag);
        if repeats(&seen, &signature, diag.line) {
            break SyntaxStop::RepeatedDiagnostic;
        }
        if attempts.len() >= budget {
            break SyntaxStop::BudgetExhausted;
        }
        seen.push((signature.clone(), diag.line));

        let location = diag
            .line
            .map(|n| format!("line {n}"))
            .unwrap_or_else(|| "not reported".to_string());
        let plan_req = prompts::SYNTAX_PLAN.render(&[
            ("language", current.language.name()),
            ("code", &current.text),
            ("error", &diag.message),
            ("location", &location),
        ])?;
        let plan = client.complete(&plan_req)?.text;
        let patch_req = prompts::SYNTAX_PATCH.render(&[
            ("language", current.language.name()),
            ("code", &current.text),
            ("error", &diag.message),
            ("plan", &plan),
        ])?;
        attempts.push(SyntaxAttempt {
            iteration: attempts.len() + 1,
            message: diag.message.clone(),
            signature,
            line: diag.line,
            plan,
        });
        match client.complete_code(&patch_req, "syntax patch") {
            Ok(patched) => current = current.with_text(patched),
            Err(Error::ExtractionFailure { label }) => {
                break SyntaxStop::ModelFailure {
                    detail: format!("no code block in model response for `{label}`"),
                };
            }
            Err(e) => return Err(e),
        }
    };

    let (_, program) = best.expect("loop breaks only after recording a candidate");
    Ok(SyntaxFixOutcome {
        program,
        clean: false,
        iterations: attempts.len(),
        attempts,
        stop,
    })
}

/// A new diagnostic repeats history when its signature matches and the
/// locations agree — or either side has no location to compare.
fn repeats(seen: &[(String, Option<usize>)], signature: &str, line: Option<usize>) -> bool {
    seen.iter().any(|(s, l)| {
        s == signature && (line.is_none() || l.is_none() || *l == line)
    })
}

fn first_diagnostic(diagnostics: &[Diagnostic], raw: &str) -> Diagnostic {
    diagnostics.first().cloned().unwrap_or_else(|| Diagnostic {
        line: None,
        message: raw
            .lines()
            .find(|l| !l.trim().is_empty())
            .unwrap_or("tool failed without diagnostics")
            .trim()
            .to_string(),
    })
}

static PATH_TOKEN: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"\S*[/\\]\S*").expect("static regex"));
static FILE_STEM: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(r"\b[\w.-]+\.(?:py|cpp|cc|hpp|h|java|class)\b").expect("static regex")
});
static LINE_REF: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"(?i)\b(?:at\s+|on\s+)?line\s+\d+\b").expect("static regex"));
static COL_REF: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r":\d+(?::\d+)?").expect("static regex"));
static HOLLOW_PARENS: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"\(\s*[,;]?\s*\)").expect("static regex"));
static WS: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"\s+").expect("static regex"));

/// Normalize a diagnostic into a stable repeat-detection key: first
/// message line with paths, generated file names, embedded line/column
/// references, and leftover empty parens removed, whitespace collapsed.
/// Other digits (array sizes, type widths) are meaningful and stay.
pub fn diagnostic_signature(d: &Diagnostic) -> String {
    let first_line = d.message.lines().next().unwrap_or("");
    let s = PATH_TOKEN.replace_all(first_line, " ");
    let s = FILE_STEM.replace_all(&s, " ");
    let s = LINE_REF.replace_all(&s, " ");
    let s = COL_REF.replace_all(&s, " ");
    let s = HOLLOW_PARENS.replace_all(&s, " ");
    let s = WS.replace_all(&s, " ");
    let s = s.trim();
    if s.is_empty() {
        "unspecified error".to_string()
    } else {
        s.to_string()
    }
}
