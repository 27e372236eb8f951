//! Semantic error fixer: trace-walk localization plus cloze patching.
//!
//! Localization walks the source and target traces index-for-index,
//! test by test, and stops at the first divergence it can attribute to
//! a target block: the target crashed (report the block mapped from
//! the aligned source instance), the block ids disagree with the
//! mapping (control-flow divergence), or the captured variable states
//! differ (value divergence). Patching then removes the error block's
//! line span, shows the model the program with the hole delimited by
//! `--1--`/`--2--`, and splices the fill back in. A patch is accepted
//! only by re-executing the patched program and checking that the
//! recorded divergence point is gone — never by taking the model's
//! word for it.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::aligner::BlockMapping;
use crate::error::{Error, Result};
use crate::exec::{self, TestCase};
use crate::frontend::BlockPartition;
use crate::instrument;
use crate::lang::{InputEncoding, SourceUnit};
use crate::llm::{prompts, LlmClient};
use crate::runner::{self, Limits, Toolchains};
use crate::trace::{
    values_equal, ExecutionTrace, FloatTolerance, TraceBundle, ValueDiff,
};

/// Default global cap on patch generations per task (all strategies,
/// rejected and failed generations included).
pub const DEFAULT_PATCH_BUDGET: usize = 8;
/// Default attempts per localized block: one per strategy.
pub const DEFAULT_BLOCK_ATTEMPTS: usize = 2;

/// What kind of divergence localization found.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DivergenceKind {
    TargetCrash,
    ControlFlowMismatch,
    ValueMismatch,
}

/// The first divergence, attributed to a target block.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorBlockReport {
    /// Target block to patch.
    pub error_block: usize,
    pub kind: DivergenceKind,
    pub test_id: usize,
    /// 0-based instance index where the traces diverged.
    pub seq: usize,
    /// Counting variable differences (value mismatches only).
    pub diffs: Vec<ValueDiff>,
    /// The source block aligned at the divergence, when one exists.
    /// Absent exactly when the target executed more instances than the
    /// source.
    pub source_block: Option<usize>,
}

/// How a patch prompt is built.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PatchStrategy {
    /// Static context plus the observed expected/actual runtime values.
    ValueAware,
    /// Static context only.
    Vanilla,
}

/// One spliced candidate patch.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SemanticPatch {
    pub strategy: PatchStrategy,
    pub error_block: usize,
    /// Target lines the patch replaced (pre-splice coordinates).
    pub replaced_span: (usize, usize),
    /// The fill-in code, verbatim.
    pub new_text: String,
    /// 1-based position in the task's global patch budget.
    pub attempt: usize,
    /// True when re-execution showed the divergence gone.
    pub accepted: bool,
}

/// Why the fixing loop ended.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SemanticOutcome {
    /// The whole suite passes.
    Fixed,
    /// The patch budget ran out while the loop was still advancing
    /// (the last localized block was not pronounced unfixable).
    NextBlock,
    /// Both strategies failed on one block, or localization could not
    /// attribute the failure.
    Failed,
}

/// Chronological record of one semantic-fixing run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FixAttemptLog {
    pub reports: Vec<ErrorBlockReport>,
    pub patches: Vec<SemanticPatch>,
    pub outcome: SemanticOutcome,
    /// Patch generations charged against the budget, including ones
    /// that produced no splicable patch.
    pub attempts_spent: usize,
    /// Free-form audit lines (rejected generations, localization dead
    /// ends) in event order.
    pub notes: Vec<String>,
}

/// Everything `fix_semantics` needs that outlives one call.
pub struct SemanticContext<'a> {
    pub client: &'a LlmClient,
    pub tc: &'a Toolchains,
    pub source: &'a SourceUnit,
    pub partition: &'a BlockPartition,
    pub encoding: InputEncoding,
    pub suite: &'a [TestCase],
    pub workdir: &'a Path,
    pub limits: Limits,
    pub tol: FloatTolerance,
    /// Attempts per localized block (strategy order is fixed).
    pub block_attempts: usize,
    /// Global patch-generation budget.
    pub patch_budget: usize,
}

/// Result of one semantic-fixing run.
#[derive(Debug, Clone)]
pub struct SemanticFixOutcome {
    pub program: SourceUnit,
    pub all_tests_pass: bool,
    /// The mapping after splice bookkeeping; valid for `program`.
    pub mapping: BlockMapping,
    pub log: FixAttemptLog,
}

// ---------- localization ----------

/// Walk the aligned traces and report the first divergence.
///
/// Tests are visited in suite order; within a test, instances are
/// compared index-for-index while the index is within the target
/// trace. Returns `Ok(None)` when every test's walk completes without
/// divergence.
pub fn localize(
    source_traces: &TraceBundle,
    target_traces: &TraceBundle,
    mapping: &BlockMapping,
    suite: &[TestCase],
    tol: FloatTolerance,
) -> Result<Option<ErrorBlockReport>> {
    for test in suite {
        let s = source_traces
            .get(test.id)
            .ok_or_else(|| misaligned(test.id, 0, "no source trace for this test"))?;
        let t = target_traces
            .get(test.id)
            .ok_or_else(|| misaligned(test.id, 0, "no target trace for this test"))?;
        for (l, vt) in t.instances.iter().enumerate() {
            let vs = s.instances.get(l);
            // Source-side crash markers make the walk unattributable.
            if let Some(inst) = vs {
                if inst.block_id.is_none() {
                    return Err(misaligned(
                        test.id,
                        l,
                        "source trace carries a crash marker at the compared index",
                    ));
                }
            }
            match (vs.and_then(|i| i.block_id), vt.block_id) {
                // Target crashed here: blame the block the source was in.
                (Some(b_si), None) => {
                    return Ok(Some(ErrorBlockReport {
                        error_block: require_mapped(mapping, b_si)?,
                        kind: DivergenceKind::TargetCrash,
                        test_id: test.id,
                        seq: l,
                        diffs: Vec::new(),
                        source_block: Some(b_si),
                    }));
                }
                // Source exhausted while the target still runs blocks:
                // the target's control flow took extra iterations.
                (None, Some(b_tj)) => {
                    return Ok(Some(ErrorBlockReport {
                        error_block: b_tj,
                        kind: DivergenceKind::ControlFlowMismatch,
                        test_id: test.id,
                        seq: l,
                        diffs: Vec::new(),
                        source_block: None,
                    }));
                }
                // Source exhausted and the target crashed: nothing to
                // attribute the crash to.
                (None, None) => {
                    return Err(misaligned(
                        test.id,
                        l,
                        "target crash with no aligned source instance",
                    ));
                }
                (Some(b_si), Some(b_tj)) => {
                    let mapped = require_mapped(mapping, b_si)?;
                    if mapped != b_tj {
                        let blame_target = mapping
                            .targets
                            .iter()
                            .find(|tb| tb.id == b_tj)
                            .map(|tb| tb.control_flow)
                            .unwrap_or(false);
                        return Ok(Some(ErrorBlockReport {
                            error_block: if blame_target { b_tj } else { mapped },
                            kind: DivergenceKind::ControlFlowMismatch,
                            test_id: test.id,
                            seq: l,
                            diffs: Vec::new(),
                            source_block: Some(b_si),
                        }));
                    }
                    let vs = vs.expect("checked above");
                    let cmp = values_equal(&vs.vars, &vt.vars, tol);
                    if !cmp.equal {
                        let diffs: Vec<ValueDiff> = cmp
                            .diffs
                            .into_iter()
                            .filter(|d| d.is_counting())
                            .collect();
                        return Ok(Some(ErrorBlockReport {
                            error_block: b_tj,
                            kind: DivergenceKind::ValueMismatch,
                            test_id: test.id,
                            seq: l,
                            diffs,
                            source_block: Some(b_si),
                        }));
                    }
                }
            }
        }
    }
    Ok(None)
}

fn misaligned(test_id: usize, seq: usize, detail: &str) -> Error {
    Error::TraceMisaligned {
        test_id: test_id.to_string(),
        seq,
        detail: detail.to_string(),
    }
}

fn require_mapped(mapping: &BlockMapping, source_block: usize) -> Result<usize> {
    mapping.f_map(source_block).ok_or(Error::MappingInvalid {
        reason: format!("source block {source_block} has no mapped target block"),
    })
}

// ---------- patch generation ----------

/// A generated patch and the program it produced.
#[derive(Debug, Clone)]
pub struct PatchOutcome {
    pub patch: SemanticPatch,
    pub program: SourceUnit,
    /// Lines the fill occupies post-splice (mapping bookkeeping).
    pub fill_lines: usize,
}

/// Build the cloze prompt for `report`, query the model, splice the
/// fill, and syntax-check the result. The patch comes back unjudged
/// (`accepted: false`); acceptance belongs to re-execution.
#[allow(clippy::too_many_arguments)]
pub fn generate_patch(
    client: &LlmClient,
    tc: &Toolchains,
    report: &ErrorBlockReport,
    source: &SourceUnit,
    partition: &BlockPartition,
    target: &SourceUnit,
    mapping: &BlockMapping,
    strategy: PatchStrategy,
    limits: Limits,
) -> Result<PatchOutcome> {
    let span = mapping
        .targets
        .iter()
        .find(|t| t.id == report.error_block)
        .map(|t| (t.start_line, t.end_line))
        .ok_or(Error::MappingInvalid {
            reason: format!("no target block with id {}", report.error_block),
        })?;
    let cloze = cloze_text(target, span);
    let block_text = source_block_text(report, source, partition, mapping);

    let req = match strategy {
        PatchStrategy::Vanilla => prompts::SEMANTIC_VANILLA.render(&[
            ("target_language", target.language.name()),
            ("source_language", source.language.name()),
            ("source_code", &source.text),
            ("source_block", &block_text),
            ("cloze", &cloze),
        ])?,
        PatchStrategy::ValueAware => prompts::SEMANTIC_VALUE_AWARE.render(&[
            ("target_language", target.language.name()),
            ("source_language", source.language.name()),
            ("source_code", &source.text),
            ("source_block", &block_text),
            ("cloze", &cloze),
            ("divergence", &describe(report)),
            ("expected_values", &value_lines(&report.diffs, true)),
            ("actual_values", &value_lines(&report.diffs, false)),
        ])?,
    };
    let fill = client.complete_code(&req, "semantic patch")?;
    let (spliced, fill_lines) = splice(&target.text, span, &fill);
    let check = runner::check_syntax(tc, target.language, &spliced, limits)?;
    if !check.ok {
        let first = check
            .diagnostics
            .first()
            .map(|d| d.message.clone())
            .unwrap_or_else(|| "unparseable spliced program".to_string());
        return Err(Error::SpliceSyntaxError { detail: first });
    }
    Ok(PatchOutcome {
        patch: SemanticPatch {
            strategy,
            error_block: report.error_block,
            replaced_span: span,
            new_text: fill,
            attempt: 0,
            accepted: false,
        },
        program: target.with_text(spliced),
        fill_lines,
    })
}

/// The target program with `span` replaced by a marker-delimited slot.
pub fn cloze_text(target: &SourceUnit, span: (usize, usize)) -> String {
    let indent: String = target
        .line(span.0)
        .chars()
        .take_while(|c| c.is_whitespace())
        .collect();
    let mut out = String::new();
    for (idx, line) in target.text.lines().enumerate() {
        let n = idx + 1;
        if n == span.0 {
            out.push_str(&format!("{indent}{}\n", prompts::CLOZE_OPEN));
            out.push_str(&format!("{indent}{}\n", prompts::CLOZE_SLOT));
            out.push_str(&format!("{indent}{}\n", prompts::CLOZE_CLOSE));
        }
        if n < span.0 || n > span.1 {
            out.push_str(line);
            out.push('\n');
        }
    }
    out
}

/// Replace `span` in `text` with `fill`; returns the new text and the
/// fill's line count.
fn splice(text: &str, span: (usize, usize), fill: &str) -> (String, usize) {
    let mut out = String::new();
    let mut fill_lines = 0;
    for (idx, line) in text.lines().enumerate() {
        let n = idx + 1;
        if n == span.0 {
            for fl in fill.lines() {
                out.push_str(fl);
                out.push('\n');
                fill_lines += 1;
            }
            if fill_lines == 0 {
                out.push('\n');
                fill_lines = 1;
            }
        }
        if n < span.0 || n > span.1 {
            out.push_str(line);
            out.push('\n');
        }
    }
    (out, fill_lines)
}

fn describe(report: &ErrorBlockReport) -> String {
    let what = match report.kind {
        DivergenceKind::TargetCrash => "the target program crashed",
        DivergenceKind::ControlFlowMismatch => "control flow diverged from the source",
        DivergenceKind::ValueMismatch => "variable values diverged from the source",
    };
    format!(
        "test {}, block instance index {}: {what}",
        report.test_id, report.seq
    )
}

fn value_lines(diffs: &[ValueDiff], source_side: bool) -> String {
    if diffs.is_empty() {
        return "(none captured)".to_string();
    }
    diffs
        .iter()
        .map(|d| {
            let v = if source_side { &d.source } else { &d.target };
            match v {
                Some(v) => format!("{} = {}", d.var, v.to_canonical_string()),
                None => format!("{} = (not captured)", d.var),
            }
        })
        .collect::<Vec<_>>()
        .join("\n")
}

/// Source-side context for the prompt: the block the report names, or
/// every block mapping onto the error block when none was aligned.
fn source_block_text(
    report: &ErrorBlockReport,
    source: &SourceUnit,
    partition: &BlockPartition,
    mapping: &BlockMapping,
) -> String {
    let ids: Vec<usize> = match report.source_block {
        Some(id) => vec![id],
        None => mapping
            .map
            .iter()
            .filter(|(_, &t)| t == report.error_block)
            .map(|(&s, _)| s)
            .collect(),
    };
    let mut lines: Vec<String> = Vec::new();
    for id in ids {
        if let Some(b) = partition.block(id) {
            for n in b.start_line..=b.end_line {
                lines.push(source.line(n).to_string());
            }
        }
    }
    if lines.is_empty() {
        "(the target block has no single corresponding source block)".to_string()
    } else {
        lines.join("\n")
    }
}

// ---------- the fixing loop ----------

/// Run the localize→patch→re-execute loop until the suite passes, a
/// block defeats both strategies, or the patch budget runs out.
pub fn fix_semantics(
    ctx: &SemanticContext<'_>,
    target: &SourceUnit,
    mapping: &BlockMapping,
) -> Result<SemanticFixOutcome> {
    let mut target = target.clone();
    let mut mapping = mapping.clone();
    let mut log = FixAttemptLog {
        reports: Vec::new(),
        patches: Vec::new(),
        outcome: SemanticOutcome::Failed,
        attempts_spent: 0,
        notes: Vec::new(),
    };
    let mut attempts_spent = 0usize;

    // The source never changes: instrument and trace it once.
    let src_instr = instrument::instrument_source(ctx.source, ctx.partition)?;
    let src_traces = exec::collect_traces(
        ctx.tc,
        &src_instr,
        &ctx.source.entry_name,
        ctx.encoding,
        ctx.suite,
        ctx.workdir,
        ctx.limits,
    )?;

    let outcome = loop {
        let run = exec::run_suite(
            ctx.tc,
            &target,
            ctx.encoding,
            ctx.suite,
            ctx.workdir,
            ctx.limits,
            ctx.tol,
        )?;
        if run.all_passed {
            break SemanticOutcome::Fixed;
        }

        let tgt_instr = match instrument::instrument_target(&target, &mapping.span_tuples()) {
            Ok(i) => i,
            Err(e) if is_content_failure(&e) => {
                log.notes
                    .push(format!("target instrumentation failed: {e}"));
                break SemanticOutcome::Failed;
            }
            Err(e) => return Err(e),
        };
        let tgt_traces = match exec::collect_traces(
            ctx.tc,
            &tgt_instr,
            &target.entry_name,
            ctx.encoding,
            ctx.suite,
            ctx.workdir,
            ctx.limits,
        ) {
            Ok(t) => t,
            Err(e) if is_content_failure(&e) => {
                log.notes.push(format!("target tracing failed: {e}"));
                break SemanticOutcome::Failed;
            }
            Err(e) => return Err(e),
        };

        let report = match localize(&src_traces, &tgt_traces, &mapping, ctx.suite, ctx.tol) {
            Ok(Some(r)) => r,
            Ok(None) => {
                log.notes.push(
                    "tests fail but traces agree at every compared instance; nothing to patch"
                        .to_string(),
                );
                break SemanticOutcome::Failed;
            }
            Err(e) if is_content_failure(&e) => {
                log.notes.push(format!("localization impossible: {e}"));
                break SemanticOutcome::Failed;
            }
            Err(e) => return Err(e),
        };
        log.reports.push(report.clone());

        let mut block_fixed = false;
        let mut strategies_exhausted = true;
        for strategy in strategies(ctx.block_attempts) {
            if attempts_spent >= ctx.patch_budget {
                strategies_exhausted = false;
                break;
            }
            attempts_spent += 1;
            let generated = generate_patch(
                ctx.client,
                ctx.tc,
                &report,
                ctx.source,
                ctx.partition,
                &target,
                &mapping,
                strategy,
                ctx.limits,
            );
            let mut outcome = match generated {
                Ok(o) => o,
                Err(e) if is_content_failure(&e) => {
                    log.notes.push(format!(
                        "attempt {attempts_spent} ({strategy:?}) produced no usable patch: {e}"
                    ));
                    continue;
                }
                Err(e) => return Err(e),
            };
            outcome.patch.attempt = attempts_spent;

            let mut trial_mapping = mapping.clone();
            trial_mapping.apply_splice(outcome.patch.replaced_span, outcome.fill_lines);
            refresh_block_kind(&mut trial_mapping, report.error_block, &outcome.program);

            match divergence_gone(ctx, &report, &src_traces, &outcome.program, &trial_mapping) {
                Ok(true) => {
                    outcome.patch.accepted = true;
                    log.patches.push(outcome.patch);
                    target = outcome.program;
                    mapping = trial_mapping;
                    block_fixed = true;
                    break;
                }
                Ok(false) => {
                    log.patches.push(outcome.patch);
                }
                Err(e) if is_content_failure(&e) => {
                    log.patches.push(outcome.patch);
                    log.notes.push(format!(
                        "attempt {attempts_spent} could not be validated: {e}"
                    ));
                }
                Err(e) => return Err(e),
            }
        }

        if !block_fixed {
            break if strategies_exhausted {
                SemanticOutcome::Failed
            } else {
                SemanticOutcome::NextBlock
            };
        }
        if attempts_spent >= ctx.patch_budget {
            // One free suite run decides between fixed and out-of-budget.
            let run = exec::run_suite(
                ctx.tc,
                &target,
                ctx.encoding,
                ctx.suite,
                ctx.workdir,
                ctx.limits,
                ctx.tol,
            )?;
            break if run.all_passed {
                SemanticOutcome::Fixed
            } else {
                SemanticOutcome::NextBlock
            };
        }
    };

    log.outcome = outcome;
    log.attempts_spent = attempts_spent;
    let all_tests_pass = log.outcome == SemanticOutcome::Fixed;
    Ok(SemanticFixOutcome {
        program: target,
        all_tests_pass,
        mapping,
        log,
    })
}

/// Fixed strategy order, truncated to the per-block attempt budget.
fn strategies(block_attempts: usize) -> Vec<PatchStrategy> {
    [PatchStrategy::ValueAware, PatchStrategy::Vanilla]
        .into_iter()
        .take(block_attempts.max(1))
        .collect()
}

/// Re-instrument and re-run the report's test on the patched program,
/// then check the recorded divergence point.
fn divergence_gone(
    ctx: &SemanticContext<'_>,
    report: &ErrorBlockReport,
    src_traces: &TraceBundle,
    patched: &SourceUnit,
    trial_mapping: &BlockMapping,
) -> Result<bool> {
    let instr = instrument::instrument_target(patched, &trial_mapping.span_tuples())?;
    let test = ctx
        .suite
        .iter()
        .find(|t| t.id == report.test_id)
        .cloned()
        .ok_or(Error::Infra {
            detail: format!("report names unknown test {}", report.test_id),
        })?;
    let traces = exec::collect_traces(
        ctx.tc,
        &instr,
        &patched.entry_name,
        ctx.encoding,
        &[test],
        ctx.workdir,
        ctx.limits,
    )?;
    let s = src_traces
        .get(report.test_id)
        .ok_or_else(|| misaligned(report.test_id, report.seq, "no source trace"))?;
    let t = traces
        .get(report.test_id)
        .ok_or_else(|| misaligned(report.test_id, report.seq, "no trial trace"))?;
    Ok(!diverges_at(s, t, trial_mapping, report.seq, ctx.tol))
}

/// The localization rules applied at one instance index.
fn diverges_at(
    s: &ExecutionTrace,
    t: &ExecutionTrace,
    mapping: &BlockMapping,
    seq: usize,
    tol: FloatTolerance,
) -> bool {
    match (s.instances.get(seq), t.instances.get(seq)) {
        // Both walks ended before the index: nothing diverges there.
        (None, None) => false,
        // One side lost the instance the other still has.
        (Some(_), None) | (None, Some(_)) => true,
        (Some(a), Some(b)) => match (a.block_id, b.block_id) {
            (Some(b_si), Some(b_tj)) => {
                mapping.f_map(b_si) != Some(b_tj) || !values_equal(&a.vars, &b.vars, tol).equal
            }
            // Any crash marker at the point is still a divergence.
            _ => true,
        },
    }
}

/// Errors that reject a patch or end fixing gracefully, as opposed to
/// infrastructure faults that abort the task.
fn is_content_failure(e: &Error) -> bool {
    matches!(
        e,
        Error::ExtractionFailure { .. }
            | Error::SpliceSyntaxError { .. }
            | Error::InstrumentationFailure { .. }
            | Error::Syntax { .. }
            | Error::UnsupportedConstruct { .. }
            | Error::EntryNotFound { .. }
            | Error::MalformedTraceLine { .. }
            | Error::TraceMisaligned { .. }
            | Error::MappingInvalid { .. }
    )
}

/// Recompute the patched block's control-flow flag on the new text.
fn refresh_block_kind(mapping: &mut BlockMapping, block_id: usize, program: &SourceUnit) {
    for t in &mut mapping.targets {
        if t.id == block_id {
            t.control_flow = t.start_line == t.end_line
                && crate::syntax::is_control_header_line(program.line(t.start_line), program.language);
        }
    }
}
