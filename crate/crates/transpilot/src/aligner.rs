//! Code aligner: block-level mapping from source blocks to target lines.
//!
//! The prompt shows the model the source program with one comment
//! marker per block (`# BLOCK3`) and the target program with numbered
//! lines; the reply maps every block to a line span (`BLOCK3 -> lines
//! 4-6`). Replies are treated as untrusted input: rows are parsed
//! tolerantly, per-block multi-spans collapse to their hull, partial
//! overlaps are truncated, and a malformed or incomplete reply earns
//! exactly one repair re-prompt before the task fails. The surviving
//! spans become the derived target partition — the target-side blocks
//! that trace probes and semantic patches operate on.

use std::collections::BTreeMap;
use std::sync::LazyLock;

use regex::Regex;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::frontend::BlockPartition;
use crate::lang::{SourceUnit, SubjectLanguage};
use crate::llm::{prompts, ChatRequest, LlmClient, Message, Role};
use crate::syntax;

/// One normalized mapping row: a source block and its target line span
/// (1-based, inclusive).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SpanEntry {
    pub source_block: usize,
    pub start_line: usize,
    pub end_line: usize,
}

/// A derived target block: one mapped line span, numbered by position.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TargetBlock {
    /// 1-based id in start-line order.
    pub id: usize,
    pub start_line: usize,
    pub end_line: usize,
    /// True when the span is a single control-flow header line; the
    /// localizer treats divergence at such blocks as path divergence.
    pub control_flow: bool,
}

/// The block-level alignment between a source partition and a target
/// program.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BlockMapping {
    /// Normalized per-source-block rows, sorted by source block id.
    pub entries: Vec<SpanEntry>,
    /// The derived target partition, disjoint and sorted by start line.
    pub targets: Vec<TargetBlock>,
    /// `f_map`: source block id to target block id. Many-to-one is
    /// legal (several source blocks may share one target block).
    pub map: BTreeMap<usize, usize>,
}

impl BlockMapping {
    /// Target block id for a source block id.
    pub fn f_map(&self, source_block: usize) -> Option<usize> {
        self.map.get(&source_block).copied()
    }

    /// Spans in target-block order, as the instrumenter consumes them.
    pub fn span_tuples(&self) -> Vec<(usize, usize)> {
        self.targets
            .iter()
            .map(|t| (t.start_line, t.end_line))
            .collect()
    }

    /// Shift every span at or below `from_line` by `delta` lines.
    /// Used after a patch changes the target's line count so the
    /// remaining spans keep pointing at the same code.
    pub fn shift_lines(&mut self, from_line: usize, delta: isize) {
        let move_point = |n: &mut usize| {
            if *n >= from_line {
                *n = n.saturating_add_signed(delta).max(1);
            }
        };
        for e in &mut self.entries {
            move_point(&mut e.start_line);
            move_point(&mut e.end_line);
        }
        for t in &mut self.targets {
            move_point(&mut t.start_line);
            move_point(&mut t.end_line);
        }
    }

    /// Record that the lines of `span` were replaced by `new_len` lines:
    /// spans below the splice shift by the length delta and the spliced
    /// span's end moves to cover the replacement. Mapping identity is
    /// untouched — `f_map` still names the same blocks.
    pub fn apply_splice(&mut self, span: (usize, usize), new_len: usize) {
        let new_len = new_len.max(1);
        let old_len = span.1 - span.0 + 1;
        let delta = new_len as isize - old_len as isize;
        if delta != 0 {
            self.shift_lines(span.1 + 1, delta);
        }
        let new_end = span.0 + new_len - 1;
        for t in &mut self.targets {
            if (t.start_line, t.end_line) == span {
                t.end_line = new_end;
            }
        }
        for e in &mut self.entries {
            if (e.start_line, e.end_line) == span {
                e.end_line = new_end;
            }
        }
    }
}

/// Alignment output plus everything a reviewer needs to audit it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MappingReport {
    pub mapping: BlockMapping,
    /// Executable target lines between spans, folded into the nearest
    /// preceding span.
    pub absorbed_lines: Vec<usize>,
    /// Executable target lines outside every span and gap (signature,
    /// includes, helper code). Informational; they run unprobed.
    pub unmapped_lines: Vec<usize>,
    pub warnings: Vec<String>,
    /// The model reply the mapping was parsed from (last reply when a
    /// repair re-prompt was needed).
    pub raw_reply: String,
}

/// Source program text with one `BLOCK<i>` marker comment inserted
/// above the first line of each block.
pub fn annotate_blocks(source: &SourceUnit, partition: &BlockPartition) -> String {
    let mut starts: BTreeMap<usize, usize> = BTreeMap::new();
    for b in &partition.blocks {
        starts.insert(b.start_line, b.id);
    }
    let comment = source.language.line_comment();
    let mut out = String::new();
    for (idx, line) in source.text.lines().enumerate() {
        if let Some(id) = starts.get(&(idx + 1)) {
            let indent: String = line.chars().take_while(|c| c.is_whitespace()).collect();
            out.push_str(&format!("{indent}{comment} BLOCK{id}\n"));
        }
        out.push_str(line);
        out.push('\n');
    }
    out
}

/// `text` with every line prefixed by its 1-based number.
pub fn number_lines(text: &str) -> String {
    text.lines()
        .enumerate()
        .map(|(i, l)| format!("{}: {}", i + 1, l))
        .collect::<Vec<_>>()
        .join("\n")
}

/// Ask the model for the block mapping and normalize its reply.
///
/// One repair re-prompt is attempted when the reply omits blocks or
/// draws an irreparable span layout; after that the task fails with
/// [`Error::MappingParseFailure`] or [`Error::MappingInvalid`].
pub fn align(
    client: &LlmClient,
    source: &SourceUnit,
    partition: &BlockPartition,
    target: &SourceUnit,
) -> Result<MappingReport> {
    let req = prompts::ALIGN_BLOCKS.render(&[
        ("source_language", source.language.name()),
        ("target_language", target.language.name()),
        ("source_blocks", &annotate_blocks(source, partition)),
        ("target_numbered", &number_lines(&target.text)),
    ])?;
    let first = client.complete(&req)?;
    match normalize(&first.text, partition, target) {
        Ok(mut report) => {
            report.raw_reply = first.text;
            Ok(report)
        }
        Err(problem) => {
            let retry = repair_request(&req, &first.text, &problem);
            let second = client.complete(&retry)?;
            let mut report = normalize(&second.text, partition, target).map_err(|e| e.error)?;
            report
                .warnings
                .push(format!("mapping accepted after a repair re-prompt ({})", problem.detail));
            report.raw_reply = second.text;
            Ok(report)
        }
    }
}

/// Why a reply was rejected, with the error to surface if the repair
/// re-prompt fails too.
struct MappingProblem {
    detail: String,
    error: Error,
}

fn repair_request(req: &ChatRequest, reply: &str, problem: &MappingProblem) -> ChatRequest {
    let mut retry = req.clone();
    retry.messages.push(Message {
        role: Role::Assistant,
        text: reply.to_string(),
    });
    retry.messages.push(Message {
        role: Role::User,
        text: format!(
            "Your mapping was rejected: {}. Reply again with one `BLOCK<i> -> lines \
             <start>-<end>` row for every block and no other text.",
            problem.detail
        ),
    });
    retry
}

static ROW: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(
        r"(?i)block\s*(\d+)\s*(?:->|→|:|=>|maps?\s+to|corresponds\s+to)\s*lines?\s*(\d+)\s*(?:(?:-|–|—|to|through)\s*(\d+))?",
    )
    .expect("static regex")
});

/// Parse and normalize one reply into a full report (sans raw text).
fn normalize(
    reply: &str,
    partition: &BlockPartition,
    target: &SourceUnit,
) -> std::result::Result<MappingReport, MappingProblem> {
    let mut warnings: Vec<String> = Vec::new();

    // Parse rows; collapse repeated ids to their hull.
    let mut by_id: BTreeMap<usize, (usize, usize)> = BTreeMap::new();
    for cap in ROW.captures_iter(reply) {
        let id: usize = cap[1].parse().unwrap_or(0);
        let a: usize = cap[2].parse().unwrap_or(0);
        let b: usize = cap
            .get(3)
            .and_then(|m| m.as_str().parse().ok())
            .unwrap_or(a);
        let (mut start, mut end) = if a <= b { (a, b) } else { (b, a) };
        if partition.block(id).is_none() {
            warnings.push(format!("reply maps unknown BLOCK{id}; row ignored"));
            continue;
        }
        if start > target.line_count || end < 1 {
            warnings.push(format!(
                "BLOCK{id} span {start}-{end} lies outside the target; row ignored"
            ));
            continue;
        }
        start = start.max(1);
        end = end.min(target.line_count);
        if start != a || end != b {
            warnings.push(format!("BLOCK{id} span {a}-{b} adjusted to {start}-{end}"));
        }
        match by_id.get_mut(&id) {
            None => {
                by_id.insert(id, (start, end));
            }
            Some((s, e)) => {
                warnings.push(format!(
                    "BLOCK{id} mapped more than once; spans merged to their hull"
                ));
                *s = (*s).min(start);
                *e = (*e).max(end);
            }
        }
    }

    let missing: Vec<usize> = partition
        .blocks
        .iter()
        .map(|b| b.id)
        .filter(|id| !by_id.contains_key(id))
        .collect();
    if !missing.is_empty() {
        let list = missing
            .iter()
            .map(|id| format!("BLOCK{id}"))
            .collect::<Vec<_>>()
            .join(", ");
        return Err(MappingProblem {
            detail: format!("no span for {list}"),
            error: Error::MappingParseFailure {
                detail: format!("reply left {list} unmapped"),
            },
        });
    }

    let entries: Vec<SpanEntry> = by_id
        .iter()
        .map(|(&source_block, &(start_line, end_line))| SpanEntry {
            source_block,
            start_line,
            end_line,
        })
        .collect();

    let (targets, map, absorbed_lines, unmapped_lines) =
        derive_target_partition(&entries, target, &mut warnings)?;

    Ok(MappingReport {
        mapping: BlockMapping {
            entries,
            targets,
            map,
        },
        absorbed_lines,
        unmapped_lines,
        warnings,
        raw_reply: String::new(),
    })
}

type Derived = (
    Vec<TargetBlock>,
    BTreeMap<usize, usize>,
    Vec<usize>,
    Vec<usize>,
);

/// Turn normalized per-block spans into a disjoint target partition.
///
/// Identical spans collapse into one shared target block; a partial
/// overlap truncates the later span's head; proper containment is
/// irreparable. Executable lines in gaps between spans are absorbed
/// into the preceding span so the partition tiles the mapped region.
fn derive_target_partition(
    entries: &[SpanEntry],
    target: &SourceUnit,
    warnings: &mut Vec<String>,
) -> std::result::Result<Derived, MappingProblem> {
    // Unique spans in (start, end) order.
    let mut spans: Vec<(usize, usize)> = entries
        .iter()
        .map(|e| (e.start_line, e.end_line))
        .collect();
    spans.sort();
    spans.dedup();

    // Resolve overlaps front to back.
    let mut resolved: Vec<(usize, usize)> = Vec::with_capacity(spans.len());
    for (start, end) in spans {
        let (mut start, end) = (start, end);
        if let Some(&(_, prev_end)) = resolved.last() {
            if start <= prev_end {
                if end <= prev_end {
                    return Err(MappingProblem {
                        detail: format!(
                            "span {start}-{end} is contained in an earlier span ending at \
                             {prev_end}"
                        ),
                        error: Error::MappingInvalid {
                            reason: format!(
                                "target span {start}-{end} nests inside another span"
                            ),
                        },
                    });
                }
                warnings.push(format!(
                    "span {start}-{end} overlaps the previous span; truncated to {}-{end}",
                    prev_end + 1
                ));
                start = prev_end + 1;
            }
        }
        resolved.push((start, end));
    }

    // Absorb executable gap lines into the preceding span.
    let mut absorbed: Vec<usize> = Vec::new();
    for i in 0..resolved.len().saturating_sub(1) {
        let gap_end = resolved[i + 1].0 - 1;
        let mut new_end = resolved[i].1;
        for line_no in (resolved[i].1 + 1)..=gap_end {
            if is_executable(target.line(line_no), target.language) {
                absorbed.push(line_no);
                new_end = line_no;
            }
        }
        if new_end != resolved[i].1 {
            warnings.push(format!(
                "lines {}-{new_end} between spans absorbed into the preceding span",
                resolved[i].1 + 1
            ));
            resolved[i].1 = new_end;
        }
    }

    // Executable lines outside the mapped region, reported only.
    let hull = (
        resolved.first().map(|s| s.0).unwrap_or(1),
        resolved.last().map(|s| s.1).unwrap_or(0),
    );
    let mut unmapped: Vec<usize> = Vec::new();
    for line_no in 1..=target.line_count {
        let in_span = resolved.iter().any(|&(s, e)| s <= line_no && line_no <= e);
        let in_hull = hull.0 <= line_no && line_no <= hull.1;
        if !in_span && !in_hull && is_executable(target.line(line_no), target.language) {
            unmapped.push(line_no);
        }
    }

    let targets: Vec<TargetBlock> = resolved
        .iter()
        .enumerate()
        .map(|(i, &(start_line, end_line))| TargetBlock {
            id: i + 1,
            start_line,
            end_line,
            control_flow: start_line == end_line
                && syntax::is_control_header_line(target.line(start_line), target.language),
        })
        .collect();

    // f_map: a source block's target is the resolved span containing
    // its (possibly truncated) original span's end line.
    let mut map: BTreeMap<usize, usize> = BTreeMap::new();
    for e in entries {
        let tid = targets
            .iter()
            .find(|t| t.start_line <= e.end_line && e.end_line <= t.end_line)
            .or_else(|| {
                targets
                    .iter()
                    .find(|t| t.start_line <= e.start_line && e.start_line <= t.end_line)
            })
            .map(|t| t.id);
        match tid {
            Some(tid) => {
                map.insert(e.source_block, tid);
            }
            None => {
                return Err(MappingProblem {
                    detail: format!(
                        "BLOCK{} span {}-{} vanished during overlap resolution",
                        e.source_block, e.start_line, e.end_line
                    ),
                    error: Error::MappingInvalid {
                        reason: format!(
                            "no target block covers BLOCK{}'s span after normalization",
                            e.source_block
                        ),
                    },
                });
            }
        }
    }

    Ok((targets, map, absorbed, unmapped))
}

/// A line that plausibly executes: non-blank, not a comment, not pure
/// punctuation (`}`, `{`, `};`).
fn is_executable(line: &str, language: SubjectLanguage) -> bool {
    let t = line.trim();
    if t.is_empty() || t.starts_with(language.line_comment()) {
        return false;
    }
    !t.chars().all(|c| matches!(c, '{' | '}' | ';' | ' '))
}
