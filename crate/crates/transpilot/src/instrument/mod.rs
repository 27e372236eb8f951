//! Probe injection: one trace emission per block.
//!
//! Instrumentation rewrites a program so that executing it prints one
//! `__TRACE__ …` line (see [`crate::trace`]) each time control passes
//! through a block, without changing the program's own behavior. The
//! placement rules:
//!
//! * block ends in `return` — the return is rewritten so the probe sees
//!   the computed value (`__ret__`) before control leaves (*entry*
//!   placement, per the wire format);
//! * block ends in `break`/`continue`/`raise` — the probe is spliced
//!   immediately before the jump (*exit* placement);
//! * control-flow header block — the probe becomes the first statement
//!   of the controlled suite, so it fires once per branch-taken or loop
//!   iteration (*exit*);
//! * plain straight-line block — the probe is spliced right after the
//!   last statement (*exit*).
//!
//! The same engine instruments translation *targets*, whose "blocks" are
//! line spans produced by the aligner rather than CFG-derived blocks; a
//! second planner ([`plan_target_probes`]) maps span shapes onto the
//! placements above.
//!
//! Python captures the variable state dynamically via `locals()`. C-family
//! languages capture statically: every declaration in scope at the probe
//! whose declared type the emitter can serialize (see the gate in
//! [`cpp`]); other variables appear as `{"__repr__": "<type>"}` markers.

pub mod cpp;
pub mod python;

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::frontend::{BlockKind, BlockPartition};
use crate::lang::{InputEncoding, SourceUnit, SubjectLanguage};
use crate::runner::{self, Limits, RunResult, Toolchains};
use crate::syntax::{self, Clause, ClauseKind, FunctionIr, SimpleKind, SimpleStmt, StmtNode};
use crate::trace::Placement;

/// Marker comment present in every instrumented program; instrumenting
/// twice is always a caller bug.
pub const INSTRUMENT_SENTINEL: &str = "__TP_INSTRUMENTED__";

/// Where and how one probe is spliced into the text.
#[derive(Debug, Clone, PartialEq)]
pub enum ProbeAction {
    /// Splice `; emit` right after (line, col) — the end of the anchor
    /// statement.
    AfterStmt { line: usize, col: usize },
    /// Splice `emit; ` at (line, col) — the start of a jump statement.
    BeforeJump { line: usize, col: usize },
    /// Insert an own-line emit before `line`, indented like the statement
    /// at column `col`.
    OwnLineBefore { line: usize, col: usize },
    /// Replace the `return` statement spanning the given range with a
    /// capture + emit + return of the captured value.
    RewriteReturn {
        line: usize,
        col: usize,
        end_line: usize,
        end_col: usize,
        expr: Option<String>,
    },
}

/// One planned probe for one block.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbeSite {
    pub block_id: usize,
    pub placement: Placement,
    pub action: ProbeAction,
    /// Line used for the static capture rule: a declaration is visible
    /// iff `decl.line < capture_line` and its scope encloses the probe.
    pub capture_line: usize,
    /// Suite-id path of the probe location, for the scope check.
    pub capture_path: Vec<usize>,
}

/// A program with probes spliced in, ready for a driver + execution.
#[derive(Debug, Clone)]
pub struct InstrumentedProgram {
    pub language: SubjectLanguage,
    /// Emitter shim/prelude followed by the probed program text.
    pub text: String,
    pub sites: Vec<ProbeSite>,
}

// ---------- planning ----------

struct ClauseInfo<'a> {
    clause: &'a Clause,
    /// Suite path of the statement list *containing* the compound.
    enclosing_path: Vec<usize>,
    /// Suite path inside the clause body (`enclosing_path` + suite id).
    body_path: Vec<usize>,
}

struct IrIndex<'a> {
    stmts: Vec<(&'a SimpleStmt, Vec<usize>)>,
    clauses: Vec<ClauseInfo<'a>>,
}

fn index_ir(ir: &FunctionIr) -> IrIndex<'_> {
    let mut stmts = Vec::new();
    let mut clauses = Vec::new();
    ir.walk(|node, path| match node {
        StmtNode::Simple(s) => stmts.push((s, path.to_vec())),
        StmtNode::Compound(c) => {
            for cl in &c.clauses {
                let mut body_path = path.to_vec();
                body_path.push(cl.suite_id);
                clauses.push(ClauseInfo {
                    clause: cl,
                    enclosing_path: path.to_vec(),
                    body_path,
                });
            }
        }
    });
    IrIndex { stmts, clauses }
}

fn stmt_start(node: &StmtNode) -> (usize, usize) {
    match node {
        StmtNode::Simple(s) => (s.line, s.col),
        StmtNode::Compound(c) => (c.clauses[0].header_line, c.clauses[0].header_col),
    }
}

/// Probe at the first line of a clause body (the header's controlled
/// suite). Fails on empty suites: there is no line to stand on.
fn suite_entry_site(
    block_id: usize,
    info: &ClauseInfo<'_>,
    placement: Placement,
) -> Result<ProbeSite> {
    let first = info.clause.body.first().ok_or_else(|| Error::InstrumentationFailure {
        block_id,
        reason: format!(
            "suite at line {} is empty; a probe needs at least one statement",
            info.clause.header_line
        ),
    })?;
    let (line, col) = stmt_start(first);
    Ok(ProbeSite {
        block_id,
        placement,
        action: ProbeAction::OwnLineBefore { line, col },
        capture_line: line,
        capture_path: info.body_path.clone(),
    })
}

fn straight_site(
    block_id: usize,
    last: &SimpleStmt,
    path: &[usize],
) -> ProbeSite {
    match &last.kind {
        SimpleKind::Return { expr_text } => ProbeSite {
            block_id,
            placement: Placement::Entry,
            action: ProbeAction::RewriteReturn {
                line: last.line,
                col: last.col,
                end_line: last.end_line,
                end_col: last.end_col,
                expr: expr_text.clone(),
            },
            capture_line: last.line,
            capture_path: path.to_vec(),
        },
        SimpleKind::Break | SimpleKind::Continue | SimpleKind::Raise => ProbeSite {
            block_id,
            placement: Placement::Exit,
            action: ProbeAction::BeforeJump {
                line: last.line,
                col: last.col,
            },
            capture_line: last.line,
            capture_path: path.to_vec(),
        },
        SimpleKind::Plain => ProbeSite {
            block_id,
            placement: Placement::Exit,
            action: ProbeAction::AfterStmt {
                line: last.end_line,
                col: last.end_col,
            },
            // The probe runs after the anchor statement, so declarations
            // on the anchor's own lines are visible.
            capture_line: last.end_line + 1,
            capture_path: path.to_vec(),
        },
    }
}

/// Plan one probe per block of a source partition.
pub fn plan_source_probes(ir: &FunctionIr, partition: &BlockPartition) -> Result<Vec<ProbeSite>> {
    let index = index_ir(ir);
    let mut sites = Vec::with_capacity(partition.len());
    for block in &partition.blocks {
        match block.kind {
            BlockKind::ControlFlow => {
                let info = index
                    .clauses
                    .iter()
                    .find(|c| c.clause.header_line == block.start_line)
                    .ok_or_else(|| Error::InstrumentationFailure {
                        block_id: block.id,
                        reason: format!("no clause header found at line {}", block.start_line),
                    })?;
                sites.push(suite_entry_site(block.id, info, Placement::Exit)?);
            }
            BlockKind::Straight => {
                let (last, path) = index
                    .stmts
                    .iter()
                    .filter(|(s, _)| s.line >= block.start_line && s.line <= block.end_line)
                    .max_by_key(|(s, _)| (s.line, s.col))
                    .ok_or_else(|| Error::InstrumentationFailure {
                        block_id: block.id,
                        reason: format!(
                            "no statements in block span {}..{}",
                            block.start_line, block.end_line
                        ),
                    })?;
                sites.push(straight_site(block.id, last, path));
            }
        }
    }
    Ok(sites)
}

/// Plan probes for a *derived* target partition: 1-based block ids in
/// span order, spans as inclusive (start, end) line pairs.
pub fn plan_target_probes(ir: &FunctionIr, spans: &[(usize, usize)]) -> Result<Vec<ProbeSite>> {
    let index = index_ir(ir);
    let mut sites = Vec::new();
    for (i, &(a, b)) in spans.iter().enumerate() {
        let block_id = i + 1;
        if a > b || a == 0 {
            return Err(Error::InstrumentationFailure {
                block_id,
                reason: format!("invalid span {a}..{b}"),
            });
        }
        let stmts: Vec<&(&SimpleStmt, Vec<usize>)> = index
            .stmts
            .iter()
            .filter(|(s, _)| s.line >= a && s.line <= b)
            .collect();
        let headers: Vec<&ClauseInfo<'_>> = index
            .clauses
            .iter()
            .filter(|c| c.clause.header_line >= a && c.clause.header_line <= b)
            .collect();

        let returns: Vec<&(&SimpleStmt, Vec<usize>)> = stmts
            .iter()
            .copied()
            .filter(|(s, _)| matches!(s.kind, SimpleKind::Return { .. }))
            .collect();

        if !returns.is_empty() {
            // Rewrite every return in the span; at most one fires per
            // pass, so the one-emission-per-traversal invariant holds.
            for (s, path) in returns {
                sites.push(straight_site(block_id, s, path));
            }
            continue;
        }

        if stmts.is_empty() && headers.len() == 1 && a == b {
            sites.push(suite_entry_site(block_id, headers[0], Placement::Exit)?);
            continue;
        }

        if !headers.is_empty() {
            // The span covers compound structure: probe at its first item.
            let first_stmt = stmts.iter().map(|(s, p)| (s.line, s.col, p.as_slice())).min();
            let first_hdr = headers
                .iter()
                .map(|c| {
                    (
                        c.clause.header_line,
                        c.clause.header_col,
                        c,
                    )
                })
                .min_by_key(|(l, c, _)| (*l, *c));
            let site = match (first_stmt, first_hdr) {
                (Some((sl, sc, sp)), Some((hl, _, _))) if sl < hl => ProbeSite {
                    block_id,
                    placement: Placement::Entry,
                    action: ProbeAction::OwnLineBefore { line: sl, col: sc },
                    capture_line: sl,
                    capture_path: sp.to_vec(),
                },
                (_, Some((hl, hc, info))) => {
                    if info.clause.kind == ClauseKind::Body {
                        ProbeSite {
                            block_id,
                            placement: Placement::Entry,
                            action: ProbeAction::OwnLineBefore { line: hl, col: hc },
                            capture_line: hl,
                            capture_path: info.enclosing_path.clone(),
                        }
                    } else {
                        // `elif`/`else`/`except`/`finally`: nothing may
                        // precede the keyword, so probe inside its suite.
                        suite_entry_site(block_id, info, Placement::Entry)?
                    }
                }
                _ => unreachable!("headers is non-empty"),
            };
            sites.push(site);
            continue;
        }

        if let Some((last, path)) = stmts
            .iter()
            .map(|(s, p)| (*s, p))
            .max_by_key(|(s, _)| (s.line, s.col))
        {
            sites.push(straight_site(block_id, last, path));
            continue;
        }

        return Err(Error::InstrumentationFailure {
            block_id,
            reason: format!("mapped span {a}..{b} contains no statements"),
        });
    }
    Ok(sites)
}

// ---------- splicing ----------

/// A pending text edit in *original* (line, col) coordinates.
#[derive(Debug, Clone)]
pub(crate) enum Edit {
    Insert {
        line: usize,
        col: usize,
        text: String,
    },
    Replace {
        start: (usize, usize),
        end: (usize, usize),
        text: String,
    },
}

fn line_starts(text: &str) -> Vec<usize> {
    let mut starts = vec![0];
    for (i, b) in text.bytes().enumerate() {
        if b == b'\n' {
            starts.push(i + 1);
        }
    }
    starts
}

fn apply_edits(text: &str, edits: Vec<(Edit, usize)>) -> Result<String> {
    let starts = line_starts(text);
    let offset = |line: usize, col: usize| -> Result<usize> {
        let base = starts.get(line - 1).copied().ok_or_else(|| Error::Infra {
            detail: format!("edit past end of file (line {line})"),
        })?;
        Ok(base + col)
    };
    let mut resolved: Vec<(usize, usize, usize, String)> = Vec::new(); // (start, end, order, text)
    for (edit, order) in edits {
        match edit {
            Edit::Insert { line, col, text } => {
                let at = offset(line, col)?;
                resolved.push((at, at, order, text));
            }
            Edit::Replace { start, end, text } => {
                let s = offset(start.0, start.1)?;
                let e = offset(end.0, end.1)?;
                resolved.push((s, e, order, text));
            }
        }
    }
    // Apply back-to-front so earlier offsets stay valid. At equal
    // offsets, apply the higher-order edit first so that lower-order
    // text ends up leftmost (probes fire in block order).
    resolved.sort_by(|a, b| (b.0, b.2).cmp(&(a.0, a.2)));
    let mut out = text.to_string();
    for (s, e, _, t) in resolved {
        out.replace_range(s..e, &t);
    }
    Ok(out)
}

fn indent_of(unit: &SourceUnit, line: usize, col: usize) -> String {
    let text = unit.line(line);
    let mut end = col.min(text.len());
    while !text.is_char_boundary(end) {
        end -= 1;
    }
    let prefix = &text[..end];
    if prefix.chars().all(char::is_whitespace) {
        prefix.to_string()
    } else {
        " ".repeat(col)
    }
}

fn render_sites(
    unit: &SourceUnit,
    ir: &FunctionIr,
    sites: &[ProbeSite],
) -> Result<Vec<(Edit, usize)>> {
    let mut edits = Vec::with_capacity(sites.len());
    for (order, site) in sites.iter().enumerate() {
        let edit = match unit.language {
            SubjectLanguage::Python => python::render_site(unit, site),
            SubjectLanguage::Cpp => cpp::render_site(unit, ir, site)?,
            SubjectLanguage::Java => {
                return Err(Error::CapabilityUnsupported {
                    language: SubjectLanguage::Java,
                    operation: "instrumentation".to_string(),
                    detail: "Java probe emission is not implemented; translate and \
                             syntax-fix stages remain available"
                        .to_string(),
                })
            }
        };
        edits.push((edit, order));
    }
    Ok(edits)
}

fn ensure_instrumentable(unit: &SourceUnit, ir: &FunctionIr) -> Result<()> {
    if unit.text.contains(INSTRUMENT_SENTINEL) {
        return Err(Error::InstrumentationFailure {
            block_id: 0,
            reason: "program is already instrumented".to_string(),
        });
    }
    if let Some(&line) = ir.braceless_suites.first() {
        return Err(Error::InstrumentationFailure {
            block_id: 0,
            reason: format!(
                "braceless suite at line {line}: splicing a probe there would change \
                 which statements the header controls"
            ),
        });
    }
    Ok(())
}

fn assemble(unit: &SourceUnit, ir: &FunctionIr, sites: Vec<ProbeSite>) -> Result<InstrumentedProgram> {
    let edits = render_sites(unit, ir, &sites)?;
    let spliced = apply_edits(&unit.text, edits)?;
    let shim: &str = match unit.language {
        SubjectLanguage::Python => &python::SHIM,
        SubjectLanguage::Cpp => cpp::PRELUDE,
        SubjectLanguage::Java => unreachable!("rejected in render_sites"),
    };
    Ok(InstrumentedProgram {
        language: unit.language,
        text: format!("{shim}\n{spliced}"),
        sites,
    })
}

/// Instrument a source program against its own block partition.
pub fn instrument_source(
    unit: &SourceUnit,
    partition: &BlockPartition,
) -> Result<InstrumentedProgram> {
    let ir = syntax::lower_function(&unit.text, unit.language, &unit.entry_name)?;
    ensure_instrumentable(unit, &ir)?;
    let sites = plan_source_probes(&ir, partition)?;
    assemble(unit, &ir, sites)
}

/// Instrument a target program against aligner-derived line spans
/// (`spans[i]` is block `i+1`).
pub fn instrument_target(
    unit: &SourceUnit,
    spans: &[(usize, usize)],
) -> Result<InstrumentedProgram> {
    let ir = syntax::lower_function(&unit.text, unit.language, &unit.entry_name)?;
    ensure_instrumentable(unit, &ir)?;
    let sites = plan_target_probes(&ir, spans)?;
    assemble(unit, &ir, sites)
}

// ---------- drivers & execution ----------

/// Attach the input/output driver a program needs to run one test.
///
/// For `stdin` encoding the program is self-driving and is returned
/// unchanged. For `args` encoding a main/driver is appended that reads a
/// JSON argument array from stdin, calls the entry function, and prints
/// the result canonically. The driver text depends only on the entry
/// signature, so baseline and instrumented variants stay comparable
/// line-for-line after trace stripping.
pub fn with_driver(unit: &SourceUnit, encoding: InputEncoding) -> Result<String> {
    match encoding {
        InputEncoding::Stdin => Ok(unit.text.clone()),
        InputEncoding::Args => match unit.language {
            SubjectLanguage::Python => Ok(format!(
                "{}\n{}",
                unit.text,
                python::driver(&unit.entry_name)
            )),
            SubjectLanguage::Cpp => {
                let ir = syntax::lower_function(&unit.text, unit.language, &unit.entry_name)?;
                let driver = cpp::driver(&ir)?;
                let prelude = if unit.text.contains(INSTRUMENT_SENTINEL) {
                    "" // instrumented text already starts with the prelude
                } else {
                    cpp::PRELUDE
                };
                Ok(format!("{}{}\n{}", prelude, unit.text, driver))
            }
            SubjectLanguage::Java => Err(Error::CapabilityUnsupported {
                language: SubjectLanguage::Java,
                operation: "driver generation".to_string(),
                detail: "args-encoded tasks need a generated driver, which is not \
                         implemented for Java"
                    .to_string(),
            }),
        },
    }
}

/// A program staged for repeated test runs (written/compiled once).
#[derive(Debug, Clone)]
pub struct PreparedProgram {
    pub language: SubjectLanguage,
    kind: PreparedKind,
}

#[derive(Debug, Clone)]
enum PreparedKind {
    Python(PathBuf),
    Cpp(PathBuf),
    Java(runner::JavaProgram),
}

/// Write or compile `full_text` (program + driver) under `workdir`.
pub fn prepare_program(
    tc: &Toolchains,
    language: SubjectLanguage,
    full_text: &str,
    workdir: &Path,
    limits: Limits,
) -> Result<PreparedProgram> {
    std::fs::create_dir_all(workdir)?;
    let kind = match language {
        SubjectLanguage::Python => {
            tc.require(language)?;
            let mut hasher = Sha256::new();
            hasher.update(full_text.as_bytes());
            let digest = hasher.finalize();
            let key: String = digest[..8].iter().map(|b| format!("{b:02x}")).collect();
            let path = workdir.join(format!("prog-{key}.py"));
            std::fs::write(&path, full_text)?;
            PreparedKind::Python(path)
        }
        SubjectLanguage::Cpp => {
            PreparedKind::Cpp(runner::compile_cpp(tc, full_text, workdir, limits)?)
        }
        SubjectLanguage::Java => {
            PreparedKind::Java(runner::compile_java(tc, full_text, workdir, limits)?)
        }
    };
    Ok(PreparedProgram { language, kind })
}

impl PreparedProgram {
    /// Run the prepared program once with the given stdin.
    pub fn run(&self, tc: &Toolchains, stdin: Option<&str>, limits: Limits) -> Result<RunResult> {
        match &self.kind {
            PreparedKind::Python(path) => runner::run_python_file(tc, path, stdin, limits),
            PreparedKind::Cpp(bin) => runner::run_binary(bin, stdin, limits),
            PreparedKind::Java(prog) => runner::run_java(tc, prog, stdin, limits),
        }
    }
}

/// Variables captured at a probe: C-family static scope resolution.
/// Visible = declared strictly before `capture_line` in a suite whose
/// path prefixes the probe's path; shadowing resolves to the innermost,
/// latest declaration.
pub(crate) fn visible_decls<'a>(
    ir: &'a FunctionIr,
    capture_line: usize,
    capture_path: &[usize],
) -> Vec<&'a syntax::VarDecl> {
    let mut chosen: BTreeMap<&str, &syntax::VarDecl> = BTreeMap::new();
    for d in &ir.decls {
        if d.line >= capture_line {
            continue;
        }
        if !capture_path.starts_with(&d.scope) {
            continue;
        }
        match chosen.get(d.name.as_str()) {
            Some(prev)
                if (prev.scope.len(), prev.line) >= (d.scope.len(), d.line) => {}
            _ => {
                chosen.insert(&d.name, d);
            }
        }
    }
    chosen.into_values().collect()
}
