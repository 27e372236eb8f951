//! Frontend: checked parsing, statement-level CFG, and block partitioning.
//!
//! A *block* is the unit of alignment and localization. The partition
//! follows two criteria:
//!
//! 1. a maximal straight-line run of simple statements — no jumps in, and
//!    none out except at the end — forms one block;
//! 2. every control-flow statement header (`if`/`elif`/`else`/`for`/
//!    `while`/`try`/`except`/`finally`) is a singleton block of its own.
//!
//! Blocks are numbered 1..n in source order; `BLOCK3` in prompts and
//! mapping reports refers to `BlockPartition::blocks[2]`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lang::{SourceUnit, SubjectLanguage};
use crate::syntax::{self, ClauseKind, FunctionIr, SimpleKind, StmtNode};

/// Parse and validate a program: text must parse, the entry function must
/// exist exactly once, and its body must stay within the supported subset.
pub fn parse(
    text: impl Into<String>,
    language: SubjectLanguage,
    entry_name: impl Into<String>,
) -> Result<SourceUnit> {
    let unit = SourceUnit::new(language, text, entry_name);
    syntax::lower_function(&unit.text, language, &unit.entry_name)?;
    Ok(unit)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CfgNodeKind {
    Entry,
    Exit,
    /// A simple statement.
    Statement,
    /// A branching header (`if`/`elif`/`for`/`while`): ≥2 successors.
    Branch,
    /// A non-branching header (`else`/`try`/`except`/`finally`).
    ClauseHeader,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EdgeKind {
    Seq,
    True,
    False,
    /// Loop back-edge (body tail or `continue` to the loop header).
    Back,
    /// Exceptional transfer (`raise`, try → handler).
    Exception,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CfgNode {
    pub id: usize,
    pub kind: CfgNodeKind,
    /// 1-based source line span of the statement (entry/exit nodes use the
    /// function's signature/end lines).
    pub line: usize,
    pub end_line: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CfgEdge {
    pub from: usize,
    pub to: usize,
    pub kind: EdgeKind,
}

/// Statement-level control-flow graph of the entry function.
#[derive(Debug, Clone)]
pub struct Cfg {
    pub nodes: Vec<CfgNode>,
    pub edges: Vec<CfgEdge>,
    pub entry: usize,
    pub exit: usize,
    /// The lowered IR the graph was built from (consumed by
    /// [`extract_blocks`] and the instrumenter).
    pub ir: FunctionIr,
}

impl Cfg {
    pub fn successors(&self, id: usize) -> Vec<usize> {
        self.edges.iter().filter(|e| e.from == id).map(|e| e.to).collect()
    }

    /// True when `id` is the target of a back-edge (a loop header).
    pub fn has_back_edge(&self, id: usize) -> bool {
        self.edges
            .iter()
            .any(|e| e.to == id && e.kind == EdgeKind::Back)
    }
}

/// Build the statement-level CFG of the entry function.
pub fn build_cfg(unit: &SourceUnit) -> Result<Cfg> {
    let ir = syntax::lower_function(&unit.text, unit.language, &unit.entry_name)?;
    let mut b = CfgBuilder::new(&ir);
    let outs = b.lower_stmts(&ir.body, vec![(b.entry, EdgeKind::Seq)])?;
    for (from, kind) in outs {
        b.edge(from, b.exit, kind);
    }
    Ok(Cfg {
        nodes: b.nodes,
        edges: b.edges,
        entry: 0,
        exit: 1,
        ir,
    })
}

struct CfgBuilder {
    nodes: Vec<CfgNode>,
    edges: Vec<CfgEdge>,
    entry: usize,
    exit: usize,
    /// Stack of loop contexts: (header node, break exits collected so far).
    loops: Vec<(usize, Vec<usize>)>,
}

type Frontier = Vec<(usize, EdgeKind)>;

impl CfgBuilder {
    fn new(ir: &FunctionIr) -> Self {
        let nodes = vec![
            CfgNode {
                id: 0,
                kind: CfgNodeKind::Entry,
                line: ir.def_line,
                end_line: ir.def_line,
            },
            CfgNode {
                id: 1,
                kind: CfgNodeKind::Exit,
                line: ir.end_line,
                end_line: ir.end_line,
            },
        ];
        CfgBuilder {
            nodes,
            edges: Vec::new(),
            entry: 0,
            exit: 1,
            loops: Vec::new(),
        }
    }

    fn node(&mut self, kind: CfgNodeKind, line: usize, end_line: usize) -> usize {
        let id = self.nodes.len();
        self.nodes.push(CfgNode {
            id,
            kind,
            line,
            end_line,
        });
        id
    }

    fn edge(&mut self, from: usize, to: usize, kind: EdgeKind) {
        self.edges.push(CfgEdge { from, to, kind });
    }

    fn connect(&mut self, preds: &Frontier, to: usize) {
        for &(from, kind) in preds {
            self.edge(from, to, kind);
        }
    }

    fn lower_stmts(&mut self, stmts: &[StmtNode], mut preds: Frontier) -> Result<Frontier> {
        for stmt in stmts {
            preds = self.lower_stmt(stmt, preds)?;
        }
        Ok(preds)
    }

    fn lower_stmt(&mut self, stmt: &StmtNode, preds: Frontier) -> Result<Frontier> {
        match stmt {
            StmtNode::Simple(s) => {
                let n = self.node(CfgNodeKind::Statement, s.line, s.end_line);
                self.connect(&preds, n);
                match &s.kind {
                    SimpleKind::Plain => Ok(vec![(n, EdgeKind::Seq)]),
                    SimpleKind::Return { .. } => {
                        self.edge(n, self.exit, EdgeKind::Seq);
                        Ok(vec![])
                    }
                    SimpleKind::Raise => {
                        self.edge(n, self.exit, EdgeKind::Exception);
                        Ok(vec![])
                    }
                    SimpleKind::Break => {
                        if let Some((_, breaks)) = self.loops.last_mut() {
                            breaks.push(n);
                        } else {
                            // `break` outside a loop: treat as function exit
                            // rather than failing (compilers reject it anyway).
                            self.edge(n, self.exit, EdgeKind::Seq);
                        }
                        Ok(vec![])
                    }
                    SimpleKind::Continue => {
                        if let Some(&(header, _)) = self.loops.last() {
                            self.edge(n, header, EdgeKind::Back);
                        } else {
                            self.edge(n, self.exit, EdgeKind::Seq);
                        }
                        Ok(vec![])
                    }
                }
            }
            StmtNode::Compound(c) => {
                let body = &c.clauses[0];
                match c.kind {
                    crate::syntax::CompoundKind::If => {
                        let hdr =
                            self.node(CfgNodeKind::Branch, body.header_line, body.header_line);
                        self.connect(&preds, hdr);
                        let mut outs: Frontier = Vec::new();
                        let mut false_src: Option<(usize, EdgeKind)> = Some((hdr, EdgeKind::False));
                        let then_outs =
                            self.lower_stmts(&body.body, vec![(hdr, EdgeKind::True)])?;
                        outs.extend(then_outs);
                        for cl in &c.clauses[1..] {
                            match cl.kind {
                                ClauseKind::Elif => {
                                    let eh = self.node(
                                        CfgNodeKind::Branch,
                                        cl.header_line,
                                        cl.header_line,
                                    );
                                    if let Some((from, kind)) = false_src.take() {
                                        self.edge(from, eh, kind);
                                    }
                                    let body_outs =
                                        self.lower_stmts(&cl.body, vec![(eh, EdgeKind::True)])?;
                                    outs.extend(body_outs);
                                    false_src = Some((eh, EdgeKind::False));
                                }
                                ClauseKind::Else => {
                                    let eh = self.node(
                                        CfgNodeKind::ClauseHeader,
                                        cl.header_line,
                                        cl.header_line,
                                    );
                                    if let Some((from, kind)) = false_src.take() {
                                        self.edge(from, eh, kind);
                                    }
                                    let body_outs =
                                        self.lower_stmts(&cl.body, vec![(eh, EdgeKind::Seq)])?;
                                    outs.extend(body_outs);
                                }
                                _ => {}
                            }
                        }
                        outs.extend(false_src);
                        Ok(outs)
                    }
                    crate::syntax::CompoundKind::For | crate::syntax::CompoundKind::While => {
                        let hdr =
                            self.node(CfgNodeKind::Branch, body.header_line, body.header_line);
                        self.connect(&preds, hdr);
                        self.loops.push((hdr, Vec::new()));
                        let body_outs =
                            self.lower_stmts(&body.body, vec![(hdr, EdgeKind::True)])?;
                        for (from, _) in body_outs {
                            self.edge(from, hdr, EdgeKind::Back);
                        }
                        let (_, breaks) = self.loops.pop().expect("loop context pushed above");

                        let mut outs: Frontier =
                            breaks.into_iter().map(|n| (n, EdgeKind::Seq)).collect();
                        // `for ... else` runs on normal loop exit only.
                        let loop_exit = (hdr, EdgeKind::False);
                        if let Some(else_cl) =
                            c.clauses[1..].iter().find(|cl| cl.kind == ClauseKind::Else)
                        {
                            let eh = self.node(
                                CfgNodeKind::ClauseHeader,
                                else_cl.header_line,
                                else_cl.header_line,
                            );
                            self.edge(loop_exit.0, eh, loop_exit.1);
                            let else_outs =
                                self.lower_stmts(&else_cl.body, vec![(eh, EdgeKind::Seq)])?;
                            outs.extend(else_outs);
                        } else {
                            outs.push(loop_exit);
                        }
                        Ok(outs)
                    }
                    crate::syntax::CompoundKind::Try => {
                        let hdr = self.node(
                            CfgNodeKind::ClauseHeader,
                            body.header_line,
                            body.header_line,
                        );
                        self.connect(&preds, hdr);
                        let mut normal_outs =
                            self.lower_stmts(&body.body, vec![(hdr, EdgeKind::Seq)])?;
                        let mut handler_outs: Frontier = Vec::new();
                        let mut finally_cl = None;
                        for cl in &c.clauses[1..] {
                            match cl.kind {
                                ClauseKind::Except => {
                                    let eh = self.node(
                                        CfgNodeKind::ClauseHeader,
                                        cl.header_line,
                                        cl.header_line,
                                    );
                                    self.edge(hdr, eh, EdgeKind::Exception);
                                    let outs =
                                        self.lower_stmts(&cl.body, vec![(eh, EdgeKind::Seq)])?;
                                    handler_outs.extend(outs);
                                }
                                ClauseKind::Else => {
                                    let eh = self.node(
                                        CfgNodeKind::ClauseHeader,
                                        cl.header_line,
                                        cl.header_line,
                                    );
                                    self.connect(&normal_outs, eh);
                                    normal_outs =
                                        self.lower_stmts(&cl.body, vec![(eh, EdgeKind::Seq)])?;
                                }
                                ClauseKind::Finally => finally_cl = Some(cl),
                                _ => {}
                            }
                        }
                        let mut outs = normal_outs;
                        outs.extend(handler_outs);
                        if let Some(fin) = finally_cl {
                            let fh = self.node(
                                CfgNodeKind::ClauseHeader,
                                fin.header_line,
                                fin.header_line,
                            );
                            self.connect(&outs, fh);
                            outs = self.lower_stmts(&fin.body, vec![(fh, EdgeKind::Seq)])?;
                        }
                        Ok(outs)
                    }
                }
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BlockKind {
    Straight,
    ControlFlow,
}

/// One numbered block of the partition.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Block {
    /// 1-based ordinal in source order (`BLOCK{id}` in prompts).
    pub id: usize,
    pub kind: BlockKind,
    /// Inclusive 1-based source line span. Control-flow blocks span exactly
    /// their header line.
    pub start_line: usize,
    pub end_line: usize,
    /// Trimmed text of the first line, for reports and prompts.
    pub header_text: String,
}

impl Block {
    pub fn contains_line(&self, line: usize) -> bool {
        self.start_line <= line && line <= self.end_line
    }
}

/// The ordered block partition `P = <B_1..B_n>` of an entry function.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BlockPartition {
    pub language: SubjectLanguage,
    pub entry_name: String,
    pub blocks: Vec<Block>,
    /// Line span of the whole function (signature line .. last line).
    pub function_span: (usize, usize),
}

impl BlockPartition {
    pub fn block(&self, id: usize) -> Option<&Block> {
        self.blocks.get(id.checked_sub(1)?)
    }

    /// The block whose span covers `line`, if any.
    pub fn block_at_line(&self, line: usize) -> Option<&Block> {
        self.blocks.iter().find(|b| b.contains_line(line))
    }

    pub fn len(&self) -> usize {
        self.blocks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.blocks.is_empty()
    }
}

/// Partition the entry function into numbered blocks per the two division
/// criteria. Statement data comes from `cfg.ir`; `unit` supplies line text.
pub fn extract_blocks(cfg: &Cfg, unit: &SourceUnit) -> Result<BlockPartition> {
    let ir = &cfg.ir;
    let mut blocks: Vec<Block> = Vec::new();
    partition_stmts(&ir.body, unit, &mut blocks);
    for (idx, b) in blocks.iter_mut().enumerate() {
        b.id = idx + 1;
    }
    let partition = BlockPartition {
        language: unit.language,
        entry_name: unit.entry_name.clone(),
        blocks,
        function_span: (ir.def_line, ir.end_line),
    };
    validate_partition(&partition)?;
    Ok(partition)
}

/// Convenience: `build_cfg` + `extract_blocks` in one call.
pub fn partition(unit: &SourceUnit) -> Result<BlockPartition> {
    let cfg = build_cfg(unit)?;
    extract_blocks(&cfg, unit)
}

fn partition_stmts(stmts: &[StmtNode], unit: &SourceUnit, out: &mut Vec<Block>) {
    let mut run: Option<(usize, usize)> = None;

    let flush = |run: &mut Option<(usize, usize)>, out: &mut Vec<Block>| {
        if let Some((start, end)) = run.take() {
            out.push(Block {
                id: 0,
                kind: BlockKind::Straight,
                start_line: start,
                end_line: end,
                header_text: unit.line(start).trim().to_string(),
            });
        }
    };

    for stmt in stmts {
        match stmt {
            StmtNode::Simple(s) => {
                match &mut run {
                    Some((_, end)) => *end = s.end_line,
                    None => run = Some((s.line, s.end_line)),
                }
                if s.kind.is_jump() {
                    flush(&mut run, out);
                }
            }
            StmtNode::Compound(c) => {
                flush(&mut run, out);
                for cl in &c.clauses {
                    out.push(Block {
                        id: 0,
                        kind: BlockKind::ControlFlow,
                        start_line: cl.header_line,
                        end_line: cl.header_line,
                        header_text: unit.line(cl.header_line).trim().to_string(),
                    });
                    partition_stmts(&cl.body, unit, out);
                }
            }
        }
    }
    flush(&mut run, out);
}

fn validate_partition(p: &BlockPartition) -> Result<()> {
    let mut prev_end = 0usize;
    for b in &p.blocks {
        if b.start_line <= prev_end {
            return Err(Error::Config {
                detail: format!(
                    "internal: block {} span {}..{} overlaps previous block ending at {}",
                    b.id, b.start_line, b.end_line, prev_end
                ),
            });
        }
        if b.kind == BlockKind::ControlFlow && b.start_line != b.end_line {
            return Err(Error::Config {
                detail: format!("internal: control-flow block {} spans multiple lines", b.id),
            });
        }
        prev_end = b.end_line;
    }
    Ok(())
}
