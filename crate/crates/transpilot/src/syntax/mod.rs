//! Language-neutral statement IR.
//!
//! The frontend lowers each subject language's concrete syntax tree into a
//! small statement-level IR shared by the CFG builder, the block
//! partitioner, and the instrumenter, so those stages are written once.
//!
//! The supported subject subset is single-function programs built from
//! assignments/calls, `if`/`elif`/`else`, `for`, `while`,
//! `try`/`except`(`catch`)/`finally`, `return`, `break`, `continue`, and
//! `raise`/`throw`. Nested function and class definitions are treated as
//! opaque simple statements inside their enclosing block. Constructs
//! outside the subset (`match`, `switch`, `do`/`while`, `with`, `goto`,
//! labeled statements) are rejected with
//! [`Error::UnsupportedConstruct`](crate::Error::UnsupportedConstruct), as
//! are single-line suites such as `if x: return 1` — probe placement and
//! block spans are line-based, so each suite must start on its own line.

mod cpp;
mod java;
mod python;

use tree_sitter::{Node, Parser, Tree};

use crate::error::{Error, Result};
use crate::lang::SubjectLanguage;

/// Classification of a simple (non-compound) statement.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SimpleKind {
    /// Assignment, call, declaration, or any other fall-through statement.
    Plain,
    /// `return` with the raw text of the returned expression, if any.
    Return { expr_text: Option<String> },
    Break,
    Continue,
    /// `raise` / `throw`.
    Raise,
}

impl SimpleKind {
    /// True for statements that leave the block (end a straight-line run).
    pub fn is_jump(&self) -> bool {
        !matches!(self, SimpleKind::Plain)
    }
}

/// A simple statement with its line/column span.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SimpleStmt {
    /// 1-based line of the first token.
    pub line: usize,
    /// 0-based byte column of the first token (indentation for probe splicing).
    pub col: usize,
    /// 1-based line of the last token (== `line` unless the statement wraps).
    pub end_line: usize,
    /// 0-based byte column just past the last token on `end_line`.
    pub end_col: usize,
    pub kind: SimpleKind,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CompoundKind {
    If,
    For,
    While,
    Try,
}

/// Which suite of a compound statement a clause is.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ClauseKind {
    /// The primary suite: then-branch, loop body, or try body. Its header
    /// is the compound's own header line.
    Body,
    Elif,
    Else,
    Except,
    Finally,
}

/// One suite of a compound statement, with its header location.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Clause {
    pub kind: ClauseKind,
    /// 1-based header line (`if`/`elif`/`else`/`except`... keyword line).
    pub header_line: usize,
    /// 0-based column of the header keyword.
    pub header_col: usize,
    /// For C-family braced suites: the line holding the opening `{`.
    /// `None` for Python suites and for braceless single-statement bodies.
    pub body_open_line: Option<usize>,
    /// Unique suite id (preorder within the function), used as a scope key.
    pub suite_id: usize,
    pub body: Vec<StmtNode>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Compound {
    pub kind: CompoundKind,
    /// Clauses in source order; `clauses[0].kind == ClauseKind::Body`.
    pub clauses: Vec<Clause>,
}

impl Compound {
    pub fn header_line(&self) -> usize {
        self.clauses[0].header_line
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum StmtNode {
    Simple(SimpleStmt),
    Compound(Compound),
}

impl StmtNode {
    pub fn start_line(&self) -> usize {
        match self {
            StmtNode::Simple(s) => s.line,
            StmtNode::Compound(c) => c.header_line(),
        }
    }

    pub fn end_line(&self) -> usize {
        match self {
            StmtNode::Simple(s) => s.end_line,
            StmtNode::Compound(c) => c
                .clauses
                .iter()
                .flat_map(|cl| cl.body.iter().map(|s| s.end_line()))
                .max()
                .unwrap_or_else(|| c.header_line()),
        }
    }
}

/// A local variable declaration visible to static probe capture
/// (C-family languages; Python captures locals dynamically).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VarDecl {
    pub name: String,
    /// 1-based line where the name is bound. A probe at line `L` sees the
    /// variable iff `line < L` and the declaring suite encloses the probe.
    pub line: usize,
    /// Declared type text, normalized by the capture gate ("" if unknown).
    pub type_text: String,
    /// Path of suite ids from the function body to the declaring suite.
    /// Empty = declared directly in the function body.
    pub scope: Vec<usize>,
}

/// The entry function lowered to the statement IR.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FunctionIr {
    pub name: String,
    pub params: Vec<String>,
    /// Return type text for typed languages (`None` for Python).
    pub ret_type: Option<String>,
    /// 1-based line of the signature's first token.
    pub def_line: usize,
    /// 1-based last line of the function (closing brace / last body line).
    pub end_line: usize,
    pub body: Vec<StmtNode>,
    /// Parameters plus local declarations, with scope info.
    pub decls: Vec<VarDecl>,
    /// Header lines of C-family suites written without braces. Block
    /// partitioning tolerates these; instrumentation rejects them because
    /// splicing a probe into a braceless suite would change semantics.
    pub braceless_suites: Vec<usize>,
}

impl FunctionIr {
    /// Depth-first visit of every statement with its suite path.
    pub fn walk<'a>(&'a self, mut f: impl FnMut(&'a StmtNode, &[usize])) {
        fn go<'a>(
            stmts: &'a [StmtNode],
            path: &mut Vec<usize>,
            f: &mut impl FnMut(&'a StmtNode, &[usize]),
        ) {
            for s in stmts {
                f(s, path);
                if let StmtNode::Compound(c) = s {
                    for cl in &c.clauses {
                        path.push(cl.suite_id);
                        go(&cl.body, path, f);
                        path.pop();
                    }
                }
            }
        }
        let mut path = Vec::new();
        go(&self.body, &mut path, &mut f);
    }

    /// Find the clause (if any) whose header sits on `line`.
    pub fn clause_at_header(&self, line: usize) -> Option<&Clause> {
        let mut found: Option<&Clause> = None;
        self.walk(|s, _| {
            if let StmtNode::Compound(c) = s {
                for cl in &c.clauses {
                    if cl.header_line == line {
                        found = Some(cl);
                    }
                }
            }
        });
        found
    }
}

fn ts_language(lang: SubjectLanguage) -> tree_sitter::Language {
    match lang {
        SubjectLanguage::Python => tree_sitter_python::LANGUAGE.into(),
        SubjectLanguage::Java => tree_sitter_java::LANGUAGE.into(),
        SubjectLanguage::Cpp => tree_sitter_cpp::LANGUAGE.into(),
    }
}

/// Parse `text` into a concrete syntax tree, failing on the first
/// error/missing node so downstream stages never see partial parses.
pub fn parse_tree(text: &str, language: SubjectLanguage) -> Result<Tree> {
    let mut parser = Parser::new();
    parser
        .set_language(&ts_language(language))
        .map_err(|e| Error::Config {
            detail: format!("grammar load failed for {language}: {e}"),
        })?;
    let tree = parser.parse(text, None).ok_or_else(|| Error::Syntax {
        line: None,
        message: "parser produced no tree".into(),
    })?;
    if tree.root_node().has_error() {
        let (line, what) = first_error(tree.root_node());
        return Err(Error::Syntax {
            line: Some(line),
            message: what,
        });
    }
    Ok(tree)
}

fn first_error(root: Node) -> (usize, String) {
    let mut cursor = root.walk();
    let mut stack = vec![root];
    while let Some(node) = stack.pop() {
        if node.is_error() {
            return (node.start_position().row + 1, "invalid syntax".into());
        }
        if node.is_missing() {
            return (
                node.start_position().row + 1,
                format!("missing `{}`", node.kind()),
            );
        }
        let mut kids: Vec<Node> = node.children(&mut cursor).collect();
        kids.reverse();
        stack.extend(kids);
    }
    (root.start_position().row + 1, "invalid syntax".into())
}

/// Lower the entry function of `text` into the statement IR.
pub fn lower_function(
    text: &str,
    language: SubjectLanguage,
    entry_name: &str,
) -> Result<FunctionIr> {
    let tree = parse_tree(text, language)?;
    match language {
        SubjectLanguage::Python => python::lower(text, &tree, entry_name),
        SubjectLanguage::Java => java::lower(text, &tree, entry_name),
        SubjectLanguage::Cpp => cpp::lower(text, &tree, entry_name),
    }
}

/// Quick textual test for "this single line is a control-flow header",
/// used when classifying derived target blocks whose spans come from the
/// aligner rather than from a CFG.
pub fn is_control_header_line(line_text: &str, language: SubjectLanguage) -> bool {
    let t = line_text.trim_start();
    let t = t.strip_prefix('}').map(str::trim_start).unwrap_or(t);
    let keywords: &[&str] = match language {
        SubjectLanguage::Python => &[
            "if ", "if(", "elif ", "elif(", "else:", "else :", "for ", "while ", "while(", "try:",
            "try :", "except", "finally:", "finally :",
        ],
        SubjectLanguage::Java | SubjectLanguage::Cpp => &[
            "if ", "if(", "else", "for ", "for(", "while ", "while(", "try", "catch", "finally",
        ],
    };
    keywords.iter().any(|k| {
        t.starts_with(k)
            || (*k == "else" && (t == "else" || t.starts_with("else ") || t.starts_with("else{")))
            || (*k == "try" && (t == "try" || t.starts_with("try ") || t.starts_with("try{")))
    })
}

// ---------- shared helpers for the per-language lowerings ----------

pub(crate) fn node_line(n: Node) -> usize {
    n.start_position().row + 1
}

pub(crate) fn node_end_line(n: Node) -> usize {
    n.end_position().row + 1
}

pub(crate) fn node_col(n: Node) -> usize {
    n.start_position().column
}

pub(crate) fn node_end_col(n: Node) -> usize {
    n.end_position().column
}

pub(crate) fn node_text<'a>(n: Node, src: &'a str) -> &'a str {
    n.utf8_text(src.as_bytes()).unwrap_or("")
}

/// Extract the returned-expression text from the raw statement text, e.g.
/// `return a, b;` → `Some("a, b")`, `return` → `None`.
pub(crate) fn return_expr_text(stmt_text: &str) -> Option<String> {
    let t = stmt_text.trim();
    let t = t.strip_prefix("return").unwrap_or(t);
    let t = t.trim().trim_end_matches(';').trim();
    if t.is_empty() {
        None
    } else {
        Some(t.to_string())
    }
}

/// Reject suites whose first statement begins on the header line itself
/// (single-line suites break line-based probe splicing and block spans).
pub(crate) fn check_inline_suite(header_line: usize, body: &[StmtNode]) -> Result<()> {
    if let Some(first) = body.first() {
        if first.start_line() == header_line {
            return Err(Error::UnsupportedConstruct {
                line: header_line,
                construct: "single-line suite (statements on the header line)".into(),
            });
        }
    }
    Ok(())
}

/// Render the CST shape of `text` for lowering diagnostics in tests.
#[allow(dead_code)]
pub(crate) fn debug_tree(text: &str, language: SubjectLanguage) -> String {
    fn go(node: Node, src: &str, depth: usize, out: &mut String) {
        let mut cursor = node.walk();
        let snippet: String = node_text(node, src).chars().take(36).collect();
        out.push_str(&format!(
            "{:indent$}{} [{}..{}] {:?}\n",
            "",
            node.kind(),
            node.start_position().row + 1,
            node.end_position().row + 1,
            snippet,
            indent = depth * 2
        ));
        for child in node.children(&mut cursor) {
            go(child, src, depth + 1, out);
        }
    }
    let mut parser = Parser::new();
    parser.set_language(&ts_language(language)).unwrap();
    let tree = parser.parse(text, None).unwrap();
    let mut out = String::new();
    go(tree.root_node(), text, 0, &mut out);
    out
}
