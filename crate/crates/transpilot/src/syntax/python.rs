//! Python lowering to the statement IR.

use tree_sitter::{Node, Tree};

use super::{
    check_inline_suite, node_col, node_end_col, node_end_line, node_line, node_text,
    return_expr_text, Clause,
    ClauseKind, Compound, CompoundKind, FunctionIr, SimpleKind, SimpleStmt, StmtNode, VarDecl,
};
use crate::error::{Error, Result};

struct Ctx<'a> {
    src: &'a str,
    next_suite: usize,
}

impl Ctx<'_> {
    fn suite_id(&mut self) -> usize {
        let id = self.next_suite;
        self.next_suite += 1;
        id
    }
}

pub(super) fn lower(src: &str, tree: &Tree, entry: &str) -> Result<FunctionIr> {
    let func = find_function(tree.root_node(), src, entry)?;
    let params = collect_params(func, src);
    let body_node = func
        .child_by_field_name("body")
        .ok_or_else(|| Error::Syntax {
            line: Some(node_line(func)),
            message: format!("function `{entry}` has no body"),
        })?;

    let def_line = node_line(func);
    let mut ctx = Ctx { src, next_suite: 0 };
    let body = lower_suite(&mut ctx, body_node)?;

    let decls = params
        .iter()
        .map(|p| VarDecl {
            name: p.clone(),
            line: def_line,
            type_text: String::new(),
            scope: Vec::new(),
        })
        .collect();

    Ok(FunctionIr {
        name: entry.to_string(),
        params,
        ret_type: None,
        def_line,
        end_line: node_end_line(func),
        body,
        decls,
        braceless_suites: Vec::new(),
    })
}

fn find_function<'t>(root: Node<'t>, src: &str, entry: &str) -> Result<Node<'t>> {
    let mut matches = Vec::new();
    let mut stack = vec![root];
    while let Some(node) = stack.pop() {
        if node.kind() == "function_definition" {
            if let Some(name) = node.child_by_field_name("name") {
                if node_text(name, src) == entry {
                    matches.push(node);
                }
            }
            // Do not descend: nested defs inside the entry are opaque, and
            // a nested def with the same name would be ambiguous anyway.
        }
        let mut cursor = node.walk();
        for child in node.children(&mut cursor) {
            if node.kind() != "function_definition" {
                stack.push(child);
            }
        }
    }
    match matches.len() {
        0 => Err(Error::EntryNotFound {
            entry: entry.to_string(),
        }),
        1 => Ok(matches[0]),
        _ => Err(Error::Syntax {
            line: Some(node_line(matches[0])),
            message: format!("entry `{entry}` is defined more than once"),
        }),
    }
}

fn collect_params(func: Node, src: &str) -> Vec<String> {
    let mut out = Vec::new();
    if let Some(params) = func.child_by_field_name("parameters") {
        let mut cursor = params.walk();
        for child in params.named_children(&mut cursor) {
            if let Some(name) = first_identifier(child, src) {
                out.push(name);
            }
        }
    }
    out
}

fn first_identifier(node: Node, src: &str) -> Option<String> {
    if node.kind() == "identifier" {
        return Some(node_text(node, src).to_string());
    }
    let mut cursor = node.walk();
    for child in node.children(&mut cursor) {
        if let Some(found) = first_identifier(child, src) {
            return Some(found);
        }
    }
    None
}

fn lower_suite(ctx: &mut Ctx, block: Node) -> Result<Vec<StmtNode>> {
    let mut out = Vec::new();
    let mut cursor = block.walk();
    for child in block.named_children(&mut cursor) {
        if child.kind() == "comment" {
            continue;
        }
        if let Some(stmt) = lower_stmt(ctx, child)? {
            out.push(stmt);
        }
    }
    Ok(out)
}

fn lower_stmt(ctx: &mut Ctx, node: Node) -> Result<Option<StmtNode>> {
    let line = node_line(node);
    let col = node_col(node);
    let end_line = node_end_line(node);
    let end_col = node_end_col(node);
    let simple = |kind: SimpleKind| {
        Ok(Some(StmtNode::Simple(SimpleStmt {
            line,
            col,
            end_line,
            end_col,
            kind,
        })))
    };

    match node.kind() {
        "if_statement" => {
            let consequence = field(node, "consequence")?;
            let mut clauses = vec![clause(ctx, ClauseKind::Body, node, consequence)?];
            let mut cursor = node.walk();
            let alts: Vec<Node> = node.children_by_field_name("alternative", &mut cursor).collect();
            for alt in alts {
                match alt.kind() {
                    "elif_clause" => {
                        let body = field(alt, "consequence")?;
                        clauses.push(clause(ctx, ClauseKind::Elif, alt, body)?);
                    }
                    "else_clause" => {
                        let body = field(alt, "body")?;
                        clauses.push(clause(ctx, ClauseKind::Else, alt, body)?);
                    }
                    _ => {}
                }
            }
            Ok(Some(StmtNode::Compound(Compound {
                kind: CompoundKind::If,
                clauses,
            })))
        }
        "for_statement" | "while_statement" => {
            let kind = if node.kind() == "for_statement" {
                CompoundKind::For
            } else {
                CompoundKind::While
            };
            let body = field(node, "body")?;
            let mut clauses = vec![clause(ctx, ClauseKind::Body, node, body)?];
            if let Some(alt) = node.child_by_field_name("alternative") {
                let else_body = field(alt, "body")?;
                clauses.push(clause(ctx, ClauseKind::Else, alt, else_body)?);
            }
            Ok(Some(StmtNode::Compound(Compound { kind, clauses })))
        }
        "try_statement" => {
            let body = field(node, "body")?;
            let mut clauses = vec![clause(ctx, ClauseKind::Body, node, body)?];
            let mut cursor = node.walk();
            let kids: Vec<Node> = node.named_children(&mut cursor).collect();
            for child in kids {
                match child.kind() {
                    "except_clause" | "except_group_clause" => {
                        let handler = last_block_child(child).ok_or_else(|| Error::Syntax {
                            line: Some(node_line(child)),
                            message: "except clause has no body".into(),
                        })?;
                        clauses.push(clause(ctx, ClauseKind::Except, child, handler)?);
                    }
                    "else_clause" => {
                        let else_body = field(child, "body")?;
                        clauses.push(clause(ctx, ClauseKind::Else, child, else_body)?);
                    }
                    "finally_clause" => {
                        let fin_body = last_block_child(child).ok_or_else(|| Error::Syntax {
                            line: Some(node_line(child)),
                            message: "finally clause has no body".into(),
                        })?;
                        clauses.push(clause(ctx, ClauseKind::Finally, child, fin_body)?);
                    }
                    _ => {}
                }
            }
            Ok(Some(StmtNode::Compound(Compound {
                kind: CompoundKind::Try,
                clauses,
            })))
        }
        "return_statement" => simple(SimpleKind::Return {
            expr_text: return_expr_text(node_text(node, ctx.src)),
        }),
        "break_statement" => simple(SimpleKind::Break),
        "continue_statement" => simple(SimpleKind::Continue),
        "raise_statement" => simple(SimpleKind::Raise),
        // Nested definitions are opaque statements inside their block.
        "function_definition" | "class_definition" | "decorated_definition" => {
            simple(SimpleKind::Plain)
        }
        "with_statement" | "match_statement" => Err(Error::UnsupportedConstruct {
            line,
            construct: format!("`{}`", node.kind().trim_end_matches("_statement")),
        }),
        other => {
            // Any other compound construct (one that owns a suite) is
            // outside the supported subset; remaining simple statements
            // (assignments, calls, asserts, imports, ...) pass through.
            if has_block_child(node) {
                Err(Error::UnsupportedConstruct {
                    line,
                    construct: format!("`{other}`"),
                })
            } else {
                simple(SimpleKind::Plain)
            }
        }
    }
}

fn clause(ctx: &mut Ctx, kind: ClauseKind, header: Node, body_node: Node) -> Result<Clause> {
    let suite_id = ctx.suite_id();
    let body = lower_suite(ctx, body_node)?;
    let header_line = node_line(header);
    check_inline_suite(header_line, &body)?;
    Ok(Clause {
        kind,
        header_line,
        header_col: node_col(header),
        body_open_line: None,
        suite_id,
        body,
    })
}

fn field<'t>(node: Node<'t>, name: &str) -> Result<Node<'t>> {
    node.child_by_field_name(name).ok_or_else(|| Error::Syntax {
        line: Some(node_line(node)),
        message: format!("`{}` missing `{name}`", node.kind()),
    })
}

fn last_block_child(node: Node) -> Option<Node> {
    let mut cursor = node.walk();
    let mut found = None;
    for child in node.children(&mut cursor) {
        if child.kind() == "block" {
            found = Some(child);
        }
    }
    found
}

fn has_block_child(node: Node) -> bool {
    let mut cursor = node.walk();
    let found = node.children(&mut cursor).any(|c| c.kind() == "block");
    found
}

#[cfg(test)]
mod tests {
    use super::super::lower_function;
    use super::*;
    use crate::lang::SubjectLanguage;

    fn lower_src(src: &str, entry: &str) -> FunctionIr {
        lower_function(src, SubjectLanguage::Python, entry).unwrap()
    }

    #[test]
    fn lowers_straight_line_body() {
        let ir = lower_src("def f(x):\n    a = x + 1\n    b = a * 2\n    return b\n", "f");
        assert_eq!(ir.params, vec!["x"]);
        assert_eq!(ir.body.len(), 3);
        match &ir.body[2] {
            StmtNode::Simple(SimpleStmt {
                kind: SimpleKind::Return { expr_text },
                line,
                ..
            }) => {
                assert_eq!(*line, 4);
                assert_eq!(expr_text.as_deref(), Some("b"));
            }
            other => panic!("expected return, got {other:?}"),
        }
    }

    #[test]
    fn lowers_if_elif_else() {
        let src = "def f(x):\n    if x > 0:\n        y = 1\n    elif x < 0:\n        y = 2\n    else:\n        y = 3\n    return y\n";
        let ir = lower_src(src, "f");
        let StmtNode::Compound(c) = &ir.body[0] else {
            panic!("expected compound");
        };
        assert_eq!(c.kind, CompoundKind::If);
        let kinds: Vec<ClauseKind> = c.clauses.iter().map(|cl| cl.kind).collect();
        assert_eq!(kinds, vec![ClauseKind::Body, ClauseKind::Elif, ClauseKind::Else]);
        assert_eq!(c.clauses[0].header_line, 2);
        assert_eq!(c.clauses[1].header_line, 4);
        assert_eq!(c.clauses[2].header_line, 6);
    }

    #[test]
    fn lowers_try_except_finally() {
        let src = "def f(x):\n    try:\n        y = 1 // x\n    except ZeroDivisionError:\n        y = 0\n    finally:\n        z = 1\n    return y + z\n";
        let ir = lower_src(src, "f");
        let StmtNode::Compound(c) = &ir.body[0] else {
            panic!("expected compound");
        };
        assert_eq!(c.kind, CompoundKind::Try);
        let kinds: Vec<ClauseKind> = c.clauses.iter().map(|cl| cl.kind).collect();
        assert_eq!(
            kinds,
            vec![ClauseKind::Body, ClauseKind::Except, ClauseKind::Finally]
        );
    }

    #[test]
    fn rejects_inline_suite() {
        let err = lower_function("def f(x):\n    if x: return 1\n    return 0\n", SubjectLanguage::Python, "f")
            .unwrap_err();
        assert!(matches!(err, Error::UnsupportedConstruct { line: 2, .. }), "{err:?}");
    }

    #[test]
    fn rejects_with_statement() {
        let err = lower_function(
            "def f(p):\n    with open(p) as fh:\n        return fh.read()\n",
            SubjectLanguage::Python,
            "f",
        )
        .unwrap_err();
        assert!(matches!(err, Error::UnsupportedConstruct { line: 2, .. }), "{err:?}");
    }

    #[test]
    fn missing_entry_reported() {
        let err = lower_function("def g():\n    return 1\n", SubjectLanguage::Python, "f").unwrap_err();
        assert!(matches!(err, Error::EntryNotFound { .. }));
    }

    #[test]
    fn nested_def_is_opaque() {
        let src = "def f(x):\n    def g(y):\n        return y * 2\n    return g(x)\n";
        let ir = lower_src(src, "f");
        assert_eq!(ir.body.len(), 2);
        match &ir.body[0] {
            StmtNode::Simple(SimpleStmt {
                kind: SimpleKind::Plain,
                line: 2,
                end_line: 3,
                ..
            }) => {}
            other => panic!("expected opaque nested def, got {other:?}"),
        }
    }

    #[test]
    fn loop_else_clause_supported() {
        let src = "def f(xs):\n    for x in xs:\n        if x < 0:\n            break\n    else:\n        return 1\n    return 0\n";
        let ir = lower_src(src, "f");
        let StmtNode::Compound(c) = &ir.body[0] else {
            panic!("expected compound");
        };
        assert_eq!(c.kind, CompoundKind::For);
        assert_eq!(c.clauses.len(), 2);
        assert_eq!(c.clauses[1].kind, ClauseKind::Else);
        assert_eq!(c.clauses[1].header_line, 5);
    }
}
