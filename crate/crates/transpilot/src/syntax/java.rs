//! Java lowering to the statement IR.

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
    path: Vec<usize>,
    decls: Vec<VarDecl>,
    braceless: Vec<usize>,
}

impl Ctx<'_> {
    fn suite_id(&mut self) -> usize {
        let id = self.next_suite;
        self.next_suite += 1;
        id
    }
}

pub(super) fn lower(src: &str, tree: &Tree, entry: &str) -> Result<FunctionIr> {
    let method = find_method(tree.root_node(), src, entry)?;
    let def_line = node_line(method);
    let mut ctx = Ctx {
        src,
        next_suite: 0,
        path: Vec::new(),
        decls: Vec::new(),
        braceless: Vec::new(),
    };

    let mut params = Vec::new();
    if let Some(plist) = method.child_by_field_name("parameters") {
        let mut cursor = plist.walk();
        for p in plist.named_children(&mut cursor) {
            if !matches!(p.kind(), "formal_parameter" | "spread_parameter") {
                continue;
            }
            let name = p
                .child_by_field_name("name")
                .map(|n| node_text(n, src).to_string())
                .or_else(|| first_identifier(p, src));
            let type_text = p
                .child_by_field_name("type")
                .map(|t| node_text(t, src).to_string())
                .unwrap_or_default();
            if let Some(name) = name {
                ctx.decls.push(VarDecl {
                    name: name.clone(),
                    line: def_line,
                    type_text,
                    scope: Vec::new(),
                });
                params.push(name);
            }
        }
    }

    let ret_type = method
        .child_by_field_name("type")
        .map(|t| node_text(t, src).to_string());
    let body_node = method
        .child_by_field_name("body")
        .ok_or_else(|| Error::EntryNotFound {
            entry: format!("{entry} (abstract/native method has no body)"),
        })?;
    let body = lower_block(&mut ctx, body_node)?;

    Ok(FunctionIr {
        name: entry.to_string(),
        params,
        ret_type,
        def_line,
        end_line: node_end_line(method),
        body,
        decls: ctx.decls,
        braceless_suites: ctx.braceless,
    })
}

fn find_method<'t>(root: Node<'t>, src: &str, entry: &str) -> Result<Node<'t>> {
    let mut matches = Vec::new();
    let mut stack = vec![root];
    while let Some(node) = stack.pop() {
        if node.kind() == "method_declaration" {
            if let Some(name) = node.child_by_field_name("name") {
                if node_text(name, src) == entry {
                    matches.push(node);
                }
            }
        }
        let mut cursor = node.walk();
        for child in node.children(&mut cursor) {
            stack.push(child);
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

fn lower_block(ctx: &mut Ctx, block: Node) -> Result<Vec<StmtNode>> {
    let mut out = Vec::new();
    let mut cursor = block.walk();
    let kids: Vec<Node> = block.named_children(&mut cursor).collect();
    for child in kids {
        lower_stmt_into(ctx, child, &mut out)?;
    }
    Ok(out)
}

fn lower_stmt_into(ctx: &mut Ctx, node: Node, out: &mut Vec<StmtNode>) -> Result<()> {
    if matches!(node.kind(), "line_comment" | "block_comment") {
        return Ok(());
    }
    // A bare braced block scopes its declarations but adds no control flow:
    // flatten its statements, giving the inner declarations a synthetic
    // scope id so probes outside never capture them.
    if node.kind() == "block" {
        let synthetic = ctx.suite_id();
        ctx.path.push(synthetic);
        let inner = lower_block(ctx, node)?;
        ctx.path.pop();
        out.extend(inner);
        return Ok(());
    }
    if let Some(stmt) = lower_stmt(ctx, node)? {
        out.push(stmt);
    }
    Ok(())
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
        "local_variable_declaration" => {
            collect_decls(ctx, node);
            simple(SimpleKind::Plain)
        }
        "expression_statement" | "assert_statement" => simple(SimpleKind::Plain),
        "return_statement" => simple(SimpleKind::Return {
            expr_text: return_expr_text(node_text(node, ctx.src)),
        }),
        "break_statement" => simple(SimpleKind::Break),
        "continue_statement" => simple(SimpleKind::Continue),
        "throw_statement" => simple(SimpleKind::Raise),
        "if_statement" => lower_if(ctx, node).map(Some),
        "while_statement" => {
            let body = clause(ctx, ClauseKind::Body, line, col, field(node, "body")?)?;
            Ok(Some(StmtNode::Compound(Compound {
                kind: CompoundKind::While,
                clauses: vec![body],
            })))
        }
        "for_statement" => {
            let body_node = field(node, "body")?;
            let body = clause(ctx, ClauseKind::Body, line, col, body_node)?;
            // `for (int i = 0; ...)` — the loop variable lives in the body scope.
            if let Some(init) = node.child_by_field_name("init") {
                if init.kind() == "local_variable_declaration" {
                    let mut scope = ctx.path.clone();
                    scope.push(body.suite_id);
                    collect_decls_scoped(ctx, init, scope, line);
                }
            }
            Ok(Some(StmtNode::Compound(Compound {
                kind: CompoundKind::For,
                clauses: vec![body],
            })))
        }
        "enhanced_for_statement" => {
            let body_node = field(node, "body")?;
            let body = clause(ctx, ClauseKind::Body, line, col, body_node)?;
            if let Some(name) = node.child_by_field_name("name") {
                let mut scope = ctx.path.clone();
                scope.push(body.suite_id);
                ctx.decls.push(VarDecl {
                    name: node_text(name, ctx.src).to_string(),
                    line,
                    type_text: node
                        .child_by_field_name("type")
                        .map(|t| node_text(t, ctx.src).to_string())
                        .unwrap_or_default(),
                    scope,
                });
            }
            Ok(Some(StmtNode::Compound(Compound {
                kind: CompoundKind::For,
                clauses: vec![body],
            })))
        }
        "try_statement" => {
            let mut clauses = vec![clause(ctx, ClauseKind::Body, line, col, field(node, "body")?)?];
            let mut cursor = node.walk();
            let kids: Vec<Node> = node.named_children(&mut cursor).collect();
            for child in kids {
                match child.kind() {
                    "catch_clause" => {
                        let handler_body = field(child, "body")?;
                        let cl = clause(
                            ctx,
                            ClauseKind::Except,
                            node_line(child),
                            node_col(child),
                            handler_body,
                        )?;
                        // catch (Exception e) — e is scoped to the handler.
                        let mut param_cursor = child.walk();
                        for sub in child.named_children(&mut param_cursor) {
                            if sub.kind() == "catch_formal_parameter" {
                                if let Some(name) = first_identifier_last(sub, ctx.src) {
                                    let mut scope = ctx.path.clone();
                                    scope.push(cl.suite_id);
                                    ctx.decls.push(VarDecl {
                                        name,
                                        line: node_line(child),
                                        type_text: String::new(),
                                        scope,
                                    });
                                }
                            }
                        }
                        clauses.push(cl);
                    }
                    "finally_clause" => {
                        let fin_body =
                            last_child_of_kind(child, "block").ok_or_else(|| Error::Syntax {
                                line: Some(node_line(child)),
                                message: "finally clause has no body".into(),
                            })?;
                        clauses.push(clause(
                            ctx,
                            ClauseKind::Finally,
                            node_line(child),
                            node_col(child),
                            fin_body,
                        )?);
                    }
                    _ => {}
                }
            }
            Ok(Some(StmtNode::Compound(Compound {
                kind: CompoundKind::Try,
                clauses,
            })))
        }
        "try_with_resources_statement"
        | "switch_expression"
        | "switch_statement"
        | "do_statement"
        | "labeled_statement"
        | "synchronized_statement"
        | "yield_statement" => Err(Error::UnsupportedConstruct {
            line,
            construct: format!("`{}`", node.kind()),
        }),
        ";" => Ok(None),
        other => {
            if has_braced_child(node) {
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

fn lower_if(ctx: &mut Ctx, node: Node) -> Result<StmtNode> {
    let line = node_line(node);
    let col = node_col(node);
    let mut clauses = vec![clause(
        ctx,
        ClauseKind::Body,
        line,
        col,
        field(node, "consequence")?,
    )?];

    if let Some(alt) = node.child_by_field_name("alternative") {
        let (else_line, else_col) = else_keyword_pos(node).unwrap_or((node_line(alt), node_col(alt)));
        if alt.kind() == "if_statement" && node_line(alt) == else_line {
            // `else if` on one line: splice the nested if's clauses in as
            // an elif chain so the header stays a single block.
            let StmtNode::Compound(nested) = lower_if(ctx, alt)? else {
                unreachable!("lower_if returns a compound");
            };
            for (idx, mut cl) in nested.clauses.into_iter().enumerate() {
                if idx == 0 {
                    cl.kind = ClauseKind::Elif;
                    cl.header_line = else_line;
                    cl.header_col = else_col;
                }
                clauses.push(cl);
            }
        } else {
            clauses.push(clause(ctx, ClauseKind::Else, else_line, else_col, alt)?);
        }
    }
    Ok(StmtNode::Compound(Compound {
        kind: CompoundKind::If,
        clauses,
    }))
}

/// Lower a clause body node that is either a braced block or a single
/// (braceless) statement.
fn lower_clause_body(ctx: &mut Ctx, node: Node) -> Result<Vec<StmtNode>> {
    if node.kind() == "block" {
        lower_block(ctx, node)
    } else {
        let mut out = Vec::new();
        lower_stmt_into(ctx, node, &mut out)?;
        Ok(out)
    }
}

fn clause(
    ctx: &mut Ctx,
    kind: ClauseKind,
    header_line: usize,
    header_col: usize,
    body_node: Node,
) -> Result<Clause> {
    let suite_id = ctx.suite_id();
    ctx.path.push(suite_id);
    let body = lower_clause_body(ctx, body_node)?;
    ctx.path.pop();
    check_inline_suite(header_line, &body)?;
    let body_open_line = if body_node.kind() == "block" {
        Some(node_line(body_node))
    } else {
        if !body.is_empty() {
            ctx.braceless.push(header_line);
        }
        None
    };
    Ok(Clause {
        kind,
        header_line,
        header_col,
        body_open_line,
        suite_id,
        body,
    })
}

fn else_keyword_pos(if_node: Node) -> Option<(usize, usize)> {
    let mut cursor = if_node.walk();
    for child in if_node.children(&mut cursor) {
        if child.kind() == "else" {
            return Some((node_line(child), node_col(child)));
        }
    }
    None
}

fn collect_decls(ctx: &mut Ctx, decl: Node) {
    let scope = ctx.path.clone();
    let line = node_line(decl);
    collect_decls_scoped(ctx, decl, scope, line);
}

fn collect_decls_scoped(ctx: &mut Ctx, decl: Node, scope: Vec<usize>, line: usize) {
    let type_text = decl
        .child_by_field_name("type")
        .map(|t| node_text(t, ctx.src).to_string())
        .unwrap_or_default();
    let mut cursor = decl.walk();
    for child in decl.named_children(&mut cursor) {
        if child.kind() == "variable_declarator" {
            if let Some(name) = child.child_by_field_name("name") {
                ctx.decls.push(VarDecl {
                    name: node_text(name, ctx.src).to_string(),
                    line,
                    type_text: type_text.clone(),
                    scope: scope.clone(),
                });
            }
        }
    }
}

fn first_identifier_last(node: Node, src: &str) -> Option<String> {
    // The *last* identifier of a catch parameter is the binding name
    // (earlier ones are the exception type).
    let mut found = None;
    let mut stack = vec![node];
    while let Some(n) = stack.pop() {
        if n.kind() == "identifier" {
            let text = node_text(n, src).to_string();
            match &found {
                Some((pos, _)) if *pos >= n.start_byte() => {}
                _ => found = Some((n.start_byte(), text)),
            }
        }
        let mut cursor = n.walk();
        for child in n.children(&mut cursor) {
            stack.push(child);
        }
    }
    found.map(|(_, t)| t)
}

fn last_child_of_kind<'t>(node: Node<'t>, kind: &str) -> Option<Node<'t>> {
    let mut cursor = node.walk();
    let mut found = None;
    for child in node.children(&mut cursor) {
        if child.kind() == kind {
            found = Some(child);
        }
    }
    found
}

fn field<'t>(node: Node<'t>, name: &str) -> Result<Node<'t>> {
    node.child_by_field_name(name).ok_or_else(|| Error::Syntax {
        line: Some(node_line(node)),
        message: format!("`{}` missing `{name}`", node.kind()),
    })
}

fn has_braced_child(node: Node) -> bool {
    let mut cursor = node.walk();
    let found = node.children(&mut cursor).any(|c| c.kind() == "block");
    found
}
