//! C++ lowering to the statement IR.

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
    let func = find_function(tree.root_node(), src, entry)?;
    let def_line = node_line(func);
    let mut ctx = Ctx {
        src,
        next_suite: 0,
        path: Vec::new(),
        decls: Vec::new(),
        braceless: Vec::new(),
    };

    let declarator = func
        .child_by_field_name("declarator")
        .and_then(find_function_declarator)
        .ok_or_else(|| Error::Syntax {
            line: Some(def_line),
            message: format!("cannot locate declarator of `{entry}`"),
        })?;

    let mut params = Vec::new();
    if let Some(plist) = declarator.child_by_field_name("parameters") {
        let mut cursor = plist.walk();
        for p in plist.named_children(&mut cursor) {
            if !matches!(
                p.kind(),
                "parameter_declaration" | "optional_parameter_declaration"
            ) {
                continue;
            }
            let Some((name, ptr)) = p
                .child_by_field_name("declarator")
                .and_then(|d| declarator_name(d, src))
            else {
                continue;
            };
            let mut type_text = p
                .child_by_field_name("type")
                .map(|t| node_text(t, src).to_string())
                .unwrap_or_default();
            if ptr {
                type_text.insert(0, '*');
            }
            ctx.decls.push(VarDecl {
                name: name.clone(),
                line: def_line,
                type_text,
                scope: Vec::new(),
            });
            params.push(name);
        }
    }

    let ret_type = func
        .child_by_field_name("type")
        .map(|t| node_text(t, src).to_string());
    let body_node = func.child_by_field_name("body").ok_or_else(|| Error::EntryNotFound {
        entry: format!("{entry} (declaration without body)"),
    })?;
    let body = lower_block(&mut ctx, body_node)?;

    Ok(FunctionIr {
        name: entry.to_string(),
        params,
        ret_type,
        def_line,
        end_line: node_end_line(func),
        body,
        decls: ctx.decls,
        braceless_suites: ctx.braceless,
    })
}

fn find_function<'t>(root: Node<'t>, src: &str, entry: &str) -> Result<Node<'t>> {
    let mut matches = Vec::new();
    let mut stack = vec![root];
    while let Some(node) = stack.pop() {
        if node.kind() == "function_definition" {
            if let Some(decl) = node.child_by_field_name("declarator") {
                if let Some(fd) = find_function_declarator(decl) {
                    if let Some(inner) = fd.child_by_field_name("declarator") {
                        let text = node_text(inner, src);
                        let base = text.rsplit("::").next().unwrap_or(text);
                        if base == entry {
                            matches.push(node);
                        }
                    }
                }
            }
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

/// Descend through pointer/reference wrappers to the `function_declarator`.
fn find_function_declarator(node: Node) -> Option<Node> {
    if node.kind() == "function_declarator" {
        return Some(node);
    }
    let mut cursor = node.walk();
    for child in node.children(&mut cursor) {
        if let Some(found) = find_function_declarator(child) {
            return Some(found);
        }
    }
    None
}

/// Extract `(name, is_pointer)` from a declarator chain.
fn declarator_name(node: Node, src: &str) -> Option<(String, bool)> {
    fn go(node: Node, src: &str, ptr: bool) -> Option<(String, bool)> {
        match node.kind() {
            "identifier" | "field_identifier" => Some((node_text(node, src).to_string(), ptr)),
            "pointer_declarator" => {
                let inner = node.child_by_field_name("declarator")?;
                go(inner, src, true)
            }
            _ => {
                if let Some(inner) = node.child_by_field_name("declarator") {
                    return go(inner, src, ptr);
                }
                let mut cursor = node.walk();
                for child in node.children(&mut cursor) {
                    if let Some(found) = go(child, src, ptr) {
                        return Some(found);
                    }
                }
                None
            }
        }
    }
    go(node, src, false)
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
    if node.kind() == "comment" {
        return Ok(());
    }
    if node.kind() == "compound_statement" {
        // Bare braces: flatten, with declarations hidden behind a
        // synthetic scope id so outer probes never capture them.
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
        "declaration" => {
            collect_decls(ctx, node);
            simple(SimpleKind::Plain)
        }
        "expression_statement" => {
            if node_text(node, ctx.src).trim_start().starts_with("throw") {
                simple(SimpleKind::Raise)
            } else {
                simple(SimpleKind::Plain)
            }
        }
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
            let body_node = for_body(node).ok_or_else(|| Error::Syntax {
                line: Some(line),
                message: "for statement has no body".into(),
            })?;
            let body = clause(ctx, ClauseKind::Body, line, col, body_node)?;
            if let Some(init) = node.child_by_field_name("initializer") {
                if init.kind() == "declaration" {
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
        "for_range_loop" => {
            let body_node = field(node, "body")?;
            let body = clause(ctx, ClauseKind::Body, line, col, body_node)?;
            if let Some(decl) = node.child_by_field_name("declarator") {
                if let Some((name, ptr)) = declarator_name(decl, ctx.src) {
                    let mut type_text = node
                        .child_by_field_name("type")
                        .map(|t| node_text(t, ctx.src).to_string())
                        .unwrap_or_default();
                    if ptr {
                        type_text.insert(0, '*');
                    }
                    let mut scope = ctx.path.clone();
                    scope.push(body.suite_id);
                    ctx.decls.push(VarDecl {
                        name,
                        line,
                        type_text,
                        scope,
                    });
                }
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
                if child.kind() == "catch_clause" {
                    let handler = field(child, "body")?;
                    let cl = clause(
                        ctx,
                        ClauseKind::Except,
                        node_line(child),
                        node_col(child),
                        handler,
                    )?;
                    if let Some(plist) = child.child_by_field_name("parameters") {
                        let mut pc = plist.walk();
                        for p in plist.named_children(&mut pc) {
                            if let Some((name, _)) = p
                                .child_by_field_name("declarator")
                                .and_then(|d| declarator_name(d, ctx.src))
                            {
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
            }
            Ok(Some(StmtNode::Compound(Compound {
                kind: CompoundKind::Try,
                clauses,
            })))
        }
        "do_statement" | "switch_statement" | "labeled_statement" | "goto_statement" => {
            Err(Error::UnsupportedConstruct {
                line,
                construct: format!("`{}`", node.kind()),
            })
        }
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
        // tree-sitter-cpp wraps the else branch in an `else_clause` node
        // that starts at the `else` keyword.
        let else_line = node_line(alt);
        let else_col = node_col(alt);
        let else_body = alt
            .named_child(0)
            .filter(|_| alt.kind() == "else_clause")
            .unwrap_or(alt);
        if else_body.kind() == "if_statement" && node_line(else_body) == else_line {
            let StmtNode::Compound(nested) = lower_if(ctx, else_body)? else {
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
            clauses.push(clause(ctx, ClauseKind::Else, else_line, else_col, else_body)?);
        }
    }
    Ok(StmtNode::Compound(Compound {
        kind: CompoundKind::If,
        clauses,
    }))
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
    let body = if body_node.kind() == "compound_statement" {
        lower_block(ctx, body_node)?
    } else {
        let mut out = Vec::new();
        lower_stmt_into(ctx, body_node, &mut out)?;
        out
    };
    ctx.path.pop();
    check_inline_suite(header_line, &body)?;
    let body_open_line = if body_node.kind() == "compound_statement" {
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

fn for_body(node: Node) -> Option<Node> {
    if let Some(body) = node.child_by_field_name("body") {
        return Some(body);
    }
    // Fallback: the body is whatever statement follows the `)`.
    let mut cursor = node.walk();
    let kids: Vec<Node> = node.children(&mut cursor).collect();
    let close = kids.iter().position(|k| k.kind() == ")")?;
    kids[close + 1..].iter().find(|k| k.is_named()).copied()
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
        let candidate = match child.kind() {
            "init_declarator" => child.child_by_field_name("declarator").or(Some(child)),
            "identifier" | "reference_declarator" | "pointer_declarator" | "array_declarator" => {
                Some(child)
            }
            _ => None,
        };
        let Some(cand) = candidate else { continue };
        if let Some((name, ptr)) = declarator_name(cand, ctx.src) {
            let mut t = type_text.clone();
            if ptr || cand.kind() == "array_declarator" {
                t.insert(0, '*'); // pointer/array locals are not captured
            }
            ctx.decls.push(VarDecl {
                name,
                line,
                type_text: t,
                scope: scope.clone(),
            });
        }
    }
}

fn field<'t>(node: Node<'t>, name: &str) -> Result<Node<'t>> {
    node.child_by_field_name(name).ok_or_else(|| Error::Syntax {
        line: Some(node_line(node)),
        message: format!("`{}` missing `{name}`", node.kind()),
    })
}

fn has_braced_child(node: Node) -> bool {
    let mut cursor = node.walk();
    let found = node
        .children(&mut cursor)
        .any(|c| c.kind() == "compound_statement");
    found
}
