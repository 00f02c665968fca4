//! Parse Python source into a syntax tree, render it back in canonical
//! form, standardize snippets into the comment-free vanilla form, and
//! enumerate addressable nodes for perturbation.

mod ast;
mod lexer;
mod parser;
mod unparse;

pub use ast::*;
pub use parser::{parse_expression, parse_module};
pub use unparse::{render_string, unparse_expr, unparse_with_spans};

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, thiserror::Error, PartialEq)]
#[error("syntax error at line {line}, col {col}: {message}")]
pub struct ParseError {
    pub line: u32,
    pub col: u32,
    pub message: String,
}

/// Where a piece of source text came from in the pipeline.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Provenance {
    Raw,
    Vanilla,
    Perturbed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SourceText {
    pub text: String,
    pub provenance: Provenance,
}

impl SourceText {
    pub fn raw(text: impl Into<String>) -> Self {
        SourceText {
            text: text.into(),
            provenance: Provenance::Raw,
        }
    }

    pub fn vanilla(text: impl Into<String>) -> Self {
        SourceText {
            text: text.into(),
            provenance: Provenance::Vanilla,
        }
    }

    pub fn perturbed(text: impl Into<String>) -> Self {
        SourceText {
            text: text.into(),
            provenance: Provenance::Perturbed,
        }
    }
}

pub fn parse(source: &str) -> Result<Module, ParseError> {
    parse_module(source)
}

pub fn unparse(module: &Module) -> String {
    unparse::unparse(module)
}

/// Canonical comment-free rendering of `source`.
pub fn standardize(source: &str) -> Result<SourceText, ParseError> {
    let module = parse(source)?;
    Ok(SourceText::vanilla(unparse(&module)))
}

/// Either kind of tree node.
#[derive(Debug, Clone, Copy)]
pub enum NodeHandle<'a> {
    Stmt(&'a Stmt),
    Expr(&'a Expr),
}

impl<'a> NodeHandle<'a> {
    pub fn kind(&self) -> Option<NodeKind> {
        match self {
            NodeHandle::Stmt(s) => stmt_node_kind(s),
            NodeHandle::Expr(e) => expr_node_kind(e),
        }
    }
}

fn stmt_node_kind(stmt: &Stmt) -> Option<NodeKind> {
    Some(match &stmt.kind {
        StmtKind::FunctionDef { .. } => NodeKind::FunctionDef,
        StmtKind::Return(_) => NodeKind::Return,
        StmtKind::For { .. } => NodeKind::For,
        StmtKind::While { .. } => NodeKind::While,
        StmtKind::If { .. } => NodeKind::If,
        StmtKind::Assign { .. } => NodeKind::Assign,
        StmtKind::AnnAssign { value: Some(_), .. } => NodeKind::Assign,
        StmtKind::AugAssign { .. } => NodeKind::AugAssign,
        StmtKind::With { .. } => NodeKind::With,
        _ => return None,
    })
}

fn expr_node_kind(expr: &Expr) -> Option<NodeKind> {
    Some(match &expr.kind {
        ExprKind::NamedExpr { .. } => NodeKind::Walrus,
        ExprKind::ListComp { .. }
        | ExprKind::SetComp { .. }
        | ExprKind::DictComp { .. }
        | ExprKind::GeneratorExp { .. } => NodeKind::Comprehension,
        ExprKind::Call { .. } => NodeKind::Call,
        ExprKind::Attribute { .. } => NodeKind::Attribute,
        ExprKind::Str { .. } => NodeKind::StringLit,
        ExprKind::Number(_) => NodeKind::NumberLit,
        _ => return None,
    })
}

/// Child statements of a statement, canonical order: body, orelse,
/// handler bodies, try-orelse, finalbody.
pub fn stmt_child_stmts(stmt: &Stmt) -> Vec<&Stmt> {
    match &stmt.kind {
        StmtKind::FunctionDef { body, .. } | StmtKind::With { body, .. } => body.iter().collect(),
        StmtKind::For { body, orelse, .. }
        | StmtKind::While { body, orelse, .. }
        | StmtKind::If { body, orelse, .. } => body.iter().chain(orelse.iter()).collect(),
        StmtKind::Try {
            body,
            handlers,
            orelse,
            finalbody,
        } => {
            let mut out: Vec<&Stmt> = body.iter().collect();
            for h in handlers {
                out.extend(h.body.iter());
            }
            out.extend(orelse.iter());
            out.extend(finalbody.iter());
            out
        }
        _ => Vec::new(),
    }
}

/// Expression slots of a statement, document order.
pub fn stmt_child_exprs(stmt: &Stmt) -> Vec<&Expr> {
    let mut out = Vec::new();
    match &stmt.kind {
        StmtKind::FunctionDef {
            params,
            returns,
            decorators,
            ..
        } => {
            out.extend(decorators.iter());
            collect_param_exprs(params, &mut out);
            if let Some(r) = returns {
                out.push(r);
            }
        }
        StmtKind::Return(Some(v)) => out.push(v),
        StmtKind::Assign { targets, value } => {
            out.extend(targets.iter());
            out.push(value);
        }
        StmtKind::AugAssign { target, value, .. } => {
            out.push(target);
            out.push(value);
        }
        StmtKind::AnnAssign {
            target,
            annotation,
            value,
        } => {
            out.push(target);
            out.push(annotation);
            if let Some(v) = value {
                out.push(v);
            }
        }
        StmtKind::For { target, iter, .. } => {
            out.push(target);
            out.push(iter);
        }
        StmtKind::While { test, .. } | StmtKind::If { test, .. } => out.push(test),
        StmtKind::With { items, .. } => {
            for item in items {
                out.push(&item.context);
                if let Some(v) = &item.vars {
                    out.push(v);
                }
            }
        }
        StmtKind::Try { handlers, .. } => {
            for h in handlers {
                if let Some(t) = &h.typ {
                    out.push(t);
                }
            }
        }
        StmtKind::Raise { exc, cause } => {
            if let Some(e) = exc {
                out.push(e);
            }
            if let Some(c) = cause {
                out.push(c);
            }
        }
        StmtKind::Assert { test, msg } => {
            out.push(test);
            if let Some(m) = msg {
                out.push(m);
            }
        }
        StmtKind::Delete(targets) => out.extend(targets.iter()),
        StmtKind::Expr(e) => out.push(e),
        _ => {}
    }
    out
}

fn collect_param_exprs<'a>(params: &'a Params, out: &mut Vec<&'a Expr>) {
    let one = |p: &'a Param, out: &mut Vec<&'a Expr>| {
        if let Some(a) = &p.annotation {
            out.push(a);
        }
        if let Some(d) = &p.default {
            out.push(d);
        }
    };
    for p in &params.args {
        one(p, out);
    }
    if let Some(v) = &params.vararg {
        one(v, out);
    }
    for p in &params.kwonly {
        one(p, out);
    }
    if let Some(k) = &params.kwarg {
        one(k, out);
    }
}

/// Child expressions of an expression, document order.
pub fn expr_children(expr: &Expr) -> Vec<&Expr> {
    let mut out = Vec::new();
    match &expr.kind {
        ExprKind::Tuple(elts) | ExprKind::List(elts) | ExprKind::Set(elts) => {
            out.extend(elts.iter())
        }
        ExprKind::Dict { keys, values } => {
            for (k, v) in keys.iter().zip(values.iter()) {
                if let Some(k) = k {
                    out.push(k);
                }
                out.push(v);
            }
        }
        ExprKind::BinOp { left, right, .. } => {
            out.push(left);
            out.push(right);
        }
        ExprKind::UnaryOp { operand, .. } => out.push(operand),
        ExprKind::BoolOp { values, .. } => out.extend(values.iter()),
        ExprKind::Compare {
            left, comparators, ..
        } => {
            out.push(left);
            out.extend(comparators.iter());
        }
        ExprKind::Call {
            func,
            args,
            keywords,
        } => {
            out.push(func);
            out.extend(args.iter());
            out.extend(keywords.iter().map(|k| &k.value));
        }
        ExprKind::Attribute { value, .. } => out.push(value),
        ExprKind::Subscript { value, index } => {
            out.push(value);
            out.push(index);
        }
        ExprKind::Slice { lower, upper, step } => {
            if let Some(l) = lower {
                out.push(l);
            }
            if let Some(u) = upper {
                out.push(u);
            }
            if let Some(s) = step {
                out.push(s);
            }
        }
        ExprKind::Lambda { params, body } => {
            collect_param_exprs(params, &mut out);
            out.push(body);
        }
        ExprKind::IfExp { test, body, orelse } => {
            out.push(body);
            out.push(test);
            out.push(orelse);
        }
        ExprKind::NamedExpr { target, value } => {
            out.push(target);
            out.push(value);
        }
        ExprKind::Starred(inner) => out.push(inner),
        ExprKind::ListComp { elt, generators }
        | ExprKind::SetComp { elt, generators }
        | ExprKind::GeneratorExp { elt, generators } => {
            out.push(elt);
            for g in generators {
                out.push(&g.target);
                out.push(&g.iter);
                out.extend(g.ifs.iter());
            }
        }
        ExprKind::DictComp {
            key,
            value,
            generators,
        } => {
            out.push(key);
            out.push(value);
            for g in generators {
                out.push(&g.target);
                out.push(&g.iter);
                out.extend(g.ifs.iter());
            }
        }
        _ => {}
    }
    out
}

/// Enumerate matching nodes in document order.
///
/// Statement refs carry exact spans in the canonical rendering; expression
/// refs carry the span of their enclosing statement.
pub fn list_nodes(module: &Module, kinds: &[NodeKind]) -> Vec<NodeRef> {
    let (_, spans) = unparse_with_spans(module);
    let span_map: std::collections::HashMap<Vec<u32>, Span> = spans.into_iter().collect();
    let mut out = Vec::new();
    let mut path = Vec::new();
    let fallback = Span {
        start: Pos { line: 1, col: 1 },
        end: Pos { line: 1, col: 1 },
    };
    for (i, stmt) in module.body.iter().enumerate() {
        path.push(i as u32);
        walk_stmt(stmt, &mut path, &span_map, kinds, fallback, &mut out);
        path.pop();
    }
    out
}

fn walk_stmt(
    stmt: &Stmt,
    path: &mut Vec<u32>,
    span_map: &std::collections::HashMap<Vec<u32>, Span>,
    kinds: &[NodeKind],
    parent_span: Span,
    out: &mut Vec<NodeRef>,
) {
    let span = span_map.get(path.as_slice()).copied().unwrap_or(parent_span);
    if let Some(kind) = stmt_node_kind(stmt) {
        if kinds.contains(&kind) {
            out.push(NodeRef {
                path: path.clone(),
                kind,
                span,
            });
        }
    }
    let child_stmts = stmt_child_stmts(stmt);
    let n_stmts = child_stmts.len() as u32;
    // Expressions document order interleaves with bodies in source, but
    // addressing puts statement children first; emission order here is
    // header expressions, then nested statements, matching header-line
    // document order for the node kinds that matter.
    for (j, e) in stmt_child_exprs(stmt).into_iter().enumerate() {
        path.push(n_stmts + j as u32);
        walk_expr(e, path, kinds, span, out);
        path.pop();
    }
    for (i, child) in child_stmts.into_iter().enumerate() {
        path.push(i as u32);
        walk_stmt(child, path, span_map, kinds, span, out);
        path.pop();
    }
}

fn walk_expr(
    expr: &Expr,
    path: &mut Vec<u32>,
    kinds: &[NodeKind],
    span: Span,
    out: &mut Vec<NodeRef>,
) {
    if let Some(kind) = expr_node_kind(expr) {
        if kinds.contains(&kind) {
            out.push(NodeRef {
                path: path.clone(),
                kind,
                span,
            });
        }
    }
    for (i, child) in expr_children(expr).into_iter().enumerate() {
        path.push(i as u32);
        walk_expr(child, path, kinds, span, out);
        path.pop();
    }
}

/// Resolve a node path produced by [`list_nodes`] against a tree.
pub fn resolve<'a>(module: &'a Module, path: &[u32]) -> Option<NodeHandle<'a>> {
    let first = *path.first()? as usize;
    let stmt = module.body.get(first)?;
    resolve_in_stmt(stmt, &path[1..])
}

fn resolve_in_stmt<'a>(stmt: &'a Stmt, rest: &[u32]) -> Option<NodeHandle<'a>> {
    if rest.is_empty() {
        return Some(NodeHandle::Stmt(stmt));
    }
    let idx = rest[0] as usize;
    let child_stmts = stmt_child_stmts(stmt);
    if idx < child_stmts.len() {
        return resolve_in_stmt(child_stmts[idx], &rest[1..]);
    }
    let exprs = stmt_child_exprs(stmt);
    let eidx = idx - child_stmts.len();
    let e = exprs.get(eidx)?;
    resolve_in_expr(e, &rest[1..])
}

fn resolve_in_expr<'a>(expr: &'a Expr, rest: &[u32]) -> Option<NodeHandle<'a>> {
    if rest.is_empty() {
        return Some(NodeHandle::Expr(expr));
    }
    let children = expr_children(expr);
    let child = children.get(rest[0] as usize)?;
    resolve_in_expr(child, &rest[1..])
}

/// Structural equality ignoring trivia and synthetic flags.
pub fn structurally_equal(a: &Module, b: &Module) -> bool {
    a == b
}

#[cfg(test)]
mod tests;
