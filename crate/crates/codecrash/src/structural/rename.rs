//! Entity renaming: strip natural-language cues from identifiers.
//!
//! Variables bound via assignment, for, with, walrus, and comprehension
//! targets, plus all function parameters, become `Var_{i}` in
//! first-binding document order. Function definitions become `f`, `f1`,
//! ... `fn`, entry function first. Builtins, attribute names, imported
//! names, and string contents are untouched. References, including
//! keyword-argument names at call sites, update consistently.
//!
//! The rewrite pass replays the scope-creation order defined in
//! [`super::scope`]; its traversal must stay arm-for-arm parallel with
//! the collector there.

use super::scope::{all_params, BindingKind, ScopeCursor, ScopeTree};
use super::{NameAllocator, RenameEntry, RenameMap, StructuralError};
use crate::pyast::*;
use std::collections::HashMap;

pub struct RenameOutcome {
    pub map: RenameMap,
    pub allocator: NameAllocator,
}

/// Rename every variable and function binding in `module`. The entry
/// function (the call expression's callee) is renamed first.
pub fn rename_module(
    module: &mut Module,
    entry_function: &str,
) -> Result<RenameOutcome, StructuralError> {
    let tree = ScopeTree::build(module);

    let mut allocator = NameAllocator::new();
    for name in &tree.free_names {
        allocator.reserve(name);
    }
    for b in &tree.bindings {
        if b.kind == BindingKind::Import {
            allocator.reserve(&b.name);
        }
    }

    let entry_id = tree.scopes[0]
        .bindings
        .get(entry_function)
        .copied()
        .filter(|&id| tree.bindings[id].kind == BindingKind::Function)
        .ok_or_else(|| StructuralError::EntryFunctionMissing(entry_function.to_string()))?;

    let mut new_names: HashMap<usize, String> = HashMap::new();
    let mut map = RenameMap::default();

    let entry_new = allocator.fresh_fn();
    map.function_entries.push(RenameEntry {
        original: tree.bindings[entry_id].name.clone(),
        renamed: entry_new.clone(),
    });
    new_names.insert(entry_id, entry_new);

    let mut fn_ids: Vec<usize> = (0..tree.bindings.len())
        .filter(|&i| tree.bindings[i].kind == BindingKind::Function && i != entry_id)
        .collect();
    fn_ids.sort_by_key(|&i| tree.bindings[i].order);
    for id in fn_ids {
        let fresh = allocator.fresh_fn();
        map.function_entries.push(RenameEntry {
            original: tree.bindings[id].name.clone(),
            renamed: fresh.clone(),
        });
        new_names.insert(id, fresh);
    }

    let mut var_ids: Vec<usize> = (0..tree.bindings.len())
        .filter(|&i| matches!(tree.bindings[i].kind, BindingKind::Param | BindingKind::Local))
        .collect();
    var_ids.sort_by_key(|&i| tree.bindings[i].order);
    for id in var_ids {
        let fresh = allocator.fresh_var();
        map.variables.push(RenameEntry {
            original: tree.bindings[id].name.clone(),
            renamed: fresh.clone(),
        });
        new_names.insert(id, fresh);
    }

    // Map each renamed function binding to its parameter scope so keyword
    // arguments at call sites can follow the parameter renames.
    let mut fn_scopes: HashMap<usize, usize> = HashMap::new();
    {
        let mut cursor = ScopeCursor::new();
        let mapper = FnScopeMapper { tree: &tree };
        for stmt in &module.body {
            mapper.visit_stmt(stmt, 0, &mut cursor, &mut fn_scopes);
        }
        debug_assert_eq!(cursor.created(), tree.scopes.len());
    }

    let mut rewriter = Rewriter {
        tree: &tree,
        new_names: &new_names,
        fn_scopes: &fn_scopes,
        cursor: ScopeCursor::new(),
    };
    let mut body = std::mem::take(&mut module.body);
    for stmt in &mut body {
        rewriter.rewrite_stmt(stmt, 0);
    }
    module.body = body;
    debug_assert_eq!(rewriter.cursor.created(), tree.scopes.len());

    Ok(RenameOutcome { map, allocator })
}

/// Rewrite a call expression text token-wise, preserving its original
/// spacing: the callee per the function map, keyword names and other
/// identifiers per the variable map. Attribute names and string contents
/// are untouched.
pub fn rewrite_call_text(call: &str, map: &RenameMap) -> Result<String, StructuralError> {
    let expr = parse_expression(call).map_err(StructuralError::Parse)?;
    let callee = crate::corpus::callee_name(&expr)
        .ok_or_else(|| StructuralError::EntryFunctionMissing(call.to_string()))?
        .to_string();

    let mut out = String::new();
    let mut chars = call.char_indices().peekable();
    let mut prev_non_space: Option<char> = None;
    while let Some((i, c)) = chars.next() {
        if c.is_ascii_alphabetic() || c == '_' {
            let start = i;
            let mut end = i + c.len_utf8();
            while let Some(&(j, c2)) = chars.peek() {
                if c2.is_ascii_alphanumeric() || c2 == '_' {
                    end = j + c2.len_utf8();
                    chars.next();
                } else {
                    break;
                }
            }
            let word = &call[start..end];
            let after_dot = prev_non_space == Some('.');
            let replacement = if after_dot {
                None // attribute name
            } else if word == callee {
                map.renamed_function(word)
            } else {
                map.renamed_variable(word).or_else(|| map.renamed_function(word))
            };
            out.push_str(replacement.unwrap_or(word));
            prev_non_space = Some('x');
        } else if c == '\'' || c == '"' {
            out.push(c);
            let quote = c;
            let mut escaped = false;
            for (_, c2) in chars.by_ref() {
                out.push(c2);
                if escaped {
                    escaped = false;
                } else if c2 == '\\' {
                    escaped = true;
                } else if c2 == quote {
                    break;
                }
            }
            prev_non_space = Some(quote);
        } else {
            out.push(c);
            if !c.is_whitespace() {
                prev_non_space = Some(c);
            }
        }
    }
    Ok(out)
}

struct FnScopeMapper<'a> {
    tree: &'a ScopeTree,
}

impl<'a> FnScopeMapper<'a> {
    fn visit_stmt(
        &self,
        stmt: &Stmt,
        scope: usize,
        cursor: &mut ScopeCursor,
        out: &mut HashMap<usize, usize>,
    ) {
        match &stmt.kind {
            StmtKind::FunctionDef {
                name,
                params,
                returns,
                decorators,
                body,
            } => {
                for d in decorators {
                    self.visit_expr(d, scope, cursor, out);
                }
                for p in all_params(params) {
                    if let Some(a) = &p.annotation {
                        self.visit_expr(a, scope, cursor, out);
                    }
                    if let Some(d) = &p.default {
                        self.visit_expr(d, scope, cursor, out);
                    }
                }
                if let Some(r) = returns {
                    self.visit_expr(r, scope, cursor, out);
                }
                let inner = cursor.enter();
                if let Some(id) = self.tree.resolve(scope, name) {
                    out.insert(id, inner);
                }
                for s in body {
                    self.visit_stmt(s, inner, cursor, out);
                }
            }
            _ => {
                for e in stmt_child_exprs(stmt) {
                    self.visit_expr(e, scope, cursor, out);
                }
                for s in stmt_child_stmts(stmt) {
                    self.visit_stmt(s, scope, cursor, out);
                }
            }
        }
    }

    fn visit_expr(
        &self,
        expr: &Expr,
        scope: usize,
        cursor: &mut ScopeCursor,
        out: &mut HashMap<usize, usize>,
    ) {
        match &expr.kind {
            ExprKind::Lambda { params, body } => {
                for p in all_params(params) {
                    if let Some(d) = &p.default {
                        self.visit_expr(d, scope, cursor, out);
                    }
                }
                let inner = cursor.enter();
                self.visit_expr(body, inner, cursor, out);
            }
            ExprKind::ListComp { elt, generators }
            | ExprKind::SetComp { elt, generators }
            | ExprKind::GeneratorExp { elt, generators } => {
                self.visit_comp(&[elt], generators, scope, cursor, out);
            }
            ExprKind::DictComp {
                key,
                value,
                generators,
            } => {
                self.visit_comp(&[key, value], generators, scope, cursor, out);
            }
            _ => {
                for c in expr_children(expr) {
                    self.visit_expr(c, scope, cursor, out);
                }
            }
        }
    }

    fn visit_comp(
        &self,
        elts: &[&Expr],
        generators: &[Comprehension],
        scope: usize,
        cursor: &mut ScopeCursor,
        out: &mut HashMap<usize, usize>,
    ) {
        if let Some(first) = generators.first() {
            self.visit_expr(&first.iter, scope, cursor, out);
        }
        let inner = cursor.enter();
        for (i, g) in generators.iter().enumerate() {
            if i > 0 {
                self.visit_expr(&g.iter, inner, cursor, out);
            }
            self.visit_expr(&g.target, inner, cursor, out);
            for cond in &g.ifs {
                self.visit_expr(cond, inner, cursor, out);
            }
        }
        for e in elts {
            self.visit_expr(e, inner, cursor, out);
        }
    }
}

struct Rewriter<'a> {
    tree: &'a ScopeTree,
    new_names: &'a HashMap<usize, String>,
    fn_scopes: &'a HashMap<usize, usize>,
    cursor: ScopeCursor,
}

impl<'a> Rewriter<'a> {
    fn rewrite_name(&self, scope: usize, name: &mut String) {
        if let Some(id) = self.tree.resolve(scope, name) {
            if let Some(new) = self.new_names.get(&id) {
                *name = new.clone();
            }
        }
    }

    fn rename_params(&self, params: &mut Params, inner: usize) {
        for p in params_mut(params) {
            if let Some(id) = self.tree.scopes[inner].bindings.get(&p.name) {
                if let Some(new) = self.new_names.get(id) {
                    p.name = new.clone();
                }
            }
        }
    }

    fn rewrite_stmt(&mut self, stmt: &mut Stmt, scope: usize) {
        match &mut stmt.kind {
            StmtKind::FunctionDef {
                name,
                params,
                returns,
                decorators,
                body,
            } => {
                for d in decorators.iter_mut() {
                    self.rewrite_expr(d, scope);
                }
                for p in params_mut(params) {
                    if let Some(a) = &mut p.annotation {
                        self.rewrite_expr(a, scope);
                    }
                    if let Some(d) = &mut p.default {
                        self.rewrite_expr(d, scope);
                    }
                }
                if let Some(r) = returns {
                    self.rewrite_expr(r, scope);
                }
                self.rewrite_name(scope, name);
                let inner = self.cursor.enter();
                self.rename_params(params, inner);
                for s in body {
                    self.rewrite_stmt(s, inner);
                }
            }
            StmtKind::Global(names) | StmtKind::Nonlocal(names) => {
                for n in names {
                    self.rewrite_name(scope, n);
                }
            }
            _ => {
                for e in stmt_child_exprs_mut(stmt) {
                    self.rewrite_expr(e, scope);
                }
                if let StmtKind::Try { handlers, .. } = &mut stmt.kind {
                    for h in handlers {
                        if let Some(n) = &mut h.name {
                            self.rewrite_name(scope, n);
                        }
                    }
                }
                for s in stmt_child_stmts_mut(stmt) {
                    self.rewrite_stmt(s, scope);
                }
            }
        }
    }

    fn rewrite_expr(&mut self, expr: &mut Expr, scope: usize) {
        match &mut expr.kind {
            ExprKind::Name(n) => self.rewrite_name(scope, n),
            ExprKind::Attribute { value, .. } => self.rewrite_expr(value, scope),
            ExprKind::Call {
                func,
                args,
                keywords,
            } => {
                let param_scope = if let ExprKind::Name(callee) = &func.kind {
                    self.tree
                        .resolve(scope, callee)
                        .and_then(|id| self.fn_scopes.get(&id).copied())
                } else {
                    None
                };
                self.rewrite_expr(func, scope);
                for a in args.iter_mut() {
                    self.rewrite_expr(a, scope);
                }
                for k in keywords.iter_mut() {
                    if let (Some(ps), Some(arg)) = (param_scope, &mut k.arg) {
                        if let Some(id) = self.tree.scopes[ps].bindings.get(arg) {
                            if let Some(new) = self.new_names.get(id) {
                                *arg = new.clone();
                            }
                        }
                    }
                    self.rewrite_expr(&mut k.value, scope);
                }
            }
            ExprKind::Lambda { params, body } => {
                for p in params_mut(params) {
                    if let Some(d) = &mut p.default {
                        self.rewrite_expr(d, scope);
                    }
                }
                let inner = self.cursor.enter();
                self.rename_params(params, inner);
                self.rewrite_expr(body, inner);
            }
            ExprKind::ListComp { elt, generators }
            | ExprKind::SetComp { elt, generators }
            | ExprKind::GeneratorExp { elt, generators } => {
                let elt = &mut **elt;
                self.rewrite_comp(&mut [elt], generators, scope);
            }
            ExprKind::DictComp {
                key,
                value,
                generators,
            } => {
                let (key, value) = (&mut **key, &mut **value);
                self.rewrite_comp(&mut [key, value], generators, scope);
            }
            ExprKind::Tuple(elts) | ExprKind::List(elts) | ExprKind::Set(elts) => {
                for e in elts {
                    self.rewrite_expr(e, scope);
                }
            }
            ExprKind::Dict { keys, values } => {
                for (k, v) in keys.iter_mut().zip(values.iter_mut()) {
                    if let Some(k) = k {
                        self.rewrite_expr(k, scope);
                    }
                    self.rewrite_expr(v, scope);
                }
            }
            ExprKind::BinOp { left, right, .. } => {
                self.rewrite_expr(left, scope);
                self.rewrite_expr(right, scope);
            }
            ExprKind::UnaryOp { operand, .. } => self.rewrite_expr(operand, scope),
            ExprKind::BoolOp { values, .. } => {
                for v in values {
                    self.rewrite_expr(v, scope);
                }
            }
            ExprKind::Compare {
                left, comparators, ..
            } => {
                self.rewrite_expr(left, scope);
                for c in comparators {
                    self.rewrite_expr(c, scope);
                }
            }
            ExprKind::Subscript { value, index } => {
                self.rewrite_expr(value, scope);
                self.rewrite_expr(index, scope);
            }
            ExprKind::Slice { lower, upper, step } => {
                for part in [lower, upper, step].into_iter().flatten() {
                    self.rewrite_expr(part, scope);
                }
            }
            ExprKind::IfExp { test, body, orelse } => {
                self.rewrite_expr(body, scope);
                self.rewrite_expr(test, scope);
                self.rewrite_expr(orelse, scope);
            }
            ExprKind::NamedExpr { target, value } => {
                self.rewrite_expr(target, scope);
                self.rewrite_expr(value, scope);
            }
            ExprKind::Starred(inner) => self.rewrite_expr(inner, scope),
            ExprKind::Number(_) | ExprKind::Str { .. } | ExprKind::Bool(_) | ExprKind::NoneLit => {}
        }
    }

    fn rewrite_comp(
        &mut self,
        elts: &mut [&mut Expr],
        generators: &mut [Comprehension],
        scope: usize,
    ) {
        if let Some(first) = generators.first_mut() {
            self.rewrite_expr(&mut first.iter, scope);
        }
        let inner = self.cursor.enter();
        for (i, g) in generators.iter_mut().enumerate() {
            if i > 0 {
                self.rewrite_expr(&mut g.iter, inner);
            }
            self.rewrite_expr(&mut g.target, inner);
            for cond in &mut g.ifs {
                self.rewrite_expr(cond, inner);
            }
        }
        for e in elts {
            self.rewrite_expr(e, inner);
        }
    }
}

fn params_mut(params: &mut Params) -> Vec<&mut Param> {
    let mut out: Vec<&mut Param> = params.args.iter_mut().collect();
    if let Some(v) = &mut params.vararg {
        out.push(v);
    }
    out.extend(params.kwonly.iter_mut());
    if let Some(k) = &mut params.kwarg {
        out.push(k);
    }
    out
}

/// Mutable mirror of [`crate::pyast::stmt_child_exprs`].
fn stmt_child_exprs_mut(stmt: &mut Stmt) -> Vec<&mut Expr> {
    let mut out = Vec::new();
    match &mut stmt.kind {
        StmtKind::Return(v) => out.extend(v.iter_mut()),
        StmtKind::Assign { targets, value } => {
            out.extend(targets.iter_mut());
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
            out.extend(value.iter_mut());
        }
        StmtKind::For { target, iter, .. } => {
            out.push(target);
            out.push(iter);
        }
        StmtKind::While { test, .. } | StmtKind::If { test, .. } => out.push(test),
        StmtKind::With { items, .. } => {
            for item in items {
                out.push(&mut item.context);
                if let Some(v) = &mut item.vars {
                    out.push(v);
                }
            }
        }
        StmtKind::Try { handlers, .. } => {
            for h in handlers {
                if let Some(t) = &mut h.typ {
                    out.push(t);
                }
            }
        }
        StmtKind::Raise { exc, cause } => {
            out.extend(exc.iter_mut());
            out.extend(cause.iter_mut());
        }
        StmtKind::Assert { test, msg } => {
            out.push(test);
            out.extend(msg.iter_mut());
        }
        StmtKind::Delete(targets) => out.extend(targets.iter_mut()),
        StmtKind::Expr(e) => out.push(e),
        _ => {}
    }
    out
}

/// Mutable mirror of [`crate::pyast::stmt_child_stmts`].
pub fn stmt_child_stmts_mut(stmt: &mut Stmt) -> Vec<&mut Stmt> {
    match &mut stmt.kind {
        StmtKind::FunctionDef { body, .. } | StmtKind::With { body, .. } => {
            body.iter_mut().collect()
        }
        StmtKind::For { body, orelse, .. }
        | StmtKind::While { body, orelse, .. }
        | StmtKind::If { body, orelse, .. } => body.iter_mut().chain(orelse.iter_mut()).collect(),
        StmtKind::Try {
            body,
            handlers,
            orelse,
            finalbody,
        } => {
            let mut out: Vec<&mut Stmt> = body.iter_mut().collect();
            for h in handlers {
                out.extend(h.body.iter_mut());
            }
            out.extend(orelse.iter_mut());
            out.extend(finalbody.iter_mut());
            out
        }
        _ => Vec::new(),
    }
}
