//! Scope analysis for identifier renaming.
//!
//! Builds a scope tree (module / function / lambda / comprehension),
//! records every binding with its first-occurrence document position, and
//! resolves name references with Python's scoping rules: `global` and
//! `nonlocal` declarations, comprehension targets scoped to the
//! comprehension, walrus targets hoisted to the nearest enclosing
//! function or module scope, and the first generator's iterable evaluated
//! in the enclosing scope.
//!
//! Every pass that needs scope identifiers must traverse scope-creating
//! constructs in the same order. The canonical order is: a statement's
//! expression slots in [`stmt_child_exprs`] order, then its child
//! statements in [`stmt_child_stmts`] order, with function definitions
//! entering their scope after decorators, parameter annotations,
//! defaults, and the return annotation. [`ScopeCursor`] replays scope
//! ids along that order.

use crate::pyast::*;
use std::collections::{HashMap, HashSet};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScopeKind {
    Module,
    Function,
    Lambda,
    Comprehension,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BindingKind {
    Param,
    Local,
    Function,
    Import,
}

#[derive(Debug, Clone)]
pub struct Binding {
    pub name: String,
    pub order: usize,
    pub kind: BindingKind,
}

#[derive(Debug)]
pub struct Scope {
    pub parent: Option<usize>,
    pub kind: ScopeKind,
    pub bindings: HashMap<String, usize>,
    pub global_decls: HashSet<String>,
    pub nonlocal_decls: HashSet<String>,
}

#[derive(Debug)]
pub struct ScopeTree {
    pub scopes: Vec<Scope>,
    pub bindings: Vec<Binding>,
    /// Names referenced anywhere but bound nowhere: builtins and unknowns.
    pub free_names: HashSet<String>,
    order_counter: usize,
}

/// Deterministic scope numbering replayed identically by every pass.
pub struct ScopeCursor {
    next: usize,
}

impl ScopeCursor {
    pub fn new() -> Self {
        ScopeCursor { next: 1 }
    }

    pub fn enter(&mut self) -> usize {
        let id = self.next;
        self.next += 1;
        id
    }

    pub fn created(&self) -> usize {
        self.next
    }
}

impl ScopeTree {
    pub fn build(module: &Module) -> Self {
        let mut tree = ScopeTree {
            scopes: vec![Scope {
                parent: None,
                kind: ScopeKind::Module,
                bindings: HashMap::new(),
                global_decls: HashSet::new(),
                nonlocal_decls: HashSet::new(),
            }],
            bindings: Vec::new(),
            free_names: HashSet::new(),
            order_counter: 0,
        };
        let mut collector = Collector { tree: &mut tree };
        collector.scan_decls(&module.body, 0);
        for stmt in &module.body {
            collector.visit_stmt(stmt, 0);
        }
        let n_scopes = tree.scopes.len();

        let mut free = FreeNames {
            tree: &tree,
            found: HashSet::new(),
            cursor: ScopeCursor::new(),
        };
        for stmt in &module.body {
            free.visit_stmt(stmt, 0);
        }
        debug_assert_eq!(
            free.cursor.created(),
            n_scopes,
            "free-name pass desynced from scope creation order"
        );
        tree.free_names = free.found;
        tree
    }

    fn add_binding(&mut self, scope: usize, name: &str, kind: BindingKind) -> usize {
        if let Some(&id) = self.scopes[scope].bindings.get(name) {
            return id;
        }
        let id = self.bindings.len();
        self.bindings.push(Binding {
            name: name.to_string(),
            order: self.order_counter,
            kind,
        });
        self.order_counter += 1;
        self.scopes[scope].bindings.insert(name.to_string(), id);
        id
    }

    fn new_scope(&mut self, parent: usize, kind: ScopeKind) -> usize {
        self.scopes.push(Scope {
            parent: Some(parent),
            kind,
            bindings: HashMap::new(),
            global_decls: HashSet::new(),
            nonlocal_decls: HashSet::new(),
        });
        self.scopes.len() - 1
    }

    /// The scope that receives walrus targets made inside `scope`.
    fn walrus_home(&self, scope: usize) -> usize {
        let mut s = scope;
        while self.scopes[s].kind == ScopeKind::Comprehension {
            s = self.scopes[s].parent.expect("comprehension has parent");
        }
        s
    }

    /// Resolve a name referenced inside `scope` to a binding id.
    pub fn resolve(&self, scope: usize, name: &str) -> Option<usize> {
        let mut s = scope;
        loop {
            let data = &self.scopes[s];
            if data.global_decls.contains(name) {
                return self.scopes[0].bindings.get(name).copied();
            }
            if data.nonlocal_decls.contains(name) {
                let mut up = data.parent;
                while let Some(u) = up {
                    if self.scopes[u].kind != ScopeKind::Module {
                        if let Some(&id) = self.scopes[u].bindings.get(name) {
                            return Some(id);
                        }
                    }
                    up = self.scopes[u].parent;
                }
                return None;
            }
            if let Some(&id) = data.bindings.get(name) {
                return Some(id);
            }
            {
                let p = data.parent?;
                s = p
            }
        }
    }
}

pub fn all_params(params: &Params) -> Vec<&Param> {
    let mut out: Vec<&Param> = params.args.iter().collect();
    if let Some(v) = &params.vararg {
        out.push(v);
    }
    out.extend(params.kwonly.iter());
    if let Some(k) = &params.kwarg {
        out.push(k);
    }
    out
}

struct Collector<'a> {
    tree: &'a mut ScopeTree,
}

impl<'a> Collector<'a> {
    /// Register global/nonlocal declarations for a whole scope body,
    /// descending into nested blocks but not nested function scopes.
    fn scan_decls(&mut self, body: &[Stmt], scope: usize) {
        for stmt in body {
            match &stmt.kind {
                StmtKind::Global(names) => {
                    for n in names {
                        self.tree.scopes[scope].global_decls.insert(n.clone());
                    }
                }
                StmtKind::Nonlocal(names) => {
                    for n in names {
                        self.tree.scopes[scope].nonlocal_decls.insert(n.clone());
                    }
                }
                StmtKind::FunctionDef { .. } => {}
                _ => {
                    let nested: Vec<Stmt> =
                        stmt_child_stmts(stmt).into_iter().cloned().collect();
                    self.scan_decls(&nested, scope);
                }
            }
        }
    }

    fn bind(&mut self, scope: usize, name: &str, kind: BindingKind) {
        if self.tree.scopes[scope].global_decls.contains(name) {
            self.tree.add_binding(0, name, kind);
            return;
        }
        if self.tree.scopes[scope].nonlocal_decls.contains(name) {
            return; // binds in an enclosing scope that declares it
        }
        self.tree.add_binding(scope, name, kind);
    }

    /// Register plain-name bindings of a target pattern. Non-name target
    /// parts (attributes, subscripts) bind nothing; their expressions are
    /// covered by the generic expression visit.
    fn bind_target(&mut self, target: &Expr, scope: usize) {
        match &target.kind {
            ExprKind::Name(n) => self.bind(scope, n, BindingKind::Local),
            ExprKind::Tuple(elts) | ExprKind::List(elts) => {
                for e in elts {
                    self.bind_target(e, scope);
                }
            }
            ExprKind::Starred(inner) => self.bind_target(inner, scope),
            _ => {}
        }
    }

    fn visit_stmt(&mut self, stmt: &Stmt, scope: usize) {
        match &stmt.kind {
            StmtKind::FunctionDef {
                name,
                params,
                returns,
                decorators,
                body,
            } => {
                self.bind(scope, name, BindingKind::Function);
                for d in decorators {
                    self.visit_expr(d, scope);
                }
                for p in all_params(params) {
                    if let Some(a) = &p.annotation {
                        self.visit_expr(a, scope);
                    }
                    if let Some(d) = &p.default {
                        self.visit_expr(d, scope);
                    }
                }
                if let Some(r) = returns {
                    self.visit_expr(r, scope);
                }
                let inner = self.tree.new_scope(scope, ScopeKind::Function);
                self.scan_decls(body, inner);
                for p in all_params(params) {
                    self.tree.add_binding(inner, &p.name, BindingKind::Param);
                }
                for s in body {
                    self.visit_stmt(s, inner);
                }
            }
            StmtKind::Import(names) | StmtKind::ImportFrom { names, .. } => {
                for a in names {
                    if a.name == "*" {
                        continue;
                    }
                    let bound = a
                        .asname
                        .clone()
                        .unwrap_or_else(|| a.name.split('.').next().unwrap().to_string());
                    self.bind(scope, &bound, BindingKind::Import);
                }
            }
            _ => {
                for e in stmt_child_exprs(stmt) {
                    self.visit_expr(e, scope);
                }
                self.bind_stmt_targets(stmt, scope);
                for s in stmt_child_stmts(stmt) {
                    self.visit_stmt(s, scope);
                }
            }
        }
    }

    fn bind_stmt_targets(&mut self, stmt: &Stmt, scope: usize) {
        match &stmt.kind {
            StmtKind::Assign { targets, .. } => {
                for t in targets {
                    self.bind_target(t, scope);
                }
            }
            StmtKind::AugAssign { target, .. } | StmtKind::AnnAssign { target, .. } => {
                self.bind_target(target, scope);
            }
            StmtKind::For { target, .. } => self.bind_target(target, scope),
            StmtKind::With { items, .. } => {
                for item in items {
                    if let Some(v) = &item.vars {
                        self.bind_target(v, scope);
                    }
                }
            }
            StmtKind::Try { handlers, .. } => {
                for h in handlers {
                    if let Some(n) = &h.name {
                        self.bind(scope, n, BindingKind::Local);
                    }
                }
            }
            _ => {}
        }
    }

    fn visit_expr(&mut self, expr: &Expr, scope: usize) {
        match &expr.kind {
            ExprKind::NamedExpr { target, value } => {
                if let ExprKind::Name(n) = &target.kind {
                    let home = self.tree.walrus_home(scope);
                    self.bind(home, n, BindingKind::Local);
                }
                self.visit_expr(value, scope);
            }
            ExprKind::Lambda { params, body } => {
                for p in all_params(params) {
                    if let Some(d) = &p.default {
                        self.visit_expr(d, scope);
                    }
                }
                let inner = self.tree.new_scope(scope, ScopeKind::Lambda);
                for p in all_params(params) {
                    self.tree.add_binding(inner, &p.name, BindingKind::Param);
                }
                self.visit_expr(body, inner);
            }
            ExprKind::ListComp { elt, generators }
            | ExprKind::SetComp { elt, generators }
            | ExprKind::GeneratorExp { elt, generators } => {
                self.visit_comp(&[elt], generators, scope);
            }
            ExprKind::DictComp {
                key,
                value,
                generators,
            } => {
                self.visit_comp(&[key, value], generators, scope);
            }
            _ => {
                for c in expr_children(expr) {
                    self.visit_expr(c, scope);
                }
            }
        }
    }

    fn visit_comp(&mut self, elts: &[&Expr], generators: &[Comprehension], scope: usize) {
        if let Some(first) = generators.first() {
            self.visit_expr(&first.iter, scope);
        }
        let inner = self.tree.new_scope(scope, ScopeKind::Comprehension);
        for (i, g) in generators.iter().enumerate() {
            if i > 0 {
                self.visit_expr(&g.iter, inner);
            }
            self.bind_target(&g.target, inner);
            for cond in &g.ifs {
                self.visit_expr(cond, inner);
            }
        }
        for e in elts {
            self.visit_expr(e, inner);
        }
    }
}

struct FreeNames<'a> {
    tree: &'a ScopeTree,
    found: HashSet<String>,
    cursor: ScopeCursor,
}

impl<'a> FreeNames<'a> {
    fn visit_stmt(&mut self, stmt: &Stmt, scope: usize) {
        match &stmt.kind {
            StmtKind::FunctionDef {
                params,
                returns,
                decorators,
                body,
                ..
            } => {
                for d in decorators {
                    self.visit_expr(d, scope);
                }
                for p in all_params(params) {
                    if let Some(a) = &p.annotation {
                        self.visit_expr(a, scope);
                    }
                    if let Some(d) = &p.default {
                        self.visit_expr(d, scope);
                    }
                }
                if let Some(r) = returns {
                    self.visit_expr(r, scope);
                }
                let inner = self.cursor.enter();
                for s in body {
                    self.visit_stmt(s, inner);
                }
            }
            _ => {
                for e in stmt_child_exprs(stmt) {
                    self.visit_expr(e, scope);
                }
                for s in stmt_child_stmts(stmt) {
                    self.visit_stmt(s, scope);
                }
            }
        }
    }

    fn visit_expr(&mut self, expr: &Expr, scope: usize) {
        match &expr.kind {
            ExprKind::Name(n) => {
                if self.tree.resolve(scope, n).is_none() {
                    self.found.insert(n.clone());
                }
            }
            ExprKind::Attribute { value, .. } => self.visit_expr(value, scope),
            ExprKind::Lambda { params, body } => {
                for p in all_params(params) {
                    if let Some(d) = &p.default {
                        self.visit_expr(d, scope);
                    }
                }
                let inner = self.cursor.enter();
                self.visit_expr(body, inner);
            }
            ExprKind::ListComp { elt, generators }
            | ExprKind::SetComp { elt, generators }
            | ExprKind::GeneratorExp { elt, generators } => {
                self.visit_comp(&[elt], generators, scope);
            }
            ExprKind::DictComp {
                key,
                value,
                generators,
            } => {
                self.visit_comp(&[key, value], generators, scope);
            }
            _ => {
                for c in expr_children(expr) {
                    self.visit_expr(c, scope);
                }
            }
        }
    }

    fn visit_comp(&mut self, elts: &[&Expr], generators: &[Comprehension], scope: usize) {
        if let Some(first) = generators.first() {
            self.visit_expr(&first.iter, scope);
        }
        let inner = self.cursor.enter();
        for (i, g) in generators.iter().enumerate() {
            if i > 0 {
                self.visit_expr(&g.iter, inner);
            }
            self.visit_expr(&g.target, inner);
            for cond in &g.ifs {
                self.visit_expr(cond, inner);
            }
        }
        for e in elts {
            self.visit_expr(e, inner);
        }
    }
}
