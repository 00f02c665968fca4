//! Garbage-code insertion: syntactically valid but functionally
//! irrelevant segments.
//!
//! Three insertion families: (a) module-top global declarations reusing
//! existing parameter/variable names with arbitrary integers, (b)
//! unexecutable statements built as false-condition × control-flow
//! template products assigning fresh dummy names, placed at statement
//! boundaries inside function bodies, and (c) never-called dead-loop
//! function definitions from a seven-template catalog.

use super::scope::{all_params, BindingKind, ScopeTree};
use super::{NameAllocator, StructuralError};
use crate::pyast::*;
use crate::rng::Rng;

pub const FALSE_CONDITIONS: &[&str] = &[
    "False",
    "None",
    "0",
    "''",
    "{para} != {para}",
    "not {para} == {para}",
    "print({para})",
];

pub const CONTROL_TEMPLATES: &[&str] = &[
    "if {false_cond}:\n    {new_var} = {para}",
    "while {false_cond}:\n    {new_var} = {para}",
    "for {loop_var} in range(0):\n    {new_var} = {para}",
    "{new_var} = {para} if {false_cond} else {para}",
];

/// Dead-loop templates; `{a}`/`{b}` are function names, `{v1}`/`{v2}`
/// internal variables. Defaults reproduce the published template names.
pub struct DeadLoopTemplate {
    pub text: &'static str,
    pub fn_defaults: &'static [&'static str],
    pub var_defaults: &'static [&'static str],
}

pub const DEAD_LOOP_TEMPLATES: &[DeadLoopTemplate] = &[
    DeadLoopTemplate {
        text: "def {a}():\n    {b}()\n\ndef {b}():\n    {a}()",
        fn_defaults: &["funct1", "funct2"],
        var_defaults: &[],
    },
    DeadLoopTemplate {
        text: "def {a}():\n\n    def {b}():\n        {a}()\n    {b}()",
        fn_defaults: &["funct3", "funct4"],
        var_defaults: &[],
    },
    DeadLoopTemplate {
        text: "def {a}():\n    {v1} = 1\n    while True:\n        {v1} += 1",
        fn_defaults: &["funct5"],
        var_defaults: &["i"],
    },
    DeadLoopTemplate {
        text: "def {a}():\n    for {v1} in iter(int, 1):\n        {v1} += 1",
        fn_defaults: &["funct6"],
        var_defaults: &["i"],
    },
    DeadLoopTemplate {
        text: "def {a}():\n    try:\n        {a}()\n    except:\n        {a}()",
        fn_defaults: &["funct7"],
        var_defaults: &[],
    },
    DeadLoopTemplate {
        text: "def {a}():\n    {v1} = [0]\n    for {v2} in {v1}:\n        {v1}.append({v2} + 1)",
        fn_defaults: &["funct8"],
        var_defaults: &["items", "x"],
    },
    DeadLoopTemplate {
        text: "def {a}():\n    for {v1} in iter(lambda: True, False):\n        pass",
        fn_defaults: &["funct9"],
        var_defaults: &["_"],
    },
];

/// How many of each garbage family to insert; each is a seeded draw from
/// the inclusive range.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GarbageCounts {
    pub globals: (usize, usize),
    pub dead_statements: (usize, usize),
    pub dead_functions: (usize, usize),
}

impl Default for GarbageCounts {
    fn default() -> Self {
        GarbageCounts {
            globals: (1, 2),
            dead_statements: (2, 4),
            dead_functions: (1, 2),
        }
    }
}

/// Naming discipline for inserted code: standalone GBC keeps the
/// published `TempVar{i}`/`funct{i}` names; under ALL the fresh names
/// continue the rename counters.
pub enum GarbageNaming {
    Plain,
    Continue(NameAllocator),
}

pub fn insert_garbage_in(
    module: &mut Module,
    rng: &mut Rng,
    counts: &GarbageCounts,
    naming: &mut GarbageNaming,
) -> Result<(), StructuralError> {
    let has_function = module
        .body
        .iter()
        .any(|s| matches!(s.kind, StmtKind::FunctionDef { .. }));
    if !has_function {
        return Err(StructuralError::NoFunction);
    }

    // Reserve every identifier in sight so fresh names never collide.
    let tree = ScopeTree::build(module);
    match naming {
        GarbageNaming::Plain => {
            let mut alloc = NameAllocator::new();
            for b in &tree.bindings {
                alloc.reserve(&b.name);
            }
            for n in &tree.free_names {
                alloc.reserve(n);
            }
            *naming = GarbageNaming::Continue(alloc);
            if let GarbageNaming::Continue(alloc) = naming {
                alloc.plain_mode = true;
            }
        }
        GarbageNaming::Continue(alloc) => {
            for b in &tree.bindings {
                alloc.reserve(&b.name);
            }
            for n in &tree.free_names {
                alloc.reserve(n);
            }
        }
    }
    let alloc = match naming {
        GarbageNaming::Continue(a) => a,
        GarbageNaming::Plain => unreachable!(),
    };

    insert_globals(module, &tree, rng, counts, alloc);
    insert_dead_functions(module, rng, counts, alloc)?;
    insert_dead_statements(module, rng, counts, alloc)?;
    Ok(())
}

/// (a) Module-top globals reusing existing parameter/variable names.
fn insert_globals(
    module: &mut Module,
    tree: &ScopeTree,
    rng: &mut Rng,
    counts: &GarbageCounts,
    _alloc: &mut NameAllocator,
) {
    let mut candidates: Vec<String> = Vec::new();
    for b in &tree.bindings {
        if matches!(b.kind, BindingKind::Param | BindingKind::Local)
            && !candidates.contains(&b.name)
        {
            candidates.push(b.name.clone());
        }
    }
    if candidates.is_empty() {
        return;
    }
    let n = rng.range_inclusive(counts.globals.0 as i64, counts.globals.1 as i64) as usize;
    let n = n.min(candidates.len());
    for _ in 0..n {
        let idx = rng.below(candidates.len());
        let name = candidates.remove(idx);
        let value = rng.range_inclusive(1, 99);
        let stmt = Stmt::synthetic(StmtKind::Assign {
            targets: vec![Expr::name(&name)],
            value: Expr::number(&value.to_string()),
        });
        module.body.insert(0, stmt);
    }
}

/// (c) Dead-loop function definitions, inserted at a seeded statement
/// boundary inside the first top-level function body, never called.
fn insert_dead_functions(
    module: &mut Module,
    rng: &mut Rng,
    counts: &GarbageCounts,
    alloc: &mut NameAllocator,
) -> Result<(), StructuralError> {
    let n = rng.range_inclusive(counts.dead_functions.0 as i64, counts.dead_functions.1 as i64)
        as usize;
    let mut template_ids: Vec<usize> = (0..DEAD_LOOP_TEMPLATES.len()).collect();
    let mut picked = Vec::new();
    for _ in 0..n.min(template_ids.len()) {
        let i = rng.below(template_ids.len());
        picked.push(template_ids.remove(i));
    }
    let mut rendered: Vec<Stmt> = Vec::new();
    for t_id in picked {
        let t = &DEAD_LOOP_TEMPLATES[t_id];
        let mut text = t.text.to_string();
        for (i, default) in t.fn_defaults.iter().enumerate() {
            let placeholder = if i == 0 { "{a}" } else { "{b}" };
            let name = alloc.fresh_dead_fn(default);
            text = text.replace(placeholder, &name);
        }
        for (i, default) in t.var_defaults.iter().enumerate() {
            let placeholder = if i == 0 { "{v1}" } else { "{v2}" };
            let name = alloc.fresh_dead_var(default);
            text = text.replace(placeholder, &name);
        }
        let parsed = parse(&text).map_err(StructuralError::Parse)?;
        for mut s in parsed.body {
            s.synthetic = true;
            rendered.push(s);
        }
    }
    if rendered.is_empty() {
        return Ok(());
    }
    // First top-level function hosts the dead loops.
    let host = module
        .body
        .iter_mut()
        .find(|s| !s.synthetic && matches!(s.kind, StmtKind::FunctionDef { .. }))
        .ok_or(StructuralError::NoFunction)?;
    if let StmtKind::FunctionDef { body, .. } = &mut host.kind {
        let at = rng.below(body.len() + 1);
        for (off, s) in rendered.into_iter().enumerate() {
            body.insert(at + off, s);
        }
    }
    Ok(())
}

/// A candidate insertion point: path of block-entering child-statement
/// indices from the module root, insertion index, and the names bound on
/// entry (innermost function params plus straight-line locals).
struct InsertPoint {
    path: Vec<usize>,
    index: usize,
    paras: Vec<String>,
}

/// (b) Unexecutable statements from the false-condition × control-flow
/// product, one at a time so later candidates see earlier insertions.
fn insert_dead_statements(
    module: &mut Module,
    rng: &mut Rng,
    counts: &GarbageCounts,
    alloc: &mut NameAllocator,
) -> Result<(), StructuralError> {
    let n = rng.range_inclusive(
        counts.dead_statements.0 as i64,
        counts.dead_statements.1 as i64,
    ) as usize;
    for _ in 0..n {
        let mut points = Vec::new();
        collect_points_module(module, &mut points);
        let points: Vec<InsertPoint> = points.into_iter().filter(|p| !p.paras.is_empty()).collect();
        if points.is_empty() {
            return Ok(()); // nothing referencable in scope anywhere
        }
        let point = &points[rng.below(points.len())];
        let para = point.paras[rng.below(point.paras.len())].clone();
        let false_cond = FALSE_CONDITIONS[rng.below(FALSE_CONDITIONS.len())].replace("{para}", &para);
        let control = CONTROL_TEMPLATES[rng.below(CONTROL_TEMPLATES.len())];
        let new_var = alloc.fresh_temp();
        let mut text = control
            .replace("{false_cond}", &false_cond)
            .replace("{new_var}", &new_var)
            .replace("{para}", &para);
        if text.contains("{loop_var}") {
            let lv = alloc.fresh_dead_var("i");
            text = text.replace("{loop_var}", &lv);
        }
        let parsed = parse(&text).map_err(StructuralError::Parse)?;
        let mut stmts: Vec<Stmt> = parsed.body;
        for s in &mut stmts {
            s.synthetic = true;
        }
        insert_at_point(module, point, stmts);
    }
    Ok(())
}

fn insert_at_point(module: &mut Module, point: &InsertPoint, stmts: Vec<Stmt>) {
    let mut block: &mut Vec<Stmt> = {
        let first = point.path[0];
        match &mut module.body[first].kind {
            StmtKind::FunctionDef { body, .. } => body,
            _ => unreachable!("insert point roots at a function"),
        }
    };
    for &idx in &point.path[1..] {
        let stmt = &mut block[idx];
        block = match &mut stmt.kind {
            StmtKind::For { body, .. }
            | StmtKind::While { body, .. }
            | StmtKind::If { body, .. }
            | StmtKind::With { body, .. }
            | StmtKind::FunctionDef { body, .. } => body,
            _ => unreachable!("insert point enters a block statement"),
        };
    }
    for (off, s) in stmts.into_iter().enumerate() {
        block.insert(point.index + off, s);
    }
}

fn collect_points_module(module: &Module, out: &mut Vec<InsertPoint>) {
    for (i, stmt) in module.body.iter().enumerate() {
        if stmt.synthetic {
            continue;
        }
        if let StmtKind::FunctionDef { params, body, .. } = &stmt.kind {
            let bound: Vec<String> = all_params(params)
                .iter()
                .map(|p| p.name.clone())
                .collect();
            collect_points_block(body, vec![i], bound, out);
        }
    }
}

/// Walk a block gathering insertion points. `bound` carries names
/// guaranteed assigned when control reaches each boundary.
fn collect_points_block(
    block: &[Stmt],
    path: Vec<usize>,
    mut bound: Vec<String>,
    out: &mut Vec<InsertPoint>,
) {
    for index in 0..=block.len() {
        out.push(InsertPoint {
            path: path.clone(),
            index,
            paras: bound.clone(),
        });
        if index == block.len() {
            break;
        }
        let stmt = &block[index];
        if stmt.synthetic {
            continue;
        }
        match &stmt.kind {
            StmtKind::Assign { targets, .. } => {
                for t in targets {
                    super::reformat_bound_names(t, &mut bound);
                }
            }
            StmtKind::AnnAssign {
                target,
                value: Some(_),
                ..
            } => {
                super::reformat_bound_names(target, &mut bound);
            }
            StmtKind::FunctionDef { params, body, .. } => {
                let inner: Vec<String> = all_params(params)
                    .iter()
                    .map(|p| p.name.clone())
                    .collect();
                let mut p = path.clone();
                p.push(index);
                collect_points_block(body, p, inner, out);
            }
            StmtKind::For { body, .. }
            | StmtKind::While { body, .. }
            | StmtKind::If { body, .. }
            | StmtKind::With { body, .. } => {
                let mut p = path.clone();
                p.push(index);
                collect_points_block(body, p, bound.clone(), out);
            }
            _ => {}
        }
    }
}
