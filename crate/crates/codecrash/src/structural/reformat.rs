//! Conditional reformatting: rewrite `if`/`elif`/`while` tests into
//! logically equivalent but structurally indirect forms.
//!
//! Tests are classified as comparison-based, boolean-constant, or
//! general; each class draws uniformly from its own template family. The
//! catalog fixes sixteen concrete class-template instantiations: six for
//! comparisons (including the `bool(int(..))` variant), six for boolean
//! constants (including the `eval(str(..))` variant), and four general
//! templates.

use super::scope::all_params;
use super::StructuralError;
use crate::pyast::*;
use crate::rng::Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CondClass {
    Comparison,
    BooleanConst,
    General,
}

/// A template body; `{cond}` receives the original test text and `{para}`
/// a seeded in-scope parameter or variable.
#[derive(Debug, Clone, Copy)]
pub struct CondTemplate {
    pub id: &'static str,
    pub pattern: &'static str,
    pub needs_para: bool,
}

pub const SHARED_TEMPLATES: &[CondTemplate] = &[
    CondTemplate {
        id: "walrus-tuple",
        pattern: "_ := ({cond},)[0]",
        needs_para: false,
    },
    CondTemplate {
        id: "lambda-call",
        pattern: "(lambda: {cond})()",
        needs_para: false,
    },
    CondTemplate {
        id: "eq-para",
        pattern: "({cond}) == ({para} == {para})",
        needs_para: true,
    },
    CondTemplate {
        id: "neq-para",
        pattern: "({cond}) != ({para} != {para})",
        needs_para: true,
    },
    CondTemplate {
        id: "bool-inc",
        pattern: "bool(-~({cond})) == ({cond})",
        needs_para: false,
    },
];

pub const COMPARISON_ONLY: CondTemplate = CondTemplate {
    id: "bool-int",
    pattern: "bool(int({cond}))",
    needs_para: false,
};

pub const BOOLEAN_ONLY: CondTemplate = CondTemplate {
    id: "eval-str",
    pattern: "eval(str({cond}))",
    needs_para: false,
};

pub const GENERAL_TEMPLATES: &[CondTemplate] = &[
    CondTemplate {
        id: "not-not",
        pattern: "not not ({cond})",
        needs_para: false,
    },
    CondTemplate {
        id: "or-false",
        pattern: "({cond}) or False",
        needs_para: false,
    },
    CondTemplate {
        id: "and-true",
        pattern: "({cond}) and True",
        needs_para: false,
    },
    CondTemplate {
        id: "walrus-tuple",
        pattern: "_ := ({cond},)[0]",
        needs_para: false,
    },
];

/// All sixteen (class, template) instantiations of the catalog.
pub fn full_catalog() -> Vec<(CondClass, CondTemplate)> {
    let mut out = Vec::new();
    for t in SHARED_TEMPLATES {
        out.push((CondClass::Comparison, *t));
    }
    out.push((CondClass::Comparison, COMPARISON_ONLY));
    for t in SHARED_TEMPLATES {
        out.push((CondClass::BooleanConst, *t));
    }
    out.push((CondClass::BooleanConst, BOOLEAN_ONLY));
    for t in GENERAL_TEMPLATES {
        out.push((CondClass::General, *t));
    }
    out
}

pub fn templates_for(class: CondClass) -> Vec<CondTemplate> {
    match class {
        CondClass::Comparison => {
            let mut v = SHARED_TEMPLATES.to_vec();
            v.push(COMPARISON_ONLY);
            v
        }
        CondClass::BooleanConst => {
            let mut v = SHARED_TEMPLATES.to_vec();
            v.push(BOOLEAN_ONLY);
            v
        }
        CondClass::General => GENERAL_TEMPLATES.to_vec(),
    }
}

pub fn classify(test: &Expr) -> CondClass {
    match &test.kind {
        ExprKind::Compare { .. } => CondClass::Comparison,
        ExprKind::Bool(_) => CondClass::BooleanConst,
        _ => CondClass::General,
    }
}

/// Instantiate a template over a condition and optional parameter name,
/// producing the replacement test expression.
pub fn instantiate(
    template: &CondTemplate,
    cond_text: &str,
    para: Option<&str>,
) -> Result<Expr, StructuralError> {
    let mut text = template.pattern.replace("{cond}", cond_text);
    if template.needs_para {
        let para = para.ok_or(StructuralError::NoEligibleParameter)?;
        text = text.replace("{para}", para);
    }
    parse_expression(&text).map_err(StructuralError::Parse)
}

/// Record of one rewritten test.
#[derive(Debug, Clone)]
pub struct ReformatEdit {
    pub template_id: &'static str,
    pub class: CondClass,
}

/// Rewrite every non-synthetic `if`/`elif`/`while` test in place.
/// Returns the per-test edit records; empty means no eligible conditions.
pub fn reformat_conditionals_in(
    module: &mut Module,
    rng: &mut Rng,
) -> Result<Vec<ReformatEdit>, StructuralError> {
    let mut edits = Vec::new();
    let mut body = std::mem::take(&mut module.body);
    // Module-level tests have no parameter candidates.
    let result = rewrite_block(&mut body, &mut Vec::new(), rng, &mut edits);
    module.body = body;
    result.map(|_| edits)
}

/// Names guaranteed bound when control reaches the current point: the
/// innermost function's parameters plus locals assigned by preceding
/// straight-line statements.
type Bound = Vec<String>;

fn push_bound(bound: &mut Bound, name: &str) {
    if !bound.iter().any(|b| b == name) {
        bound.push(name.to_string());
    }
}

fn assigned_names(target: &Expr, bound: &mut Bound) {
    match &target.kind {
        ExprKind::Name(n) => push_bound(bound, n),
        ExprKind::Tuple(elts) | ExprKind::List(elts) => {
            for e in elts {
                assigned_names(e, bound);
            }
        }
        ExprKind::Starred(inner) => assigned_names(inner, bound),
        _ => {}
    }
}

fn rewrite_block(
    stmts: &mut [Stmt],
    bound: &mut Bound,
    rng: &mut Rng,
    edits: &mut Vec<ReformatEdit>,
) -> Result<(), StructuralError> {
    for stmt in stmts {
        if stmt.synthetic {
            continue; // injected garbage keeps its written conditions
        }
        match &mut stmt.kind {
            StmtKind::FunctionDef { params, body, .. } => {
                let mut inner: Bound = all_params(params)
                    .iter()
                    .map(|p| p.name.clone())
                    .collect();
                rewrite_block(body, &mut inner, rng, edits)?;
            }
            StmtKind::If { test, body, orelse } | StmtKind::While { test, body, orelse } => {
                rewrite_test(test, bound, rng, edits)?;
                // Bindings inside branches are not guaranteed to execute.
                let mut branch = bound.clone();
                rewrite_block(body, &mut branch, rng, edits)?;
                let mut branch = bound.clone();
                rewrite_block(orelse, &mut branch, rng, edits)?;
            }
            StmtKind::For { body, orelse, .. } => {
                let mut branch = bound.clone();
                rewrite_block(body, &mut branch, rng, edits)?;
                let mut branch = bound.clone();
                rewrite_block(orelse, &mut branch, rng, edits)?;
            }
            StmtKind::With { items, body } => {
                let mut inner = bound.clone();
                for item in &items.clone() {
                    if let Some(v) = &item.vars {
                        assigned_names(v, &mut inner);
                    }
                }
                rewrite_block(body, &mut inner, rng, edits)?;
            }
            StmtKind::Try {
                body,
                handlers,
                orelse,
                finalbody,
            } => {
                let mut branch = bound.clone();
                rewrite_block(body, &mut branch, rng, edits)?;
                for h in handlers {
                    let mut branch = bound.clone();
                    if let Some(n) = &h.name {
                        push_bound(&mut branch, n);
                    }
                    rewrite_block(&mut h.body, &mut branch, rng, edits)?;
                }
                let mut branch = bound.clone();
                rewrite_block(orelse, &mut branch, rng, edits)?;
                let mut branch = bound.clone();
                rewrite_block(finalbody, &mut branch, rng, edits)?;
            }
            StmtKind::Assign { targets, .. } => {
                for t in &targets.clone() {
                    assigned_names(t, bound);
                }
            }
            StmtKind::AnnAssign {
                target,
                value: Some(_),
                ..
            } => {
                assigned_names(&target.clone(), bound);
            }
            _ => {}
        }
    }
    Ok(())
}

fn rewrite_test(
    test: &mut Expr,
    bound: &Bound,
    rng: &mut Rng,
    edits: &mut Vec<ReformatEdit>,
) -> Result<(), StructuralError> {
    let class = classify(test);
    let mut family = templates_for(class);
    if bound.is_empty() {
        family.retain(|t| !t.needs_para);
    }
    if family.is_empty() {
        return Ok(());
    }
    let template = family[rng.below(family.len())];
    let para = if template.needs_para {
        Some(rng.choose(bound).as_str().to_string())
    } else {
        None
    };
    let cond_text = unparse_expr(test);
    let new_test = instantiate(&template, &cond_text, para.as_deref())?;
    *test = new_test;
    edits.push(ReformatEdit {
        template_id: template.id,
        class,
    });
    Ok(())
}
