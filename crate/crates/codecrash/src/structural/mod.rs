//! Structural perturbations: logically equivalent but structurally
//! complicated rewrites (entity renaming, conditional reformatting,
//! garbage-code insertion, and their aggregate).

mod garbage;
mod reformat;
mod rename;
mod scope;

pub use garbage::{
    DeadLoopTemplate, GarbageCounts, GarbageNaming, CONTROL_TEMPLATES, DEAD_LOOP_TEMPLATES,
    FALSE_CONDITIONS,
};
pub use reformat::{
    classify, full_catalog, instantiate, templates_for, CondClass, CondTemplate, ReformatEdit,
    BOOLEAN_ONLY, COMPARISON_ONLY, GENERAL_TEMPLATES, SHARED_TEMPLATES,
};
pub use rename::{rewrite_call_text, RenameOutcome};

use crate::pyast::{self, Expr, ExprKind, Module, SourceText, Span, Stmt};
use crate::rng::Rng;
use serde::{Deserialize, Serialize};
use std::collections::HashSet;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, PartialOrd, Ord)]
pub enum PerturbationKind {
    #[serde(rename = "VAN")]
    Van,
    #[serde(rename = "REN")]
    Ren,
    #[serde(rename = "RTF")]
    Rtf,
    #[serde(rename = "GBC")]
    Gbc,
    #[serde(rename = "ALL")]
    All,
    #[serde(rename = "MDC")]
    Mdc,
    #[serde(rename = "MPS")]
    Mps,
    #[serde(rename = "MHC")]
    Mhc,
}

impl PerturbationKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            PerturbationKind::Van => "VAN",
            PerturbationKind::Ren => "REN",
            PerturbationKind::Rtf => "RTF",
            PerturbationKind::Gbc => "GBC",
            PerturbationKind::All => "ALL",
            PerturbationKind::Mdc => "MDC",
            PerturbationKind::Mps => "MPS",
            PerturbationKind::Mhc => "MHC",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Some(match s.to_ascii_uppercase().as_str() {
            "VAN" => PerturbationKind::Van,
            "REN" => PerturbationKind::Ren,
            "RTF" => PerturbationKind::Rtf,
            "GBC" => PerturbationKind::Gbc,
            "ALL" => PerturbationKind::All,
            "MDC" => PerturbationKind::Mdc,
            "MPS" => PerturbationKind::Mps,
            "MHC" => PerturbationKind::Mhc,
            _ => return None,
        })
    }

    pub fn all_kinds() -> [PerturbationKind; 8] {
        [
            PerturbationKind::Van,
            PerturbationKind::Ren,
            PerturbationKind::Rtf,
            PerturbationKind::Gbc,
            PerturbationKind::All,
            PerturbationKind::Mdc,
            PerturbationKind::Mps,
            PerturbationKind::Mhc,
        ]
    }
}

impl std::fmt::Display for PerturbationKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RenameEntry {
    pub original: String,
    pub renamed: String,
}

/// Binding-level rename table. Renamed names are globally unique; the
/// same original may appear once per binding.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RenameMap {
    pub variables: Vec<RenameEntry>,
    pub function_entries: Vec<RenameEntry>,
}

impl RenameMap {
    pub fn renamed_variable(&self, original: &str) -> Option<&str> {
        self.variables
            .iter()
            .find(|e| e.original == original)
            .map(|e| e.renamed.as_str())
    }

    pub fn renamed_function(&self, original: &str) -> Option<&str> {
        self.function_entries
            .iter()
            .find(|e| e.original == original)
            .map(|e| e.renamed.as_str())
    }

    /// Original identifier for a renamed one (unique by construction).
    pub fn original_of(&self, renamed: &str) -> Option<&str> {
        self.variables
            .iter()
            .chain(self.function_entries.iter())
            .find(|e| e.renamed == renamed)
            .map(|e| e.original.as_str())
    }

    /// All fresh names are distinct and none collides with `survivors`.
    pub fn is_injective(&self, survivors: &HashSet<String>) -> bool {
        let mut seen = HashSet::new();
        for e in self.variables.iter().chain(self.function_entries.iter()) {
            if !seen.insert(e.renamed.clone()) || survivors.contains(&e.renamed) {
                return false;
            }
        }
        true
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EditRecord {
    pub op: String,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerturbationResult {
    pub source: SourceText,
    pub kind: PerturbationKind,
    pub seed: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rename_map: Option<RenameMap>,
    /// 1-based inclusive line ranges of inserted statements. Only the
    /// first line of a range (the header) may execute.
    pub injected_spans: Vec<(u32, u32)>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rewritten_call: Option<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub edits: Vec<EditRecord>,
}

#[derive(Debug, thiserror::Error)]
pub enum StructuralError {
    #[error("parse failure: {0}")]
    Parse(#[from] pyast::ParseError),
    #[error("entry function '{0}' is not defined at module level")]
    EntryFunctionMissing(String),
    #[error("no function definition to perturb")]
    NoFunction,
    #[error("no parameter or bound variable available for template")]
    NoEligibleParameter,
    #[error("unresolvable name collision on '{0}'")]
    NameCollision(String),
}

/// Fresh-name source shared by renaming and garbage insertion.
/// `Var_{i}` / `f{i}` counters skip names reserved by surviving
/// identifiers; `plain_mode` keeps the published garbage names.
#[derive(Debug, Clone)]
pub struct NameAllocator {
    reserved: HashSet<String>,
    var_next: usize,
    fn_next: usize,
    temp_next: usize,
    funct_bump: usize,
    pub plain_mode: bool,
}

impl NameAllocator {
    pub fn new() -> Self {
        NameAllocator {
            reserved: HashSet::new(),
            var_next: 1,
            fn_next: 0,
            temp_next: 0,
            funct_bump: 10,
            plain_mode: false,
        }
    }

    pub fn reserve(&mut self, name: &str) {
        self.reserved.insert(name.to_string());
    }

    pub fn fresh_var(&mut self) -> String {
        loop {
            let candidate = format!("Var_{}", self.var_next);
            self.var_next += 1;
            if self.reserved.insert(candidate.clone()) {
                return candidate;
            }
        }
    }

    pub fn fresh_fn(&mut self) -> String {
        loop {
            let candidate = if self.fn_next == 0 {
                "f".to_string()
            } else {
                format!("f{}", self.fn_next)
            };
            self.fn_next += 1;
            if self.reserved.insert(candidate.clone()) {
                return candidate;
            }
        }
    }

    pub fn fresh_temp(&mut self) -> String {
        if !self.plain_mode {
            return self.fresh_var();
        }
        loop {
            let candidate = format!("TempVar{}", self.temp_next);
            self.temp_next += 1;
            if self.reserved.insert(candidate.clone()) {
                return candidate;
            }
        }
    }

    pub fn fresh_dead_fn(&mut self, default: &str) -> String {
        if !self.plain_mode {
            return self.fresh_fn();
        }
        if self.reserved.insert(default.to_string()) {
            return default.to_string();
        }
        loop {
            let candidate = format!("funct{}", self.funct_bump);
            self.funct_bump += 1;
            if self.reserved.insert(candidate.clone()) {
                return candidate;
            }
        }
    }

    /// Internal names of dead-loop bodies; safe to shadow in plain mode
    /// because the enclosing dead function is never called.
    pub fn fresh_dead_var(&mut self, default: &str) -> String {
        if !self.plain_mode {
            self.fresh_var()
        } else {
            default.to_string()
        }
    }
}

impl Default for NameAllocator {
    fn default() -> Self {
        NameAllocator::new()
    }
}

/// Rename variables and parameters to `Var_{i}`, functions to `f`/`f{i}`,
/// and rewrite the call expression consistently.
pub fn rename_entities(
    vanilla: &SourceText,
    call: &str,
    seed: u64,
) -> Result<PerturbationResult, StructuralError> {
    let mut module = pyast::parse(&vanilla.text)?;
    let call_expr = pyast::parse_expression(call)?;
    let entry = crate::corpus::callee_name(&call_expr)
        .ok_or_else(|| StructuralError::EntryFunctionMissing(call.to_string()))?
        .to_string();
    let outcome = rename::rename_module(&mut module, &entry)?;
    let rewritten = rewrite_call_text(call, &outcome.map)?;
    Ok(PerturbationResult {
        source: SourceText::perturbed(pyast::unparse(&module)),
        kind: PerturbationKind::Ren,
        seed,
        rename_map: Some(outcome.map),
        injected_spans: Vec::new(),
        rewritten_call: Some(rewritten),
        edits: Vec::new(),
    })
}

/// Rewrite every `if`/`elif`/`while` test via the template catalog. With
/// no eligible conditions the vanilla text comes back unchanged.
pub fn reformat_conditionals(
    vanilla: &SourceText,
    seed: u64,
) -> Result<PerturbationResult, StructuralError> {
    let mut module = pyast::parse(&vanilla.text)?;
    let mut rng = Rng::derive(seed, "rtf");
    let edits = reformat::reformat_conditionals_in(&mut module, &mut rng)?;
    let source = if edits.is_empty() {
        SourceText::perturbed(vanilla.text.clone())
    } else {
        SourceText::perturbed(pyast::unparse(&module))
    };
    Ok(PerturbationResult {
        source,
        kind: PerturbationKind::Rtf,
        seed,
        rename_map: None,
        injected_spans: Vec::new(),
        rewritten_call: None,
        edits: edits
            .into_iter()
            .map(|e| EditRecord {
                op: "rtf-template".to_string(),
                detail: format!("{} ({:?})", e.template_id, e.class),
            })
            .collect(),
    })
}

/// Insert never-executed garbage: module-top globals, dead statements,
/// dead-loop functions.
pub fn insert_garbage(
    vanilla: &SourceText,
    seed: u64,
    counts: &GarbageCounts,
) -> Result<PerturbationResult, StructuralError> {
    let mut module = pyast::parse(&vanilla.text)?;
    let mut rng = Rng::derive(seed, "gbc");
    let mut naming = GarbageNaming::Plain;
    garbage::insert_garbage_in(&mut module, &mut rng, counts, &mut naming)?;
    let (text, spans) = render_with_synthetic_spans(&module);
    Ok(PerturbationResult {
        source: SourceText::perturbed(text),
        kind: PerturbationKind::Gbc,
        seed,
        rename_map: None,
        injected_spans: spans,
        rewritten_call: None,
        edits: Vec::new(),
    })
}

/// Aggregate REN, then GBC drawing fresh names from the continued
/// counters, then RTF over the original (non-injected) tests.
pub fn aggregate_all(
    vanilla: &SourceText,
    call: &str,
    seed: u64,
    counts: &GarbageCounts,
) -> Result<PerturbationResult, StructuralError> {
    let mut module = pyast::parse(&vanilla.text)?;
    let call_expr = pyast::parse_expression(call)?;
    let entry = crate::corpus::callee_name(&call_expr)
        .ok_or_else(|| StructuralError::EntryFunctionMissing(call.to_string()))?
        .to_string();
    let outcome = rename::rename_module(&mut module, &entry)?;
    let rewritten = rewrite_call_text(call, &outcome.map)?;

    let mut rng = Rng::derive(seed, "gbc");
    let mut naming = GarbageNaming::Continue(outcome.allocator);
    garbage::insert_garbage_in(&mut module, &mut rng, counts, &mut naming)?;

    let mut rng = Rng::derive(seed, "rtf");
    let edits = reformat::reformat_conditionals_in(&mut module, &mut rng)?;

    let (text, spans) = render_with_synthetic_spans(&module);
    Ok(PerturbationResult {
        source: SourceText::perturbed(text),
        kind: PerturbationKind::All,
        seed,
        rename_map: Some(outcome.map),
        injected_spans: spans,
        rewritten_call: Some(rewritten),
        edits: edits
            .into_iter()
            .map(|e| EditRecord {
                op: "rtf-template".to_string(),
                detail: format!("{} ({:?})", e.template_id, e.class),
            })
            .collect(),
    })
}

/// Render and report the line spans of top-level synthetic statements.
pub fn render_with_synthetic_spans(module: &Module) -> (String, Vec<(u32, u32)>) {
    let (text, span_list) = pyast::unparse_with_spans(module);
    let map: std::collections::HashMap<Vec<u32>, Span> = span_list.into_iter().collect();
    let mut out = Vec::new();
    let mut path: Vec<u32> = Vec::new();
    for (i, stmt) in module.body.iter().enumerate() {
        path.push(i as u32);
        collect_synthetic(stmt, &mut path, &map, &mut out);
        path.pop();
    }
    out.sort_unstable();
    (text, out)
}

fn collect_synthetic(
    stmt: &Stmt,
    path: &mut Vec<u32>,
    map: &std::collections::HashMap<Vec<u32>, Span>,
    out: &mut Vec<(u32, u32)>,
) {
    if stmt.synthetic {
        if let Some(span) = map.get(path.as_slice()) {
            out.push((span.start.line, span.end.line));
        }
        return; // nested statements are inside this span
    }
    for (i, child) in pyast::stmt_child_stmts(stmt).into_iter().enumerate() {
        path.push(i as u32);
        collect_synthetic(child, path, map, out);
        path.pop();
    }
}

/// Add plain-name targets of an assignment pattern to a bound-name list.
pub(crate) fn reformat_bound_names(target: &Expr, bound: &mut Vec<String>) {
    match &target.kind {
        ExprKind::Name(n) => {
            if !bound.iter().any(|b| b == n) {
                bound.push(n.clone());
            }
        }
        ExprKind::Tuple(elts) | ExprKind::List(elts) => {
            for e in elts {
                reformat_bound_names(e, bound);
            }
        }
        ExprKind::Starred(inner) => reformat_bound_names(inner, bound),
        _ => {}
    }
}

#[cfg(test)]
mod tests;
