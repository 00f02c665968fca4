use super::*;
use crate::corpus::demo_corpus;
use crate::oracle::{ExecutionLimits, OraclePool};
use crate::pyast::SourceText;

const SAMPLE_36: &str = "def minimumCost(s: str) -> int:\n    ans = 0\n    for i in range(1, len(s)):\n        if s[i - 1] != s[i]:\n            ans += min(i, len(s) - i)\n    return ans";

const SAMPLE_36_REN: &str = "def f(Var_1: str) -> int:\n    Var_2 = 0\n    for Var_3 in range(1, len(Var_1)):\n        if Var_1[Var_3 - 1] != Var_1[Var_3]:\n            Var_2 += min(Var_3, len(Var_1) - Var_3)\n    return Var_2";

fn vanilla(text: &str) -> SourceText {
    SourceText::vanilla(text)
}

#[test]
fn ren_sample_36_matches_published_listing() {
    let out = rename_entities(&vanilla(SAMPLE_36), "minimumCost(s = '0011')", 0).unwrap();
    assert_eq!(out.source.text, SAMPLE_36_REN);
    assert_eq!(out.rewritten_call.as_deref(), Some("f(Var_1 = '0011')"));
    let map = out.rename_map.unwrap();
    assert_eq!(map.renamed_function("minimumCost"), Some("f"));
    assert_eq!(map.renamed_variable("s"), Some("Var_1"));
    assert_eq!(map.renamed_variable("ans"), Some("Var_2"));
    assert_eq!(map.renamed_variable("i"), Some("Var_3"));
}

#[test]
fn ren_single_binding_keeps_canonical_name() {
    let out = rename_entities(&vanilla("def f(n):\n    return n"), "f(17)", 0).unwrap();
    assert_eq!(out.source.text, "def f(Var_1):\n    return Var_1");
    assert_eq!(out.rewritten_call.as_deref(), Some("f(17)"));
}

#[test]
fn ren_builtins_strings_attributes_survive() {
    let src = "def f(s):\n    c = ''\n    for i in s:\n        c = c + i\n        if s.rfind(c) > -1:\n            return s.rfind(c)\n    return 0";
    let out = rename_entities(&vanilla(src), "f('papeluchis')", 0).unwrap();
    let text = &out.source.text;
    assert!(text.contains(".rfind("), "attribute name must survive: {}", text);
    assert!(!text.contains("s.rfind") || !text.contains("(s"), "parameter renamed");
    assert!(text.contains("return 0"));
}

#[test]
fn ren_map_is_injective_and_erases_user_identifiers() {
    for inst in demo_corpus().instances {
        let van = crate::pyast::standardize(&inst.code).unwrap();
        let out = rename_entities(&van, &inst.call_expr, 0).unwrap();
        let map = out.rename_map.as_ref().unwrap();
        assert!(map.is_injective(&Default::default()), "{}", inst.id);
        // After renaming, no original user identifier survives as a
        // standalone token outside strings and attribute positions.
        let tree = crate::pyast::parse(&out.source.text).unwrap();
        let mut names = std::collections::HashSet::new();
        collect_name_tokens(&tree, &mut names);
        for entry in map.variables.iter().chain(map.function_entries.iter()) {
            if entry.original == entry.renamed {
                continue;
            }
            assert!(
                !names.contains(&entry.original),
                "{}: identifier '{}' survived rename",
                inst.id,
                entry.original
            );
        }
    }
}

fn collect_name_tokens(module: &crate::pyast::Module, out: &mut std::collections::HashSet<String>) {
    use crate::pyast::*;
    fn walk_expr(e: &Expr, out: &mut std::collections::HashSet<String>) {
        if let ExprKind::Name(n) = &e.kind {
            out.insert(n.clone());
        }
        // Attribute names are not identifier tokens for this purpose.
        for c in expr_children(e) {
            walk_expr(c, out);
        }
    }
    fn walk_stmt(s: &Stmt, out: &mut std::collections::HashSet<String>) {
        if let StmtKind::FunctionDef { name, params, .. } = &s.kind {
            out.insert(name.clone());
            for p in &params.args {
                out.insert(p.name.clone());
            }
        }
        for e in stmt_child_exprs(s) {
            walk_expr(e, out);
        }
        for c in stmt_child_stmts(s) {
            walk_stmt(c, out);
        }
    }
    for s in &module.body {
        walk_stmt(s, out);
    }
}

#[test]
fn ren_preserves_behavior_on_demo_corpus() {
    let pool = OraclePool::new(4).unwrap();
    let lim = ExecutionLimits::default();
    for inst in demo_corpus().instances {
        let van = crate::pyast::standardize(&inst.code).unwrap();
        let out = rename_entities(&van, &inst.call_expr, 7).unwrap();
        let equal = pool
            .check_equivalence(
                &van.text,
                &out.source.text,
                &inst.call_expr,
                out.rewritten_call.as_deref().unwrap(),
                &lim,
            )
            .unwrap();
        assert!(equal, "REN broke behavior for {}", inst.id);
    }
}

#[test]
fn rtf_catalog_has_sixteen_instantiations() {
    assert_eq!(full_catalog().len(), 16);
    assert_eq!(templates_for(CondClass::Comparison).len(), 6);
    assert_eq!(templates_for(CondClass::BooleanConst).len(), 6);
    assert_eq!(templates_for(CondClass::General).len(), 4);
}

#[test]
fn rtf_walrus_template_matches_published_text() {
    let cond = "s[i - 1] != s[i]";
    let t = &SHARED_TEMPLATES[0];
    let e = instantiate(t, cond, None).unwrap();
    assert_eq!(
        crate::pyast::unparse_expr(&e),
        "(_ := (s[i - 1] != s[i],)[0])"
    );
    // In test position the walrus renders bare, as the listing prints it.
    let mut module = crate::pyast::parse("if c:\n    pass").unwrap();
    if let crate::pyast::StmtKind::If { test, .. } = &mut module.body[0].kind {
        *test = e;
    }
    assert_eq!(
        crate::pyast::unparse(&module),
        "if _ := (s[i - 1] != s[i],)[0]:\n    pass"
    );
}

#[test]
fn rtf_eval_str_template_text() {
    let e = instantiate(&BOOLEAN_ONLY, "True", None).unwrap();
    assert_eq!(crate::pyast::unparse_expr(&e), "eval(str(True))");
}

#[test]
fn rtf_rewrites_every_eligible_test() {
    let out = reformat_conditionals(&vanilla(SAMPLE_36), 3).unwrap();
    assert_eq!(out.edits.len(), 1, "sample 36 has one conditional");
    assert_ne!(out.source.text, SAMPLE_36);
    // Deterministic for a fixed seed.
    let again = reformat_conditionals(&vanilla(SAMPLE_36), 3).unwrap();
    assert_eq!(out.source.text, again.source.text);
}

#[test]
fn rtf_no_eligible_conditions_returns_vanilla() {
    let src = "def f(n):\n    return n";
    let out = reformat_conditionals(&vanilla(src), 1).unwrap();
    assert_eq!(out.source.text, src);
    assert!(out.edits.is_empty());
    assert!(out.injected_spans.is_empty());
    assert_eq!(out.kind, PerturbationKind::Rtf);
}

#[test]
fn rtf_truth_table_all_templates() {
    let pool = OraclePool::new(4).unwrap();
    let lim = ExecutionLimits::default();
    for (class, template) in full_catalog() {
        for cond in ["True", "False"] {
            for para in ["0", "\"x\"", "[]"] {
                let expr = instantiate(&template, cond, Some("para")).unwrap();
                let mut module =
                    crate::pyast::parse("def probe(para):\n    if c:\n        return True\n    return False")
                        .unwrap();
                if let crate::pyast::StmtKind::FunctionDef { body, .. } = &mut module.body[0].kind {
                    if let crate::pyast::StmtKind::If { test, .. } = &mut body[0].kind {
                        *test = expr;
                    }
                }
                let code = crate::pyast::unparse(&module);
                let call = format!("probe({})", para);
                let out = pool.run_call(&code, &call, &lim).unwrap();
                assert_eq!(
                    out.status,
                    crate::oracle::ExecutionStatus::Ok,
                    "template {} ({:?}) cond={} para={} failed: {:?}",
                    template.id,
                    class,
                    cond,
                    para,
                    out
                );
                assert_eq!(
                    out.value_repr.as_deref(),
                    Some(cond),
                    "template {} ({:?}) cond={} para={} changed truthiness",
                    template.id,
                    class,
                    cond,
                    para
                );
            }
        }
    }
}

#[test]
fn gbc_structure_on_sample_36() {
    let counts = GarbageCounts::default();
    let out = insert_garbage(&vanilla(SAMPLE_36), 5, &counts).unwrap();
    let text = &out.source.text;
    // Module-top global reusing an existing name with an integer.
    let first_line = text.lines().next().unwrap();
    let reused = ["s = ", "ans = ", "i = "]
        .iter()
        .any(|p| first_line.starts_with(p));
    assert!(reused, "no reused-name global at top: {}", first_line);
    assert!(!out.injected_spans.is_empty());
    // Injected spans and dead-loop functions are present.
    assert!(text.contains("funct"), "dead-loop function missing: {}", text);
    assert!(text.contains("TempVar"), "dummy variable missing: {}", text);
    // Deterministic.
    let again = insert_garbage(&vanilla(SAMPLE_36), 5, &counts).unwrap();
    assert_eq!(out.source.text, again.source.text);
    assert_eq!(out.injected_spans, again.injected_spans);
}

#[test]
fn gbc_exact_template_texts() {
    // The published false-condition and control-flow template products.
    assert_eq!(FALSE_CONDITIONS.len(), 7);
    assert_eq!(CONTROL_TEMPLATES.len(), 4);
    let fc = FALSE_CONDITIONS[4].replace("{para}", "s");
    assert_eq!(fc, "s != s");
    let stmt = CONTROL_TEMPLATES[0]
        .replace("{false_cond}", &fc)
        .replace("{new_var}", "TempVar0")
        .replace("{para}", "s");
    assert_eq!(stmt, "if s != s:\n    TempVar0 = s");
    let while_stmt = CONTROL_TEMPLATES[1]
        .replace("{false_cond}", "False")
        .replace("{new_var}", "TempVar1")
        .replace("{para}", "s");
    assert_eq!(while_stmt, "while False:\n    TempVar1 = s");
    assert_eq!(DEAD_LOOP_TEMPLATES.len(), 7);
}

#[test]
fn gbc_requires_a_function() {
    let err = insert_garbage(&vanilla("x = 1"), 0, &GarbageCounts::default());
    assert!(matches!(err, Err(StructuralError::NoFunction)));
}

#[test]
fn gbc_dead_injection_verified_by_trace() {
    let pool = OraclePool::new(4).unwrap();
    let lim = ExecutionLimits::default();
    let counts = GarbageCounts::default();
    for inst in demo_corpus().instances {
        let van = crate::pyast::standardize(&inst.code).unwrap();
        for seed in [1u64, 2, 3] {
            let out = insert_garbage(&van, seed, &counts).unwrap();
            let equal = pool
                .check_equivalence(&van.text, &out.source.text, &inst.call_expr, &inst.call_expr, &lim)
                .unwrap();
            assert!(equal, "GBC broke behavior for {} seed {}", inst.id, seed);
            let dead = pool
                .check_dead_injection(&out.source.text, &inst.call_expr, &out.injected_spans, &lim)
                .unwrap();
            assert!(dead, "GBC injected live code for {} seed {}", inst.id, seed);
        }
    }
}

#[test]
fn dead_injection_check_rejects_live_branch() {
    let pool = OraclePool::new(2).unwrap();
    let lim = ExecutionLimits::default();
    // Deliberately broken injection: `if True` body executes.
    let code = "def f(s):\n    if True:\n        TempVar0 = s\n    return s";
    let live = pool
        .check_dead_injection(code, "f(1)", &[(2, 3)], &lim)
        .unwrap();
    assert!(!live);
}

#[test]
fn all_aggregates_ren_gbc_rtf() {
    let counts = GarbageCounts::default();
    let out = aggregate_all(&vanilla(SAMPLE_36), "minimumCost(s = '0011')", 11, &counts).unwrap();
    let text = &out.source.text;
    // Module-top global uses the Var_ namespace.
    let first_line = text.lines().next().unwrap();
    assert!(
        first_line.starts_with("Var_"),
        "ALL global must reuse renamed names: {}",
        first_line
    );
    // Dead-loop functions continue the f{i} namespace.
    assert!(
        text.contains("def f1") || text.contains("def f2") || text.contains("def f3"),
        "ALL dead-loop functions must continue the f counter: {}",
        text
    );
    // Fresh dummy names continue the Var_ namespace, not TempVar.
    assert!(!text.contains("TempVar"), "ALL must continue Var_ naming: {}", text);
    assert_eq!(out.rewritten_call.as_deref(), Some("f(Var_1 = '0011')"));
    assert!(!out.injected_spans.is_empty());
    // The original conditional was reformatted by some template.
    assert!(!out.edits.is_empty());
}

#[test]
fn all_no_conditionals_still_ren_gbc() {
    let out = aggregate_all(
        &vanilla("def f(n):\n    return n"),
        "f(17)",
        2,
        &GarbageCounts::default(),
    )
    .unwrap();
    assert!(out.edits.is_empty(), "no RTF edits without conditionals");
    assert!(!out.injected_spans.is_empty(), "GBC effects present");
    assert!(out.rename_map.is_some());
}

#[test]
fn all_preserves_behavior_and_deadness_on_demo_corpus() {
    let pool = OraclePool::new(4).unwrap();
    let lim = ExecutionLimits::default();
    let counts = GarbageCounts::default();
    for inst in demo_corpus().instances {
        let van = crate::pyast::standardize(&inst.code).unwrap();
        for seed in [1u64, 9] {
            let out = aggregate_all(&van, &inst.call_expr, seed, &counts).unwrap();
            let call = out.rewritten_call.as_deref().unwrap();
            let equal = pool
                .check_equivalence(&van.text, &out.source.text, &inst.call_expr, call, &lim)
                .unwrap();
            assert!(equal, "ALL broke behavior for {} seed {}\n{}", inst.id, seed, out.source.text);
            let dead = pool
                .check_dead_injection(&out.source.text, call, &out.injected_spans, &lim)
                .unwrap();
            assert!(dead, "ALL injected live code for {} seed {}", inst.id, seed);
        }
    }
}

#[test]
fn rtf_preserves_behavior_on_demo_corpus() {
    let pool = OraclePool::new(4).unwrap();
    let lim = ExecutionLimits::default();
    for inst in demo_corpus().instances {
        let van = crate::pyast::standardize(&inst.code).unwrap();
        for seed in [1u64, 2] {
            let out = reformat_conditionals(&van, seed).unwrap();
            let equal = pool
                .check_equivalence(&van.text, &out.source.text, &inst.call_expr, &inst.call_expr, &lim)
                .unwrap();
            assert!(
                equal,
                "RTF broke behavior for {} seed {}\n{}",
                inst.id, seed, out.source.text
            );
        }
    }
}

#[test]
fn determinism_byte_identical_across_ops() {
    let van = vanilla(SAMPLE_36);
    let call = "minimumCost(s = '0011')";
    let counts = GarbageCounts::default();
    for seed in [0u64, 1, 99] {
        let a = aggregate_all(&van, call, seed, &counts).unwrap();
        let b = aggregate_all(&van, call, seed, &counts).unwrap();
        assert_eq!(a, b);
        let a = insert_garbage(&van, seed, &counts).unwrap();
        let b = insert_garbage(&van, seed, &counts).unwrap();
        assert_eq!(a, b);
    }
}
