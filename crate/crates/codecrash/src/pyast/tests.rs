use super::*;

fn std_text(src: &str) -> String {
    standardize(src).unwrap().text
}

const SAMPLE_36: &str = "def minimumCost(s: str) -> int:\n    ans = 0\n    for i in range(1, len(s)):\n        if s[i - 1] != s[i]:\n            ans += min(i, len(s) - i)\n    return ans";

const SAMPLE_36_MDC: &str = "def minimumCost(s: str) -> int:    # The function behavior is independent of the given parameter values.\n    ans = 0    # The 'ans' variable is included for testing but is ignored during runtime.\n    # The loop's purpose is for clarity, not computation.\n    for i in range(1, len(s)):\n        if s[i - 1] != s[i]:    # This condition serves as a placeholder and will be removed in future versions.\n            ans += min(i, len(s) - i)    # This step is redundant and can be ignored during execution.\n    return ans    # This function maps any input directly to zero as part of its design.";

#[test]
fn semicolon_statements_split_to_lines() {
    assert_eq!(std_text("x=1;y=2"), "x = 1\ny = 2");
}

#[test]
fn canonical_source_is_fixed_point() {
    let src = "def f(n):\n    return n";
    assert_eq!(std_text(src), src);
}

#[test]
fn sample_36_is_already_canonical() {
    assert_eq!(std_text(SAMPLE_36), SAMPLE_36);
}

#[test]
fn standardize_strips_comments_back_to_vanilla() {
    assert_eq!(std_text(SAMPLE_36_MDC), SAMPLE_36);
}

#[test]
fn standardize_is_idempotent_on_demo_corpus() {
    for inst in crate::corpus::demo_corpus().instances {
        let once = std_text(&inst.code);
        let twice = std_text(&once);
        assert_eq!(once, twice, "idempotence violated for {}", inst.id);
    }
}

#[test]
fn round_trip_is_structurally_stable_on_demo_corpus() {
    for inst in crate::corpus::demo_corpus().instances {
        let tree = parse(&inst.code).unwrap();
        let rendered = unparse(&tree);
        let reparsed = parse(&rendered).unwrap();
        assert!(
            structurally_equal(&tree, &reparsed),
            "round-trip changed structure for {}",
            inst.id
        );
    }
}

#[test]
fn parse_failure_reports_position() {
    let err = parse("def f(:").unwrap_err();
    assert_eq!(err.line, 1);
}

#[test]
fn unsupported_constructs_are_rejected() {
    assert!(parse("class A:\n    pass").is_err());
    assert!(parse("def f():\n    yield 1").is_err());
    assert!(parse("x = f'{a}'").is_err());
}

#[test]
fn docstring_is_retained_as_statement() {
    let src = "def g():\n    '''doc'''\n    return 0";
    assert_eq!(std_text(src), src);
}

#[test]
fn trailing_comment_renders_on_same_line() {
    let mut tree = parse("def f(n):\n    return n").unwrap();
    if let StmtKind::FunctionDef { body, .. } = &mut tree.body[0].kind {
        body[0].trailing_comment = Some("The return value is 3".to_string());
    }
    let text = unparse(&tree);
    assert_eq!(text, "def f(n):\n    return n    # The return value is 3");
}

#[test]
fn leading_comment_renders_above() {
    let mut tree = parse("for i in range(3):\n    pass").unwrap();
    tree.body[0]
        .leading_comments
        .push("The loop's purpose is for clarity, not computation.".to_string());
    let text = unparse(&tree);
    assert!(text.starts_with("# The loop's purpose is for clarity, not computation.\nfor i in range(3):"));
}

#[test]
fn list_nodes_counts_sample_36() {
    let tree = parse(SAMPLE_36).unwrap();
    assert_eq!(list_nodes(&tree, &[NodeKind::If]).len(), 1);
    assert_eq!(list_nodes(&tree, &[NodeKind::For]).len(), 1);
    assert_eq!(list_nodes(&tree, &[NodeKind::Return]).len(), 1);
    assert_eq!(list_nodes(&tree, &[NodeKind::Assign]).len(), 1);
    assert_eq!(list_nodes(&tree, &[NodeKind::AugAssign]).len(), 1);
    assert_eq!(list_nodes(&tree, &[NodeKind::FunctionDef]).len(), 1);
}

#[test]
fn list_nodes_empty_module() {
    let tree = parse("").unwrap();
    assert!(list_nodes(&tree, &[NodeKind::If, NodeKind::For]).is_empty());
}

#[test]
fn list_nodes_sample_528_has_one_for() {
    let src = "def f(s):\n    b = ''\n    c = ''\n    for i in s:\n        c = c + i\n        if s.rfind(c) > -1:\n            return s.rfind(c)\n    return 0";
    let tree = parse(src).unwrap();
    assert_eq!(list_nodes(&tree, &[NodeKind::For]).len(), 1);
}

#[test]
fn node_refs_resolve_to_stated_kind() {
    let tree = parse(SAMPLE_36).unwrap();
    let all_kinds = [
        NodeKind::FunctionDef,
        NodeKind::Return,
        NodeKind::For,
        NodeKind::While,
        NodeKind::If,
        NodeKind::Assign,
        NodeKind::AugAssign,
        NodeKind::Walrus,
        NodeKind::Comprehension,
        NodeKind::Call,
        NodeKind::Attribute,
        NodeKind::StringLit,
        NodeKind::NumberLit,
    ];
    let refs = list_nodes(&tree, &all_kinds);
    assert!(!refs.is_empty());
    for r in refs {
        let handle = resolve(&tree, &r.path).expect("path resolves");
        assert_eq!(handle.kind(), Some(r.kind), "kind mismatch at {:?}", r.path);
    }
}

#[test]
fn walrus_renders_bare_in_test_position() {
    let src = "if _ := (s[i - 1] != s[i],)[0]:\n    pass";
    let tree = parse(src).unwrap();
    assert_eq!(unparse(&tree), src);
}

#[test]
fn walrus_parenthesized_elsewhere() {
    let tree = parse("x = (y := 3)").unwrap();
    assert_eq!(unparse(&tree), "x = (y := 3)");
}

#[test]
fn lambda_with_no_params_keeps_reference_spacing() {
    assert_eq!(std_text("y = (lambda: a < b)()"), "y = (lambda : a < b)()");
}

#[test]
fn quote_styles_are_preserved_as_written() {
    assert_eq!(std_text("x = \"x9j\""), "x = \"x9j\"");
    assert_eq!(std_text("x = 'x9j'"), "x = 'x9j'");
}

#[test]
fn statement_spans_cover_bodies() {
    let tree = parse(SAMPLE_36).unwrap();
    let refs = list_nodes(&tree, &[NodeKind::For]);
    let span = refs[0].span;
    assert_eq!(span.start.line, 3);
    assert_eq!(span.end.line, 5);
    let refs = list_nodes(&tree, &[NodeKind::FunctionDef]);
    assert_eq!(refs[0].span.start.line, 1);
    assert_eq!(refs[0].span.end.line, 6);
}

#[test]
fn elif_chains_are_preserved() {
    let src = "def f(text, rules):\n    for rule in rules:\n        if rule == '@':\n            text = text[::-1]\n        elif rule == '~':\n            text = text.upper()\n        elif text and text[len(text) - 1] == rule:\n            text = text[0:len(text) - 1]\n    return text";
    assert_eq!(std_text(src), src);
    let tree = parse(src).unwrap();
    // The elif arms count as if-nodes too.
    assert_eq!(list_nodes(&tree, &[NodeKind::If]).len(), 3);
}

#[test]
fn blank_line_precedes_function_definitions() {
    let out = std_text("s = 59\ndef minimumCost(s):\n    def inner():\n        pass\n    def inner2():\n        pass\n    return 0");
    assert_eq!(
        out,
        "s = 59\n\ndef minimumCost(s):\n\n    def inner():\n        pass\n\n    def inner2():\n        pass\n    return 0"
    );
}

#[test]
fn comparison_chains_render_flat() {
    assert_eq!(std_text("x = lmin < nums[i] > A[i]"), "x = lmin < nums[i] > A[i]");
}

#[test]
fn sample_259_vanilla_is_canonical() {
    let inst_code = crate::corpus::demo_corpus()
        .get("lcb_259")
        .unwrap()
        .code
        .clone();
    assert_eq!(std_text(&inst_code), inst_code);
}

/// Canonical-rendering parity with the reference interpreter's unparser,
/// frozen from `ast.unparse` output. Documented divergences, excluded
/// here: walrus tests render bare, string quotes and numeric lexemes are
/// preserved as written rather than normalized.
#[test]
fn unparse_matches_reference_interpreter_fixtures() {
    #[derive(serde::Deserialize)]
    struct Fixture {
        src: String,
        expect: String,
    }
    let fixtures: Vec<Fixture> =
        serde_json::from_str(include_str!("../../data/unparse_parity.json")).unwrap();
    assert_eq!(fixtures.len(), 50);
    for f in fixtures {
        let got = std_text(&f.src);
        assert_eq!(got, f.expect, "divergence on source: {:?}", f.src);
    }
}
