use super::*;
use crate::corpus::demo_corpus;
use crate::oracle::OraclePool;
use crate::pyast::standardize;

const SAMPLE_36: &str = "def minimumCost(s: str) -> int:\n    ans = 0\n    for i in range(1, len(s)):\n        if s[i - 1] != s[i]:\n            ans += min(i, len(s) - i)\n    return ans";

fn vanilla(text: &str) -> SourceText {
    SourceText::vanilla(text)
}

#[test]
fn sample_36_has_six_eligible_nodes() {
    let module = pyast::parse(SAMPLE_36).unwrap();
    let nodes = eligible_nodes(&module);
    let kinds: Vec<&str> = nodes.iter().map(|n| n.node_kind).collect();
    assert_eq!(
        kinds,
        vec!["function-def", "assignment", "for", "if", "aug-assignment", "return"]
    );
}

#[test]
fn sample_53_subscript_assignments_are_ineligible() {
    let inst_code = &demo_corpus().get("crux_53").unwrap().code.clone();
    let module = pyast::parse(inst_code).unwrap();
    let nodes = eligible_nodes(&module);
    let kinds: Vec<&str> = nodes.iter().map(|n| n.node_kind).collect();
    // function-def, occ = {}, for, name = {...}, name = name.get(..), return;
    // occ[name] = ... has no plain-name target and get() is not a listed op.
    assert_eq!(
        kinds,
        vec!["function-def", "assignment", "for", "assignment", "assignment", "return"]
    );
}

#[test]
fn data_structure_ops_classify_by_method() {
    let src = "def f(a, text):\n    a.update(dict.fromkeys(text))\n    text = text.upper()\n    return text";
    let module = pyast::parse(src).unwrap();
    let nodes = eligible_nodes(&module);
    let pairs: Vec<(&str, &str)> = nodes
        .iter()
        .map(|n| (n.node_kind, n.key.as_str()))
        .collect();
    assert_eq!(
        pairs,
        vec![
            ("function-def", "function-def"),
            ("data-structure-op", "update"),
            ("data-structure-op", "upper"),
            ("return", "return"),
        ]
    );
    assert_eq!(nodes[1].variable.as_deref(), Some("a"));
    assert_eq!(nodes[2].variable.as_deref(), Some("text"));
}

#[test]
fn mdc_p_zero_is_byte_identical() {
    let bank = MessageBank::bundled();
    for seed in [0u64, 7, 12345] {
        let policy = InjectionPolicy::new(0.0, seed).unwrap();
        let out = insert_misleading_comments(&vanilla(SAMPLE_36), &policy, &bank).unwrap();
        assert_eq!(out.source.text, SAMPLE_36);
        assert!(out.injected_spans.is_empty());
    }
}

#[test]
fn mdc_p_one_saturates_every_node_with_published_anchors() {
    let bank = MessageBank::bundled();
    let policy = InjectionPolicy::saturating(5);
    let out = insert_misleading_comments(&vanilla(SAMPLE_36), &policy, &bank).unwrap();
    let text = &out.source.text;
    assert_eq!(out.edits.len(), 6);
    assert_eq!(out.injected_spans.len(), 6);
    let lines: Vec<&str> = text.lines().collect();
    // def line carries a trailing comment separated by four spaces
    assert!(lines[0].starts_with("def minimumCost(s: str) -> int:    # "));
    // the for loop gets a whole-line comment immediately above
    let for_line = lines.iter().position(|l| l.trim_start().starts_with("for ")).unwrap();
    assert!(
        lines[for_line - 1].trim_start().starts_with("# "),
        "expected whole-line comment above the loop:\n{}",
        text
    );
    // if and return lines carry trailing comments
    assert!(lines.iter().any(|l| l.contains("if s[i - 1] != s[i]:    # ")));
    assert!(lines.iter().any(|l| l.contains("return ans    # ")));
    // standardizing strips everything back to vanilla
    assert_eq!(standardize(text).unwrap().text, SAMPLE_36);
}

#[test]
fn mdc_messages_come_from_the_bank() {
    let bank = MessageBank::bundled();
    let policy = InjectionPolicy::saturating(11);
    let out = insert_misleading_comments(&vanilla(SAMPLE_36), &policy, &bank).unwrap();
    for edit in &out.edits {
        let kind = edit.op.strip_prefix("mdc:").unwrap();
        let templates = &bank.node_messages[kind];
        let matched = templates.iter().any(|t| {
            let head = t.split('{').next().unwrap();
            edit.detail.starts_with(head) || t == &edit.detail
        });
        assert!(matched, "message '{}' not from bank key {}", edit.detail, kind);
    }
}

#[test]
fn mdc_density_tracks_probability() {
    let bank = MessageBank::bundled();
    // sample 36 has 6 eligible nodes; over many seeds the mean injected
    // count approaches 6p. The seed base is arbitrary but fixed so the
    // sampled mean is reproducible.
    for p in [0.25, 0.5, 0.75] {
        let mut total = 0usize;
        let n_seeds = 1000u64;
        for seed in 1000..1000 + n_seeds {
            let policy = InjectionPolicy::new(p, seed).unwrap();
            let out = insert_misleading_comments(&vanilla(SAMPLE_36), &policy, &bank).unwrap();
            total += out.injected_spans.len();
        }
        let mean = total as f64 / n_seeds as f64;
        let expected = 6.0 * p;
        assert!(
            (mean - expected).abs() <= 0.05 * expected,
            "p={}: mean {} vs expected {}",
            p,
            mean,
            expected
        );
    }
}

#[test]
fn mps_p_one_inserts_prints_with_published_anchors() {
    let bank = MessageBank::bundled();
    let policy = InjectionPolicy::saturating(3);
    let out = insert_misleading_prints(&vanilla(SAMPLE_36), &policy, &bank).unwrap();
    let text = &out.source.text;
    let lines: Vec<&str> = text.lines().collect();
    // function body begins with a print of a function-def message
    assert!(
        lines[1].trim_start().starts_with("print("),
        "first body statement must be a print:\n{}",
        text
    );
    assert_eq!(out.edits.len(), 6);
    assert_eq!(out.injected_spans.len(), 6);
    // message text is single-quoted unless it embeds a quote
    assert!(text.contains("print('") || text.contains("print(\""));
    // semantics preserved: stripping prints is not needed for equality of
    // the return value; verified in the oracle test below.
}

#[test]
fn mps_p_zero_is_byte_identical() {
    let bank = MessageBank::bundled();
    let policy = InjectionPolicy::new(0.0, 9).unwrap();
    let out = insert_misleading_prints(&vanilla(SAMPLE_36), &policy, &bank).unwrap();
    assert_eq!(out.source.text, SAMPLE_36);
}

#[test]
fn mdc_mps_deterministic_per_seed() {
    let bank = MessageBank::bundled();
    let policy = InjectionPolicy::new(0.6, 21).unwrap();
    let a = insert_misleading_comments(&vanilla(SAMPLE_36), &policy, &bank).unwrap();
    let b = insert_misleading_comments(&vanilla(SAMPLE_36), &policy, &bank).unwrap();
    assert_eq!(a, b);
    let a = insert_misleading_prints(&vanilla(SAMPLE_36), &policy, &bank).unwrap();
    let b = insert_misleading_prints(&vanilla(SAMPLE_36), &policy, &bank).unwrap();
    assert_eq!(a, b);
}

#[test]
fn mdc_mps_preserve_behavior_on_demo_corpus() {
    let bank = MessageBank::bundled();
    let pool = OraclePool::new(4).unwrap();
    let lim = ExecutionLimits::default();
    for inst in demo_corpus().instances {
        let van = standardize(&inst.code).unwrap();
        let policy = InjectionPolicy::saturating(17);
        let mdc = insert_misleading_comments(&van, &policy, &bank).unwrap();
        assert!(
            pool.check_equivalence(&van.text, &mdc.source.text, &inst.call_expr, &inst.call_expr, &lim)
                .unwrap(),
            "MDC broke {}",
            inst.id
        );
        let mps = insert_misleading_prints(&van, &policy, &bank).unwrap();
        assert!(
            pool.check_equivalence(&van.text, &mps.source.text, &inst.call_expr, &inst.call_expr, &lim)
                .unwrap(),
            "MPS broke {}\n{}",
            inst.id,
            mps.source.text
        );
    }
}

#[test]
fn output_hint_text_matches_published_form() {
    let corpus = demo_corpus();
    let inst = corpus.get("lcb_36").unwrap();
    let hint = make_output_hint(inst, "3");
    assert_eq!(hint.text, "The return value is 3");
    let hint = make_output_hint(inst, "'x9j'");
    assert_eq!(hint.text, "The return value is 'x9j'");
}

#[test]
fn attach_output_hint_lands_on_last_return_line() {
    let corpus = demo_corpus();
    let inst = corpus.get("lcb_36").unwrap();
    let van = standardize(&inst.code).unwrap();
    let hint = make_output_hint(inst, "3");
    let out = attach_hint(&van, &hint).unwrap();
    assert!(
        out.source
            .text
            .lines()
            .any(|l| l.ends_with("return ans    # The return value is 3")),
        "hint line missing:\n{}",
        out.source.text
    );
    assert_eq!(standardize(&out.source.text).unwrap().text, van.text);
}

#[test]
fn attach_input_hint_lands_on_def_line() {
    let corpus = demo_corpus();
    let inst = corpus.get("crux_2").unwrap();
    let van = standardize(&inst.code).unwrap();
    let hint = make_input_hint(inst, "f('xbtofdeiequ')").unwrap();
    let out = attach_hint(&van, &hint).unwrap();
    let first = out.source.text.lines().next().unwrap();
    assert_eq!(
        first,
        "def f(text):    # The function call is f('xbtofdeiequ')"
    );
}

#[test]
fn output_hint_on_returnless_function_errors() {
    let van = vanilla("def f(n):\n    pass");
    let corpus = demo_corpus();
    let inst = corpus.get("prompt_direct_1").unwrap();
    let hint = make_output_hint(inst, "3");
    assert!(matches!(
        attach_hint(&van, &hint),
        Err(TextualError::NoReturnStatement)
    ));
}

#[test]
fn verify_hint_accepts_wrong_rejects_equal() {
    let pool = OraclePool::new(2).unwrap();
    let lim = ExecutionLimits::default();
    let corpus = demo_corpus();
    let inst = corpus.get("lcb_36").unwrap();
    let wrong = make_output_hint(inst, "3");
    assert!(verify_hint(inst, &wrong, &pool, &lim).unwrap());
    let equal = make_output_hint(inst, "2");
    assert!(!verify_hint(inst, &equal, &pool, &lim).unwrap());
}

#[test]
fn verify_hint_counts_raising_calls_as_incorrect() {
    let pool = OraclePool::new(2).unwrap();
    let lim = ExecutionLimits::default();
    let corpus = demo_corpus();
    let inst = corpus.get("prompt_direct_1").unwrap(); // def f(n): return n
    let hint = make_input_hint(inst, "f(17, 3)").unwrap(); // TypeError
    assert!(verify_hint(inst, &hint, &pool, &lim).unwrap());
}

#[test]
fn offline_hints_verify_incorrect_across_demo_corpus() {
    let pool = OraclePool::new(4).unwrap();
    let lim = ExecutionLimits::default();
    for inst in demo_corpus().instances {
        let hint = generate_wrong_literal(&inst, &HintGenerator::Offline, &pool, &lim, 13)
            .unwrap_or_else(|e| panic!("{}: {}", inst.id, e));
        assert!(
            verify_hint(&inst, &hint, &pool, &lim).unwrap(),
            "hint for {} not verified incorrect",
            inst.id
        );
    }
}

#[test]
fn constant_variadic_function_exhausts_generation() {
    let pool = OraclePool::new(2).unwrap();
    let lim = ExecutionLimits::default();
    // Constant output no matter the arguments: no input-side mutation can
    // make the assertion fail, and the task is input prediction, so the
    // output side is never mutated.
    let inst = crate::corpus::TaskInstance {
        id: "variadic_const".into(),
        dataset: crate::corpus::Dataset::Custom,
        task: TaskKind::InputPrediction,
        code: "def f(*a):\n    return 0".into(),
        function_name: "f".into(),
        call_expr: "f(3)".into(),
        expected_output: "0".into(),
        tags: Default::default(),
    };
    let err = generate_wrong_literal(&inst, &HintGenerator::Offline, &pool, &lim, 1);
    assert!(matches!(err, Err(TextualError::GenerationExhausted(_))));
}

#[test]
fn constant_function_routes_to_arity_change() {
    let pool = OraclePool::new(2).unwrap();
    let lim = ExecutionLimits::default();
    let corpus = demo_corpus();
    let inst = corpus.get("custom_const").unwrap(); // def f(a): return 0
    let hint = generate_wrong_literal(inst, &HintGenerator::Offline, &pool, &lim, 3).unwrap();
    assert_eq!(hint.kind, HintKind::InputHint);
    assert!(verify_hint(inst, &hint, &pool, &lim).unwrap());
}

#[test]
fn mhc_outputs_remain_oracle_equivalent() {
    let pool = OraclePool::new(4).unwrap();
    let lim = ExecutionLimits::default();
    for inst in demo_corpus().instances {
        let van = standardize(&inst.code).unwrap();
        let out = perturb_mhc(&inst, &van, &HintGenerator::Offline, &pool, &lim, 23).unwrap();
        assert!(
            pool.check_equivalence(&van.text, &out.source.text, &inst.call_expr, &inst.call_expr, &lim)
                .unwrap(),
            "MHC broke {}",
            inst.id
        );
    }
}

#[test]
fn bundled_bank_meets_quota() {
    let bank = MessageBank::bundled();
    for key in NODE_KINDS {
        assert_eq!(
            bank.node_messages[*key].len(),
            20,
            "node kind {} below quota",
            key
        );
    }
    for op in DATA_STRUCTURE_OPS {
        assert_eq!(bank.op_messages[*op].len(), 5, "op {} below quota", op);
    }
    // The published variable-assignment candidates ship verbatim.
    assert!(bank.node_messages["assignment"]
        .contains(&"The '{variable}' variable is initialized but never populated.".to_string()));
    assert!(bank.node_messages["assignment"]
        .contains(&"The '{variable}' variable is present but remains dormant throughout the function.".to_string()));
}

#[test]
fn invalid_probability_is_rejected() {
    assert!(InjectionPolicy::new(-0.1, 0).is_err());
    assert!(InjectionPolicy::new(1.1, 0).is_err());
    assert!(InjectionPolicy::new(f64::NAN, 0).is_err());
}

#[test]
fn model_backed_generator_extracts_and_verifies() {
    use crate::gateway::{request_hash, Cassette, CassetteMode, Gateway, ModelResponse, SamplingConfig};
    let pool = OraclePool::new(2).unwrap();
    let lim = ExecutionLimits::default();
    let corpus = demo_corpus();
    let inst = corpus.get("lcb_36").unwrap();

    // Script the model's reply on a cassette: first candidate keeps the
    // call but is still correct (rejected), second is properly wrong.
    let dir = tempfile::TempDir::new().unwrap();
    let tape = dir.path().join("tape.jsonl");
    {
        let prompt = include_str!("../../data/prompts/hint_output.txt")
            .replace("{code}", &inst.code)
            .replace("{expression}", &inst.canonical_assertion())
            .replace("{programming_language}", "python");
        let config = SamplingConfig {
            max_tokens: 2000,
            ..SamplingConfig::direct()
        };
        let hash = request_hash("mock:hinter", &prompt, &config);
        let mk = |text: &str| ModelResponse {
            text: text.to_string(),
            prompt_tokens: 1,
            completion_tokens: 1,
            reasoning_tokens: None,
            latency: 0.0,
            truncated: false,
        };
        let mut cassette = Cassette::open(&tape, CassetteMode::Record).unwrap();
        cassette
            .record(
                &hash,
                "mock:hinter",
                &[
                    mk("[EXPRESSION] assert minimumCost(s = '0011') == 2 [/EXPRESSION]"),
                    mk("[EXPRESSION] assert minimumCost(s = '0011') == 12 [/EXPRESSION]"),
                    mk("no markers"),
                ],
            )
            .unwrap();
    }
    let gateway = Gateway::new(Some(Cassette::open(&tape, CassetteMode::Replay).unwrap()));
    let generator = HintGenerator::Model {
        gateway: &gateway,
        model_id: "mock:hinter".to_string(),
    };
    let hint = generate_wrong_literal(inst, &generator, &pool, &lim, 0).unwrap();
    assert_eq!(hint.kind, HintKind::OutputHint);
    assert_eq!(hint.wrong_literal, "12");
    assert_eq!(hint.text, "The return value is 12");
    assert!(verify_hint(inst, &hint, &pool, &lim).unwrap());
}
