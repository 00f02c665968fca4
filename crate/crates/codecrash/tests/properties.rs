//! Property tests: the canonical renderer and parser agree on generated
//! trees, standardization is a fixed point, and extraction survives
//! arbitrary surrounding noise.

use codecrash::pyast::{self, BinOp, CmpOp, Expr, ExprKind, Module, Param, Params, Stmt, StmtKind};
use proptest::prelude::*;

fn name_strategy() -> impl Strategy<Value = String> {
    prop_oneof![
        Just("a".to_string()),
        Just("b".to_string()),
        Just("count".to_string()),
        Just("text".to_string()),
        Just("Var_1".to_string()),
        Just("items_2".to_string()),
    ]
}

fn leaf_expr() -> impl Strategy<Value = Expr> {
    prop_oneof![
        name_strategy().prop_map(|n| Expr::name(&n)),
        (0u32..10000).prop_map(|n| Expr::number(&n.to_string())),
        "[ -~]{0,12}".prop_map(|s| Expr::string(&s)),
        any::<bool>().prop_map(|b| Expr::new(ExprKind::Bool(b))),
        Just(Expr::new(ExprKind::NoneLit)),
    ]
}

fn expr_strategy() -> impl Strategy<Value = Expr> {
    leaf_expr().prop_recursive(3, 24, 4, |inner| {
        prop_oneof![
            (inner.clone(), inner.clone(), bin_op()).prop_map(|(l, r, op)| Expr::new(
                ExprKind::BinOp {
                    left: Box::new(l),
                    op,
                    right: Box::new(r),
                }
            )),
            (inner.clone(), inner.clone(), cmp_op()).prop_map(|(l, r, op)| Expr::new(
                ExprKind::Compare {
                    left: Box::new(l),
                    ops: vec![op],
                    comparators: vec![r],
                }
            )),
            inner.clone().prop_map(|e| Expr::new(ExprKind::UnaryOp {
                op: pyast::UnaryOp::Not,
                operand: Box::new(e),
            })),
            prop::collection::vec(inner.clone(), 0..4)
                .prop_map(|elts| Expr::new(ExprKind::List(elts))),
            prop::collection::vec(inner.clone(), 0..3)
                .prop_map(|elts| Expr::new(ExprKind::Tuple(elts))),
            (name_strategy(), prop::collection::vec(inner.clone(), 0..3))
                .prop_map(|(f, args)| Expr::call(Expr::name(&f), args)),
            (inner.clone(), inner.clone(), inner).prop_map(|(b, t, o)| Expr::new(
                ExprKind::IfExp {
                    test: Box::new(t),
                    body: Box::new(b),
                    orelse: Box::new(o),
                }
            )),
        ]
    })
}

fn bin_op() -> impl Strategy<Value = BinOp> {
    prop_oneof![
        Just(BinOp::Add),
        Just(BinOp::Sub),
        Just(BinOp::Mult),
        Just(BinOp::Mod),
        Just(BinOp::Pow),
        Just(BinOp::BitOr),
    ]
}

fn cmp_op() -> impl Strategy<Value = CmpOp> {
    prop_oneof![
        Just(CmpOp::Eq),
        Just(CmpOp::NotEq),
        Just(CmpOp::Lt),
        Just(CmpOp::GtE),
        Just(CmpOp::In),
    ]
}

fn stmt_strategy() -> impl Strategy<Value = Stmt> {
    let simple = prop_oneof![
        (name_strategy(), expr_strategy()).prop_map(|(n, e)| Stmt::new(StmtKind::Assign {
            targets: vec![Expr::name(&n)],
            value: e,
        })),
        expr_strategy().prop_map(|e| Stmt::new(StmtKind::Return(Some(e)))),
        expr_strategy().prop_map(|e| Stmt::new(StmtKind::Expr(e))),
        (name_strategy(), expr_strategy()).prop_map(|(n, e)| Stmt::new(StmtKind::AugAssign {
            target: Expr::name(&n),
            op: BinOp::Add,
            value: e,
        })),
    ];
    let block = (expr_strategy(), prop::collection::vec(simple.clone(), 1..3)).prop_map(
        |(test, body)| {
            Stmt::new(StmtKind::If {
                test,
                body,
                orelse: Vec::new(),
            })
        },
    );
    prop_oneof![simple, block]
}

fn module_strategy() -> impl Strategy<Value = Module> {
    (
        prop::collection::vec(name_strategy(), 0..3),
        prop::collection::vec(stmt_strategy(), 1..4),
    )
        .prop_map(|(params, body)| {
            let mut p = Params::empty();
            let mut seen = std::collections::HashSet::new();
            for name in params {
                if seen.insert(name.clone()) {
                    p.args.push(Param::plain(&name));
                }
            }
            Module {
                body: vec![Stmt::new(StmtKind::FunctionDef {
                    name: "f".to_string(),
                    params: p,
                    returns: None,
                    decorators: Vec::new(),
                    body,
                })],
            }
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    /// parse(unparse(t)) is structurally equal to t.
    #[test]
    fn round_trip_stability(module in module_strategy()) {
        let rendered = pyast::unparse(&module);
        let reparsed = pyast::parse(&rendered)
            .unwrap_or_else(|e| panic!("render not parseable: {}\n{}", e, rendered));
        prop_assert!(
            pyast::structurally_equal(&module, &reparsed),
            "round trip changed structure:\n{}",
            rendered
        );
    }

    /// standardize is idempotent on anything the renderer can produce.
    #[test]
    fn standardize_idempotence(module in module_strategy()) {
        let rendered = pyast::unparse(&module);
        let once = pyast::standardize(&rendered).unwrap().text;
        let twice = pyast::standardize(&once).unwrap().text;
        prop_assert_eq!(once, twice);
    }

    /// The last answer block wins regardless of surrounding noise.
    #[test]
    fn extraction_last_block_rule(
        noise_a in "[^\\[\\]]{0,40}",
        noise_b in "[^\\[\\]]{0,40}",
        first in "[a-z0-9 =()]{1,20}",
        second in "[a-z0-9 =()]{1,20}",
    ) {
        let text = format!(
            "{}[ANSWER]{}[/ANSWER]{}[ANSWER]{}[/ANSWER]",
            noise_a, first, noise_b, second
        );
        let extraction = codecrash::protocol::extract_answer(&text);
        prop_assert_eq!(extraction.status, codecrash::protocol::ExtractionStatus::Found);
        prop_assert_eq!(extraction.answer_expr.as_deref(), Some(second.trim()));
    }

    /// Mutated scalar literals never equal the original rendering.
    #[test]
    fn literal_mutation_changes_scalars(n in -1000i64..1000, seed in 0u64..500) {
        use codecrash::textual::pyvalue::{mutate, render, PyLit};
        let mut rng = codecrash::rng::Rng::new(seed);
        let original = PyLit::Int(n);
        let mutated = mutate(&original, &mut rng);
        prop_assert_ne!(render(&original), render(&mutated));
    }
}
