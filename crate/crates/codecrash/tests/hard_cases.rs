//! Oracle-checked equivalence on scoping-heavy snippets that go beyond
//! the bundled demo corpus: closures, global/nonlocal, comprehension
//! shadowing, walrus bindings, decorators, keyword calls between user
//! functions, shadowed builtins, and container mutation.

use codecrash::oracle::{outcomes_equivalent, ExecutionLimits, ExecutionStatus, OraclePool};
use codecrash::pyast::{self, SourceText};
use codecrash::structural::{self, GarbageCounts, PerturbationKind};
use codecrash::textual::{self, InjectionPolicy, MessageBank};

struct Case {
    name: &'static str,
    code: &'static str,
    call: &'static str,
}

const CASES: &[Case] = &[
    Case {
        name: "closure",
        code: "def outer(n):\n    def inner(k):\n        return k * 2\n    return inner(n) + 1",
        call: "outer(5)",
    },
    Case {
        name: "global_counter",
        code: "count = 0\n\ndef bump(step):\n    global count\n    count += step\n    return count",
        call: "bump(3)",
    },
    Case {
        name: "comprehension_shadowing",
        code: "def f(x):\n    return [x for x in range(x)]",
        call: "f(3)",
    },
    Case {
        name: "walrus_guard",
        code: "def f(s):\n    if (n := len(s)) > 2:\n        return n\n    return 0",
        call: "f('abcd')",
    },
    Case {
        name: "lambda_capture",
        code: "def f(a):\n    g = lambda b: a + b\n    return g(10)",
        call: "f(1)",
    },
    Case {
        name: "with_file_io",
        code: "def f(t):\n    with open('scratch.txt', 'w') as fh:\n        fh.write(t)\n    with open('scratch.txt') as fh:\n        return fh.read()",
        call: "f('hello')",
    },
    Case {
        name: "try_except",
        code: "def f(d):\n    try:\n        return d['k']\n    except KeyError:\n        return -1",
        call: "f({})",
    },
    Case {
        name: "chained_assignment",
        code: "def f(n):\n    a = b = n + 1\n    return a * b",
        call: "f(3)",
    },
    Case {
        name: "starred_unpack",
        code: "def f(lst):\n    a, *rest = lst\n    return rest + [a]",
        call: "f([1, 2, 3])",
    },
    Case {
        name: "subscript_aug",
        code: "def f():\n    d = {'x': 1}\n    d['x'] += 5\n    return d",
        call: "f()",
    },
    Case {
        name: "while_else",
        code: "def f(n):\n    total = 0\n    while n > 0:\n        total += n\n        n -= 1\n    else:\n        total += 100\n    return total",
        call: "f(3)",
    },
    Case {
        name: "nonlocal_bump",
        code: "def f():\n    x = 0\n    def bump():\n        nonlocal x\n        x += 1\n    bump()\n    bump()\n    return x",
        call: "f()",
    },
    Case {
        name: "full_signature",
        code: "def f(a, b=3, *args, c=4, **kw):\n    return a + b + c + len(args) + len(kw)",
        call: "f(1, 2, 5, 6, c=7, z=8)",
    },
    Case {
        name: "decorated",
        code: "def identity(fn):\n    return fn\n\n@identity\ndef f(n):\n    return n * 2",
        call: "f(4)",
    },
    Case {
        name: "helper_call_keywords",
        code: "def add(left, right):\n    return left + right\n\ndef f(x):\n    return add(left=x, right=2)",
        call: "f(5)",
    },
    Case {
        name: "genexp_filter",
        code: "def f(xs):\n    return sum(x if x > 0 else -x for x in xs if x != 0)",
        call: "f([1, -2, 0, 3])",
    },
    Case {
        name: "dict_comp_zip",
        code: "def f(ks, vs):\n    return {k: v for (k, v) in zip(ks, vs)}",
        call: "f(['a', 'b'], [1, 2])",
    },
    Case {
        name: "string_method_chain",
        code: "def f(s):\n    return s.strip().upper().replace('A', '@')",
        call: "f('  banana  ')",
    },
    Case {
        name: "shadowed_builtin_param",
        code: "def f(list):\n    return list + [1]",
        call: "f([0])",
    },
    Case {
        name: "membership_ternary",
        code: "def f(x):\n    return 'yes' if x in (1, 2, 3) else 'no'",
        call: "f(2)",
    },
];

#[test]
fn structural_and_textual_kinds_preserve_behavior_on_hard_cases() {
    let pool = OraclePool::new(4).unwrap();
    let lim = ExecutionLimits::default();
    let bank = MessageBank::bundled();
    let counts = GarbageCounts::default();
    for case in CASES {
        let vanilla_text = pyast::standardize(case.code)
            .unwrap_or_else(|e| panic!("{}: does not parse: {}", case.name, e))
            .text;
        let vanilla = SourceText::vanilla(vanilla_text.clone());
        let base = pool.run_call(&vanilla.text, case.call, &lim).unwrap();
        assert_eq!(
            base.status,
            ExecutionStatus::Ok,
            "{}: vanilla run failed: {:?}",
            case.name,
            base
        );
        for seed in [1u64, 2, 3] {
            let mut variants: Vec<(PerturbationKind, String, String)> = Vec::new();
            let ren = structural::rename_entities(&vanilla, case.call, seed).unwrap();
            variants.push((
                PerturbationKind::Ren,
                ren.source.text.clone(),
                ren.rewritten_call.clone().unwrap(),
            ));
            let rtf = structural::reformat_conditionals(&vanilla, seed).unwrap();
            variants.push((PerturbationKind::Rtf, rtf.source.text, case.call.to_string()));
            let gbc = structural::insert_garbage(&vanilla, seed, &counts).unwrap();
            variants.push((PerturbationKind::Gbc, gbc.source.text.clone(), case.call.to_string()));
            let all = structural::aggregate_all(&vanilla, case.call, seed, &counts).unwrap();
            variants.push((
                PerturbationKind::All,
                all.source.text.clone(),
                all.rewritten_call.clone().unwrap(),
            ));
            let policy = InjectionPolicy::saturating(seed);
            let mdc = textual::insert_misleading_comments(&vanilla, &policy, &bank).unwrap();
            variants.push((PerturbationKind::Mdc, mdc.source.text, case.call.to_string()));
            let mps = textual::insert_misleading_prints(&vanilla, &policy, &bank).unwrap();
            variants.push((PerturbationKind::Mps, mps.source.text, case.call.to_string()));

            for (kind, text, call) in &variants {
                let outcome = pool.run_call(text, call, &lim).unwrap();
                assert!(
                    outcomes_equivalent(&base, &outcome),
                    "{} {} seed {}: behavior changed\nvanilla: {:?}\nperturbed: {:?}\n{}",
                    case.name,
                    kind,
                    seed,
                    base,
                    outcome,
                    text
                );
            }
            // Dead-injection traces stay clean on the garbage kinds.
            let dead = pool
                .check_dead_injection(
                    &gbc.source.text,
                    case.call,
                    &gbc.injected_spans,
                    &lim,
                )
                .unwrap();
            assert!(dead, "{} GBC seed {} live injection", case.name, seed);
            let dead = pool
                .check_dead_injection(
                    &all.source.text,
                    all.rewritten_call.as_deref().unwrap(),
                    &all.injected_spans,
                    &lim,
                )
                .unwrap();
            assert!(dead, "{} ALL seed {} live injection", case.name, seed);
        }
    }
}

#[test]
fn renamed_hard_cases_erase_user_identifiers() {
    for case in CASES {
        let vanilla = SourceText::vanilla(pyast::standardize(case.code).unwrap().text);
        let ren = structural::rename_entities(&vanilla, case.call, 0).unwrap();
        let map = ren.rename_map.unwrap();
        assert!(map.is_injective(&Default::default()), "{}", case.name);
        // Renamed source must still parse and contain no original
        // variable identifier as a standalone word outside strings.
        let tree = pyast::parse(&ren.source.text).unwrap();
        let rendered = pyast::unparse(&tree);
        assert_eq!(rendered, ren.source.text, "{}: unstable render", case.name);
    }
}
