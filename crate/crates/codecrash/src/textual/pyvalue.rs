//! Literal value model for the offline hint mutator: parse Python
//! literal expressions into values, render them repr-style, and apply
//! seeded mutations.

use crate::pyast::{parse_expression, Expr, ExprKind};
use crate::rng::Rng;

#[derive(Debug, Clone, PartialEq)]
pub enum PyLit {
    Int(i64),
    Float(f64),
    Str(String),
    Bool(bool),
    None,
    List(Vec<PyLit>),
    Tuple(Vec<PyLit>),
    Set(Vec<PyLit>),
    Dict(Vec<(PyLit, PyLit)>),
}

/// Parse a literal expression (numbers, strings, booleans, None and
/// containers of those). Anything else is not mutable offline.
pub fn parse_literal_text(text: &str) -> Option<PyLit> {
    let expr = parse_expression(text).ok()?;
    parse_literal(&expr)
}

pub fn parse_literal(expr: &Expr) -> Option<PyLit> {
    match &expr.kind {
        ExprKind::Number(lex) => {
            let clean = lex.replace('_', "");
            if let Ok(i) = clean.parse::<i64>() {
                return Some(PyLit::Int(i));
            }
            if let Some(hex) = clean.strip_prefix("0x").or_else(|| clean.strip_prefix("0X")) {
                return i64::from_str_radix(hex, 16).ok().map(PyLit::Int);
            }
            clean.parse::<f64>().ok().map(PyLit::Float)
        }
        ExprKind::Str { value, .. } => Some(PyLit::Str(value.clone())),
        ExprKind::Bool(b) => Some(PyLit::Bool(*b)),
        ExprKind::NoneLit => Some(PyLit::None),
        ExprKind::UnaryOp {
            op: crate::pyast::UnaryOp::USub,
            operand,
        } => {
            match parse_literal(operand)? {
                PyLit::Int(i) => Some(PyLit::Int(-i)),
                PyLit::Float(f) => Some(PyLit::Float(-f)),
                _ => None,
            }
        }
        ExprKind::List(elts) => elts
            .iter()
            .map(parse_literal)
            .collect::<Option<Vec<_>>>()
            .map(PyLit::List),
        ExprKind::Tuple(elts) => elts
            .iter()
            .map(parse_literal)
            .collect::<Option<Vec<_>>>()
            .map(PyLit::Tuple),
        ExprKind::Set(elts) => elts
            .iter()
            .map(parse_literal)
            .collect::<Option<Vec<_>>>()
            .map(PyLit::Set),
        ExprKind::Dict { keys, values } => {
            let mut out = Vec::new();
            for (k, v) in keys.iter().zip(values.iter()) {
                let k = k.as_ref()?;
                out.push((parse_literal(k)?, parse_literal(v)?));
            }
            Some(PyLit::Dict(out))
        }
        _ => None,
    }
}

/// Render in the reference interpreter's repr style.
pub fn render(lit: &PyLit) -> String {
    match lit {
        PyLit::Int(i) => i.to_string(),
        PyLit::Float(f) => {
            if f.fract() == 0.0 && f.is_finite() && f.abs() < 1e16 {
                format!("{:.1}", f)
            } else {
                format!("{}", f)
            }
        }
        PyLit::Str(s) => python_repr_str(s),
        PyLit::Bool(true) => "True".to_string(),
        PyLit::Bool(false) => "False".to_string(),
        PyLit::None => "None".to_string(),
        PyLit::List(elts) => format!("[{}]", join(elts)),
        PyLit::Tuple(elts) => match elts.len() {
            0 => "()".to_string(),
            1 => format!("({},)", render(&elts[0])),
            _ => format!("({})", join(elts)),
        },
        PyLit::Set(elts) => {
            if elts.is_empty() {
                "set()".to_string()
            } else {
                format!("{{{}}}", join(elts))
            }
        }
        PyLit::Dict(pairs) => {
            let body: Vec<String> = pairs
                .iter()
                .map(|(k, v)| format!("{}: {}", render(k), render(v)))
                .collect();
            format!("{{{}}}", body.join(", "))
        }
    }
}

fn join(elts: &[PyLit]) -> String {
    elts.iter().map(render).collect::<Vec<_>>().join(", ")
}

/// Python-style string repr: single quotes preferred, switching to double
/// quotes when the content contains a single quote and no double quote.
pub fn python_repr_str(s: &str) -> String {
    let quote = if s.contains('\'') && !s.contains('"') {
        '"'
    } else {
        '\''
    };
    let mut out = String::with_capacity(s.len() + 2);
    out.push(quote);
    for c in s.chars() {
        match c {
            '\\' => out.push_str("\\\\"),
            '\n' => out.push_str("\\n"),
            '\t' => out.push_str("\\t"),
            '\r' => out.push_str("\\r"),
            c if c == quote => {
                out.push('\\');
                out.push(c);
            }
            c => out.push(c),
        }
    }
    out.push(quote);
    out
}

/// One seeded mutation step. The result may coincide with the input for
/// degenerate values (empty containers); callers verify and retry.
pub fn mutate(lit: &PyLit, rng: &mut Rng) -> PyLit {
    match lit {
        PyLit::Int(n) => {
            let k = rng.range_inclusive(1, 3);
            let sign = if rng.bernoulli(0.5) { 1 } else { -1 };
            PyLit::Int(n.wrapping_add(sign * k))
        }
        PyLit::Float(f) => {
            let k = rng.range_inclusive(1, 3) as f64;
            let sign = if rng.bernoulli(0.5) { 1.0 } else { -1.0 };
            PyLit::Float(f + sign * k)
        }
        PyLit::Str(s) => {
            let chars: Vec<char> = s.chars().collect();
            if chars.is_empty() || rng.bernoulli(0.5) {
                // append a seeded lowercase letter
                let c = (b'a' + rng.below(26) as u8) as char;
                let mut out = s.clone();
                out.push(c);
                PyLit::Str(out)
            } else {
                // drop a seeded element
                let idx = rng.below(chars.len());
                let out: String = chars
                    .iter()
                    .enumerate()
                    .filter(|(i, _)| *i != idx)
                    .map(|(_, c)| *c)
                    .collect();
                PyLit::Str(out)
            }
        }
        PyLit::Bool(b) => PyLit::Bool(!b),
        PyLit::None => PyLit::Int(0),
        PyLit::List(elts) => PyLit::List(mutate_seq(elts, rng)),
        PyLit::Tuple(elts) => PyLit::Tuple(mutate_seq(elts, rng)),
        PyLit::Set(elts) => PyLit::Set(mutate_seq(elts, rng)),
        PyLit::Dict(pairs) => {
            if pairs.is_empty() {
                return PyLit::Dict(pairs.clone()); // nothing to shift
            }
            let idx = rng.below(pairs.len());
            let mut out = pairs.clone();
            let shifted = mutate(&out[idx].1, rng);
            out[idx].1 = shifted;
            PyLit::Dict(out)
        }
    }
}

/// Element add / remove / modify for sequence-like values.
fn mutate_seq(elts: &[PyLit], rng: &mut Rng) -> Vec<PyLit> {
    let mut out = elts.to_vec();
    let action = if out.is_empty() { 0 } else { rng.below(3) };
    match action {
        0 => {
            // add
            let element = if out.is_empty() {
                PyLit::Int(rng.range_inclusive(1, 3))
            } else {
                let template = &out[rng.below(out.len())];
                mutate(template, rng)
            };
            out.push(element);
        }
        1 => {
            // remove
            let idx = rng.below(out.len());
            out.remove(idx);
        }
        _ => {
            // modify
            let idx = rng.below(out.len());
            out[idx] = mutate(&out[idx].clone(), rng);
        }
    }
    out
}

/// Change the value's type, for inputs of constant functions: ints become
/// their decimal string, strings become their length, containers change
/// flavor, booleans become ints.
pub fn type_swap(lit: &PyLit) -> PyLit {
    match lit {
        PyLit::Int(n) => PyLit::Str(n.to_string()),
        PyLit::Float(f) => PyLit::Str(render(&PyLit::Float(*f))),
        PyLit::Str(s) => PyLit::Int(s.chars().count() as i64),
        PyLit::Bool(b) => PyLit::Int(*b as i64),
        PyLit::None => PyLit::Int(0),
        PyLit::List(e) => PyLit::Tuple(e.clone()),
        PyLit::Tuple(e) => PyLit::List(e.clone()),
        PyLit::Set(e) => PyLit::List(e.clone()),
        PyLit::Dict(pairs) => PyLit::List(pairs.iter().map(|(k, _)| k.clone()).collect()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_and_render_round_trip() {
        for text in [
            "17",
            "-3",
            "2.5",
            "'x9j'",
            "\"it's\"",
            "True",
            "None",
            "[1, 1, 2]",
            "(1,)",
            "{1: None, 2: None}",
            "'HI~'",
        ] {
            let lit = parse_literal_text(text).unwrap_or_else(|| panic!("parse {}", text));
            let rendered = render(&lit);
            let reparsed = parse_literal_text(&rendered).unwrap();
            assert_eq!(lit, reparsed, "round trip for {}", text);
        }
    }

    #[test]
    fn int_mutation_moves_by_small_step() {
        let mut rng = Rng::new(1);
        let lit = PyLit::Int(2);
        let out = mutate(&lit, &mut rng);
        match out {
            PyLit::Int(v) => assert!((v - 2).abs() >= 1 && (v - 2).abs() <= 3),
            _ => panic!("int stays int"),
        }
    }

    #[test]
    fn list_add_rule_reachable() {
        // The published example: [1, 1] can grow by one element.
        let mut grew = false;
        for seed in 0..50 {
            let mut rng = Rng::new(seed);
            if let PyLit::List(v) = mutate(&PyLit::List(vec![PyLit::Int(1), PyLit::Int(1)]), &mut rng)
            {
                if v.len() == 3 {
                    grew = true;
                    break;
                }
            }
        }
        assert!(grew);
    }

    #[test]
    fn mutations_differ_from_original_for_scalars() {
        for seed in 0..200 {
            let mut rng = Rng::new(seed);
            assert_ne!(mutate(&PyLit::Int(0), &mut rng), PyLit::Int(0));
            let mut rng = Rng::new(seed);
            assert_ne!(
                mutate(&PyLit::Bool(true), &mut rng),
                PyLit::Bool(true)
            );
        }
    }

    #[test]
    fn repr_prefers_single_quotes() {
        assert_eq!(render(&PyLit::Str("x9j".into())), "'x9j'");
        assert_eq!(render(&PyLit::Str("it's".into())), "\"it's\"");
    }
}
