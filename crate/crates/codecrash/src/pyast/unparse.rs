//! Canonical renderer for syntax trees.
//!
//! Style constants: 4-space indentation, one statement per line, single
//! spaces around binary operators and `=` in assignments, keyword call
//! arguments without spaces, string quote characters preserved as written,
//! one blank line before a function definition that is not the first
//! statement of its block. Comment trivia attached to statements is
//! rendered; everything else is dropped.
//!
//! One deliberate divergence from the reference interpreter's unparser:
//! a walrus expression used directly as an `if`/`while` test is rendered
//! without redundant parentheses.

use super::ast::*;

// Expression precedence levels, lowest binds loosest.
const P_TUPLE: u8 = 0;
const P_TEST: u8 = 1; // ternary, lambda
const P_OR: u8 = 2;
const P_AND: u8 = 3;
const P_NOT: u8 = 4;
const P_CMP: u8 = 5;
const P_BOR: u8 = 6;
const P_BXOR: u8 = 7;
const P_BAND: u8 = 8;
const P_SHIFT: u8 = 9;
const P_ARITH: u8 = 10;
const P_TERM: u8 = 11;
const P_FACTOR: u8 = 12;
const P_POWER: u8 = 13;
const P_ATOM: u8 = 14;

pub struct Renderer {
    out: String,
    indent: usize,
    line: u32,
    col: u32,
    /// (path, kind, span) for every statement, document order.
    pub stmt_spans: Vec<(Vec<u32>, Span)>,
    path: Vec<u32>,
    track: bool,
}

pub fn unparse(module: &Module) -> String {
    let mut r = Renderer::new(false);
    r.render_module(module);
    r.out
}

/// Render and also report the span of every statement keyed by its
/// child-index path from the module root.
pub fn unparse_with_spans(module: &Module) -> (String, Vec<(Vec<u32>, Span)>) {
    let mut r = Renderer::new(true);
    r.render_module(module);
    (r.out, r.stmt_spans)
}

impl Renderer {
    fn new(track: bool) -> Self {
        Renderer {
            out: String::new(),
            indent: 0,
            line: 1,
            col: 1,
            stmt_spans: Vec::new(),
            path: Vec::new(),
            track,
        }
    }

    fn write(&mut self, s: &str) {
        for ch in s.chars() {
            if ch == '\n' {
                self.line += 1;
                self.col = 1;
            } else {
                self.col += 1;
            }
        }
        self.out.push_str(s);
    }

    fn newline(&mut self) {
        self.write("\n");
    }

    fn write_indent(&mut self) {
        for _ in 0..self.indent {
            self.write("    ");
        }
    }

    fn render_module(&mut self, module: &Module) {
        self.render_body(&module.body, 0);
        if self.out.ends_with('\n') {
            self.out.pop();
        }
    }

    /// Render a statement list; child paths start at `offset` so that
    /// sibling lists of one parent (body, orelse, handlers) never collide.
    fn render_body(&mut self, body: &[Stmt], offset: u32) {
        for (i, stmt) in body.iter().enumerate() {
            // A function definition gets one preceding blank line unless it
            // opens the output, matching the reference unparser.
            if !self.out.is_empty() && matches!(stmt.kind, StmtKind::FunctionDef { .. }) {
                self.newline();
            }
            let _ = i;
            self.path.push(offset + i as u32);
            self.render_stmt(stmt);
            self.path.pop();
        }
    }

    fn render_stmt(&mut self, stmt: &Stmt) {
        for comment in &stmt.leading_comments {
            self.write_indent();
            self.write("# ");
            self.write(comment);
            self.newline();
        }
        self.write_indent();
        let start = Pos {
            line: self.line,
            col: self.col,
        };
        match &stmt.kind {
            StmtKind::FunctionDef {
                name,
                params,
                returns,
                decorators,
                body,
            } => {
                for dec in decorators {
                    self.write("@");
                    self.render_expr(dec, P_TEST);
                    self.newline();
                    self.write_indent();
                }
                self.write("def ");
                self.write(name);
                self.write("(");
                self.render_params(params);
                self.write(")");
                if let Some(ret) = returns {
                    self.write(" -> ");
                    self.render_expr(ret, P_TEST);
                }
                self.write(":");
                self.end_header(stmt);
                self.render_suite(body, 0);
            }
            StmtKind::For {
                target,
                iter,
                body,
                orelse,
            } => {
                self.write("for ");
                self.render_expr(target, P_TUPLE);
                self.write(" in ");
                self.render_expr(iter, P_TEST);
                self.write(":");
                self.end_header(stmt);
                self.render_suite(body, 0);
                if !orelse.is_empty() {
                    self.write_indent();
                    self.write("else:");
                    self.newline();
                    self.render_suite(orelse, body.len() as u32);
                }
            }
            StmtKind::While { test, body, orelse } => {
                self.write("while ");
                self.render_test_slot(test);
                self.write(":");
                self.end_header(stmt);
                self.render_suite(body, 0);
                if !orelse.is_empty() {
                    self.write_indent();
                    self.write("else:");
                    self.newline();
                    self.render_suite(orelse, body.len() as u32);
                }
            }
            StmtKind::If { test, body, orelse } => {
                self.write("if ");
                self.render_if_chain(stmt, test, body, orelse);
            }
            StmtKind::With { items, body } => {
                self.write("with ");
                for (i, item) in items.iter().enumerate() {
                    if i > 0 {
                        self.write(", ");
                    }
                    self.render_expr(&item.context, P_TEST);
                    if let Some(v) = &item.vars {
                        self.write(" as ");
                        self.render_expr(v, P_TEST);
                    }
                }
                self.write(":");
                self.end_header(stmt);
                self.render_suite(body, 0);
            }
            StmtKind::Try {
                body,
                handlers,
                orelse,
                finalbody,
            } => {
                self.write("try:");
                self.end_header(stmt);
                self.render_suite(body, 0);
                let mut offset = body.len() as u32;
                for h in handlers {
                    self.write_indent();
                    self.write("except");
                    if let Some(t) = &h.typ {
                        self.write(" ");
                        self.render_expr(t, P_TEST);
                        if let Some(n) = &h.name {
                            self.write(" as ");
                            self.write(n);
                        }
                    }
                    self.write(":");
                    self.newline();
                    self.render_suite(&h.body, offset);
                    offset += h.body.len() as u32;
                }
                if !orelse.is_empty() {
                    self.write_indent();
                    self.write("else:");
                    self.newline();
                    self.render_suite(orelse, offset);
                    offset += orelse.len() as u32;
                }
                if !finalbody.is_empty() {
                    self.write_indent();
                    self.write("finally:");
                    self.newline();
                    self.render_suite(finalbody, offset);
                }
            }
            simple => {
                self.render_simple_stmt(simple);
                self.end_header(stmt);
            }
        }
        if self.track {
            // End position: last written character.
            let end = Pos {
                line: if self.col == 1 { self.line - 1 } else { self.line },
                col: self.col,
            };
            self.stmt_spans.push((self.path.clone(), Span { start, end }));
        }
    }

    /// Render `test: body` plus an else-branch, collapsing a sole nested
    /// `if` in the else-branch into `elif`.
    fn render_if_chain(&mut self, stmt: &Stmt, test: &Expr, body: &[Stmt], orelse: &[Stmt]) {
        self.render_test_slot(test);
        self.write(":");
        self.end_header(stmt);
        self.render_suite(body, 0);
        if orelse.len() == 1 {
            if let StmtKind::If {
                test: etest,
                body: ebody,
                orelse: eorelse,
            } = &orelse[0].kind
            {
                self.write_indent();
                let start = Pos {
                    line: self.line,
                    col: self.col,
                };
                self.write("elif ");
                // The elif arm is path-addressable as the first orelse child.
                self.path.push(body.len() as u32);
                self.render_if_chain(&orelse[0], etest, ebody, eorelse);
                if self.track {
                    let end = Pos {
                        line: if self.col == 1 { self.line - 1 } else { self.line },
                        col: self.col,
                    };
                    self.stmt_spans.push((self.path.clone(), Span { start, end }));
                }
                self.path.pop();
                return;
            }
        }
        if !orelse.is_empty() {
            self.write_indent();
            self.write("else:");
            self.newline();
            self.render_suite(orelse, body.len() as u32);
        }
    }

    fn end_header(&mut self, stmt: &Stmt) {
        if let Some(c) = &stmt.trailing_comment {
            self.write("    # ");
            self.write(c);
        }
        self.newline();
    }

    fn render_suite(&mut self, body: &[Stmt], offset: u32) {
        self.indent += 1;
        self.render_body(body, offset);
        self.indent -= 1;
    }

    /// An `if`/`while` test: a top-level walrus needs no parentheses here.
    fn render_test_slot(&mut self, test: &Expr) {
        if let ExprKind::NamedExpr { target, value } = &test.kind {
            self.render_expr(target, P_ATOM);
            self.write(" := ");
            self.render_expr(value, P_TEST);
        } else {
            self.render_expr(test, P_TUPLE + 1);
        }
    }

    fn render_simple_stmt(&mut self, kind: &StmtKind) {
        match kind {
            StmtKind::Return(value) => {
                self.write("return");
                if let Some(v) = value {
                    self.write(" ");
                    self.render_expr(v, P_TUPLE);
                }
            }
            StmtKind::Assign { targets, value } => {
                for t in targets {
                    self.render_expr(t, P_TUPLE);
                    self.write(" = ");
                }
                self.render_expr(value, P_TUPLE);
            }
            StmtKind::AugAssign { target, op, value } => {
                self.render_expr(target, P_ATOM);
                self.write(" ");
                self.write(op.symbol());
                self.write("= ");
                self.render_expr(value, P_TUPLE);
            }
            StmtKind::AnnAssign {
                target,
                annotation,
                value,
            } => {
                self.render_expr(target, P_ATOM);
                self.write(": ");
                self.render_expr(annotation, P_TEST);
                if let Some(v) = value {
                    self.write(" = ");
                    self.render_expr(v, P_TUPLE);
                }
            }
            StmtKind::Raise { exc, cause } => {
                self.write("raise");
                if let Some(e) = exc {
                    self.write(" ");
                    self.render_expr(e, P_TEST);
                }
                if let Some(c) = cause {
                    self.write(" from ");
                    self.render_expr(c, P_TEST);
                }
            }
            StmtKind::Assert { test, msg } => {
                self.write("assert ");
                self.render_expr(test, P_TEST);
                if let Some(m) = msg {
                    self.write(", ");
                    self.render_expr(m, P_TEST);
                }
            }
            StmtKind::Import(names) => {
                self.write("import ");
                self.render_aliases(names);
            }
            StmtKind::ImportFrom {
                module,
                names,
                level,
            } => {
                self.write("from ");
                for _ in 0..*level {
                    self.write(".");
                }
                if let Some(m) = module {
                    self.write(m);
                }
                self.write(" import ");
                self.render_aliases(names);
            }
            StmtKind::Global(names) => {
                self.write("global ");
                let joined = names.join(", ");
                self.write(&joined);
            }
            StmtKind::Nonlocal(names) => {
                self.write("nonlocal ");
                let joined = names.join(", ");
                self.write(&joined);
            }
            StmtKind::Delete(targets) => {
                self.write("del ");
                for (i, t) in targets.iter().enumerate() {
                    if i > 0 {
                        self.write(", ");
                    }
                    self.render_expr(t, P_TEST);
                }
            }
            StmtKind::Expr(e) => {
                self.render_expr(e, P_TUPLE + 1);
            }
            StmtKind::Pass => self.write("pass"),
            StmtKind::Break => self.write("break"),
            StmtKind::Continue => self.write("continue"),
            _ => unreachable!("compound statement in simple position"),
        }
    }

    fn render_aliases(&mut self, names: &[Alias]) {
        for (i, a) in names.iter().enumerate() {
            if i > 0 {
                self.write(", ");
            }
            self.write(&a.name);
            if let Some(asn) = &a.asname {
                self.write(" as ");
                self.write(asn);
            }
        }
    }

    fn render_params(&mut self, params: &Params) {
        let mut first = true;
        let sep = |r: &mut Self, first: &mut bool| {
            if !*first {
                r.write(", ");
            }
            *first = false;
        };
        for p in &params.args {
            sep(self, &mut first);
            self.render_param(p);
        }
        if let Some(v) = &params.vararg {
            sep(self, &mut first);
            self.write("*");
            self.render_param(v);
        } else if params.kwonly_marker && !params.kwonly.is_empty() {
            sep(self, &mut first);
            self.write("*");
        }
        for p in &params.kwonly {
            sep(self, &mut first);
            self.render_param(p);
        }
        if let Some(k) = &params.kwarg {
            sep(self, &mut first);
            self.write("**");
            self.render_param(k);
        }
    }

    fn render_param(&mut self, p: &Param) {
        self.write(&p.name);
        if let Some(a) = &p.annotation {
            self.write(": ");
            self.render_expr(a, P_TEST);
        }
        if let Some(d) = &p.default {
            if p.annotation.is_some() {
                self.write(" = ");
            } else {
                self.write("=");
            }
            self.render_expr(d, P_TEST);
        }
    }

    fn expr_precedence(e: &Expr) -> u8 {
        match &e.kind {
            ExprKind::NamedExpr { .. } => P_ATOM, // self-parenthesizing
            ExprKind::Tuple(_) => P_ATOM,          // rendered with its own parens
            ExprKind::Lambda { .. } | ExprKind::IfExp { .. } => P_TEST,
            ExprKind::BoolOp { op, .. } => match op {
                BoolOp::Or => P_OR,
                BoolOp::And => P_AND,
            },
            ExprKind::UnaryOp { op, .. } => match op {
                UnaryOp::Not => P_NOT,
                _ => P_FACTOR,
            },
            ExprKind::Compare { .. } => P_CMP,
            ExprKind::BinOp { op, .. } => match op {
                BinOp::BitOr => P_BOR,
                BinOp::BitXor => P_BXOR,
                BinOp::BitAnd => P_BAND,
                BinOp::LShift | BinOp::RShift => P_SHIFT,
                BinOp::Add | BinOp::Sub => P_ARITH,
                BinOp::Mult | BinOp::Div | BinOp::FloorDiv | BinOp::Mod | BinOp::MatMult => P_TERM,
                BinOp::Pow => P_POWER,
            },
            ExprKind::Starred(_) => P_TEST,
            _ => P_ATOM,
        }
    }

    fn render_expr(&mut self, e: &Expr, min_level: u8) {
        let prec = Self::expr_precedence(e);
        let needs_parens = prec < min_level;
        if needs_parens {
            self.write("(");
        }
        match &e.kind {
            ExprKind::Name(n) => self.write(n),
            ExprKind::Number(n) => self.write(n),
            ExprKind::Str { value, quote, .. } => {
                let rendered = render_string(value, *quote);
                self.write(&rendered);
            }
            ExprKind::Bool(b) => self.write(if *b { "True" } else { "False" }),
            ExprKind::NoneLit => self.write("None"),
            ExprKind::Tuple(elts) => {
                self.write("(");
                for (i, elt) in elts.iter().enumerate() {
                    if i > 0 {
                        self.write(", ");
                    }
                    self.render_expr(elt, P_TEST);
                }
                if elts.len() == 1 {
                    self.write(",");
                }
                self.write(")");
            }
            ExprKind::List(elts) => {
                self.write("[");
                for (i, elt) in elts.iter().enumerate() {
                    if i > 0 {
                        self.write(", ");
                    }
                    self.render_expr(elt, P_TEST);
                }
                self.write("]");
            }
            ExprKind::Set(elts) => {
                self.write("{");
                for (i, elt) in elts.iter().enumerate() {
                    if i > 0 {
                        self.write(", ");
                    }
                    self.render_expr(elt, P_TEST);
                }
                self.write("}");
            }
            ExprKind::Dict { keys, values } => {
                self.write("{");
                for (i, (k, v)) in keys.iter().zip(values.iter()).enumerate() {
                    if i > 0 {
                        self.write(", ");
                    }
                    match k {
                        Some(key) => {
                            self.render_expr(key, P_TEST);
                            self.write(": ");
                            self.render_expr(v, P_TEST);
                        }
                        None => {
                            self.write("**");
                            self.render_expr(v, P_TEST);
                        }
                    }
                }
                self.write("}");
            }
            ExprKind::BinOp { left, op, right } => {
                let level = prec;
                if *op == BinOp::Pow {
                    // Right-associative.
                    self.render_expr(left, level + 1);
                    self.write(" ** ");
                    self.render_expr(right, level);
                } else {
                    self.render_expr(left, level);
                    self.write(" ");
                    self.write(op.symbol());
                    self.write(" ");
                    self.render_expr(right, level + 1);
                }
            }
            ExprKind::UnaryOp { op, operand } => match op {
                UnaryOp::Not => {
                    self.write("not ");
                    self.render_expr(operand, P_NOT);
                }
                UnaryOp::USub => {
                    self.write("-");
                    self.render_expr(operand, P_FACTOR);
                }
                UnaryOp::UAdd => {
                    self.write("+");
                    self.render_expr(operand, P_FACTOR);
                }
                UnaryOp::Invert => {
                    self.write("~");
                    self.render_expr(operand, P_FACTOR);
                }
            },
            ExprKind::BoolOp { op, values } => {
                let (sym, level) = match op {
                    BoolOp::Or => (" or ", P_OR),
                    BoolOp::And => (" and ", P_AND),
                };
                for (i, v) in values.iter().enumerate() {
                    if i > 0 {
                        self.write(sym);
                    }
                    self.render_expr(v, level + 1);
                }
            }
            ExprKind::Compare {
                left,
                ops,
                comparators,
            } => {
                self.render_expr(left, P_CMP + 1);
                for (op, comp) in ops.iter().zip(comparators.iter()) {
                    self.write(" ");
                    self.write(op.symbol());
                    self.write(" ");
                    self.render_expr(comp, P_CMP + 1);
                }
            }
            ExprKind::Call {
                func,
                args,
                keywords,
            } => {
                self.render_expr(func, P_ATOM);
                self.write("(");
                let mut first = true;
                for a in args {
                    if !first {
                        self.write(", ");
                    }
                    first = false;
                    if let ExprKind::Starred(inner) = &a.kind {
                        self.write("*");
                        self.render_expr(inner, P_TEST);
                    } else {
                        self.render_expr(a, P_TEST);
                    }
                }
                for k in keywords {
                    if !first {
                        self.write(", ");
                    }
                    first = false;
                    match &k.arg {
                        Some(name) => {
                            self.write(name);
                            self.write("=");
                            self.render_expr(&k.value, P_TEST);
                        }
                        None => {
                            self.write("**");
                            self.render_expr(&k.value, P_TEST);
                        }
                    }
                }
                self.write(")");
            }
            ExprKind::Attribute { value, attr } => {
                // A number directly followed by '.' needs parens.
                if matches!(value.kind, ExprKind::Number(_)) {
                    self.write("(");
                    self.render_expr(value, P_TUPLE);
                    self.write(")");
                } else {
                    self.render_expr(value, P_ATOM);
                }
                self.write(".");
                self.write(attr);
            }
            ExprKind::Subscript { value, index } => {
                self.render_expr(value, P_ATOM);
                self.write("[");
                match &index.kind {
                    // Index tuples render without parentheses.
                    ExprKind::Tuple(elts) if !elts.is_empty() => {
                        for (i, elt) in elts.iter().enumerate() {
                            if i > 0 {
                                self.write(", ");
                            }
                            self.render_expr(elt, P_TEST);
                        }
                        if elts.len() == 1 {
                            self.write(",");
                        }
                    }
                    _ => self.render_expr(index, P_TUPLE),
                }
                self.write("]");
            }
            ExprKind::Slice { lower, upper, step } => {
                if let Some(l) = lower {
                    self.render_expr(l, P_TEST);
                }
                self.write(":");
                if let Some(u) = upper {
                    self.render_expr(u, P_TEST);
                }
                if let Some(s) = step {
                    self.write(":");
                    self.render_expr(s, P_TEST);
                }
            }
            ExprKind::Lambda { params, body } => {
                self.write("lambda ");
                if params.args.is_empty()
                    && params.vararg.is_none()
                    && params.kwonly.is_empty()
                    && params.kwarg.is_none()
                {
                    // Matches the reference unparser: `lambda : body`.
                    self.write(": ");
                } else {
                    self.render_params(params);
                    self.write(": ");
                }
                self.render_expr(body, P_TEST);
            }
            ExprKind::IfExp { test, body, orelse } => {
                self.render_expr(body, P_TEST + 1);
                self.write(" if ");
                self.render_expr(test, P_TEST + 1);
                self.write(" else ");
                self.render_expr(orelse, P_TEST);
            }
            ExprKind::NamedExpr { target, value } => {
                // Always parenthesized outside the if/while test slot.
                self.write("(");
                self.render_expr(target, P_ATOM);
                self.write(" := ");
                self.render_expr(value, P_TEST);
                self.write(")");
            }
            ExprKind::Starred(inner) => {
                self.write("*");
                self.render_expr(inner, P_TEST);
            }
            ExprKind::ListComp { elt, generators } => {
                self.write("[");
                self.render_expr(elt, P_TEST);
                self.render_comprehensions(generators);
                self.write("]");
            }
            ExprKind::SetComp { elt, generators } => {
                self.write("{");
                self.render_expr(elt, P_TEST);
                self.render_comprehensions(generators);
                self.write("}");
            }
            ExprKind::DictComp {
                key,
                value,
                generators,
            } => {
                self.write("{");
                self.render_expr(key, P_TEST);
                self.write(": ");
                self.render_expr(value, P_TEST);
                self.render_comprehensions(generators);
                self.write("}");
            }
            ExprKind::GeneratorExp { elt, generators } => {
                self.write("(");
                self.render_expr(elt, P_TEST);
                self.render_comprehensions(generators);
                self.write(")");
            }
        }
        if needs_parens {
            self.write(")");
        }
    }

    fn render_comprehensions(&mut self, generators: &[Comprehension]) {
        for gen in generators {
            self.write(" for ");
            // Tuple targets render their own parentheses.
            self.render_expr(&gen.target, P_TUPLE + 1);
            self.write(" in ");
            self.render_expr(&gen.iter, P_TEST + 1);
            for cond in &gen.ifs {
                self.write(" if ");
                self.render_expr(cond, P_TEST + 1);
            }
        }
    }
}

/// Encode a string literal body using the requested quote style.
pub fn render_string(value: &str, quote: QuoteStyle) -> String {
    let delim = quote.delimiter();
    let qc = quote.quote_char();
    let mut out = String::with_capacity(value.len() + 2 + delim.len() * 2);
    out.push_str(delim);
    let chars: Vec<char> = value.chars().collect();
    for (i, &ch) in chars.iter().enumerate() {
        match ch {
            '\\' => out.push_str("\\\\"),
            '\n' if !quote.is_triple() => out.push_str("\\n"),
            '\t' => out.push_str("\\t"),
            '\r' => out.push_str("\\r"),
            c if c == qc => {
                if quote.is_triple() {
                    // Escape only runs that would close the literal.
                    let at_end = i == chars.len() - 1;
                    let next_same = chars.get(i + 1) == Some(&qc);
                    let prev_escaped = out.ends_with('\\');
                    if at_end || (next_same && !prev_escaped) {
                        out.push('\\');
                        out.push(c);
                    } else {
                        out.push(c);
                    }
                } else {
                    out.push('\\');
                    out.push(c);
                }
            }
            c if (c as u32) < 0x20 => {
                out.push_str(&format!("\\x{:02x}", c as u32));
            }
            c => out.push(c),
        }
    }
    out.push_str(delim);
    out
}

/// Render a single expression in canonical style.
pub fn unparse_expr(e: &Expr) -> String {
    let mut r = Renderer::new(false);
    r.render_expr(e, P_TUPLE + 1);
    r.out
}
