//! Recursive-descent parser for the supported Python subset.
//!
//! Grammar coverage follows what CRUX/LCB-style snippets use: functions,
//! control flow, comprehensions, lambdas, decorators, type annotations and
//! standard imports. Unsupported constructs (classes, yield, async, match,
//! f-strings) fail with a positioned error rather than passing through.

use super::ast::*;
use super::lexer::{tokenize, Tok, Token};
use super::ParseError;

pub fn parse_module(source: &str) -> Result<Module, ParseError> {
    let tokens = tokenize(source)?;
    let mut p = Parser { tokens, pos: 0 };
    let body = p.parse_block_until_eof()?;
    Ok(Module { body })
}

/// Parse a single expression (no trailing input allowed).
pub fn parse_expression(source: &str) -> Result<Expr, ParseError> {
    let tokens = tokenize(source)?;
    let mut p = Parser { tokens, pos: 0 };
    let expr = p.parse_testlist(true)?;
    p.expect_newline()?;
    if !matches!(p.peek(), Tok::Eof) {
        return Err(p.error("unexpected trailing input after expression"));
    }
    Ok(expr)
}

struct Parser {
    tokens: Vec<Token>,
    pos: usize,
}

impl Parser {
    fn peek(&self) -> &Tok {
        &self.tokens[self.pos.min(self.tokens.len() - 1)].tok
    }

    fn peek_at(&self, off: usize) -> &Tok {
        &self.tokens[(self.pos + off).min(self.tokens.len() - 1)].tok
    }

    fn advance(&mut self) -> Tok {
        let t = self.tokens[self.pos.min(self.tokens.len() - 1)].tok.clone();
        if self.pos < self.tokens.len() - 1 {
            self.pos += 1;
        }
        t
    }

    fn error(&self, msg: impl Into<String>) -> ParseError {
        let t = &self.tokens[self.pos.min(self.tokens.len() - 1)];
        ParseError {
            line: t.line,
            col: t.col,
            message: msg.into(),
        }
    }

    fn eat_op(&mut self, op: &str) -> bool {
        if matches!(self.peek(), Tok::Op(o) if *o == op) {
            self.advance();
            true
        } else {
            false
        }
    }

    fn expect_op(&mut self, op: &str) -> Result<(), ParseError> {
        if self.eat_op(op) {
            Ok(())
        } else {
            Err(self.error(format!("expected '{}'", op)))
        }
    }

    fn eat_keyword(&mut self, kw: &str) -> bool {
        if matches!(self.peek(), Tok::Keyword(k) if *k == kw) {
            self.advance();
            true
        } else {
            false
        }
    }

    fn expect_keyword(&mut self, kw: &str) -> Result<(), ParseError> {
        if self.eat_keyword(kw) {
            Ok(())
        } else {
            Err(self.error(format!("expected '{}'", kw)))
        }
    }

    fn expect_name(&mut self) -> Result<String, ParseError> {
        match self.peek() {
            Tok::Name(n) => {
                let n = n.clone();
                self.advance();
                Ok(n)
            }
            _ => Err(self.error("expected identifier")),
        }
    }

    fn expect_newline(&mut self) -> Result<(), ParseError> {
        match self.peek() {
            Tok::Newline => {
                self.advance();
                Ok(())
            }
            Tok::Eof => Ok(()),
            _ => Err(self.error("invalid syntax")),
        }
    }

    fn parse_block_until_eof(&mut self) -> Result<Vec<Stmt>, ParseError> {
        let mut body = Vec::new();
        while !matches!(self.peek(), Tok::Eof) {
            body.extend(self.parse_statement()?);
        }
        Ok(body)
    }

    /// An indented suite following a ':' header.
    fn parse_suite(&mut self) -> Result<Vec<Stmt>, ParseError> {
        self.expect_op(":")?;
        if matches!(self.peek(), Tok::Newline) {
            self.advance();
            if !matches!(self.peek(), Tok::Indent) {
                return Err(self.error("expected an indented block"));
            }
            self.advance();
            let mut body = Vec::new();
            while !matches!(self.peek(), Tok::Dedent | Tok::Eof) {
                body.extend(self.parse_statement()?);
            }
            if matches!(self.peek(), Tok::Dedent) {
                self.advance();
            }
            Ok(body)
        } else {
            // Inline suite: simple statements on the header line.
            self.parse_simple_stmt_line()
        }
    }

    /// One logical line of semicolon-separated simple statements,
    /// or a single compound statement.
    fn parse_statement(&mut self) -> Result<Vec<Stmt>, ParseError> {
        match self.peek() {
            Tok::Keyword("def") => Ok(vec![self.parse_funcdef(Vec::new())?]),
            Tok::Op("@") => {
                let mut decorators = Vec::new();
                while self.eat_op("@") {
                    decorators.push(self.parse_test(true)?);
                    self.expect_newline()?;
                }
                self.parse_funcdef(decorators).map(|s| vec![s])
            }
            Tok::Keyword("for") => Ok(vec![self.parse_for()?]),
            Tok::Keyword("while") => Ok(vec![self.parse_while()?]),
            Tok::Keyword("if") => Ok(vec![self.parse_if()?]),
            Tok::Keyword("with") => Ok(vec![self.parse_with()?]),
            Tok::Keyword("try") => Ok(vec![self.parse_try()?]),
            Tok::Keyword(k @ ("class" | "yield" | "async" | "await")) => {
                Err(self.error(format!("unsupported construct '{}'", k)))
            }
            _ => self.parse_simple_stmt_line(),
        }
    }

    fn parse_simple_stmt_line(&mut self) -> Result<Vec<Stmt>, ParseError> {
        let mut stmts = vec![self.parse_simple_stmt()?];
        while self.eat_op(";") {
            if matches!(self.peek(), Tok::Newline | Tok::Eof) {
                break;
            }
            stmts.push(self.parse_simple_stmt()?);
        }
        self.expect_newline()?;
        Ok(stmts)
    }

    fn parse_simple_stmt(&mut self) -> Result<Stmt, ParseError> {
        let kind = match self.peek() {
            Tok::Keyword("return") => {
                self.advance();
                if matches!(self.peek(), Tok::Newline | Tok::Eof | Tok::Op(";")) {
                    StmtKind::Return(None)
                } else {
                    StmtKind::Return(Some(self.parse_testlist(true)?))
                }
            }
            Tok::Keyword("pass") => {
                self.advance();
                StmtKind::Pass
            }
            Tok::Keyword("break") => {
                self.advance();
                StmtKind::Break
            }
            Tok::Keyword("continue") => {
                self.advance();
                StmtKind::Continue
            }
            Tok::Keyword("raise") => {
                self.advance();
                if matches!(self.peek(), Tok::Newline | Tok::Eof | Tok::Op(";")) {
                    StmtKind::Raise { exc: None, cause: None }
                } else {
                    let exc = self.parse_test(true)?;
                    let cause = if self.eat_keyword("from") {
                        Some(self.parse_test(true)?)
                    } else {
                        None
                    };
                    StmtKind::Raise { exc: Some(exc), cause }
                }
            }
            Tok::Keyword("assert") => {
                self.advance();
                let test = self.parse_test(true)?;
                let msg = if self.eat_op(",") {
                    Some(self.parse_test(true)?)
                } else {
                    None
                };
                StmtKind::Assert { test, msg }
            }
            Tok::Keyword("import") => {
                self.advance();
                let mut names = Vec::new();
                loop {
                    names.push(self.parse_dotted_alias()?);
                    if !self.eat_op(",") {
                        break;
                    }
                }
                StmtKind::Import(names)
            }
            Tok::Keyword("from") => {
                self.advance();
                let mut level = 0u32;
                while self.eat_op(".") {
                    level += 1;
                }
                let module = if matches!(self.peek(), Tok::Keyword("import")) {
                    None
                } else {
                    Some(self.parse_dotted_name()?)
                };
                self.expect_keyword("import")?;
                let mut names = Vec::new();
                if self.eat_op("*") {
                    names.push(Alias { name: "*".to_string(), asname: None });
                } else {
                    let parenthesized = self.eat_op("(");
                    loop {
                        let name = self.expect_name()?;
                        let asname = if self.eat_keyword("as") {
                            Some(self.expect_name()?)
                        } else {
                            None
                        };
                        names.push(Alias { name, asname });
                        if !self.eat_op(",") {
                            break;
                        }
                        if parenthesized && matches!(self.peek(), Tok::Op(")")) {
                            break;
                        }
                    }
                    if parenthesized {
                        self.expect_op(")")?;
                    }
                }
                StmtKind::ImportFrom { module, names, level }
            }
            Tok::Keyword("global") => {
                self.advance();
                let mut names = vec![self.expect_name()?];
                while self.eat_op(",") {
                    names.push(self.expect_name()?);
                }
                StmtKind::Global(names)
            }
            Tok::Keyword("nonlocal") => {
                self.advance();
                let mut names = vec![self.expect_name()?];
                while self.eat_op(",") {
                    names.push(self.expect_name()?);
                }
                StmtKind::Nonlocal(names)
            }
            Tok::Keyword("del") => {
                self.advance();
                let mut targets = vec![self.parse_test(false)?];
                while self.eat_op(",") {
                    targets.push(self.parse_test(false)?);
                }
                StmtKind::Delete(targets)
            }
            _ => return self.parse_expr_or_assign(),
        };
        Ok(Stmt::new(kind))
    }

    fn parse_dotted_name(&mut self) -> Result<String, ParseError> {
        let mut name = self.expect_name()?;
        while matches!(self.peek(), Tok::Op(".")) && matches!(self.peek_at(1), Tok::Name(_)) {
            self.advance();
            name.push('.');
            name.push_str(&self.expect_name()?);
        }
        Ok(name)
    }

    fn parse_dotted_alias(&mut self) -> Result<Alias, ParseError> {
        let name = self.parse_dotted_name()?;
        let asname = if self.eat_keyword("as") {
            Some(self.expect_name()?)
        } else {
            None
        };
        Ok(Alias { name, asname })
    }

    fn parse_expr_or_assign(&mut self) -> Result<Stmt, ParseError> {
        let first = self.parse_testlist_star(true)?;
        // Annotated assignment: NAME ':' annotation ['=' value]
        if matches!(self.peek(), Tok::Op(":")) && !matches!(self.peek_at(1), Tok::Op("=")) {
            self.advance();
            let annotation = self.parse_test(true)?;
            let value = if self.eat_op("=") {
                Some(self.parse_testlist_star(true)?)
            } else {
                None
            };
            return Ok(Stmt::new(StmtKind::AnnAssign {
                target: first,
                annotation,
                value,
            }));
        }
        // Augmented assignment.
        if let Tok::Op(op) = self.peek() {
            let aug = match *op {
                "+=" => Some(BinOp::Add),
                "-=" => Some(BinOp::Sub),
                "*=" => Some(BinOp::Mult),
                "/=" => Some(BinOp::Div),
                "//=" => Some(BinOp::FloorDiv),
                "%=" => Some(BinOp::Mod),
                "**=" => Some(BinOp::Pow),
                "<<=" => Some(BinOp::LShift),
                ">>=" => Some(BinOp::RShift),
                "&=" => Some(BinOp::BitAnd),
                "|=" => Some(BinOp::BitOr),
                "^=" => Some(BinOp::BitXor),
                "@=" => Some(BinOp::MatMult),
                _ => None,
            };
            if let Some(op) = aug {
                self.advance();
                let value = self.parse_testlist(true)?;
                return Ok(Stmt::new(StmtKind::AugAssign {
                    target: first,
                    op,
                    value,
                }));
            }
        }
        // Plain assignment chain.
        if matches!(self.peek(), Tok::Op("=")) {
            let mut targets = vec![first];
            let mut value = None;
            while self.eat_op("=") {
                let next = self.parse_testlist_star(true)?;
                if matches!(self.peek(), Tok::Op("=")) {
                    targets.push(next);
                } else {
                    value = Some(next);
                }
            }
            return Ok(Stmt::new(StmtKind::Assign {
                targets,
                value: value.ok_or_else(|| self.error("expected assignment value"))?,
            }));
        }
        Ok(Stmt::new(StmtKind::Expr(first)))
    }

    fn parse_funcdef(&mut self, decorators: Vec<Expr>) -> Result<Stmt, ParseError> {
        self.expect_keyword("def")?;
        let name = self.expect_name()?;
        self.expect_op("(")?;
        let params = self.parse_params()?;
        self.expect_op(")")?;
        let returns = if self.eat_op("->") {
            Some(self.parse_test(true)?)
        } else {
            None
        };
        let body = self.parse_suite()?;
        Ok(Stmt::new(StmtKind::FunctionDef {
            name,
            params,
            returns,
            decorators,
            body,
        }))
    }

    fn parse_params(&mut self) -> Result<Params, ParseError> {
        let mut params = Params::empty();
        let mut after_star = false;
        loop {
            match self.peek() {
                Tok::Op(")") => break,
                Tok::Op("*") => {
                    if matches!(self.peek_at(1), Tok::Op("*")) {
                        return Err(self.error("invalid parameter syntax"));
                    }
                    self.advance();
                    if matches!(self.peek(), Tok::Name(_)) {
                        params.vararg = Some(self.parse_param()?);
                    } else {
                        params.kwonly_marker = true;
                    }
                    after_star = true;
                }
                Tok::Op("**") => {
                    self.advance();
                    params.kwarg = Some(self.parse_param()?);
                }
                Tok::Name(_) => {
                    let p = self.parse_param()?;
                    if after_star {
                        params.kwonly.push(p);
                    } else {
                        params.args.push(p);
                    }
                }
                _ => return Err(self.error("invalid parameter syntax")),
            }
            if !self.eat_op(",") {
                break;
            }
        }
        Ok(params)
    }

    fn parse_param(&mut self) -> Result<Param, ParseError> {
        let name = self.expect_name()?;
        let annotation = if self.eat_op(":") {
            Some(Box::new(self.parse_test(true)?))
        } else {
            None
        };
        let default = if self.eat_op("=") {
            Some(Box::new(self.parse_test(true)?))
        } else {
            None
        };
        Ok(Param {
            name,
            annotation,
            default,
        })
    }

    fn parse_for(&mut self) -> Result<Stmt, ParseError> {
        self.expect_keyword("for")?;
        let target = self.parse_target_list()?;
        self.expect_keyword("in")?;
        let iter = self.parse_testlist(true)?;
        let body = self.parse_suite()?;
        let orelse = if self.eat_keyword("else") {
            self.parse_suite_after_keyword()?
        } else {
            Vec::new()
        };
        Ok(Stmt::new(StmtKind::For {
            target,
            iter,
            body,
            orelse,
        }))
    }

    fn parse_suite_after_keyword(&mut self) -> Result<Vec<Stmt>, ParseError> {
        self.parse_suite()
    }

    fn parse_while(&mut self) -> Result<Stmt, ParseError> {
        self.expect_keyword("while")?;
        let test = self.parse_namedexpr_test()?;
        let body = self.parse_suite()?;
        let orelse = if self.eat_keyword("else") {
            self.parse_suite_after_keyword()?
        } else {
            Vec::new()
        };
        Ok(Stmt::new(StmtKind::While { test, body, orelse }))
    }

    fn parse_if(&mut self) -> Result<Stmt, ParseError> {
        self.advance(); // 'if' or 'elif'
        let test = self.parse_namedexpr_test()?;
        let body = self.parse_suite()?;
        let orelse = if matches!(self.peek(), Tok::Keyword("elif")) {
            vec![self.parse_if()?]
        } else if self.eat_keyword("else") {
            self.parse_suite_after_keyword()?
        } else {
            Vec::new()
        };
        Ok(Stmt::new(StmtKind::If { test, body, orelse }))
    }

    fn parse_with(&mut self) -> Result<Stmt, ParseError> {
        self.expect_keyword("with")?;
        let mut items = Vec::new();
        loop {
            let context = self.parse_test(true)?;
            let vars = if self.eat_keyword("as") {
                Some(self.parse_target_atom()?)
            } else {
                None
            };
            items.push(WithItem { context, vars });
            if !self.eat_op(",") {
                break;
            }
        }
        let body = self.parse_suite()?;
        Ok(Stmt::new(StmtKind::With { items, body }))
    }

    fn parse_try(&mut self) -> Result<Stmt, ParseError> {
        self.expect_keyword("try")?;
        let body = self.parse_suite()?;
        let mut handlers = Vec::new();
        while matches!(self.peek(), Tok::Keyword("except")) {
            self.advance();
            let (typ, name) = if matches!(self.peek(), Tok::Op(":")) {
                (None, None)
            } else {
                let typ = self.parse_test(true)?;
                let name = if self.eat_keyword("as") {
                    Some(self.expect_name()?)
                } else {
                    None
                };
                (Some(typ), name)
            };
            let hbody = self.parse_suite()?;
            handlers.push(ExceptHandler {
                typ,
                name,
                body: hbody,
            });
        }
        let orelse = if self.eat_keyword("else") {
            self.parse_suite_after_keyword()?
        } else {
            Vec::new()
        };
        let finalbody = if self.eat_keyword("finally") {
            self.parse_suite_after_keyword()?
        } else {
            Vec::new()
        };
        if handlers.is_empty() && finalbody.is_empty() {
            return Err(self.error("try statement must have except or finally"));
        }
        Ok(Stmt::new(StmtKind::Try {
            body,
            handlers,
            orelse,
            finalbody,
        }))
    }

    /// Target of a for-loop or with-as: name/tuple/attribute/subscript/starred.
    fn parse_target_list(&mut self) -> Result<Expr, ParseError> {
        let first = self.parse_target_atom()?;
        if matches!(self.peek(), Tok::Op(",")) {
            let mut elts = vec![first];
            while self.eat_op(",") {
                if matches!(self.peek(), Tok::Keyword("in")) {
                    break;
                }
                elts.push(self.parse_target_atom()?);
            }
            return Ok(Expr::new(ExprKind::Tuple(elts)));
        }
        Ok(first)
    }

    fn parse_target_atom(&mut self) -> Result<Expr, ParseError> {
        if self.eat_op("*") {
            let inner = self.parse_target_atom()?;
            return Ok(Expr::new(ExprKind::Starred(Box::new(inner))));
        }
        if self.eat_op("(") {
            let t = self.parse_target_list_inner_parens()?;
            self.expect_op(")")?;
            return Ok(t);
        }
        if self.eat_op("[") {
            let mut elts = Vec::new();
            while !matches!(self.peek(), Tok::Op("]")) {
                elts.push(self.parse_target_atom()?);
                if !self.eat_op(",") {
                    break;
                }
            }
            self.expect_op("]")?;
            return Ok(Expr::new(ExprKind::List(elts)));
        }
        // name with trailers (attribute/subscript targets)
        let mut e = Expr::name(&self.expect_name()?);
        loop {
            if self.eat_op(".") {
                let attr = self.expect_name()?;
                e = Expr::new(ExprKind::Attribute {
                    value: Box::new(e),
                    attr,
                });
            } else if self.eat_op("[") {
                let index = self.parse_subscript_index()?;
                self.expect_op("]")?;
                e = Expr::new(ExprKind::Subscript {
                    value: Box::new(e),
                    index: Box::new(index),
                });
            } else {
                break;
            }
        }
        Ok(e)
    }

    fn parse_target_list_inner_parens(&mut self) -> Result<Expr, ParseError> {
        let first = self.parse_target_atom()?;
        if matches!(self.peek(), Tok::Op(",")) {
            let mut elts = vec![first];
            while self.eat_op(",") {
                if matches!(self.peek(), Tok::Op(")")) {
                    break;
                }
                elts.push(self.parse_target_atom()?);
            }
            return Ok(Expr::new(ExprKind::Tuple(elts)));
        }
        Ok(first)
    }

    /// testlist: test (',' test)* — produces a Tuple for multiple items.
    fn parse_testlist(&mut self, allow_walrus: bool) -> Result<Expr, ParseError> {
        let first = self.parse_test(allow_walrus)?;
        if matches!(self.peek(), Tok::Op(",")) {
            let mut elts = vec![first];
            while self.eat_op(",") {
                if self.at_expression_end() {
                    break;
                }
                elts.push(self.parse_test(allow_walrus)?);
            }
            return Ok(Expr::new(ExprKind::Tuple(elts)));
        }
        Ok(first)
    }

    /// testlist with starred items allowed (assignment contexts).
    fn parse_testlist_star(&mut self, allow_walrus: bool) -> Result<Expr, ParseError> {
        let first = self.parse_test_or_starred(allow_walrus)?;
        if matches!(self.peek(), Tok::Op(",")) {
            let mut elts = vec![first];
            while self.eat_op(",") {
                if self.at_expression_end() {
                    break;
                }
                elts.push(self.parse_test_or_starred(allow_walrus)?);
            }
            return Ok(Expr::new(ExprKind::Tuple(elts)));
        }
        Ok(first)
    }

    fn parse_test_or_starred(&mut self, allow_walrus: bool) -> Result<Expr, ParseError> {
        if self.eat_op("*") {
            let inner = self.parse_test(allow_walrus)?;
            return Ok(Expr::new(ExprKind::Starred(Box::new(inner))));
        }
        self.parse_test(allow_walrus)
    }

    fn at_expression_end(&self) -> bool {
        matches!(
            self.peek(),
            Tok::Newline
                | Tok::Eof
                | Tok::Op(";")
                | Tok::Op("=")
                | Tok::Op(")")
                | Tok::Op("]")
                | Tok::Op("}")
                | Tok::Op(":")
        )
    }

    /// namedexpr_test: test [':=' test]
    fn parse_namedexpr_test(&mut self) -> Result<Expr, ParseError> {
        let first = self.parse_test(true)?;
        Ok(first)
    }

    /// test: lambda | or_test ['if' or_test 'else' test]
    fn parse_test(&mut self, allow_walrus: bool) -> Result<Expr, ParseError> {
        if matches!(self.peek(), Tok::Keyword("lambda")) {
            return self.parse_lambda();
        }
        let expr = self.parse_or_test()?;
        // Walrus operator.
        if allow_walrus && matches!(self.peek(), Tok::Op(":=")) {
            self.advance();
            if !matches!(expr.kind, ExprKind::Name(_)) {
                return Err(self.error("walrus target must be a name"));
            }
            let value = self.parse_test(true)?;
            return Ok(Expr::new(ExprKind::NamedExpr {
                target: Box::new(expr),
                value: Box::new(value),
            }));
        }
        if self.eat_keyword("if") {
            let test = self.parse_or_test()?;
            self.expect_keyword("else")?;
            let orelse = self.parse_test(allow_walrus)?;
            return Ok(Expr::new(ExprKind::IfExp {
                test: Box::new(test),
                body: Box::new(expr),
                orelse: Box::new(orelse),
            }));
        }
        Ok(expr)
    }

    fn parse_lambda(&mut self) -> Result<Expr, ParseError> {
        self.expect_keyword("lambda")?;
        let mut params = Params::empty();
        if !matches!(self.peek(), Tok::Op(":")) {
            loop {
                match self.peek() {
                    Tok::Op("*") => {
                        self.advance();
                        if matches!(self.peek(), Tok::Name(_)) {
                            params.vararg = Some(self.parse_lambda_param()?);
                        } else {
                            params.kwonly_marker = true;
                        }
                    }
                    Tok::Op("**") => {
                        self.advance();
                        params.kwarg = Some(self.parse_lambda_param()?);
                    }
                    Tok::Name(_) => {
                        let p = self.parse_lambda_param()?;
                        if params.vararg.is_some() || params.kwonly_marker {
                            params.kwonly.push(p);
                        } else {
                            params.args.push(p);
                        }
                    }
                    _ => return Err(self.error("invalid lambda parameters")),
                }
                if !self.eat_op(",") {
                    break;
                }
            }
        }
        self.expect_op(":")?;
        let body = self.parse_test(true)?;
        Ok(Expr::new(ExprKind::Lambda {
            params,
            body: Box::new(body),
        }))
    }

    fn parse_lambda_param(&mut self) -> Result<Param, ParseError> {
        let name = self.expect_name()?;
        let default = if self.eat_op("=") {
            Some(Box::new(self.parse_test(true)?))
        } else {
            None
        };
        Ok(Param {
            name,
            annotation: None,
            default,
        })
    }

    fn parse_or_test(&mut self) -> Result<Expr, ParseError> {
        let first = self.parse_and_test()?;
        if matches!(self.peek(), Tok::Keyword("or")) {
            let mut values = vec![first];
            while self.eat_keyword("or") {
                values.push(self.parse_and_test()?);
            }
            return Ok(Expr::new(ExprKind::BoolOp {
                op: BoolOp::Or,
                values,
            }));
        }
        Ok(first)
    }

    fn parse_and_test(&mut self) -> Result<Expr, ParseError> {
        let first = self.parse_not_test()?;
        if matches!(self.peek(), Tok::Keyword("and")) {
            let mut values = vec![first];
            while self.eat_keyword("and") {
                values.push(self.parse_not_test()?);
            }
            return Ok(Expr::new(ExprKind::BoolOp {
                op: BoolOp::And,
                values,
            }));
        }
        Ok(first)
    }

    fn parse_not_test(&mut self) -> Result<Expr, ParseError> {
        if self.eat_keyword("not") {
            let operand = self.parse_not_test()?;
            return Ok(Expr::new(ExprKind::UnaryOp {
                op: UnaryOp::Not,
                operand: Box::new(operand),
            }));
        }
        self.parse_comparison()
    }

    fn parse_comparison(&mut self) -> Result<Expr, ParseError> {
        let left = self.parse_bitor()?;
        let mut ops = Vec::new();
        let mut comparators = Vec::new();
        loop {
            let op = match self.peek() {
                Tok::Op("==") => CmpOp::Eq,
                Tok::Op("!=") => CmpOp::NotEq,
                Tok::Op("<") => CmpOp::Lt,
                Tok::Op("<=") => CmpOp::LtE,
                Tok::Op(">") => CmpOp::Gt,
                Tok::Op(">=") => CmpOp::GtE,
                Tok::Keyword("in") => CmpOp::In,
                Tok::Keyword("is") => {
                    self.advance();
                    if self.eat_keyword("not") {
                        ops.push(CmpOp::IsNot);
                    } else {
                        ops.push(CmpOp::Is);
                    }
                    comparators.push(self.parse_bitor()?);
                    continue;
                }
                Tok::Keyword("not") if matches!(self.peek_at(1), Tok::Keyword("in")) => {
                    self.advance();
                    self.advance();
                    ops.push(CmpOp::NotIn);
                    comparators.push(self.parse_bitor()?);
                    continue;
                }
                _ => break,
            };
            self.advance();
            ops.push(op);
            comparators.push(self.parse_bitor()?);
        }
        if ops.is_empty() {
            Ok(left)
        } else {
            Ok(Expr::new(ExprKind::Compare {
                left: Box::new(left),
                ops,
                comparators,
            }))
        }
    }

    fn parse_bitor(&mut self) -> Result<Expr, ParseError> {
        let mut left = self.parse_bitxor()?;
        while matches!(self.peek(), Tok::Op("|")) {
            self.advance();
            let right = self.parse_bitxor()?;
            left = bin(left, BinOp::BitOr, right);
        }
        Ok(left)
    }

    fn parse_bitxor(&mut self) -> Result<Expr, ParseError> {
        let mut left = self.parse_bitand()?;
        while matches!(self.peek(), Tok::Op("^")) {
            self.advance();
            let right = self.parse_bitand()?;
            left = bin(left, BinOp::BitXor, right);
        }
        Ok(left)
    }

    fn parse_bitand(&mut self) -> Result<Expr, ParseError> {
        let mut left = self.parse_shift()?;
        while matches!(self.peek(), Tok::Op("&")) {
            self.advance();
            let right = self.parse_shift()?;
            left = bin(left, BinOp::BitAnd, right);
        }
        Ok(left)
    }

    fn parse_shift(&mut self) -> Result<Expr, ParseError> {
        let mut left = self.parse_arith()?;
        loop {
            let op = match self.peek() {
                Tok::Op("<<") => BinOp::LShift,
                Tok::Op(">>") => BinOp::RShift,
                _ => break,
            };
            self.advance();
            let right = self.parse_arith()?;
            left = bin(left, op, right);
        }
        Ok(left)
    }

    fn parse_arith(&mut self) -> Result<Expr, ParseError> {
        let mut left = self.parse_term()?;
        loop {
            let op = match self.peek() {
                Tok::Op("+") => BinOp::Add,
                Tok::Op("-") => BinOp::Sub,
                _ => break,
            };
            self.advance();
            let right = self.parse_term()?;
            left = bin(left, op, right);
        }
        Ok(left)
    }

    fn parse_term(&mut self) -> Result<Expr, ParseError> {
        let mut left = self.parse_factor()?;
        loop {
            let op = match self.peek() {
                Tok::Op("*") => BinOp::Mult,
                Tok::Op("/") => BinOp::Div,
                Tok::Op("//") => BinOp::FloorDiv,
                Tok::Op("%") => BinOp::Mod,
                Tok::Op("@") => BinOp::MatMult,
                _ => break,
            };
            self.advance();
            let right = self.parse_factor()?;
            left = bin(left, op, right);
        }
        Ok(left)
    }

    fn parse_factor(&mut self) -> Result<Expr, ParseError> {
        let op = match self.peek() {
            Tok::Op("-") => Some(UnaryOp::USub),
            Tok::Op("+") => Some(UnaryOp::UAdd),
            Tok::Op("~") => Some(UnaryOp::Invert),
            _ => None,
        };
        if let Some(op) = op {
            self.advance();
            let operand = self.parse_factor()?;
            return Ok(Expr::new(ExprKind::UnaryOp {
                op,
                operand: Box::new(operand),
            }));
        }
        self.parse_power()
    }

    fn parse_power(&mut self) -> Result<Expr, ParseError> {
        let base = self.parse_atom_expr()?;
        if self.eat_op("**") {
            let exp = self.parse_factor()?;
            return Ok(bin(base, BinOp::Pow, exp));
        }
        Ok(base)
    }

    fn parse_atom_expr(&mut self) -> Result<Expr, ParseError> {
        let mut e = self.parse_atom()?;
        loop {
            if self.eat_op("(") {
                let (args, keywords) = self.parse_call_args()?;
                self.expect_op(")")?;
                e = Expr::new(ExprKind::Call {
                    func: Box::new(e),
                    args,
                    keywords,
                });
            } else if self.eat_op("[") {
                let index = self.parse_subscript_index()?;
                self.expect_op("]")?;
                e = Expr::new(ExprKind::Subscript {
                    value: Box::new(e),
                    index: Box::new(index),
                });
            } else if matches!(self.peek(), Tok::Op(".")) && matches!(self.peek_at(1), Tok::Name(_)) {
                self.advance();
                let attr = self.expect_name()?;
                e = Expr::new(ExprKind::Attribute {
                    value: Box::new(e),
                    attr,
                });
            } else {
                break;
            }
        }
        Ok(e)
    }

    fn parse_call_args(&mut self) -> Result<(Vec<Expr>, Vec<Keyword>), ParseError> {
        let mut args = Vec::new();
        let mut keywords = Vec::new();
        while !matches!(self.peek(), Tok::Op(")")) {
            if self.eat_op("**") {
                let value = self.parse_test(true)?;
                keywords.push(Keyword { arg: None, value });
            } else if self.eat_op("*") {
                let value = self.parse_test(true)?;
                args.push(Expr::new(ExprKind::Starred(Box::new(value))));
            } else if matches!(self.peek(), Tok::Name(_)) && matches!(self.peek_at(1), Tok::Op("="))
            {
                let name = self.expect_name()?;
                self.expect_op("=")?;
                let value = self.parse_test(true)?;
                keywords.push(Keyword {
                    arg: Some(name),
                    value,
                });
            } else {
                let value = self.parse_test(true)?;
                // Generator expression as sole unparenthesized argument.
                if matches!(self.peek(), Tok::Keyword("for")) && args.is_empty() && keywords.is_empty() {
                    let generators = self.parse_comprehension_clauses()?;
                    args.push(Expr::new(ExprKind::GeneratorExp {
                        elt: Box::new(value),
                        generators,
                    }));
                    break;
                }
                args.push(value);
            }
            if !self.eat_op(",") {
                break;
            }
        }
        Ok((args, keywords))
    }

    fn parse_subscript_index(&mut self) -> Result<Expr, ParseError> {
        let first = self.parse_slice_item()?;
        if matches!(self.peek(), Tok::Op(",")) {
            let mut elts = vec![first];
            while self.eat_op(",") {
                if matches!(self.peek(), Tok::Op("]")) {
                    break;
                }
                elts.push(self.parse_slice_item()?);
            }
            return Ok(Expr::new(ExprKind::Tuple(elts)));
        }
        Ok(first)
    }

    fn parse_slice_item(&mut self) -> Result<Expr, ParseError> {
        let lower = if matches!(self.peek(), Tok::Op(":")) {
            None
        } else {
            Some(Box::new(self.parse_test(true)?))
        };
        if !matches!(self.peek(), Tok::Op(":")) {
            return lower
                .map(|b| *b)
                .ok_or_else(|| self.error("expected subscript expression"));
        }
        self.advance();
        let upper = if matches!(self.peek(), Tok::Op(":") | Tok::Op("]") | Tok::Op(",")) {
            None
        } else {
            Some(Box::new(self.parse_test(true)?))
        };
        let step = if self.eat_op(":") {
            if matches!(self.peek(), Tok::Op("]") | Tok::Op(",")) {
                None
            } else {
                Some(Box::new(self.parse_test(true)?))
            }
        } else {
            None
        };
        Ok(Expr::new(ExprKind::Slice { lower, upper, step }))
    }

    fn parse_comprehension_clauses(&mut self) -> Result<Vec<Comprehension>, ParseError> {
        let mut generators = Vec::new();
        while matches!(self.peek(), Tok::Keyword("for")) {
            self.advance();
            let target = self.parse_target_list()?;
            self.expect_keyword("in")?;
            let iter = self.parse_or_test()?;
            let mut ifs = Vec::new();
            while matches!(self.peek(), Tok::Keyword("if")) {
                self.advance();
                ifs.push(self.parse_or_test_no_ternary_guard()?);
            }
            generators.push(Comprehension { target, iter, ifs });
        }
        Ok(generators)
    }

    // Comprehension condition: or_test, optionally a ternary.
    fn parse_or_test_no_ternary_guard(&mut self) -> Result<Expr, ParseError> {
        let expr = self.parse_or_test()?;
        if self.eat_keyword("if") {
            let test = self.parse_or_test()?;
            self.expect_keyword("else")?;
            let orelse = self.parse_test(true)?;
            return Ok(Expr::new(ExprKind::IfExp {
                test: Box::new(test),
                body: Box::new(expr),
                orelse: Box::new(orelse),
            }));
        }
        Ok(expr)
    }

    fn parse_atom(&mut self) -> Result<Expr, ParseError> {
        match self.peek().clone() {
            Tok::Name(n) => {
                self.advance();
                Ok(Expr::name(&n))
            }
            Tok::Number(n) => {
                self.advance();
                Ok(Expr::number(&n))
            }
            Tok::Str { value, quote } => {
                self.advance();
                let mut value = value;
                let mut quote = quote;
                // Implicit adjacent-string concatenation keeps the first quote style.
                while let Tok::Str { value: v2, .. } = self.peek() {
                    let v2 = v2.clone();
                    self.advance();
                    value.push_str(&v2);
                    if value.contains(quote.quote_char()) && !quote.is_triple() {
                        quote = match quote.quote_char() {
                            '\'' if !value.contains('"') => QuoteStyle::Double,
                            _ => quote,
                        };
                    }
                }
                let triple = quote.is_triple();
                Ok(Expr::new(ExprKind::Str { value, quote, triple }))
            }
            Tok::Keyword("True") => {
                self.advance();
                Ok(Expr::new(ExprKind::Bool(true)))
            }
            Tok::Keyword("False") => {
                self.advance();
                Ok(Expr::new(ExprKind::Bool(false)))
            }
            Tok::Keyword("None") => {
                self.advance();
                Ok(Expr::new(ExprKind::NoneLit))
            }
            Tok::Keyword("lambda") => self.parse_lambda(),
            Tok::Op("(") => {
                self.advance();
                if self.eat_op(")") {
                    return Ok(Expr::new(ExprKind::Tuple(Vec::new())));
                }
                let first = self.parse_test_or_starred(true)?;
                if matches!(self.peek(), Tok::Keyword("for")) {
                    let generators = self.parse_comprehension_clauses()?;
                    self.expect_op(")")?;
                    return Ok(Expr::new(ExprKind::GeneratorExp {
                        elt: Box::new(first),
                        generators,
                    }));
                }
                if matches!(self.peek(), Tok::Op(",")) {
                    let mut elts = vec![first];
                    while self.eat_op(",") {
                        if matches!(self.peek(), Tok::Op(")")) {
                            break;
                        }
                        elts.push(self.parse_test_or_starred(true)?);
                    }
                    self.expect_op(")")?;
                    return Ok(Expr::new(ExprKind::Tuple(elts)));
                }
                self.expect_op(")")?;
                Ok(first)
            }
            Tok::Op("[") => {
                self.advance();
                if self.eat_op("]") {
                    return Ok(Expr::new(ExprKind::List(Vec::new())));
                }
                let first = self.parse_test_or_starred(true)?;
                if matches!(self.peek(), Tok::Keyword("for")) {
                    let generators = self.parse_comprehension_clauses()?;
                    self.expect_op("]")?;
                    return Ok(Expr::new(ExprKind::ListComp {
                        elt: Box::new(first),
                        generators,
                    }));
                }
                let mut elts = vec![first];
                while self.eat_op(",") {
                    if matches!(self.peek(), Tok::Op("]")) {
                        break;
                    }
                    elts.push(self.parse_test_or_starred(true)?);
                }
                self.expect_op("]")?;
                Ok(Expr::new(ExprKind::List(elts)))
            }
            Tok::Op("{") => {
                self.advance();
                if self.eat_op("}") {
                    return Ok(Expr::new(ExprKind::Dict {
                        keys: Vec::new(),
                        values: Vec::new(),
                    }));
                }
                if self.eat_op("**") {
                    let value = self.parse_test(true)?;
                    let mut keys = vec![None];
                    let mut values = vec![value];
                    while self.eat_op(",") {
                        if matches!(self.peek(), Tok::Op("}")) {
                            break;
                        }
                        self.parse_dict_entry(&mut keys, &mut values)?;
                    }
                    self.expect_op("}")?;
                    return Ok(Expr::new(ExprKind::Dict { keys, values }));
                }
                let first = self.parse_test(true)?;
                if self.eat_op(":") {
                    let value = self.parse_test(true)?;
                    if matches!(self.peek(), Tok::Keyword("for")) {
                        let generators = self.parse_comprehension_clauses()?;
                        self.expect_op("}")?;
                        return Ok(Expr::new(ExprKind::DictComp {
                            key: Box::new(first),
                            value: Box::new(value),
                            generators,
                        }));
                    }
                    let mut keys = vec![Some(first)];
                    let mut values = vec![value];
                    while self.eat_op(",") {
                        if matches!(self.peek(), Tok::Op("}")) {
                            break;
                        }
                        self.parse_dict_entry(&mut keys, &mut values)?;
                    }
                    self.expect_op("}")?;
                    return Ok(Expr::new(ExprKind::Dict { keys, values }));
                }
                if matches!(self.peek(), Tok::Keyword("for")) {
                    let generators = self.parse_comprehension_clauses()?;
                    self.expect_op("}")?;
                    return Ok(Expr::new(ExprKind::SetComp {
                        elt: Box::new(first),
                        generators,
                    }));
                }
                let mut elts = vec![first];
                while self.eat_op(",") {
                    if matches!(self.peek(), Tok::Op("}")) {
                        break;
                    }
                    elts.push(self.parse_test(true)?);
                }
                self.expect_op("}")?;
                Ok(Expr::new(ExprKind::Set(elts)))
            }
            Tok::Keyword(k @ ("yield" | "await" | "async" | "class")) => {
                Err(self.error(format!("unsupported construct '{}'", k)))
            }
            _ => Err(self.error("invalid syntax")),
        }
    }

    fn parse_dict_entry(
        &mut self,
        keys: &mut Vec<Option<Expr>>,
        values: &mut Vec<Expr>,
    ) -> Result<(), ParseError> {
        if self.eat_op("**") {
            let value = self.parse_test(true)?;
            keys.push(None);
            values.push(value);
            return Ok(());
        }
        let key = self.parse_test(true)?;
        self.expect_op(":")?;
        let value = self.parse_test(true)?;
        keys.push(Some(key));
        values.push(value);
        Ok(())
    }
}

fn bin(left: Expr, op: BinOp, right: Expr) -> Expr {
    Expr::new(ExprKind::BinOp {
        left: Box::new(left),
        op,
        right: Box::new(right),
    })
}
