//! Line-structure-aware tokenizer for the supported Python subset.
//!
//! Produces a flat token stream with explicit `Indent`/`Dedent`/`Newline`
//! tokens. Comments and blank lines are skipped; implicit line joining
//! inside brackets and explicit backslash continuations are handled here.

use super::ast::QuoteStyle;
use super::ParseError;

#[derive(Debug, Clone, PartialEq)]
pub enum Tok {
    Name(String),
    Keyword(&'static str),
    Number(String),
    Str {
        value: String,
        quote: QuoteStyle,
    },
    Op(&'static str),
    Newline,
    Indent,
    Dedent,
    Eof,
}

#[derive(Debug, Clone)]
pub struct Token {
    pub tok: Tok,
    pub line: u32,
    pub col: u32,
}

// "match" is a soft keyword and stays usable as an identifier.
const KEYWORDS: &[&str] = &[
    "def", "return", "for", "while", "if", "elif", "else", "with", "as", "try", "except",
    "finally", "raise", "assert", "import", "from", "global", "nonlocal", "pass", "break",
    "continue", "del", "lambda", "and", "or", "not", "in", "is", "True", "False", "None",
    "class", "yield", "async", "await",
];

// Longest-match first.
const OPERATORS: &[&str] = &[
    "**=", "//=", ">>=", "<<=", "...", "->", ":=", "**", "//", ">>", "<<", "<=", ">=", "==",
    "!=", "+=", "-=", "*=", "/=", "%=", "@=", "&=", "|=", "^=", "+", "-", "*", "/", "%", "@",
    "&", "|", "^", "~", "<", ">", "(", ")", "[", "]", "{", "}", ",", ":", ".", ";", "=",
];

pub struct Lexer<'a> {
    src: &'a [u8],
    pos: usize,
    line: u32,
    col: u32,
    paren_depth: usize,
    indents: Vec<u32>,
    tokens: Vec<Token>,
    at_line_start: bool,
}

pub fn tokenize(source: &str) -> Result<Vec<Token>, ParseError> {
    let mut lx = Lexer {
        src: source.as_bytes(),
        pos: 0,
        line: 1,
        col: 1,
        paren_depth: 0,
        indents: vec![0],
        tokens: Vec::new(),
        at_line_start: true,
    };
    lx.run()?;
    Ok(lx.tokens)
}

impl<'a> Lexer<'a> {
    fn err(&self, msg: impl Into<String>) -> ParseError {
        ParseError {
            line: self.line,
            col: self.col,
            message: msg.into(),
        }
    }

    fn peek(&self) -> Option<u8> {
        self.src.get(self.pos).copied()
    }

    fn peek_at(&self, off: usize) -> Option<u8> {
        self.src.get(self.pos + off).copied()
    }

    fn bump(&mut self) -> Option<u8> {
        let c = self.peek()?;
        self.pos += 1;
        if c == b'\n' {
            self.line += 1;
            self.col = 1;
        } else {
            self.col += 1;
        }
        Some(c)
    }

    fn push(&mut self, tok: Tok, line: u32, col: u32) {
        self.tokens.push(Token { tok, line, col });
    }

    fn run(&mut self) -> Result<(), ParseError> {
        loop {
            if self.at_line_start && self.paren_depth == 0 {
                if !self.handle_indentation()? {
                    break;
                }
                self.at_line_start = false;
            }
            let (line, col) = (self.line, self.col);
            let c = match self.peek() {
                Some(c) => c,
                None => break,
            };
            match c {
                b'\n' => {
                    self.bump();
                    if self.paren_depth == 0 {
                        self.emit_newline(line, col);
                        self.at_line_start = true;
                    }
                }
                b'\r' => {
                    self.bump();
                }
                b' ' | b'\t' => {
                    self.bump();
                }
                b'#' => {
                    while let Some(c) = self.peek() {
                        if c == b'\n' {
                            break;
                        }
                        self.bump();
                    }
                }
                b'\\' => {
                    if self.peek_at(1) == Some(b'\n') {
                        self.bump();
                        self.bump();
                    } else if self.peek_at(1) == Some(b'\r') && self.peek_at(2) == Some(b'\n') {
                        self.bump();
                        self.bump();
                        self.bump();
                    } else {
                        return Err(self.err("unexpected character '\\'"));
                    }
                }
                b'\'' | b'"' => self.lex_string(line, col, None)?,
                b'0'..=b'9' => self.lex_number(line, col)?,
                b'.' => {
                    if matches!(self.peek_at(1), Some(b'0'..=b'9')) {
                        self.lex_number(line, col)?;
                    } else {
                        self.lex_operator(line, col)?;
                    }
                }
                c if c.is_ascii_alphabetic() || c == b'_' => self.lex_name(line, col)?,
                c if c.is_ascii() => self.lex_operator(line, col)?,
                _ => return Err(self.err("non-ASCII character outside string literal")),
            }
        }
        if !self.tokens.is_empty() && !matches!(self.tokens.last().map(|t| &t.tok), Some(Tok::Newline)) {
            let (l, c) = (self.line, self.col);
            self.emit_newline(l, c);
        }
        while self.indents.len() > 1 {
            self.indents.pop();
            let (l, c) = (self.line, self.col);
            self.push(Tok::Dedent, l, c);
        }
        let (l, c) = (self.line, self.col);
        self.push(Tok::Eof, l, c);
        Ok(())
    }

    fn emit_newline(&mut self, line: u32, col: u32) {
        if matches!(
            self.tokens.last().map(|t| &t.tok),
            None | Some(Tok::Newline) | Some(Tok::Indent) | Some(Tok::Dedent)
        ) {
            return; // suppress blank-line newlines
        }
        self.push(Tok::Newline, line, col);
    }

    /// Measure leading whitespace and emit Indent/Dedent tokens.
    /// Returns false at end of input.
    fn handle_indentation(&mut self) -> Result<bool, ParseError> {
        loop {
            let mut width: u32 = 0;
            let start = self.pos;
            while let Some(c) = self.peek() {
                match c {
                    b' ' => {
                        width += 1;
                        self.bump();
                    }
                    b'\t' => {
                        width = (width / 8 + 1) * 8;
                        self.bump();
                    }
                    _ => break,
                }
            }
            match self.peek() {
                None => return Ok(false),
                // Blank or comment-only line: consume and restart.
                Some(b'\n') => {
                    self.bump();
                    continue;
                }
                Some(b'\r') => {
                    self.bump();
                    continue;
                }
                Some(b'#') => {
                    while let Some(c) = self.peek() {
                        if c == b'\n' {
                            break;
                        }
                        self.bump();
                    }
                    continue;
                }
                Some(_) => {
                    let _ = start;
                    let current = *self.indents.last().unwrap();
                    if width > current {
                        self.indents.push(width);
                        let (l, c) = (self.line, self.col);
                        self.push(Tok::Indent, l, c);
                    } else if width < current {
                        while *self.indents.last().unwrap() > width {
                            self.indents.pop();
                            let (l, c) = (self.line, self.col);
                            self.push(Tok::Dedent, l, c);
                        }
                        if *self.indents.last().unwrap() != width {
                            return Err(self.err("unindent does not match any outer indentation level"));
                        }
                    }
                    return Ok(true);
                }
            }
        }
    }

    fn lex_name(&mut self, line: u32, col: u32) -> Result<(), ParseError> {
        let start = self.pos;
        while let Some(c) = self.peek() {
            if c.is_ascii_alphanumeric() || c == b'_' {
                self.bump();
            } else {
                break;
            }
        }
        let text = std::str::from_utf8(&self.src[start..self.pos]).unwrap().to_string();
        // String prefixes directly attached to a quote.
        if matches!(self.peek(), Some(b'\'') | Some(b'"')) {
            match text.as_str() {
                "r" | "R" | "b" | "B" | "f" | "F" | "rb" | "br" | "fr" | "rf" | "u" | "U" => {
                    if text.eq_ignore_ascii_case("u") {
                        return self.lex_string(line, col, None);
                    }
                    return Err(ParseError {
                        line,
                        col,
                        message: format!("unsupported string prefix '{}'", text),
                    });
                }
                _ => {}
            }
        }
        if let Some(kw) = KEYWORDS.iter().find(|k| **k == text) {
            self.push(Tok::Keyword(kw), line, col);
        } else {
            self.push(Tok::Name(text), line, col);
        }
        Ok(())
    }

    fn lex_number(&mut self, line: u32, col: u32) -> Result<(), ParseError> {
        let start = self.pos;
        if self.peek() == Some(b'0')
            && matches!(self.peek_at(1), Some(b'x') | Some(b'X') | Some(b'o') | Some(b'O') | Some(b'b') | Some(b'B'))
        {
            self.bump();
            self.bump();
            while let Some(c) = self.peek() {
                if c.is_ascii_alphanumeric() || c == b'_' {
                    self.bump();
                } else {
                    break;
                }
            }
        } else {
            let mut seen_dot = false;
            let mut seen_exp = false;
            while let Some(c) = self.peek() {
                match c {
                    b'0'..=b'9' | b'_' => {
                        self.bump();
                    }
                    b'.' if !seen_dot && !seen_exp => {
                        seen_dot = true;
                        self.bump();
                    }
                    b'e' | b'E' if !seen_exp => {
                        seen_exp = true;
                        self.bump();
                        if matches!(self.peek(), Some(b'+') | Some(b'-')) {
                            self.bump();
                        }
                    }
                    _ => break,
                }
            }
        }
        if matches!(self.peek(), Some(b'j') | Some(b'J')) {
            return Err(self.err("imaginary literals are not supported"));
        }
        let text = std::str::from_utf8(&self.src[start..self.pos]).unwrap().to_string();
        self.push(Tok::Number(text), line, col);
        Ok(())
    }

    fn lex_string(&mut self, line: u32, col: u32, _prefix: Option<&str>) -> Result<(), ParseError> {
        let quote_char = self.peek().unwrap();
        let triple = self.peek_at(1) == Some(quote_char) && self.peek_at(2) == Some(quote_char);
        let n_delim = if triple { 3 } else { 1 };
        for _ in 0..n_delim {
            self.bump();
        }
        let mut value = String::new();
        loop {
            let c = match self.peek() {
                Some(c) => c,
                None => return Err(self.err("unterminated string literal")),
            };
            if c == quote_char {
                if triple {
                    if self.peek_at(1) == Some(quote_char) && self.peek_at(2) == Some(quote_char) {
                        for _ in 0..3 {
                            self.bump();
                        }
                        break;
                    }
                    self.bump();
                    value.push(c as char);
                } else {
                    self.bump();
                    break;
                }
            } else if c == b'\\' {
                self.bump();
                let esc = self.bump().ok_or_else(|| self.err("unterminated escape"))?;
                match esc {
                    b'n' => value.push('\n'),
                    b't' => value.push('\t'),
                    b'r' => value.push('\r'),
                    b'\\' => value.push('\\'),
                    b'\'' => value.push('\''),
                    b'"' => value.push('"'),
                    b'0' => value.push('\0'),
                    b'a' => value.push('\x07'),
                    b'b' => value.push('\x08'),
                    b'f' => value.push('\x0c'),
                    b'v' => value.push('\x0b'),
                    b'\n' => {} // line continuation inside string
                    b'x' => {
                        let h1 = self.bump().ok_or_else(|| self.err("bad \\x escape"))?;
                        let h2 = self.bump().ok_or_else(|| self.err("bad \\x escape"))?;
                        let hex = format!("{}{}", h1 as char, h2 as char);
                        let v = u8::from_str_radix(&hex, 16)
                            .map_err(|_| self.err("bad \\x escape"))?;
                        value.push(v as char);
                    }
                    b'u' => {
                        let mut hex = String::new();
                        for _ in 0..4 {
                            let h = self.bump().ok_or_else(|| self.err("bad \\u escape"))?;
                            hex.push(h as char);
                        }
                        let v = u32::from_str_radix(&hex, 16)
                            .map_err(|_| self.err("bad \\u escape"))?;
                        value.push(char::from_u32(v).ok_or_else(|| self.err("bad \\u escape"))?);
                    }
                    other => {
                        // Unknown escapes keep the backslash, like CPython.
                        value.push('\\');
                        value.push(other as char);
                    }
                }
            } else if c == b'\n' && !triple {
                return Err(self.err("newline in single-quoted string"));
            } else if c < 0x80 {
                self.bump();
                value.push(c as char);
            } else {
                // Decode one UTF-8 scalar.
                let rest = &self.src[self.pos..];
                let s = std::str::from_utf8(rest).map_err(|_| self.err("invalid UTF-8"))?;
                let ch = s.chars().next().unwrap();
                for _ in 0..ch.len_utf8() {
                    self.bump();
                }
                value.push(ch);
            }
        }
        let quote = match (quote_char, triple) {
            (b'\'', false) => QuoteStyle::Single,
            (b'"', false) => QuoteStyle::Double,
            (b'\'', true) => QuoteStyle::TripleSingle,
            _ => QuoteStyle::TripleDouble,
        };
        self.push(Tok::Str { value, quote }, line, col);
        Ok(())
    }

    fn lex_operator(&mut self, line: u32, col: u32) -> Result<(), ParseError> {
        let rest = &self.src[self.pos..];
        for op in OPERATORS {
            if rest.starts_with(op.as_bytes()) {
                for _ in 0..op.len() {
                    self.bump();
                }
                match *op {
                    "(" | "[" | "{" => self.paren_depth += 1,
                    ")" | "]" | "}" => {
                        self.paren_depth = self.paren_depth.saturating_sub(1);
                    }
                    _ => {}
                }
                self.push(Tok::Op(op), line, col);
                return Ok(());
            }
        }
        Err(self.err(format!(
            "unexpected character '{}'",
            self.peek().map(|c| c as char).unwrap_or('?')
        )))
    }
}
