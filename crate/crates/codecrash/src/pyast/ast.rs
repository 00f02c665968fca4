//! Syntax tree types for the supported Python subset.
//!
//! Trees are plain owned values. Statements carry optional comment trivia
//! (whole-line comments above, or a trailing comment on the header line)
//! and a `synthetic` flag marking nodes inserted by a perturbation; both
//! are ignored by structural equality.

use std::fmt;

#[derive(Debug, Clone, PartialEq)]
pub struct Module {
    pub body: Vec<Stmt>,
}

#[derive(Debug, Clone)]
pub struct Stmt {
    pub kind: StmtKind,
    /// Whole-line comments rendered immediately above the statement.
    pub leading_comments: Vec<String>,
    /// Comment rendered at the end of the statement's header line.
    pub trailing_comment: Option<String>,
    /// True when this statement was inserted by a perturbation.
    pub synthetic: bool,
}

impl Stmt {
    pub fn new(kind: StmtKind) -> Self {
        Stmt {
            kind,
            leading_comments: Vec::new(),
            trailing_comment: None,
            synthetic: false,
        }
    }

    pub fn synthetic(kind: StmtKind) -> Self {
        let mut s = Stmt::new(kind);
        s.synthetic = true;
        s
    }
}

// Trivia and the synthetic flag are presentation state, not structure.
impl PartialEq for Stmt {
    fn eq(&self, other: &Self) -> bool {
        self.kind == other.kind
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum StmtKind {
    FunctionDef {
        name: String,
        params: Params,
        returns: Option<Expr>,
        decorators: Vec<Expr>,
        body: Vec<Stmt>,
    },
    Return(Option<Expr>),
    Assign {
        targets: Vec<Expr>,
        value: Expr,
    },
    AugAssign {
        target: Expr,
        op: BinOp,
        value: Expr,
    },
    AnnAssign {
        target: Expr,
        annotation: Expr,
        value: Option<Expr>,
    },
    For {
        target: Expr,
        iter: Expr,
        body: Vec<Stmt>,
        orelse: Vec<Stmt>,
    },
    While {
        test: Expr,
        body: Vec<Stmt>,
        orelse: Vec<Stmt>,
    },
    If {
        test: Expr,
        body: Vec<Stmt>,
        orelse: Vec<Stmt>,
    },
    With {
        items: Vec<WithItem>,
        body: Vec<Stmt>,
    },
    Try {
        body: Vec<Stmt>,
        handlers: Vec<ExceptHandler>,
        orelse: Vec<Stmt>,
        finalbody: Vec<Stmt>,
    },
    Raise {
        exc: Option<Expr>,
        cause: Option<Expr>,
    },
    Assert {
        test: Expr,
        msg: Option<Expr>,
    },
    Import(Vec<Alias>),
    ImportFrom {
        module: Option<String>,
        names: Vec<Alias>,
        level: u32,
    },
    Global(Vec<String>),
    Nonlocal(Vec<String>),
    Delete(Vec<Expr>),
    Expr(Expr),
    Pass,
    Break,
    Continue,
}

#[derive(Debug, Clone, PartialEq)]
pub struct WithItem {
    pub context: Expr,
    pub vars: Option<Expr>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExceptHandler {
    pub typ: Option<Expr>,
    pub name: Option<String>,
    pub body: Vec<Stmt>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Alias {
    pub name: String,
    pub asname: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Params {
    pub args: Vec<Param>,
    pub vararg: Option<Param>,
    /// True when a bare `*` separates positional from keyword-only params.
    pub kwonly_marker: bool,
    pub kwonly: Vec<Param>,
    pub kwarg: Option<Param>,
}

impl Params {
    pub fn empty() -> Self {
        Params {
            args: Vec::new(),
            vararg: None,
            kwonly_marker: false,
            kwonly: Vec::new(),
            kwarg: None,
        }
    }

    pub fn simple(names: &[&str]) -> Self {
        let mut p = Params::empty();
        p.args = names.iter().map(|n| Param::plain(n)).collect();
        p
    }

    /// All parameter names in declaration order.
    pub fn names(&self) -> Vec<&str> {
        let mut out: Vec<&str> = self.args.iter().map(|p| p.name.as_str()).collect();
        if let Some(v) = &self.vararg {
            out.push(&v.name);
        }
        out.extend(self.kwonly.iter().map(|p| p.name.as_str()));
        if let Some(k) = &self.kwarg {
            out.push(&k.name);
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Param {
    pub name: String,
    pub annotation: Option<Box<Expr>>,
    pub default: Option<Box<Expr>>,
}

impl Param {
    pub fn plain(name: &str) -> Self {
        Param {
            name: name.to_string(),
            annotation: None,
            default: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Expr {
    pub kind: ExprKind,
}

impl Expr {
    pub fn new(kind: ExprKind) -> Self {
        Expr { kind }
    }

    pub fn name(id: &str) -> Self {
        Expr::new(ExprKind::Name(id.to_string()))
    }

    pub fn number(lexeme: &str) -> Self {
        Expr::new(ExprKind::Number(lexeme.to_string()))
    }

    /// String literal with a repr-style quote preference: single quotes
    /// unless the value contains a single quote and no double quote.
    pub fn string(value: &str) -> Self {
        let quote = if value.contains('\'') && !value.contains('"') {
            QuoteStyle::Double
        } else {
            QuoteStyle::Single
        };
        Expr::new(ExprKind::Str {
            value: value.to_string(),
            quote,
            triple: false,
        })
    }

    pub fn call(func: Expr, args: Vec<Expr>) -> Self {
        Expr::new(ExprKind::Call {
            func: Box::new(func),
            args,
            keywords: Vec::new(),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QuoteStyle {
    Single,
    Double,
    TripleSingle,
    TripleDouble,
}

impl QuoteStyle {
    pub fn delimiter(self) -> &'static str {
        match self {
            QuoteStyle::Single => "'",
            QuoteStyle::Double => "\"",
            QuoteStyle::TripleSingle => "'''",
            QuoteStyle::TripleDouble => "\"\"\"",
        }
    }

    pub fn is_triple(self) -> bool {
        matches!(self, QuoteStyle::TripleSingle | QuoteStyle::TripleDouble)
    }

    pub fn quote_char(self) -> char {
        match self {
            QuoteStyle::Single | QuoteStyle::TripleSingle => '\'',
            QuoteStyle::Double | QuoteStyle::TripleDouble => '"',
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ExprKind {
    Name(String),
    /// Numeric literal; the original lexeme is preserved verbatim.
    Number(String),
    Str {
        value: String,
        quote: QuoteStyle,
        triple: bool,
    },
    Bool(bool),
    NoneLit,
    Tuple(Vec<Expr>),
    List(Vec<Expr>),
    Set(Vec<Expr>),
    Dict {
        /// `None` key marks a `**mapping` unpacking entry.
        keys: Vec<Option<Expr>>,
        values: Vec<Expr>,
    },
    BinOp {
        left: Box<Expr>,
        op: BinOp,
        right: Box<Expr>,
    },
    UnaryOp {
        op: UnaryOp,
        operand: Box<Expr>,
    },
    BoolOp {
        op: BoolOp,
        values: Vec<Expr>,
    },
    Compare {
        left: Box<Expr>,
        ops: Vec<CmpOp>,
        comparators: Vec<Expr>,
    },
    Call {
        func: Box<Expr>,
        args: Vec<Expr>,
        keywords: Vec<Keyword>,
    },
    Attribute {
        value: Box<Expr>,
        attr: String,
    },
    Subscript {
        value: Box<Expr>,
        index: Box<Expr>,
    },
    Slice {
        lower: Option<Box<Expr>>,
        upper: Option<Box<Expr>>,
        step: Option<Box<Expr>>,
    },
    Lambda {
        params: Params,
        body: Box<Expr>,
    },
    IfExp {
        test: Box<Expr>,
        body: Box<Expr>,
        orelse: Box<Expr>,
    },
    NamedExpr {
        target: Box<Expr>,
        value: Box<Expr>,
    },
    Starred(Box<Expr>),
    ListComp {
        elt: Box<Expr>,
        generators: Vec<Comprehension>,
    },
    SetComp {
        elt: Box<Expr>,
        generators: Vec<Comprehension>,
    },
    DictComp {
        key: Box<Expr>,
        value: Box<Expr>,
        generators: Vec<Comprehension>,
    },
    GeneratorExp {
        elt: Box<Expr>,
        generators: Vec<Comprehension>,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Comprehension {
    pub target: Expr,
    pub iter: Expr,
    pub ifs: Vec<Expr>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Keyword {
    /// `None` marks a `**kwargs` unpacking entry.
    pub arg: Option<String>,
    pub value: Expr,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinOp {
    Add,
    Sub,
    Mult,
    MatMult,
    Div,
    FloorDiv,
    Mod,
    Pow,
    LShift,
    RShift,
    BitOr,
    BitXor,
    BitAnd,
}

impl BinOp {
    pub fn symbol(self) -> &'static str {
        match self {
            BinOp::Add => "+",
            BinOp::Sub => "-",
            BinOp::Mult => "*",
            BinOp::MatMult => "@",
            BinOp::Div => "/",
            BinOp::FloorDiv => "//",
            BinOp::Mod => "%",
            BinOp::Pow => "**",
            BinOp::LShift => "<<",
            BinOp::RShift => ">>",
            BinOp::BitOr => "|",
            BinOp::BitXor => "^",
            BinOp::BitAnd => "&",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UnaryOp {
    Not,
    USub,
    UAdd,
    Invert,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BoolOp {
    And,
    Or,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CmpOp {
    Eq,
    NotEq,
    Lt,
    LtE,
    Gt,
    GtE,
    Is,
    IsNot,
    In,
    NotIn,
}

impl CmpOp {
    pub fn symbol(self) -> &'static str {
        match self {
            CmpOp::Eq => "==",
            CmpOp::NotEq => "!=",
            CmpOp::Lt => "<",
            CmpOp::LtE => "<=",
            CmpOp::Gt => ">",
            CmpOp::GtE => ">=",
            CmpOp::Is => "is",
            CmpOp::IsNot => "is not",
            CmpOp::In => "in",
            CmpOp::NotIn => "not in",
        }
    }
}

/// Node kinds addressable through [`super::list_nodes`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum NodeKind {
    FunctionDef,
    Return,
    For,
    While,
    If,
    Assign,
    AugAssign,
    With,
    Walrus,
    Comprehension,
    Call,
    Attribute,
    StringLit,
    NumberLit,
}

impl fmt::Display for NodeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            NodeKind::FunctionDef => "function-def",
            NodeKind::Return => "return",
            NodeKind::For => "for",
            NodeKind::While => "while",
            NodeKind::If => "if",
            NodeKind::Assign => "assignment",
            NodeKind::AugAssign => "aug-assignment",
            NodeKind::With => "with",
            NodeKind::Walrus => "walrus",
            NodeKind::Comprehension => "comprehension",
            NodeKind::Call => "call",
            NodeKind::Attribute => "attribute",
            NodeKind::StringLit => "string-literal",
            NodeKind::NumberLit => "number-literal",
        };
        f.write_str(s)
    }
}

/// Source position, 1-based line and column.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct Pos {
    pub line: u32,
    pub col: u32,
}

/// Extent of a node in rendered source text.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct Span {
    pub start: Pos,
    pub end: Pos,
}

/// Address of a node reachable from the module root.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NodeRef {
    pub path: Vec<u32>,
    pub kind: NodeKind,
    pub span: Span,
}
