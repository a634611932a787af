//! Kernel mini-language.
//!
//! Kernels are the user functions that parameterize operators: element
//! functions for `map`/`flatmap`, combiners for `reduce`, folding functions
//! and initial values for `fold+reduce`, and partitioning policies. The
//! language is small and total: no recursion, no loops beyond `list-map`,
//! and lambdas only appear where they are applied.

mod eval;
mod infer;
mod parse;

use std::fmt;

use crate::lexer::Span;
use crate::values::{DataType, Value};

pub use eval::{eval_kernel, KernelError};
pub use infer::{infer_kernel_type, KernelType, KernelTypeError, Unifier};
pub use parse::{parse_kernel, parse_kernel_atom, parse_kernel_expr};

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Expr {
    pub kind: ExprKind,
    pub span: Span,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ExprKind {
    Lambda(Vec<String>, Box<Expr>),
    Var(String),
    /// Scalar literal (unit, bool, int, float or string).
    Lit(Value),
    Tuple(Vec<Expr>),
    List(Vec<Expr>),
    /// 1-based tuple projection, `pi<n> e`.
    Proj(usize, Box<Expr>),
    Unary(UnOp, Box<Expr>),
    Binary(BinOp, Box<Expr>, Box<Expr>),
    If(Box<Expr>, Box<Expr>, Box<Expr>),
    Call(Builtin, Vec<Expr>),
    /// Direct application of a lambda literal.
    Apply(Box<Expr>, Vec<Expr>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum UnOp {
    Neg,
    Not,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Eq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
    And,
    Or,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Builtin {
    Min,
    Max,
    /// Splits a string on runs of ASCII whitespace.
    Split,
    /// String or list concatenation.
    Concat,
    ListMap,
    ToFloat,
    /// `(max - min) / min` over a non-empty numeric list, as a float.
    SetFluctuation,
}

impl Builtin {
    pub const ALL: [Builtin; 7] = [
        Builtin::Min,
        Builtin::Max,
        Builtin::Split,
        Builtin::Concat,
        Builtin::ListMap,
        Builtin::ToFloat,
        Builtin::SetFluctuation,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Builtin::Min => "min",
            Builtin::Max => "max",
            Builtin::Split => "split",
            Builtin::Concat => "concat",
            Builtin::ListMap => "list-map",
            Builtin::ToFloat => "to-float",
            Builtin::SetFluctuation => "set-fluctuation",
        }
    }

    pub fn arity(self) -> usize {
        match self {
            Builtin::Split | Builtin::ToFloat | Builtin::SetFluctuation => 1,
            Builtin::Min | Builtin::Max | Builtin::Concat | Builtin::ListMap => 2,
        }
    }

    pub fn from_name(name: &str) -> Option<Builtin> {
        Builtin::ALL.into_iter().find(|b| b.name() == name)
    }
}

/// Parses `pi<n>` projection names.
pub(crate) fn projection_index(name: &str) -> Option<usize> {
    let digits = name.strip_prefix("pi")?;
    if digits.is_empty() || digits.starts_with('0') || !digits.bytes().all(|b| b.is_ascii_digit()) {
        return None;
    }
    digits.parse().ok()
}

pub(crate) const RESERVED: &[&str] = &[
    "if", "then", "else", "not", "true", "false", "unit", "nan", "inf",
];

impl BinOp {
    fn symbol(self) -> &'static str {
        match self {
            BinOp::Add => "+",
            BinOp::Sub => "-",
            BinOp::Mul => "*",
            BinOp::Div => "/",
            BinOp::Eq => "=",
            BinOp::Ne => "!=",
            BinOp::Lt => "<",
            BinOp::Le => "<=",
            BinOp::Gt => ">",
            BinOp::Ge => ">=",
            BinOp::And => "&&",
            BinOp::Or => "||",
        }
    }

    fn precedence(self) -> u8 {
        match self {
            BinOp::Or => 1,
            BinOp::And => 2,
            BinOp::Eq | BinOp::Ne | BinOp::Lt | BinOp::Le | BinOp::Gt | BinOp::Ge => 3,
            BinOp::Add | BinOp::Sub => 4,
            BinOp::Mul | BinOp::Div => 5,
        }
    }

    fn is_comparison(self) -> bool {
        self.precedence() == 3
    }
}

const PREC_UNARY: u8 = 6;
const PREC_APP: u8 = 7;
const PREC_ATOM: u8 = 8;

impl Expr {
    pub fn new(kind: ExprKind, span: Span) -> Self {
        Expr { kind, span }
    }

    /// Number of parameters if this is a lambda.
    pub fn arity(&self) -> Option<usize> {
        match &self.kind {
            ExprKind::Lambda(ps, _) => Some(ps.len()),
            _ => None,
        }
    }

    /// `name` as a kernel: builtin functions (and `pi<n>`) are eta-expanded
    /// into lambdas, so `min` stands for `\x y. min x y`.
    pub fn eta(name: &str, span: Span) -> Option<Expr> {
        let var = |n: &str| Expr::new(ExprKind::Var(n.to_string()), span);
        let (params, body) = if let Some(n) = projection_index(name) {
            (vec!["x"], ExprKind::Proj(n, Box::new(var("x"))))
        } else {
            let b = Builtin::from_name(name).filter(|b| *b != Builtin::ListMap)?;
            let params = if b.arity() == 1 { vec!["x"] } else { vec!["x", "y"] };
            let args = params.iter().map(|p| var(p)).collect();
            (params, ExprKind::Call(b, args))
        };
        Some(Expr::new(
            ExprKind::Lambda(
                params.into_iter().map(String::from).collect(),
                Box::new(Expr::new(body, span)),
            ),
            span,
        ))
    }

    /// Prints the expression so that it parses back as a single kernel
    /// atom, parenthesizing when needed.
    pub fn to_atom_string(&self) -> String {
        let negative_lit = match &self.kind {
            ExprKind::Lit(Value::Int(n)) => *n < 0,
            ExprKind::Lit(Value::Float(x)) => x.is_sign_negative() && !x.is_nan(),
            _ => false,
        };
        if self.precedence() == PREC_ATOM && !negative_lit {
            self.to_string()
        } else {
            format!("({self})")
        }
    }

    fn fmt_prec(&self, f: &mut fmt::Formatter<'_>, ctx: u8) -> fmt::Result {
        let prec = self.precedence();
        let paren = prec < ctx;
        if paren {
            f.write_str("(")?;
        }
        match &self.kind {
            ExprKind::Lambda(ps, body) => {
                write!(f, "\\{}. ", ps.join(" "))?;
                body.fmt_prec(f, 0)?;
            }
            ExprKind::If(c, t, e) => {
                f.write_str("if ")?;
                c.fmt_prec(f, 0)?;
                f.write_str(" then ")?;
                t.fmt_prec(f, 0)?;
                f.write_str(" else ")?;
                e.fmt_prec(f, 0)?;
            }
            ExprKind::Binary(op, l, r) => {
                let p = op.precedence();
                let left_ctx = if op.is_comparison() { p + 1 } else { p };
                l.fmt_prec(f, left_ctx)?;
                write!(f, " {} ", op.symbol())?;
                r.fmt_prec(f, p + 1)?;
            }
            ExprKind::Unary(op, e) => {
                f.write_str(match op {
                    UnOp::Neg => "-",
                    UnOp::Not => "not ",
                })?;
                // `- 1` would re-parse as a negative literal.
                let inner = if *op == UnOp::Neg && matches!(e.kind, ExprKind::Lit(_)) {
                    PREC_ATOM + 1
                } else {
                    PREC_UNARY
                };
                e.fmt_prec(f, inner)?;
            }
            ExprKind::Proj(n, e) => {
                write!(f, "pi{n} ")?;
                e.fmt_prec(f, PREC_ATOM)?;
            }
            ExprKind::Call(b, args) => {
                f.write_str(b.name())?;
                for a in args {
                    f.write_str(" ")?;
                    a.fmt_prec(f, PREC_ATOM)?;
                }
            }
            ExprKind::Apply(head, args) => {
                head.fmt_prec(f, PREC_ATOM + 1)?;
                for a in args {
                    f.write_str(" ")?;
                    a.fmt_prec(f, PREC_ATOM)?;
                }
            }
            ExprKind::Var(v) => f.write_str(v)?,
            ExprKind::Lit(v) => {
                let negative = match v {
                    Value::Int(n) => *n < 0,
                    Value::Float(x) => x.is_sign_negative() && !x.is_nan(),
                    _ => false,
                };
                if negative && ctx >= PREC_APP && !paren {
                    write!(f, "({v})")?;
                } else {
                    write!(f, "{v}")?;
                }
            }
            ExprKind::Tuple(items) | ExprKind::List(items) => {
                let (open, close) = if matches!(self.kind, ExprKind::Tuple(_)) {
                    ("(", ")")
                } else {
                    ("[", "]")
                };
                f.write_str(open)?;
                for (i, item) in items.iter().enumerate() {
                    if i > 0 {
                        f.write_str(", ")?;
                    }
                    item.fmt_prec(f, 0)?;
                }
                f.write_str(close)?;
            }
        }
        if paren {
            f.write_str(")")?;
        }
        Ok(())
    }

    fn precedence(&self) -> u8 {
        match &self.kind {
            ExprKind::Lambda(..) | ExprKind::If(..) => 0,
            ExprKind::Binary(op, ..) => op.precedence(),
            ExprKind::Unary(..) => PREC_UNARY,
            ExprKind::Proj(..) | ExprKind::Call(..) | ExprKind::Apply(..) => PREC_APP,
            ExprKind::Lit(_) | ExprKind::Var(_) | ExprKind::Tuple(_) | ExprKind::List(_) => {
                PREC_ATOM
            }
        }
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.fmt_prec(f, 0)
    }
}

impl fmt::Display for KernelType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let params: Vec<String> = self.params.iter().map(DataType::to_string).collect();
        write!(f, "{} -> {}", params.join(" × "), self.result)
    }
}
