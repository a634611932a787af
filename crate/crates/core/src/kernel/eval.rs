use thiserror::Error;

use crate::lexer::Span;
use crate::values::Value;

use super::{BinOp, Builtin, Expr, ExprKind, UnOp};

#[derive(Debug, Clone, Error, PartialEq)]
pub enum KernelError {
    #[error("{0}: division by zero")]
    DivisionByZero(Span),
    #[error("{0}: integer overflow")]
    Overflow(Span),
    #[error("{span}: kernel expects {expected} argument(s), got {found}")]
    Arity {
        span: Span,
        expected: usize,
        found: usize,
    },
    #[error("{span}: {message}")]
    Type { span: Span, message: String },
    #[error("{span}: projection pi{index} out of range")]
    Index { span: Span, index: usize },
    #[error("{0}: set-fluctuation of an empty list")]
    EmptyList(Span),
}

fn type_error(span: Span, message: impl Into<String>) -> KernelError {
    KernelError::Type {
        span,
        message: message.into(),
    }
}

/// Applies kernel `e` to `args`. A non-lambda kernel is a constant and
/// must be given no arguments.
pub fn eval_kernel(e: &Expr, args: &[Value]) -> Result<Value, KernelError> {
    match &e.kind {
        ExprKind::Lambda(names, body) => {
            if names.len() != args.len() {
                return Err(KernelError::Arity {
                    span: e.span,
                    expected: names.len(),
                    found: args.len(),
                });
            }
            let mut env: Vec<(&str, Value)> =
                names.iter().map(String::as_str).zip(args.iter().cloned()).collect();
            eval(body, &mut env)
        }
        _ if args.is_empty() => eval(e, &mut Vec::new()),
        _ => Err(KernelError::Arity {
            span: e.span,
            expected: 0,
            found: args.len(),
        }),
    }
}

fn eval<'a>(e: &'a Expr, env: &mut Vec<(&'a str, Value)>) -> Result<Value, KernelError> {
    let span = e.span;
    match &e.kind {
        ExprKind::Lit(v) => Ok(v.clone()),
        ExprKind::Var(name) => env
            .iter()
            .rev()
            .find(|(n, _)| n == name)
            .map(|(_, v)| v.clone())
            .ok_or_else(|| type_error(span, format!("unbound variable `{name}`"))),
        ExprKind::Lambda(..) => Err(type_error(span, "a lambda is not a value")),
        ExprKind::Tuple(items) => Ok(Value::Tuple(
            items.iter().map(|i| eval(i, env)).collect::<Result<_, _>>()?,
        )),
        ExprKind::List(items) => Ok(Value::List(
            items.iter().map(|i| eval(i, env)).collect::<Result<_, _>>()?,
        )),
        ExprKind::Proj(index, inner) => match eval(inner, env)? {
            Value::Tuple(mut items) => {
                if *index > items.len() {
                    Err(KernelError::Index { span, index: *index })
                } else {
                    Ok(items.swap_remove(index - 1))
                }
            }
            other => Err(type_error(span, format!("pi{index} applied to {other}"))),
        },
        ExprKind::Unary(UnOp::Neg, inner) => match eval(inner, env)? {
            Value::Int(n) => n.checked_neg().map(Value::Int).ok_or(KernelError::Overflow(span)),
            Value::Float(x) => Ok(Value::Float(-x)),
            other => Err(type_error(span, format!("cannot negate {other}"))),
        },
        ExprKind::Unary(UnOp::Not, inner) => match eval(inner, env)? {
            Value::Bool(b) => Ok(Value::Bool(!b)),
            other => Err(type_error(span, format!("`not` applied to {other}"))),
        },
        ExprKind::Binary(BinOp::And, l, r) => match eval(l, env)? {
            Value::Bool(false) => Ok(Value::Bool(false)),
            Value::Bool(true) => truth(eval(r, env)?, r.span),
            other => Err(type_error(l.span, format!("expected bool, found {other}"))),
        },
        ExprKind::Binary(BinOp::Or, l, r) => match eval(l, env)? {
            Value::Bool(true) => Ok(Value::Bool(true)),
            Value::Bool(false) => truth(eval(r, env)?, r.span),
            other => Err(type_error(l.span, format!("expected bool, found {other}"))),
        },
        ExprKind::Binary(op, l, r) => {
            let a = eval(l, env)?;
            let b = eval(r, env)?;
            binary(*op, a, b, span)
        }
        ExprKind::If(c, t, f) => match eval(c, env)? {
            Value::Bool(true) => eval(t, env),
            Value::Bool(false) => eval(f, env),
            other => Err(type_error(c.span, format!("condition is {other}, not a bool"))),
        },
        ExprKind::Apply(head, args) => {
            let ExprKind::Lambda(names, body) = &head.kind else {
                return Err(type_error(head.span, "only lambdas can be applied"));
            };
            if names.len() != args.len() {
                return Err(KernelError::Arity {
                    span,
                    expected: names.len(),
                    found: args.len(),
                });
            }
            let values = args.iter().map(|a| eval(a, env)).collect::<Result<Vec<_>, _>>()?;
            let base = env.len();
            env.extend(names.iter().map(String::as_str).zip(values));
            let out = eval(body, env);
            env.truncate(base);
            out
        }
        ExprKind::Call(Builtin::ListMap, args) => {
            let ExprKind::Lambda(names, body) = &args[0].kind else {
                return Err(type_error(args[0].span, "list-map expects a lambda"));
            };
            let [name] = names.as_slice() else {
                return Err(type_error(args[0].span, "list-map expects a one-parameter lambda"));
            };
            let Value::List(items) = eval(&args[1], env)? else {
                return Err(type_error(args[1].span, "list-map expects a list"));
            };
            let mut out = Vec::with_capacity(items.len());
            for item in items {
                env.push((name.as_str(), item));
                let v = eval(body, env);
                env.pop();
                out.push(v?);
            }
            Ok(Value::List(out))
        }
        ExprKind::Call(b, args) => {
            let values = args.iter().map(|a| eval(a, env)).collect::<Result<Vec<_>, _>>()?;
            builtin(*b, values, span)
        }
    }
}

fn truth(v: Value, span: Span) -> Result<Value, KernelError> {
    match v {
        Value::Bool(_) => Ok(v),
        other => Err(type_error(span, format!("expected bool, found {other}"))),
    }
}

fn binary(op: BinOp, a: Value, b: Value, span: Span) -> Result<Value, KernelError> {
    use std::cmp::Ordering;
    let cmp = |o: fn(Ordering) -> bool| Ok(Value::Bool(o(a.cmp(&b))));
    match op {
        BinOp::Eq => Ok(Value::Bool(a == b)),
        BinOp::Ne => Ok(Value::Bool(a != b)),
        BinOp::Lt => cmp(Ordering::is_lt),
        BinOp::Le => cmp(Ordering::is_le),
        BinOp::Gt => cmp(Ordering::is_gt),
        BinOp::Ge => cmp(Ordering::is_ge),
        BinOp::Add | BinOp::Sub | BinOp::Mul | BinOp::Div => match (&a, &b) {
            (Value::Int(x), Value::Int(y)) => {
                let r = match op {
                    BinOp::Add => x.checked_add(*y),
                    BinOp::Sub => x.checked_sub(*y),
                    BinOp::Mul => x.checked_mul(*y),
                    _ => {
                        if *y == 0 {
                            return Err(KernelError::DivisionByZero(span));
                        }
                        x.checked_div(*y)
                    }
                };
                r.map(Value::Int).ok_or(KernelError::Overflow(span))
            }
            (Value::Float(x), Value::Float(y)) => Ok(Value::Float(match op {
                BinOp::Add => x + y,
                BinOp::Sub => x - y,
                BinOp::Mul => x * y,
                _ => x / y,
            })),
            _ => Err(type_error(span, format!("arithmetic on {a} and {b}"))),
        },
        BinOp::And | BinOp::Or => unreachable!("short-circuit operators are handled by eval"),
    }
}

fn builtin(b: Builtin, mut args: Vec<Value>, span: Span) -> Result<Value, KernelError> {
    match b {
        Builtin::Min | Builtin::Max => {
            let y = args.pop().expect("arity checked by parser");
            let x = args.pop().expect("arity checked by parser");
            Ok(if (b == Builtin::Min) == (y < x) { y } else { x })
        }
        Builtin::Split => match &args[0] {
            Value::Str(s) => Ok(Value::List(
                s.split_ascii_whitespace().map(Value::str).collect(),
            )),
            other => Err(type_error(span, format!("split applied to {other}"))),
        },
        Builtin::Concat => {
            let y = args.pop().expect("arity checked by parser");
            let x = args.pop().expect("arity checked by parser");
            match (x, y) {
                (Value::Str(mut x), Value::Str(y)) => {
                    x.push_str(&y);
                    Ok(Value::Str(x))
                }
                (Value::List(mut x), Value::List(y)) => {
                    x.extend(y);
                    Ok(Value::List(x))
                }
                (x, y) => Err(type_error(span, format!("concat of {x} and {y}"))),
            }
        }
        Builtin::ToFloat => match args[0] {
            Value::Int(n) => Ok(Value::Float(n as f64)),
            Value::Float(x) => Ok(Value::Float(x)),
            ref other => Err(type_error(span, format!("to-float applied to {other}"))),
        },
        Builtin::SetFluctuation => {
            let Value::List(items) = &args[0] else {
                return Err(type_error(span, "set-fluctuation expects a list"));
            };
            let nums = items
                .iter()
                .map(|v| v.as_float().or_else(|| v.as_int().map(|n| n as f64)))
                .collect::<Option<Vec<f64>>>()
                .ok_or_else(|| type_error(span, "set-fluctuation expects numbers"))?;
            if nums.is_empty() {
                return Err(KernelError::EmptyList(span));
            }
            let lo = nums.iter().copied().fold(f64::INFINITY, f64::min);
            let hi = nums.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            Ok(Value::Float((hi - lo) / lo))
        }
        Builtin::ListMap => unreachable!("list-map is evaluated lazily"),
    }
}
