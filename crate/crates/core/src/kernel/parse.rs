use crate::lexer::{Cursor, Span, SyntaxError, Tok};
use crate::values::{negate_int, Value};

use super::{projection_index, BinOp, Builtin, Expr, ExprKind, UnOp, RESERVED};

/// Parses a complete kernel expression, e.g. `\x. x + 1`.
pub fn parse_kernel(src: &str) -> Result<Expr, SyntaxError> {
    let mut cur = Cursor::new(src)?;
    let e = parse_kernel_expr(&mut cur)?;
    cur.expect_eof()?;
    Ok(e)
}

pub fn parse_kernel_expr(cur: &mut Cursor) -> Result<Expr, SyntaxError> {
    expr(cur)
}

/// Parses an atomic kernel: a parenthesized expression, a literal, or a
/// builtin name (eta-expanded). Operator arguments use this form.
pub fn parse_kernel_atom(cur: &mut Cursor) -> Result<Expr, SyntaxError> {
    let span = cur.span();
    if let Tok::Ident(name) = cur.peek().clone() {
        if let Some(e) = Expr::eta(&name, span) {
            cur.next();
            return Ok(e);
        }
    }
    if matches!(cur.peek(), Tok::Minus) && matches!(cur.peek_at(1), Tok::Int(_) | Tok::Float(_)) {
        return unary(cur);
    }
    atom(cur)
}

fn expr(cur: &mut Cursor) -> Result<Expr, SyntaxError> {
    let span = cur.span();
    if cur.eat(&Tok::Backslash) {
        let mut params = Vec::new();
        while let Tok::Ident(_) = cur.peek() {
            let (p, pspan) = cur.any_ident()?;
            check_binder(&p, pspan)?;
            params.push(p);
        }
        if params.is_empty() {
            return Err(cur.unexpected("a parameter name"));
        }
        cur.expect(&Tok::Dot)?;
        let body = expr(cur)?;
        return Ok(Expr::new(ExprKind::Lambda(params, Box::new(body)), span));
    }
    if cur.eat_ident("if") {
        let c = expr(cur)?;
        cur.expect_ident("then")?;
        let t = expr(cur)?;
        cur.expect_ident("else")?;
        let e = expr(cur)?;
        return Ok(Expr::new(
            ExprKind::If(Box::new(c), Box::new(t), Box::new(e)),
            span,
        ));
    }
    binary(cur, 1)
}

fn check_binder(name: &str, span: Span) -> Result<(), SyntaxError> {
    if RESERVED.contains(&name) || Builtin::from_name(name).is_some() || projection_index(name).is_some()
    {
        Err(SyntaxError::new(
            span,
            format!("`{name}` is reserved and cannot be a parameter"),
        ))
    } else {
        Ok(())
    }
}

fn binop_at(tok: &Tok) -> Option<BinOp> {
    Some(match tok {
        Tok::OrOr => BinOp::Or,
        Tok::AndAnd => BinOp::And,
        Tok::Eq => BinOp::Eq,
        Tok::Ne => BinOp::Ne,
        Tok::Lt => BinOp::Lt,
        Tok::Le => BinOp::Le,
        Tok::Gt => BinOp::Gt,
        Tok::Ge => BinOp::Ge,
        Tok::Plus => BinOp::Add,
        Tok::Minus => BinOp::Sub,
        Tok::Star => BinOp::Mul,
        Tok::Slash => BinOp::Div,
        _ => return None,
    })
}

// Precedence climbing over levels 1 (`||`) to 5 (`*`, `/`); comparisons
// (level 3) do not chain.
fn binary(cur: &mut Cursor, level: u8) -> Result<Expr, SyntaxError> {
    if level > 5 {
        return unary(cur);
    }
    let mut lhs = binary(cur, level + 1)?;
    while let Some(op) = binop_at(cur.peek()).filter(|op| op.precedence() == level) {
        let span = cur.span();
        cur.next();
        // Lambdas and conditionals extend as far right as possible.
        let rhs = if cur.is_ident("if") || matches!(cur.peek(), Tok::Backslash) {
            expr(cur)?
        } else {
            binary(cur, level + 1)?
        };
        lhs = Expr::new(ExprKind::Binary(op, Box::new(lhs), Box::new(rhs)), span);
        if op.is_comparison() {
            if binop_at(cur.peek()).is_some_and(|o| o.is_comparison()) {
                return Err(SyntaxError::new(
                    cur.span(),
                    "comparison operators do not chain; add parentheses",
                ));
            }
            break;
        }
    }
    Ok(lhs)
}

fn unary(cur: &mut Cursor) -> Result<Expr, SyntaxError> {
    let span = cur.span();
    if cur.eat(&Tok::Minus) {
        match cur.peek().clone() {
            Tok::Int(n) => {
                cur.next();
                let v = negate_int(n)
                    .ok_or_else(|| SyntaxError::new(span, "integer literal out of range"))?;
                return Ok(Expr::new(ExprKind::Lit(Value::Int(v)), span));
            }
            Tok::Float(x) => {
                cur.next();
                return Ok(Expr::new(ExprKind::Lit(Value::Float(-x)), span));
            }
            Tok::Ident(w) if w == "inf" => {
                cur.next();
                return Ok(Expr::new(ExprKind::Lit(Value::Float(f64::NEG_INFINITY)), span));
            }
            _ => {
                let e = unary(cur)?;
                return Ok(Expr::new(ExprKind::Unary(UnOp::Neg, Box::new(e)), span));
            }
        }
    }
    if cur.eat_ident("not") {
        let e = unary(cur)?;
        return Ok(Expr::new(ExprKind::Unary(UnOp::Not, Box::new(e)), span));
    }
    application(cur)
}

fn starts_atom(tok: &Tok) -> bool {
    match tok {
        Tok::Int(_) | Tok::Float(_) | Tok::Str(_) | Tok::LParen | Tok::LBracket => true,
        Tok::Ident(w) => !matches!(w.as_str(), "then" | "else" | "if" | "not"),
        _ => false,
    }
}

fn application(cur: &mut Cursor) -> Result<Expr, SyntaxError> {
    let span = cur.span();
    if let Tok::Ident(name) = cur.peek().clone() {
        if let Some(n) = projection_index(&name) {
            cur.next();
            let arg = atom(cur)?;
            return Ok(Expr::new(ExprKind::Proj(n, Box::new(arg)), span));
        }
        if let Some(b) = Builtin::from_name(&name) {
            cur.next();
            let mut args = Vec::with_capacity(b.arity());
            for _ in 0..b.arity() {
                if !starts_atom(cur.peek()) {
                    return Err(cur.unexpected(&format!(
                        "argument {} of `{}` (takes {})",
                        args.len() + 1,
                        b.name(),
                        b.arity()
                    )));
                }
                args.push(atom(cur)?);
            }
            return Ok(Expr::new(ExprKind::Call(b, args), span));
        }
    }
    let head = atom(cur)?;
    if let Some(n) = head.arity() {
        if starts_atom(cur.peek()) {
            let mut args = Vec::with_capacity(n);
            for _ in 0..n {
                args.push(atom(cur)?);
            }
            return Ok(Expr::new(ExprKind::Apply(Box::new(head), args), span));
        }
    }
    Ok(head)
}

fn atom(cur: &mut Cursor) -> Result<Expr, SyntaxError> {
    let span = cur.span();
    let lit = |v| Ok(Expr::new(ExprKind::Lit(v), span));
    match cur.peek().clone() {
        Tok::Int(n) => {
            cur.next();
            let v = i64::try_from(n)
                .map_err(|_| SyntaxError::new(span, "integer literal out of range"))?;
            lit(Value::Int(v))
        }
        Tok::Float(x) => {
            cur.next();
            lit(Value::Float(x))
        }
        Tok::Str(s) => {
            cur.next();
            lit(Value::Str(s))
        }
        Tok::Ident(w) => {
            let v = match w.as_str() {
                "true" => Value::Bool(true),
                "false" => Value::Bool(false),
                "unit" => Value::Unit,
                "nan" => Value::Float(f64::NAN),
                "inf" => Value::Float(f64::INFINITY),
                _ if RESERVED.contains(&w.as_str()) => return Err(cur.unexpected("an expression")),
                _ if Builtin::from_name(&w).is_some() || projection_index(&w).is_some() => {
                    return Err(SyntaxError::new(
                        span,
                        format!("builtin `{w}` must be applied to its arguments here; wrap in parentheses"),
                    ))
                }
                _ => {
                    cur.next();
                    return Ok(Expr::new(ExprKind::Var(w), span));
                }
            };
            cur.next();
            lit(v)
        }
        Tok::LParen => {
            cur.next();
            let first = expr(cur)?;
            if cur.eat(&Tok::RParen) {
                // Parentheses are grouping only; keep the inner node.
                return Ok(first);
            }
            let mut items = vec![first];
            while cur.eat(&Tok::Comma) {
                items.push(expr(cur)?);
            }
            cur.expect(&Tok::RParen)?;
            Ok(Expr::new(ExprKind::Tuple(items), span))
        }
        Tok::LBracket => {
            cur.next();
            let mut items = Vec::new();
            if !cur.eat(&Tok::RBracket) {
                items.push(expr(cur)?);
                while cur.eat(&Tok::Comma) {
                    items.push(expr(cur)?);
                }
                cur.expect(&Tok::RBracket)?;
            }
            Ok(Expr::new(ExprKind::List(items), span))
        }
        _ => Err(cur.unexpected("an expression")),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn var(n: &str) -> Expr {
        Expr::new(ExprKind::Var(n.into()), Span::default())
    }

    fn lit(v: Value) -> Expr {
        Expr::new(ExprKind::Lit(v), Span::default())
    }

    fn bx(e: Expr) -> Box<Expr> {
        Box::new(e)
    }

    #[test]
    fn increment_lambda() {
        let e = parse_kernel("\\x. x + 1").unwrap();
        let expected = Expr::new(
            ExprKind::Lambda(
                vec!["x".into()],
                bx(Expr::new(
                    ExprKind::Binary(BinOp::Add, bx(var("x")), bx(lit(Value::Int(1)))),
                    Span::default(),
                )),
            ),
            Span::default(),
        );
        assert_eq!(e, expected);
    }

    #[test]
    fn tokenizer_kernel() {
        let e = parse_kernel("\\l. list-map (\\w.(w,1)) (split l)").unwrap();
        let ExprKind::Lambda(ps, body) = &e.kind else { panic!() };
        assert_eq!(ps, &vec!["l".to_string()]);
        let ExprKind::Call(Builtin::ListMap, args) = &body.kind else { panic!("{body:?}") };
        assert!(matches!(args[0].kind, ExprKind::Lambda(..)));
        assert!(matches!(args[1].kind, ExprKind::Call(Builtin::Split, _)));
    }

    #[test]
    fn keyed_sum_kernel() {
        let e = parse_kernel("\\x y. (pi1 x, pi2 x + pi2 y)").unwrap();
        let ExprKind::Lambda(ps, body) = &e.kind else { panic!() };
        assert_eq!(ps.len(), 2);
        let ExprKind::Tuple(items) = &body.kind else { panic!() };
        assert!(matches!(items[0].kind, ExprKind::Proj(1, _)));
        assert!(matches!(items[1].kind, ExprKind::Binary(BinOp::Add, _, _)));
    }

    #[test]
    fn application_binds_tighter_than_operators() {
        let e = parse_kernel("min a b + 1").unwrap();
        assert!(matches!(e.kind, ExprKind::Binary(BinOp::Add, _, _)));
    }

    #[test]
    fn syntax_errors_carry_positions() {
        let err = parse_kernel("\\x.\n  x +").unwrap_err();
        assert_eq!((err.span.line, err.span.col), (2, 6));
        assert!(parse_kernel("\\x. 1 < 2 < 3").is_err());
        assert!(parse_kernel("\\split. 1").is_err());
        assert!(parse_kernel("min 1").is_err());
    }

    #[test]
    fn lambda_application() {
        let e = parse_kernel("(\\x. x * 2) 4").unwrap();
        assert!(matches!(e.kind, ExprKind::Apply(_, ref args) if args.len() == 1));
    }
}
