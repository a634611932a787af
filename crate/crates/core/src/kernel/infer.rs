//! Monomorphic type inference for kernels.
//!
//! Inference is first-order unification over [`DataType`] with type
//! variables, plus a few deferred constraints that cannot be decided until a
//! variable is resolved (tuple projection, numeric operands, concatenation).
//! Parameter types can be given, partially given, or left as variables; the
//! pipeline type checker shares one [`Unifier`] across all kernels of a
//! program.

use thiserror::Error;

use crate::lexer::Span;
use crate::values::{type_of, DataType};

use super::{BinOp, Builtin, Expr, ExprKind, UnOp};

/// Function type of a lambda kernel.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct KernelType {
    pub params: Vec<DataType>,
    pub result: DataType,
}

#[derive(Debug, Clone, Error, PartialEq)]
#[error("{span}: {message}")]
pub struct KernelTypeError {
    pub span: Span,
    pub message: String,
}

impl KernelTypeError {
    fn new(span: Span, message: impl Into<String>) -> Self {
        KernelTypeError {
            span,
            message: message.into(),
        }
    }
}

#[derive(Debug, Clone)]
enum Pending {
    Numeric(DataType, Span),
    Proj {
        tuple: DataType,
        index: usize,
        result: DataType,
        span: Span,
    },
    Concat(DataType, Span),
}

enum Progress {
    Done,
    Stuck,
}

#[derive(Debug, Clone, Default)]
pub struct Unifier {
    bindings: Vec<Option<DataType>>,
    pending: Vec<Pending>,
}

impl Unifier {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn fresh(&mut self) -> DataType {
        self.bindings.push(None);
        DataType::Var(self.bindings.len() as u32 - 1)
    }

    fn shallow(&self, t: &DataType) -> DataType {
        let mut t = t.clone();
        while let DataType::Var(v) = t {
            match &self.bindings[v as usize] {
                Some(b) => t = b.clone(),
                None => break,
            }
        }
        t
    }

    /// Replaces every `⊥` in `t` with a fresh variable, so that an empty
    /// list's element type can be learned from later uses.
    pub fn instantiate(&mut self, t: &DataType) -> DataType {
        match t {
            DataType::Bottom => self.fresh(),
            DataType::Tuple(ts) => DataType::Tuple(ts.iter().map(|t| self.instantiate(t)).collect()),
            DataType::List(e) => DataType::list(self.instantiate(e)),
            other => other.clone(),
        }
    }

    /// Fully substitutes bound variables.
    pub fn resolve(&self, t: &DataType) -> DataType {
        match self.shallow(t) {
            DataType::Tuple(ts) => DataType::Tuple(ts.iter().map(|t| self.resolve(t)).collect()),
            DataType::List(e) => DataType::list(self.resolve(&e)),
            other => other,
        }
    }

    fn occurs(&self, v: u32, t: &DataType) -> bool {
        match self.shallow(t) {
            DataType::Var(w) => v == w,
            DataType::Tuple(ts) => ts.iter().any(|t| self.occurs(v, t)),
            DataType::List(e) => self.occurs(v, &e),
            _ => false,
        }
    }

    /// Unifies two types; on failure returns the resolved pair.
    pub fn unify(&mut self, a: &DataType, b: &DataType) -> Result<(), (DataType, DataType)> {
        let fail = |u: &Self| Err((u.resolve(a), u.resolve(b)));
        match (self.shallow(a), self.shallow(b)) {
            (DataType::Var(x), DataType::Var(y)) if x == y => Ok(()),
            (DataType::Var(x), t) | (t, DataType::Var(x)) => {
                if self.occurs(x, &t) {
                    return fail(self);
                }
                self.bindings[x as usize] = Some(t);
                Ok(())
            }
            (DataType::Bottom, _) | (_, DataType::Bottom) => Ok(()),
            (DataType::Tuple(xs), DataType::Tuple(ys)) => {
                if xs.len() != ys.len() {
                    return fail(self);
                }
                for (x, y) in xs.iter().zip(&ys) {
                    if self.unify(x, y).is_err() {
                        return fail(self);
                    }
                }
                Ok(())
            }
            (DataType::List(x), DataType::List(y)) => {
                if self.unify(&x, &y).is_err() {
                    return fail(self);
                }
                Ok(())
            }
            (x, y) if x == y => Ok(()),
            _ => fail(self),
        }
    }

    fn unify_at(&mut self, span: Span, expected: &DataType, found: &DataType) -> Result<(), KernelTypeError> {
        self.unify(expected, found).map_err(|(e, f)| {
            KernelTypeError::new(span, format!("type mismatch: expected {e}, found {f}"))
        })?;
        self.solve()
    }

    fn defer(&mut self, p: Pending) -> Result<(), KernelTypeError> {
        self.pending.push(p);
        self.solve()
    }

    /// Discharges every deferred constraint whose subject is now resolved.
    pub fn solve(&mut self) -> Result<(), KernelTypeError> {
        loop {
            let mut progressed = false;
            let pending = std::mem::take(&mut self.pending);
            let mut keep = Vec::new();
            for p in pending {
                match self.step(&p)? {
                    Progress::Done => progressed = true,
                    Progress::Stuck => keep.push(p),
                }
            }
            self.pending.extend(keep);
            if !progressed {
                return Ok(());
            }
        }
    }

    fn step(&mut self, p: &Pending) -> Result<Progress, KernelTypeError> {
        match p {
            Pending::Numeric(t, span) => match self.shallow(t) {
                DataType::Int | DataType::Float | DataType::Bottom => Ok(Progress::Done),
                DataType::Var(_) => Ok(Progress::Stuck),
                other => Err(KernelTypeError::new(
                    *span,
                    format!("expected a numeric type (int or float), found {}", self.resolve(&other)),
                )),
            },
            Pending::Concat(t, span) => match self.shallow(t) {
                DataType::Str | DataType::List(_) | DataType::Bottom => Ok(Progress::Done),
                DataType::Var(_) => Ok(Progress::Stuck),
                other => Err(KernelTypeError::new(
                    *span,
                    format!("concat expects strings or lists, found {}", self.resolve(&other)),
                )),
            },
            Pending::Proj {
                tuple,
                index,
                result,
                span,
            } => match self.shallow(tuple) {
                DataType::Tuple(ts) => {
                    let Some(component) = ts.get(index - 1) else {
                        return Err(KernelTypeError::new(
                            *span,
                            format!(
                                "projection pi{index} out of range for {}",
                                self.resolve(tuple)
                            ),
                        ));
                    };
                    let component = component.clone();
                    self.unify(result, &component).map_err(|(r, c)| {
                        KernelTypeError::new(
                            *span,
                            format!("type mismatch: pi{index} yields {c}, expected {r}"),
                        )
                    })?;
                    Ok(Progress::Done)
                }
                DataType::Var(_) => Ok(Progress::Stuck),
                DataType::Bottom => Ok(Progress::Done),
                other => Err(KernelTypeError::new(
                    *span,
                    format!("projection pi{index} applied to non-tuple {}", self.resolve(&other)),
                )),
            },
        }
    }

    /// Infers the result type of lambda `e` applied to `params`.
    pub fn infer_lambda(&mut self, e: &Expr, params: &[DataType]) -> Result<DataType, KernelTypeError> {
        let ExprKind::Lambda(names, body) = &e.kind else {
            return Err(KernelTypeError::new(e.span, "expected a function (lambda)"));
        };
        if names.len() != params.len() {
            return Err(KernelTypeError::new(
                e.span,
                format!(
                    "kernel takes {} parameter(s), operator supplies {}",
                    names.len(),
                    params.len()
                ),
            ));
        }
        let params: Vec<DataType> = params.iter().map(|p| self.instantiate(p)).collect();
        let mut env: Vec<(String, DataType)> = names.iter().cloned().zip(params).collect();
        let t = self.infer(body, &mut env)?;
        self.solve()?;
        Ok(t)
    }

    /// Infers the type of a closed, non-function expression.
    pub fn infer_closed(&mut self, e: &Expr) -> Result<DataType, KernelTypeError> {
        let t = self.infer(e, &mut Vec::new())?;
        self.solve()?;
        Ok(t)
    }

    fn infer(&mut self, e: &Expr, env: &mut Vec<(String, DataType)>) -> Result<DataType, KernelTypeError> {
        let span = e.span;
        match &e.kind {
            ExprKind::Lit(v) => {
                let t = type_of(v).map_err(|err| KernelTypeError::new(span, err.to_string()))?;
                Ok(self.instantiate(&t))
            }
            ExprKind::Var(name) => env
                .iter()
                .rev()
                .find(|(n, _)| n == name)
                .map(|(_, t)| t.clone())
                .ok_or_else(|| KernelTypeError::new(span, format!("unbound variable `{name}`"))),
            ExprKind::Lambda(..) => Err(KernelTypeError::new(
                span,
                "functions are not values; a lambda may only be applied or passed to list-map",
            )),
            ExprKind::Tuple(items) => Ok(DataType::Tuple(
                items.iter().map(|i| self.infer(i, env)).collect::<Result<_, _>>()?,
            )),
            ExprKind::List(items) => {
                let elem = self.fresh();
                for item in items {
                    let t = self.infer(item, env)?;
                    self.unify_at(item.span, &elem, &t)?;
                }
                Ok(DataType::list(elem))
            }
            ExprKind::Proj(index, inner) => {
                let tuple = self.infer(inner, env)?;
                let result = self.fresh();
                self.defer(Pending::Proj {
                    tuple,
                    index: *index,
                    result: result.clone(),
                    span,
                })?;
                Ok(result)
            }
            ExprKind::Unary(UnOp::Neg, inner) => {
                let t = self.infer(inner, env)?;
                self.defer(Pending::Numeric(t.clone(), span))?;
                Ok(t)
            }
            ExprKind::Unary(UnOp::Not, inner) => {
                let t = self.infer(inner, env)?;
                self.unify_at(inner.span, &DataType::Bool, &t)?;
                Ok(DataType::Bool)
            }
            ExprKind::Binary(op, l, r) => {
                let lt = self.infer(l, env)?;
                let rt = self.infer(r, env)?;
                match op {
                    BinOp::And | BinOp::Or => {
                        self.unify_at(l.span, &DataType::Bool, &lt)?;
                        self.unify_at(r.span, &DataType::Bool, &rt)?;
                        Ok(DataType::Bool)
                    }
                    BinOp::Add | BinOp::Sub | BinOp::Mul | BinOp::Div => {
                        self.unify_at(r.span, &lt, &rt)?;
                        self.defer(Pending::Numeric(lt.clone(), span))?;
                        Ok(lt)
                    }
                    _ => {
                        self.unify_at(r.span, &lt, &rt)?;
                        Ok(DataType::Bool)
                    }
                }
            }
            ExprKind::If(c, t, f) => {
                let ct = self.infer(c, env)?;
                self.unify_at(c.span, &DataType::Bool, &ct)?;
                let tt = self.infer(t, env)?;
                let ft = self.infer(f, env)?;
                self.unify_at(f.span, &tt, &ft)?;
                Ok(tt)
            }
            ExprKind::Apply(head, args) => {
                let ExprKind::Lambda(names, body) = &head.kind else {
                    return Err(KernelTypeError::new(head.span, "only lambdas can be applied"));
                };
                if names.len() != args.len() {
                    return Err(KernelTypeError::new(
                        span,
                        format!("lambda takes {} argument(s), given {}", names.len(), args.len()),
                    ));
                }
                let arg_types = args.iter().map(|a| self.infer(a, env)).collect::<Result<Vec<_>, _>>()?;
                let base = env.len();
                env.extend(names.iter().cloned().zip(arg_types));
                let t = self.infer(body, env);
                env.truncate(base);
                t
            }
            ExprKind::Call(b, args) => self.infer_call(*b, args, span, env),
        }
    }

    fn infer_call(
        &mut self,
        b: Builtin,
        args: &[Expr],
        span: Span,
        env: &mut Vec<(String, DataType)>,
    ) -> Result<DataType, KernelTypeError> {
        if args.len() != b.arity() {
            return Err(KernelTypeError::new(
                span,
                format!("`{}` takes {} argument(s), given {}", b.name(), b.arity(), args.len()),
            ));
        }
        if b == Builtin::ListMap {
            let ExprKind::Lambda(names, body) = &args[0].kind else {
                return Err(KernelTypeError::new(args[0].span, "list-map expects a lambda as first argument"));
            };
            if names.len() != 1 {
                return Err(KernelTypeError::new(args[0].span, "list-map expects a one-parameter lambda"));
            }
            let xs = self.infer(&args[1], env)?;
            let elem = self.fresh();
            self.unify_at(args[1].span, &DataType::list(elem.clone()), &xs)?;
            env.push((names[0].clone(), elem));
            let out = self.infer(body, env);
            env.pop();
            return Ok(DataType::list(out?));
        }
        let ts = args.iter().map(|a| self.infer(a, env)).collect::<Result<Vec<_>, _>>()?;
        match b {
            Builtin::Min | Builtin::Max => {
                self.unify_at(args[1].span, &ts[0], &ts[1])?;
                Ok(ts[0].clone())
            }
            Builtin::Concat => {
                self.unify_at(args[1].span, &ts[0], &ts[1])?;
                self.defer(Pending::Concat(ts[0].clone(), span))?;
                Ok(ts[0].clone())
            }
            Builtin::Split => {
                self.unify_at(args[0].span, &DataType::Str, &ts[0])?;
                Ok(DataType::list(DataType::Str))
            }
            Builtin::ToFloat => {
                self.defer(Pending::Numeric(ts[0].clone(), args[0].span))?;
                Ok(DataType::Float)
            }
            Builtin::SetFluctuation => {
                let elem = self.fresh();
                self.unify_at(args[0].span, &DataType::list(elem.clone()), &ts[0])?;
                self.defer(Pending::Numeric(elem, args[0].span))?;
                Ok(DataType::Float)
            }
            Builtin::ListMap => unreachable!(),
        }
    }
}

/// Infers the principal result type of lambda `e` given its parameter types.
pub fn infer_kernel_type(e: &Expr, params: &[DataType]) -> Result<KernelType, KernelTypeError> {
    let mut u = Unifier::new();
    let result = u.infer_lambda(e, params)?;
    Ok(KernelType {
        params: params.iter().map(|p| u.resolve(p)).collect(),
        result: u.resolve(&result),
    })
}
