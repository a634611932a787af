//! Parser for `.pico` programs.
//!
//! A program is a sequence of declarations:
//!
//! ```text
//! kernel f = \l. list-map (\w. (w, 1)) (split l)
//! tokenize = flatmap f
//! keyed-sum = p reduce (\x y. (pi1 x, pi2 x + pi2 y)) by pi1
//! word-count = new tokenize | new keyed-sum
//! entry word-count
//! ```
//!
//! `|` is linear `to`, `+` is `merge` (binding tighter than `|`);
//! `to(p; p1, p2)` and `pair(p1, p2, op)` are the general forms. Without an
//! `entry` line the last pipeline declaration is the entry point. Names may
//! be used before their declaration, except kernel names.

use std::collections::{BTreeMap, HashMap};
use std::fmt;

use thiserror::Error;

use crate::ast::{OpKind, Operator, Pairing, Pipeline, PipelineKind, Sink, Source};
use crate::collections::{CollectionType, StructureType, WindowBasis, WindowingPolicy};
use crate::kernel::{parse_kernel_atom, parse_kernel_expr, Builtin, Expr};
use crate::lexer::{Cursor, Span, SyntaxError, Tok};
use crate::values::DataType;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum ParseError {
    #[error(transparent)]
    Syntax(#[from] SyntaxError),
    #[error("{span}: unresolved name `{name}`")]
    Unresolved { name: String, span: Span },
    #[error("{span}: `{name}` is already declared")]
    Duplicate { name: String, span: Span },
    #[error("{span}: `{name}` is defined in terms of itself")]
    Cycle { name: String, span: Span },
    #[error("{span}: {message}")]
    Invalid { span: Span, message: String },
    #[error("program declares no pipeline")]
    NoPipeline,
}

impl ParseError {
    pub fn span(&self) -> Span {
        match self {
            ParseError::Syntax(e) => e.span,
            ParseError::Unresolved { span, .. }
            | ParseError::Duplicate { span, .. }
            | ParseError::Cycle { span, .. }
            | ParseError::Invalid { span, .. } => *span,
            ParseError::NoPipeline => Span::default(),
        }
    }
}

/// A parsed program with all names resolved: every pipeline is a tree with
/// operators inlined.
#[derive(Debug, Clone, PartialEq)]
pub struct Program {
    pub operators: Vec<(String, Operator)>,
    pub pipelines: Vec<(String, Pipeline)>,
    pub entry: String,
}

impl Program {
    pub fn pipeline(&self, name: &str) -> Option<&Pipeline> {
        self.pipelines.iter().find(|(n, _)| n == name).map(|(_, p)| p)
    }

    pub fn operator(&self, name: &str) -> Option<&Operator> {
        self.operators.iter().find(|(n, _)| n == name).map(|(_, o)| o)
    }

    pub fn entry_pipeline(&self) -> &Pipeline {
        self.pipeline(&self.entry).expect("entry is resolved at parse time")
    }
}

/// Prints a program that parses back to an equal one.
impl fmt::Display for Program {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (name, op) in &self.operators {
            writeln!(f, "{name} = {op}")?;
        }
        for (name, p) in &self.pipelines {
            writeln!(f, "{name} = {p}")?;
        }
        writeln!(f, "entry {}", self.entry)
    }
}

const KEYWORDS: &[&str] = &[
    "new", "to", "pair", "entry", "kernel", "as", "of", "by", "win", "w", "p", "wp",
];

const FAMILIES: &[&str] = &[
    "map",
    "flatmap",
    "reduce",
    "fold+reduce",
    "zip-map",
    "zip-flatmap",
    "zip-reduce",
    "zip-fold+reduce",
    "join-map",
    "join-flatmap",
    "join-reduce",
    "join-fold+reduce",
    "from-file",
    "from-socket",
    "from-replay",
    "to-file",
    "to-socket",
    "to-stdout",
];

fn is_family(tok: &Tok) -> bool {
    matches!(tok, Tok::Ident(w) if FAMILIES.contains(&w.as_str()))
}

fn is_modifier(tok: &Tok) -> bool {
    matches!(tok, Tok::Ident(w) if w == "w" || w == "p" || w == "wp")
}

fn starts_operator(cur: &Cursor, at: usize) -> bool {
    let mut i = at;
    while is_modifier(cur.peek_at(i)) {
        i += 1;
    }
    is_family(cur.peek_at(i))
}

#[derive(Debug, Clone)]
enum RawOp {
    Ref(String, Span),
    Inline(Operator),
}

#[derive(Debug, Clone)]
enum RawPipe {
    Ref(String, Span),
    New(RawOp, Span),
    To(Box<RawPipe>, Vec<RawPipe>, Span),
    Pair(Box<RawPipe>, Box<RawPipe>, RawOp, Span),
    Merge(Box<RawPipe>, Box<RawPipe>, Span),
}

#[derive(Debug, Clone)]
enum Decl {
    Op(RawOp),
    Pipe(RawPipe),
}

pub fn parse_program(src: &str) -> Result<Program, ParseError> {
    let mut cur = Cursor::new(src)?;
    let mut kernels: HashMap<String, Expr> = HashMap::new();
    let mut decls: Vec<(String, Span, Decl)> = Vec::new();
    let mut declared: HashMap<String, Span> = HashMap::new();
    let mut entry: Option<(String, Span)> = None;

    while !cur.at_eof() {
        if cur.eat_ident("entry") {
            let (name, span) = cur.any_ident()?;
            if entry.is_some() {
                return Err(ParseError::Invalid {
                    span,
                    message: "more than one `entry` line".into(),
                });
            }
            entry = Some((name, span));
            continue;
        }
        let is_kernel = cur.eat_ident("kernel");
        let (name, span) = cur.any_ident()?;
        check_name(&name, span)?;
        if declared.insert(name.clone(), span).is_some() {
            return Err(ParseError::Duplicate { name, span });
        }
        cur.expect(&Tok::Eq)?;
        if is_kernel {
            let e = parse_kernel_expr(&mut cur)?;
            kernels.insert(name, e);
            continue;
        }
        let operator_decl = starts_operator(&cur, 0)
            || (matches!(cur.peek(), Tok::LParen) && starts_operator(&cur, 1));
        let decl = if operator_decl {
            Decl::Op(RawOp::Inline(parse_operator(&mut cur, &kernels)?))
        } else {
            Decl::Pipe(parse_pipe(&mut cur, &kernels)?)
        };
        decls.push((name, span, decl));
    }

    Resolver::new(decls, entry)?.finish()
}

fn check_name(name: &str, span: Span) -> Result<(), ParseError> {
    if KEYWORDS.contains(&name) || FAMILIES.contains(&name) || Builtin::from_name(name).is_some() {
        Err(ParseError::Invalid {
            span,
            message: format!("`{name}` is a reserved word"),
        })
    } else {
        Ok(())
    }
}

fn parse_pipe(cur: &mut Cursor, kernels: &HashMap<String, Expr>) -> Result<RawPipe, ParseError> {
    let mut lhs = parse_merge(cur, kernels)?;
    while matches!(cur.peek(), Tok::Pipe) {
        let span = cur.next().span;
        let rhs = parse_merge(cur, kernels)?;
        lhs = RawPipe::To(Box::new(lhs), vec![rhs], span);
    }
    Ok(lhs)
}

fn parse_merge(cur: &mut Cursor, kernels: &HashMap<String, Expr>) -> Result<RawPipe, ParseError> {
    let mut lhs = parse_pipe_atom(cur, kernels)?;
    while matches!(cur.peek(), Tok::Plus) {
        let span = cur.next().span;
        let rhs = parse_pipe_atom(cur, kernels)?;
        lhs = RawPipe::Merge(Box::new(lhs), Box::new(rhs), span);
    }
    Ok(lhs)
}

fn parse_pipe_atom(cur: &mut Cursor, kernels: &HashMap<String, Expr>) -> Result<RawPipe, ParseError> {
    let span = cur.span();
    if cur.eat_ident("new") {
        return Ok(RawPipe::New(parse_op_ref(cur, kernels)?, span));
    }
    if cur.is_ident("to") && matches!(cur.peek_at(1), Tok::LParen) {
        cur.next();
        cur.next();
        let src = parse_pipe(cur, kernels)?;
        cur.expect(&Tok::Semi)?;
        let mut dests = vec![parse_pipe(cur, kernels)?];
        while cur.eat(&Tok::Comma) {
            dests.push(parse_pipe(cur, kernels)?);
        }
        cur.expect(&Tok::RParen)?;
        return Ok(RawPipe::To(Box::new(src), dests, span));
    }
    if cur.is_ident("pair") && matches!(cur.peek_at(1), Tok::LParen) {
        cur.next();
        cur.next();
        let a = parse_pipe(cur, kernels)?;
        cur.expect(&Tok::Comma)?;
        let b = parse_pipe(cur, kernels)?;
        cur.expect(&Tok::Comma)?;
        let op = parse_op_ref(cur, kernels)?;
        cur.expect(&Tok::RParen)?;
        return Ok(RawPipe::Pair(Box::new(a), Box::new(b), op, span));
    }
    if cur.eat(&Tok::LParen) {
        let p = parse_pipe(cur, kernels)?;
        cur.expect(&Tok::RParen)?;
        return Ok(p);
    }
    if let Tok::Ident(name) = cur.peek().clone() {
        if !KEYWORDS.contains(&name.as_str()) && !FAMILIES.contains(&name.as_str()) {
            cur.next();
            return Ok(RawPipe::Ref(name, span));
        }
    }
    Err(cur.unexpected("a pipeline (`new`, `to(`, `pair(`, `(` or a pipeline name)").into())
}

fn parse_op_ref(cur: &mut Cursor, kernels: &HashMap<String, Expr>) -> Result<RawOp, ParseError> {
    if starts_operator(cur, 0) || (matches!(cur.peek(), Tok::LParen) && starts_operator(cur, 1)) {
        return Ok(RawOp::Inline(parse_operator(cur, kernels)?));
    }
    let (name, span) = cur.any_ident().map_err(|_| cur.unexpected("an operator or operator name"))?;
    Ok(RawOp::Ref(name, span))
}

fn parse_operator(cur: &mut Cursor, kernels: &HashMap<String, Expr>) -> Result<Operator, ParseError> {
    if cur.eat(&Tok::LParen) {
        let op = parse_operator(cur, kernels)?;
        cur.expect(&Tok::RParen)?;
        return Ok(op);
    }
    let span = cur.span();
    let (mut windowed, mut partitioned) = (false, false);
    while is_modifier(cur.peek()) {
        let (m, mspan) = cur.any_ident()?;
        let (w, p) = (m.contains('w'), m.contains('p'));
        if (w && windowed) || (p && partitioned) {
            return Err(SyntaxError::new(mspan, format!("repeated modifier `{m}`")).into());
        }
        windowed |= w;
        partitioned |= p;
    }
    let (family, fspan) = cur.any_ident()?;
    let kind = match family.as_str() {
        "map" => OpKind::Map(kernel_arg(cur, kernels)?),
        "flatmap" => OpKind::FlatMap(kernel_arg(cur, kernels)?),
        "reduce" => OpKind::Reduce(kernel_arg(cur, kernels)?),
        "fold+reduce" => fold_reduce(cur, kernels)?,
        "from-file" => OpKind::Emit(Source::File(string_arg(cur)?), collection_type(cur)?),
        "from-replay" => OpKind::Emit(Source::Replay(string_arg(cur)?), collection_type(cur)?),
        "from-socket" => OpKind::Emit(Source::Socket(endpoint_arg(cur)?), collection_type(cur)?),
        "to-file" => OpKind::Collect(Sink::File(string_arg(cur)?), collection_type(cur)?),
        "to-socket" => OpKind::Collect(Sink::Socket(endpoint_arg(cur)?), collection_type(cur)?),
        "to-stdout" => OpKind::Collect(Sink::Stdout, collection_type(cur)?),
        other => {
            let (pairing, rest) = if let Some(rest) = other.strip_prefix("zip-") {
                (Pairing::Zip, rest)
            } else if let Some(rest) = other.strip_prefix("join-") {
                (Pairing::Join, rest)
            } else {
                return Err(SyntaxError::new(fspan, format!("unknown operator family `{other}`")).into());
            };
            match rest {
                "map" | "flatmap" => OpKind::BMap {
                    pairing,
                    f: kernel_arg(cur, kernels)?,
                    flat: rest == "flatmap",
                },
                "reduce" => OpKind::BCombine {
                    pairing,
                    inner: Box::new(OpKind::Reduce(kernel_arg(cur, kernels)?)),
                },
                "fold+reduce" => OpKind::BCombine {
                    pairing,
                    inner: Box::new(fold_reduce(cur, kernels)?),
                },
                _ => return Err(SyntaxError::new(fspan, format!("unknown operator family `{other}`")).into()),
            }
        }
    };
    let mut op = Operator::new(kind);
    op.span = span;
    if cur.is_ident("by") {
        let by = cur.next().span;
        if !partitioned {
            return Err(SyntaxError::new(by, "`by` needs the `p` modifier (e.g. `p reduce … by pi1`)").into());
        }
        op.partition = Some(kernel_arg(cur, kernels)?);
    } else if partitioned {
        return Err(cur.unexpected("`by <partitioning kernel>` after a `p` operator").into());
    }
    if cur.is_ident("win") {
        let win = cur.next().span;
        if !windowed {
            return Err(SyntaxError::new(win, "`win` needs the `w` modifier (e.g. `w reduce … win (10, 5, count)`)").into());
        }
        op.window = Some(window_policy(cur)?);
    } else if windowed {
        return Err(cur.unexpected("`win (size, slide, count|time)` after a `w` operator").into());
    }
    Ok(op)
}

fn fold_reduce(cur: &mut Cursor, kernels: &HashMap<String, Expr>) -> Result<OpKind, ParseError> {
    Ok(OpKind::FoldReduce {
        fold: kernel_arg(cur, kernels)?,
        init: kernel_arg(cur, kernels)?,
        combine: kernel_arg(cur, kernels)?,
    })
}

fn kernel_arg(cur: &mut Cursor, kernels: &HashMap<String, Expr>) -> Result<Expr, ParseError> {
    if let Tok::Ident(name) = cur.peek().clone() {
        if let Some(e) = kernels.get(&name) {
            cur.next();
            return Ok(e.clone());
        }
        let literal = matches!(name.as_str(), "true" | "false" | "unit" | "nan" | "inf");
        if !literal && Expr::eta(&name, Span::default()).is_none() {
            return Err(SyntaxError::new(
                cur.span(),
                format!("unknown kernel `{name}` (kernels must be declared before use)"),
            )
            .into());
        }
    }
    Ok(parse_kernel_atom(cur)?)
}

fn string_arg(cur: &mut Cursor) -> Result<String, ParseError> {
    match cur.peek().clone() {
        Tok::Str(s) => {
            cur.next();
            Ok(s)
        }
        _ => Err(cur.unexpected("a quoted path").into()),
    }
}

fn endpoint_arg(cur: &mut Cursor) -> Result<String, ParseError> {
    match cur.peek().clone() {
        Tok::Str(s) => {
            cur.next();
            Ok(s)
        }
        Tok::Ident(s) if !KEYWORDS.contains(&s.as_str()) => {
            cur.next();
            Ok(s)
        }
        _ => Err(cur.unexpected("a socket name or \"host:port\"").into()),
    }
}

fn collection_type(cur: &mut Cursor) -> Result<CollectionType, ParseError> {
    cur.expect_ident("as")?;
    let (s, span) = cur.any_ident()?;
    let structure = StructureType::from_name(&s)
        .ok_or_else(|| SyntaxError::new(span, format!("expected bag, list or stream, found `{s}`")))?;
    cur.expect_ident("of")?;
    let data = data_type(cur)?;
    Ok(CollectionType { data, structure })
}

/// Parses a data type: `int`, `float`, `str`, `bool`, `unit`,
/// `(t1, t2, …)` or `[t]`.
pub fn data_type(cur: &mut Cursor) -> Result<DataType, SyntaxError> {
    let span = cur.span();
    match cur.peek().clone() {
        Tok::Ident(w) => {
            let t = match w.as_str() {
                "int" => DataType::Int,
                "float" => DataType::Float,
                "str" => DataType::Str,
                "bool" => DataType::Bool,
                "unit" => DataType::Unit,
                _ => return Err(cur.unexpected("a data type")),
            };
            cur.next();
            Ok(t)
        }
        Tok::LBracket => {
            cur.next();
            let t = data_type(cur)?;
            cur.expect(&Tok::RBracket)?;
            Ok(DataType::list(t))
        }
        Tok::LParen => {
            cur.next();
            let mut ts = vec![data_type(cur)?];
            while cur.eat(&Tok::Comma) {
                ts.push(data_type(cur)?);
            }
            cur.expect(&Tok::RParen)?;
            if ts.len() < 2 {
                return Err(SyntaxError::new(span, "tuple types need at least two components"));
            }
            Ok(DataType::Tuple(ts))
        }
        _ => Err(cur.unexpected("a data type")),
    }
}

fn window_policy(cur: &mut Cursor) -> Result<WindowingPolicy, ParseError> {
    let span = cur.expect(&Tok::LParen)?;
    let size = positive(cur)?;
    cur.expect(&Tok::Comma)?;
    let slide = positive(cur)?;
    cur.expect(&Tok::Comma)?;
    let basis = if cur.eat_ident("count") {
        WindowBasis::Count
    } else if cur.eat_ident("time") {
        WindowBasis::Time
    } else {
        return Err(cur.unexpected("`count` or `time`").into());
    };
    cur.expect(&Tok::RParen)?;
    WindowingPolicy::new(size, slide, basis).map_err(|e| ParseError::Invalid {
        span,
        message: e.to_string(),
    })
}

fn positive(cur: &mut Cursor) -> Result<u64, ParseError> {
    match cur.peek().clone() {
        Tok::Int(n) if n > 0 => {
            cur.next();
            Ok(n)
        }
        _ => Err(cur.unexpected("a positive integer").into()),
    }
}

struct Resolver {
    decls: BTreeMap<String, (usize, Span, Decl)>,
    ops: HashMap<String, Operator>,
    pipes: HashMap<String, Pipeline>,
    visiting: Vec<String>,
    order: Vec<(String, bool)>,
    entry: Option<(String, Span)>,
}

impl Resolver {
    fn new(decls: Vec<(String, Span, Decl)>, entry: Option<(String, Span)>) -> Result<Self, ParseError> {
        let order = decls
            .iter()
            .map(|(n, _, d)| (n.clone(), matches!(d, Decl::Op(_))))
            .collect();
        Ok(Resolver {
            decls: decls
                .into_iter()
                .enumerate()
                .map(|(i, (n, s, d))| (n, (i, s, d)))
                .collect(),
            ops: HashMap::new(),
            pipes: HashMap::new(),
            visiting: Vec::new(),
            order,
            entry,
        })
    }

    fn finish(mut self) -> Result<Program, ParseError> {
        for (name, _) in self.order.clone() {
            self.resolve_name(&name, Span::default())?;
        }
        let entry = match self.entry.take() {
            Some((name, span)) => {
                if !self.pipes.contains_key(&name) {
                    return Err(ParseError::Invalid {
                        span,
                        message: format!("entry `{name}` is not a declared pipeline"),
                    });
                }
                name
            }
            None => self
                .order
                .iter()
                .rev()
                .find(|(_, is_op)| !is_op)
                .map(|(n, _)| n.clone())
                .ok_or(ParseError::NoPipeline)?,
        };
        let mut operators = Vec::new();
        let mut pipelines = Vec::new();
        for (name, is_op) in &self.order {
            if *is_op {
                operators.push((name.clone(), self.ops[name].clone()));
            } else {
                pipelines.push((name.clone(), self.pipes[name].clone()));
            }
        }
        Ok(Program {
            operators,
            pipelines,
            entry,
        })
    }

    fn resolve_name(&mut self, name: &str, at: Span) -> Result<(), ParseError> {
        if self.ops.contains_key(name) || self.pipes.contains_key(name) {
            return Ok(());
        }
        let Some((_, span, decl)) = self.decls.get(name).cloned() else {
            return Err(ParseError::Unresolved {
                name: name.to_string(),
                span: at,
            });
        };
        if self.visiting.iter().any(|n| n == name) {
            return Err(ParseError::Cycle {
                name: name.to_string(),
                span,
            });
        }
        self.visiting.push(name.to_string());
        match decl {
            Decl::Op(raw) => {
                let op = self.op(&raw)?.named(name);
                self.ops.insert(name.to_string(), op);
            }
            Decl::Pipe(raw) => {
                let p = self.pipe(&raw)?;
                self.pipes.insert(name.to_string(), p);
            }
        }
        self.visiting.pop();
        Ok(())
    }

    fn op(&mut self, raw: &RawOp) -> Result<Operator, ParseError> {
        match raw {
            RawOp::Inline(op) => Ok(op.clone()),
            RawOp::Ref(name, span) => {
                self.resolve_name(name, *span)?;
                match self.ops.get(name) {
                    Some(op) => Ok(op.clone()),
                    None => Err(ParseError::Invalid {
                        span: *span,
                        message: format!("`{name}` is a pipeline, expected an operator"),
                    }),
                }
            }
        }
    }

    fn pipe(&mut self, raw: &RawPipe) -> Result<Pipeline, ParseError> {
        Ok(match raw {
            RawPipe::Ref(name, span) => {
                self.resolve_name(name, *span)?;
                match self.pipes.get(name) {
                    Some(p) => p.clone(),
                    None => {
                        return Err(ParseError::Invalid {
                            span: *span,
                            message: format!("`{name}` is an operator; write `new {name}` to use it as a pipeline"),
                        })
                    }
                }
            }
            RawPipe::New(op, span) => Pipeline::new(self.op(op)?).with_span(*span),
            RawPipe::To(p, ds, span) => {
                let p = self.pipe(p)?;
                let ds = ds.iter().map(|d| self.pipe(d)).collect::<Result<_, _>>()?;
                Pipeline::from_kind(PipelineKind::To(Box::new(p), ds)).with_span(*span)
            }
            RawPipe::Pair(a, b, op, span) => {
                let (a, b) = (self.pipe(a)?, self.pipe(b)?);
                let op = self.op(op)?;
                if !op.kind.is_binary() {
                    return Err(ParseError::Invalid {
                        span: *span,
                        message: format!("`pair` needs a binary operator (zip-/join-), found `{}`", op.family()),
                    });
                }
                Pipeline::pair(a, b, op).with_span(*span)
            }
            RawPipe::Merge(a, b, span) => Pipeline::merge(self.pipe(a)?, self.pipe(b)?).with_span(*span),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const WORD_COUNT: &str = r#"
        # word count
        kernel f = \l. list-map (\w. (w, 1)) (split l)
        kernel plus = \x y. (pi1 x, pi2 x + pi2 y)
        tokenize = flatmap f
        keyed-sum = p reduce plus by pi1
        file-read = from-file "input.txt" as bag of str
        file-write = to-file "output.txt" as bag of (str, int)
        word-count = new tokenize | new keyed-sum
        file-word-count = new file-read | word-count | new file-write
    "#;

    #[test]
    fn word_count_program() {
        let prog = parse_program(WORD_COUNT).unwrap();
        assert_eq!(prog.operators.len(), 4);
        assert_eq!(prog.pipelines.len(), 2);
        assert_eq!(prog.entry, "file-word-count");
        let labels: Vec<String> = prog.entry_pipeline().operators().iter().map(|o| o.label()).collect();
        assert_eq!(labels, ["file-read", "tokenize", "keyed-sum", "file-write"]);
        let keyed = prog.operator("keyed-sum").unwrap();
        assert!(keyed.partition.is_some() && keyed.window.is_none());
    }

    #[test]
    fn merge_of_sockets() {
        let prog = parse_program(
            "read-prices = new from-socket s1 as stream of (str, float) + new from-socket s2 as stream of (str, float)",
        )
        .unwrap();
        let p = prog.entry_pipeline();
        let PipelineKind::Merge(a, b) = &p.kind else { panic!("{p:?}") };
        assert!(matches!(&a.kind, PipelineKind::New(op) if matches!(op.kind, OpKind::Emit(Source::Socket(ref s), _) if s == "s1")));
        assert!(matches!(&b.kind, PipelineKind::New(_)));
    }

    #[test]
    fn windowed_partitioned_reduce() {
        let prog = parse_program("p1 = new (w p reduce min by pi1 win (10,5,count))").unwrap();
        let PipelineKind::New(op) = &prog.entry_pipeline().kind else { panic!() };
        assert_eq!(op.window, Some(WindowingPolicy::new(10, 5, WindowBasis::Count).unwrap()));
        assert_eq!(op.partition, Expr::eta("pi1", Span::default()));
        assert!(matches!(op.kind, OpKind::Reduce(_)));
    }

    #[test]
    fn general_forms() {
        let src = r#"
            src = new from-file "a" as list of int
            both = to(src; new to-stdout as list of int, new (map (\x. x + 1)) | new to-stdout as list of int)
            z = pair(src, new from-file "b" as list of int, zip-map (\x y. x + y))
            entry both
        "#;
        let prog = parse_program(src).unwrap();
        assert!(matches!(&prog.entry_pipeline().kind, PipelineKind::To(_, ds) if ds.len() == 2));
        assert!(matches!(&prog.pipeline("z").unwrap().kind, PipelineKind::Pair(..)));
    }

    #[test]
    fn errors() {
        let err = |src: &str| parse_program(src).unwrap_err();
        assert!(matches!(err("a = new b"), ParseError::Unresolved { .. }));
        assert!(matches!(err("a = new (map pi1)\na = new (map pi2)"), ParseError::Duplicate { .. }));
        assert!(matches!(err("a = b | new (map pi1)\nb = a"), ParseError::Cycle { .. }));
        assert!(matches!(err("a = map pi1"), ParseError::NoPipeline));
        assert!(matches!(err("x = map pi1\na = x"), ParseError::Invalid { .. }));
        assert!(matches!(err("a = new (reduce min by pi1)"), ParseError::Syntax(_)));
        assert!(matches!(err("a = new (w reduce min)"), ParseError::Syntax(_)));
        assert!(matches!(err("a = new (map f)"), ParseError::Syntax(_)));
        assert!(matches!(err("a = pair(new (map pi1), new (map pi1), map pi1)"), ParseError::Invalid { .. }));
        let e = err("a = new (map (\\x. x +))");
        assert_eq!((e.span().line, e.span().col), (1, 22));
    }

    #[test]
    fn printing_round_trips() {
        let prog = parse_program(WORD_COUNT).unwrap();
        let again = parse_program(&prog.to_string()).unwrap();
        assert_eq!(prog, again);
    }
}
