//! Operator and pipeline typing.
//!
//! Data types are inferred by unification (kernels and pipelines share one
//! [`Unifier`]); structure types are tracked as sets of admissible σ,
//! intersected along composition.

use std::collections::HashMap;
use std::fmt;

use thiserror::Error;

use crate::ast::{OpKind, Operator, Pairing, Pipeline, PipelineKind};
use crate::collections::{StructureSet, StructureType};
use crate::kernel::{Expr, KernelTypeError, Unifier};
use crate::lexer::Span;
use crate::parser::Program;
use crate::values::DataType;

/// A typing failure, citing the violated rule.
#[derive(Debug, Clone, Error, PartialEq)]
#[error("{span}: rule {rule}: {message}")]
pub struct TypeError {
    pub rule: String,
    pub span: Span,
    pub message: String,
}

impl TypeError {
    fn new(rule: &str, span: Span, message: impl Into<String>) -> Self {
        TypeError {
            rule: rule.to_string(),
            span,
            message: message.into(),
        }
    }

    /// `file:line:col: rule <name>: message`.
    pub fn render(&self, file: &str) -> String {
        format!("{file}:{self}")
    }
}

/// `⟨T, σ⟩? → ⟨U, σ⟩?` with the admissible σ.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct PipelineType {
    pub input: Option<DataType>,
    pub output: Option<DataType>,
    pub sigma: StructureSet,
}

impl PipelineType {
    pub fn is_top_level(&self) -> bool {
        self.input.is_none() && self.output.is_none()
    }
}

/// Operator signature: zero, one or two inputs, optional output.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct OperatorType {
    pub inputs: Vec<DataType>,
    pub output: Option<DataType>,
    pub sigma: StructureSet,
}

fn sigma_name(sigma: StructureSet) -> String {
    match sigma.as_single() {
        Some(s) => s.to_string(),
        None => "σ".to_string(),
    }
}

fn write_side(f: &mut fmt::Formatter<'_>, types: &[&DataType], sigma: StructureSet) -> fmt::Result {
    if types.is_empty() {
        return f.write_str("∅");
    }
    for (i, t) in types.iter().enumerate() {
        if i > 0 {
            f.write_str(" × ")?;
        }
        write!(f, "⟨{t}, {}⟩", sigma_name(sigma))?;
    }
    Ok(())
}

fn write_signature(
    f: &mut fmt::Formatter<'_>,
    inputs: &[&DataType],
    output: Option<&DataType>,
    sigma: StructureSet,
) -> fmt::Result {
    write_side(f, inputs, sigma)?;
    f.write_str(" → ")?;
    write_side(f, output.as_slice(), sigma)?;
    let has_collection = !inputs.is_empty() || output.is_some();
    if has_collection && sigma.as_single().is_none() {
        write!(f, ", ∀σ ∈ {sigma}")?;
    }
    Ok(())
}

impl fmt::Display for PipelineType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write_signature(f, self.input.as_slice().iter().collect::<Vec<_>>().as_slice(), self.output.as_ref(), self.sigma)
    }
}

impl fmt::Display for OperatorType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write_signature(f, &self.inputs.iter().collect::<Vec<_>>(), self.output.as_ref(), self.sigma)
    }
}

/// Renames type variables to `'a`, `'b`, … in order of first appearance.
struct Canon(HashMap<u32, u32>);

impl Canon {
    fn apply(&mut self, t: &DataType) -> DataType {
        match t {
            DataType::Var(v) => {
                let next = self.0.len() as u32;
                DataType::Var(*self.0.entry(*v).or_insert(next))
            }
            DataType::Tuple(ts) => DataType::Tuple(ts.iter().map(|t| self.apply(t)).collect()),
            DataType::List(e) => DataType::list(self.apply(e)),
            other => other.clone(),
        }
    }
}

#[derive(Debug, Clone)]
struct Sig {
    inputs: Vec<DataType>,
    output: Option<DataType>,
    sigma: StructureSet,
}

#[derive(Debug, Clone)]
struct Ty {
    input: Option<DataType>,
    output: Option<DataType>,
    sigma: StructureSet,
}

struct Checker {
    u: Unifier,
    occurrences: Vec<(String, Sig)>,
    /// Source offset and rule of every operator typed so far.
    rules: Vec<(usize, &'static str)>,
}

fn kernel_error(rule: &str, e: KernelTypeError) -> TypeError {
    TypeError::new(rule, e.span, format!("kernel: {}", e.message))
}

fn sigma_text(sigma: StructureSet) -> String {
    match sigma.as_single() {
        Some(s) => s.to_string(),
        None => sigma.to_string(),
    }
}

impl Checker {
    fn new() -> Self {
        Checker {
            u: Unifier::new(),
            occurrences: Vec::new(),
            rules: Vec::new(),
        }
    }

    fn show(&self, t: &DataType) -> String {
        Canon(HashMap::new()).apply(&self.u.resolve(t)).to_string()
    }

    fn unify(&mut self, rule: &str, span: Span, a: &DataType, b: &DataType, what: &str) -> Result<(), TypeError> {
        if self.u.unify(a, b).is_err() {
            return Err(TypeError::new(
                rule,
                span,
                format!("{what}: {} vs {}", self.show(a), self.show(b)),
            ));
        }
        self.u.solve().map_err(|e| {
            let owner = self
                .rules
                .iter()
                .filter(|(offset, _)| *offset <= e.span.offset)
                .max_by_key(|(offset, _)| *offset)
                .map_or(rule, |(_, r)| *r);
            kernel_error(owner, e)
        })
    }

    fn lambda(&mut self, rule: &str, k: &Expr, params: &[DataType]) -> Result<DataType, TypeError> {
        self.u.infer_lambda(k, params).map_err(|e| kernel_error(rule, e))
    }

    fn result_as(&mut self, rule: &str, k: &Expr, result: &DataType, expected: &DataType, what: &str) -> Result<(), TypeError> {
        self.unify(rule, k.span, expected, result, what)
    }

    /// Types a combine kernel set over elements of type `t`; returns the
    /// result element type.
    fn combine(&mut self, rule: &str, kind: &OpKind, t: &DataType) -> Result<DataType, TypeError> {
        match kind {
            OpKind::Reduce(k) => {
                let r = self.lambda(rule, k, &[t.clone(), t.clone()])?;
                self.result_as(rule, k, &r, t, "reduce kernel must have type T × T → T")?;
                Ok(t.clone())
            }
            OpKind::FoldReduce { fold, init, combine } => {
                let z = self.u.infer_closed(init).map_err(|e| kernel_error(rule, e))?;
                let s = self.u.instantiate(&z);
                let r1 = self.lambda(rule, fold, &[s.clone(), t.clone()])?;
                self.result_as(rule, fold, &r1, &s, "folding kernel must have type S × T → S")?;
                let r2 = self.lambda(rule, combine, &[s.clone(), s.clone()])?;
                self.result_as(rule, combine, &r2, &s, "combining kernel must have type S × S → S")?;
                Ok(s)
            }
            other => Err(TypeError::new(rule, Span::default(), format!("`{}` is not a combine operator", other.keyword()))),
        }
    }

    fn operator(&mut self, op: &Operator) -> Result<Sig, TypeError> {
        let op = op.normalize();
        let (rule, sigma) = operator_structure(&op);
        self.rules.push((op.span.offset, rule));
        let sig = match &op.kind {
            OpKind::Map(f) => {
                let t = self.u.fresh();
                let r = self.lambda(rule, f, &[t.clone()])?;
                Sig { inputs: vec![t], output: Some(r), sigma }
            }
            OpKind::FlatMap(f) => {
                let t = self.u.fresh();
                let r = self.lambda(rule, f, &[t.clone()])?;
                let e = self.u.fresh();
                self.result_as(rule, f, &r, &DataType::list(e.clone()), "flatmap kernel must return a list")?;
                Sig { inputs: vec![t], output: Some(e), sigma }
            }
            OpKind::Reduce(_) | OpKind::FoldReduce { .. } => {
                let t = self.u.fresh();
                let out = self.combine(rule, &op.kind, &t)?;
                if let Some(pi) = &op.partition {
                    self.lambda(rule, pi, &[t.clone()])?;
                }
                Sig { inputs: vec![t], output: Some(out), sigma }
            }
            OpKind::BMap { f, flat, .. } => {
                let (t, t2) = (self.u.fresh(), self.u.fresh());
                let r = self.lambda(rule, f, &[t.clone(), t2.clone()])?;
                let out = if *flat {
                    let e = self.u.fresh();
                    self.result_as(rule, f, &r, &DataType::list(e.clone()), "flatmap kernel must return a list")?;
                    e
                } else {
                    r
                };
                self.binary_partition(rule, &op, &t, &t2)?;
                Sig { inputs: vec![t, t2], output: Some(out), sigma }
            }
            OpKind::BCombine { inner, .. } => {
                let (t, t2) = (self.u.fresh(), self.u.fresh());
                let paired = DataType::tuple([t.clone(), t2.clone()]);
                let out = self.combine(rule, inner, &paired)?;
                self.binary_partition(rule, &op, &t, &t2)?;
                Sig { inputs: vec![t, t2], output: Some(out), sigma }
            }
            OpKind::Emit(_, ty) => Sig { inputs: vec![], output: Some(ty.data.clone()), sigma },
            OpKind::Collect(_, ty) => Sig { inputs: vec![ty.data.clone()], output: None, sigma },
        };
        if let Some(name) = &op.name {
            self.occurrences.push((name.clone(), sig.clone()));
        }
        Ok(sig)
    }

    fn binary_partition(&mut self, rule: &str, op: &Operator, t: &DataType, t2: &DataType) -> Result<(), TypeError> {
        if let Some(pi) = &op.partition {
            let k1 = self.lambda(rule, pi, &[t.clone()])?;
            let k2 = self.lambda(rule, pi, &[t2.clone()])?;
            self.unify(rule, pi.span, &k1, &k2, "partitioning keys of the two inputs differ")?;
        }
        Ok(())
    }

    fn pipeline(&mut self, p: &Pipeline) -> Result<Ty, TypeError> {
        match &p.kind {
            PipelineKind::New(op) => {
                if op.kind.is_binary() {
                    return Err(TypeError::new(
                        "new",
                        p.span,
                        format!("binary operator `{}` can only be used in `pair`", op.family()),
                    ));
                }
                let sig = self.operator(op)?;
                Ok(Ty {
                    input: sig.inputs.into_iter().next(),
                    output: sig.output,
                    sigma: sig.sigma,
                })
            }
            PipelineKind::To(src, dests) => {
                let s = self.pipeline(src)?;
                let dts = dests.iter().map(|d| self.pipeline(d)).collect::<Result<Vec<_>, _>>()?;
                let rule = if dts.iter().any(|d| d.output.is_some()) { "to" } else { "to∅" };
                let Some(u) = s.output.clone() else {
                    return Err(TypeError::new(rule, p.span, "the source pipeline has no output (∅) to send to its destinations"));
                };
                let mut sigma = s.sigma;
                let mut out: Option<DataType> = None;
                for (d, dt) in dests.iter().zip(&dts) {
                    let Some(input) = &dt.input else {
                        return Err(TypeError::new(rule, d.span, "destination pipeline takes no input (∅)"));
                    };
                    self.unify(rule, d.span, input, &u, "destination input type differs from source output")?;
                    let before = sigma;
                    sigma = sigma.intersect(dt.sigma);
                    if sigma.is_empty() {
                        if let Some(e) = blame(d, before) {
                            return Err(e);
                        }
                        return Err(TypeError::new(
                            rule,
                            d.span,
                            format!(
                                "no common structure type: source is {}, destination needs {}",
                                sigma_text(before),
                                sigma_text(dt.sigma)
                            ),
                        ));
                    }
                    if let Some(v) = &dt.output {
                        match &out {
                            None => out = Some(v.clone()),
                            Some(prev) => {
                                let prev = prev.clone();
                                self.unify("to", d.span, &prev, v, "destinations with output must share one output type")?;
                            }
                        }
                    }
                }
                Ok(Ty { input: s.input, output: out, sigma })
            }
            PipelineKind::Pair(a, b, op) => {
                let ta = self.pipeline(a)?;
                let tb = self.pipeline(b)?;
                let rule = if ta.input.is_none() && tb.input.is_some() { "pair'" } else { "pair" };
                if ta.input.is_some() && tb.input.is_some() {
                    return Err(TypeError::new(rule, p.span, "at least one of the paired pipelines must have void input (∅)"));
                }
                let sig = self.operator(op)?;
                for (side, t, input) in [(a, &ta, &sig.inputs[0]), (b, &tb, &sig.inputs[1])] {
                    let Some(out) = &t.output else {
                        return Err(TypeError::new(rule, side.span, "paired pipeline has no output (∅)"));
                    };
                    self.unify(rule, side.span, input, out, "paired output does not match the operator input")?;
                }
                let inputs = ta.sigma.intersect(tb.sigma);
                let sigma = inputs.intersect(sig.sigma);
                if sigma.is_empty() && !inputs.is_empty() {
                    let (op_rule, _) = operator_structure(op);
                    return Err(TypeError::new(
                        op_rule,
                        op.span,
                        format!("`{}` needs σ ∈ {} but is given {}", op.family(), sigma_text(sig.sigma), sigma_text(inputs)),
                    ));
                }
                if sigma.is_empty() {
                    return Err(TypeError::new(
                        rule,
                        p.span,
                        format!(
                            "no common structure type: inputs are {} and {}, `{}` needs {}",
                            sigma_text(ta.sigma),
                            sigma_text(tb.sigma),
                            op.family(),
                            sigma_text(sig.sigma)
                        ),
                    ));
                }
                Ok(Ty { input: ta.input.or(tb.input), output: sig.output, sigma })
            }
            PipelineKind::Merge(a, b) => {
                let ta = self.pipeline(a)?;
                let tb = self.pipeline(b)?;
                if ta.input.is_some() && tb.input.is_some() {
                    return Err(TypeError::new("merge", p.span, "at least one of the merged pipelines must have void input (∅)"));
                }
                let (Some(ua), Some(ub)) = (&ta.output, &tb.output) else {
                    return Err(TypeError::new("merge", p.span, "merged pipelines must both have output"));
                };
                self.unify("merge", p.span, ua, ub, "merged pipelines produce different types")?;
                let sigma = ta.sigma.intersect(tb.sigma);
                if sigma.is_empty() {
                    return Err(TypeError::new(
                        "merge",
                        p.span,
                        format!("no common structure type: {} vs {}", sigma_text(ta.sigma), sigma_text(tb.sigma)),
                    ));
                }
                Ok(Ty { input: ta.input.or(tb.input), output: ta.output, sigma })
            }
        }
    }

    fn finish_pipeline(&self, t: &Ty) -> PipelineType {
        let mut canon = Canon(HashMap::new());
        let input = t.input.as_ref().map(|d| canon.apply(&self.u.resolve(d)));
        let output = t.output.as_ref().map(|d| canon.apply(&self.u.resolve(d)));
        let sigma = if input.is_none() && output.is_none() { StructureSet::ALL } else { t.sigma };
        PipelineType { input, output, sigma }
    }

    fn finish_operator(&self, s: &Sig) -> OperatorType {
        let mut canon = Canon(HashMap::new());
        let inputs = s.inputs.iter().map(|d| canon.apply(&self.u.resolve(d))).collect();
        let output = s.output.as_ref().map(|d| canon.apply(&self.u.resolve(d)));
        OperatorType { inputs, output, sigma: s.sigma }
    }
}

/// The typing rule and admissible structure types of an operator.
pub fn operator_structure(op: &Operator) -> (&'static str, StructureSet) {
    let op = op.normalize();
    let windowed = op.window.is_some();
    match &op.kind {
        OpKind::Map(_) => ("map", StructureSet::ALL),
        OpKind::FlatMap(_) => ("flatmap", StructureSet::ALL),
        OpKind::Emit(_, ty) => ("emit", StructureSet::single(ty.structure)),
        OpKind::Collect(_, ty) => ("collect", StructureSet::single(ty.structure)),
        OpKind::BMap { pairing, .. } => (if windowed { "w" } else { "b-map" }, pairing_sigma(*pairing, windowed)),
        OpKind::BCombine { pairing, .. } => (if windowed { "w" } else { "b-combine" }, pairing_sigma(*pairing, windowed)),
        _ if windowed => ("w", StructureSet::ORDERED),
        // Per-key combining is structure-polymorphic; on streams it runs
        // over execution batches.
        _ if op.partition.is_some() => ("p-combine", StructureSet::ALL),
        _ => ("combine", StructureSet::BOUNDED),
    }
}

/// Finds an operator of `p` that cannot run at any structure type of
/// `offered`.
fn blame(p: &Pipeline, offered: StructureSet) -> Option<TypeError> {
    p.operators().into_iter().find_map(|op| {
        let (rule, sigma) = operator_structure(op);
        if !sigma.intersect(offered).is_empty() {
            return None;
        }
        Some(TypeError::new(
            rule,
            op.span,
            format!(
                "`{}` needs σ ∈ {} but is given {}",
                op.family(),
                sigma_text(sigma),
                sigma_text(offered)
            ),
        ))
    })
}

fn pairing_sigma(pairing: Pairing, windowed: bool) -> StructureSet {
    match (pairing, windowed) {
        (_, true) => StructureSet::ORDERED,
        (Pairing::Join, false) => StructureSet::BOUNDED,
        // Zipping pairs by position, so it needs ordered input.
        (Pairing::Zip, false) => StructureSet::BOUNDED.intersect(StructureSet::ORDERED),
    }
}

/// Types a single operator on its own.
pub fn type_operator(op: &Operator) -> Result<OperatorType, TypeError> {
    let mut c = Checker::new();
    let sig = c.operator(op)?;
    Ok(c.finish_operator(&sig))
}

/// Types a pipeline (in normal form).
pub fn type_pipeline(p: &Pipeline) -> Result<PipelineType, TypeError> {
    let mut c = Checker::new();
    let t = c.pipeline(&p.normalize())?;
    Ok(c.finish_pipeline(&t))
}

/// The types of every declaration of a program.
#[derive(Debug, Clone, PartialEq)]
pub struct ProgramTypes {
    /// Operator types, with data types as instantiated by the first
    /// pipeline that uses the operator.
    pub operators: Vec<(String, OperatorType)>,
    pub pipelines: Vec<(String, PipelineType)>,
}

pub fn type_program(prog: &Program) -> Result<ProgramTypes, TypeError> {
    let mut pipelines = Vec::new();
    let mut in_context: HashMap<String, OperatorType> = HashMap::new();
    for (name, p) in &prog.pipelines {
        let mut c = Checker::new();
        let t = c.pipeline(&p.normalize())?;
        pipelines.push((name.clone(), c.finish_pipeline(&t)));
        for (op, sig) in &c.occurrences {
            in_context.entry(op.clone()).or_insert_with(|| c.finish_operator(sig));
        }
    }
    let mut operators = Vec::new();
    for (name, op) in &prog.operators {
        let t = match in_context.remove(name) {
            Some(t) => t,
            None => type_operator(op)?,
        };
        operators.push((name.clone(), t));
    }
    Ok(ProgramTypes { operators, pipelines })
}

/// Checks that the program's entry pipeline is top-level (`∅ → ∅`).
pub fn check_toplevel(prog: &Program) -> Result<PipelineType, TypeError> {
    let p = prog.entry_pipeline();
    let t = type_pipeline(p)?;
    if !t.is_top_level() {
        return Err(TypeError::new(
            "top-level",
            p.span,
            format!("entry pipeline `{}` has type {t}, but a top-level pipeline must have type ∅ → ∅", prog.entry),
        ));
    }
    Ok(t)
}

/// The structure type a top-level pipeline's operators run at, if forced.
pub fn structure_of(t: &PipelineType) -> Option<StructureType> {
    t.sigma.as_single()
}
