//! The element universe: dynamically typed values and their data types.

use std::cmp::Ordering;
use std::fmt;
use std::hash::{Hash, Hasher};
use std::str::FromStr;

use thiserror::Error;

use crate::lexer::{Cursor, SyntaxError, Tok};

/// An element flowing through a pipeline.
///
/// Equality, ordering and hashing are structural. Floats are compared with
/// [`f64::total_cmp`], which keeps equality an equivalence relation (NaN is
/// equal to itself) and gives every value a place in one total order. That
/// order is what `min`/`max` kernels and partition-key ordering use.
#[derive(Debug, Clone)]
pub enum Value {
    Unit,
    Bool(bool),
    Int(i64),
    Float(f64),
    Str(String),
    Tuple(Vec<Value>),
    List(Vec<Value>),
}

#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum ValueError {
    #[error("malformed value: {0}")]
    Malformed(String),
}

/// Element types. `Bottom` is the element type of the empty list and
/// unifies with anything; `Var` only appears while type checking.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum DataType {
    Unit,
    Bool,
    Int,
    Float,
    Str,
    Tuple(Vec<DataType>),
    List(Box<DataType>),
    Bottom,
    Var(u32),
}

impl Value {
    fn rank(&self) -> u8 {
        match self {
            Value::Unit => 0,
            Value::Bool(_) => 1,
            Value::Int(_) => 2,
            Value::Float(_) => 3,
            Value::Str(_) => 4,
            Value::Tuple(_) => 5,
            Value::List(_) => 6,
        }
    }

    pub fn str(s: impl Into<String>) -> Value {
        Value::Str(s.into())
    }

    pub fn pair(a: Value, b: Value) -> Value {
        Value::Tuple(vec![a, b])
    }

    pub fn as_int(&self) -> Option<i64> {
        match self {
            Value::Int(n) => Some(*n),
            _ => None,
        }
    }

    pub fn as_float(&self) -> Option<f64> {
        match self {
            Value::Float(x) => Some(*x),
            _ => None,
        }
    }

    pub fn as_str(&self) -> Option<&str> {
        match self {
            Value::Str(s) => Some(s),
            _ => None,
        }
    }

    pub fn parse_literal(src: &str) -> Result<Value, SyntaxError> {
        let mut cur = Cursor::new(src)?;
        let v = parse_value(&mut cur)?;
        cur.expect_eof()?;
        Ok(v)
    }
}

impl PartialEq for Value {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Value {}

impl PartialOrd for Value {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Value {
    fn cmp(&self, other: &Self) -> Ordering {
        match (self, other) {
            (Value::Unit, Value::Unit) => Ordering::Equal,
            (Value::Bool(a), Value::Bool(b)) => a.cmp(b),
            (Value::Int(a), Value::Int(b)) => a.cmp(b),
            (Value::Float(a), Value::Float(b)) => a.total_cmp(b),
            (Value::Str(a), Value::Str(b)) => a.cmp(b),
            (Value::Tuple(a), Value::Tuple(b)) | (Value::List(a), Value::List(b)) => a.cmp(b),
            _ => self.rank().cmp(&other.rank()),
        }
    }
}

impl Hash for Value {
    fn hash<H: Hasher>(&self, state: &mut H) {
        self.rank().hash(state);
        match self {
            Value::Unit => {}
            Value::Bool(b) => b.hash(state),
            Value::Int(n) => n.hash(state),
            Value::Float(x) => x.to_bits().hash(state),
            Value::Str(s) => s.hash(state),
            Value::Tuple(vs) | Value::List(vs) => vs.hash(state),
        }
    }
}

impl From<i64> for Value {
    fn from(n: i64) -> Self {
        Value::Int(n)
    }
}

impl From<f64> for Value {
    fn from(x: f64) -> Self {
        Value::Float(x)
    }
}

impl From<&str> for Value {
    fn from(s: &str) -> Self {
        Value::Str(s.to_string())
    }
}

impl From<bool> for Value {
    fn from(b: bool) -> Self {
        Value::Bool(b)
    }
}

/// The unique data type of `v`.
///
/// An empty list has type `[⊥]`; a list whose elements do not share one type
/// and tuples of arity below two are malformed.
pub fn type_of(v: &Value) -> Result<DataType, ValueError> {
    Ok(match v {
        Value::Unit => DataType::Unit,
        Value::Bool(_) => DataType::Bool,
        Value::Int(_) => DataType::Int,
        Value::Float(_) => DataType::Float,
        Value::Str(_) => DataType::Str,
        Value::Tuple(vs) => {
            if vs.len() < 2 {
                return Err(ValueError::Malformed(format!(
                    "tuple of arity {} (minimum is 2)",
                    vs.len()
                )));
            }
            DataType::Tuple(vs.iter().map(type_of).collect::<Result<_, _>>()?)
        }
        Value::List(vs) => {
            let mut elem = DataType::Bottom;
            for v in vs {
                let t = type_of(v)?;
                elem = elem.join(&t).ok_or_else(|| {
                    ValueError::Malformed(format!("heterogeneous list: {elem} and {t}"))
                })?;
            }
            DataType::List(Box::new(elem))
        }
    })
}

impl DataType {
    pub fn tuple(items: impl IntoIterator<Item = DataType>) -> Self {
        DataType::Tuple(items.into_iter().collect())
    }

    pub fn list(elem: DataType) -> Self {
        DataType::List(Box::new(elem))
    }

    /// Least common type of two ground types, treating `⊥` as a wildcard.
    pub fn join(&self, other: &DataType) -> Option<DataType> {
        match (self, other) {
            (DataType::Bottom, t) | (t, DataType::Bottom) => Some(t.clone()),
            (DataType::Tuple(a), DataType::Tuple(b)) if a.len() == b.len() => a
                .iter()
                .zip(b)
                .map(|(x, y)| x.join(y))
                .collect::<Option<Vec<_>>>()
                .map(DataType::Tuple),
            (DataType::List(a), DataType::List(b)) => a.join(b).map(DataType::list),
            (a, b) if a == b => Some(a.clone()),
            _ => None,
        }
    }

    /// Whether two types are compatible, with `⊥` matching anything.
    pub fn compatible(&self, other: &DataType) -> bool {
        self.join(other).is_some()
    }

    pub fn has_vars(&self) -> bool {
        match self {
            DataType::Var(_) => true,
            DataType::Tuple(ts) => ts.iter().any(DataType::has_vars),
            DataType::List(t) => t.has_vars(),
            _ => false,
        }
    }
}

impl fmt::Display for DataType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DataType::Unit => f.write_str("unit"),
            DataType::Bool => f.write_str("bool"),
            DataType::Int => f.write_str("int"),
            DataType::Float => f.write_str("float"),
            DataType::Str => f.write_str("str"),
            DataType::Bottom => f.write_str("⊥"),
            DataType::Var(n) => {
                let letter = (b'a' + (n % 26) as u8) as char;
                if *n < 26 {
                    write!(f, "'{letter}")
                } else {
                    write!(f, "'{letter}{}", n / 26)
                }
            }
            DataType::List(t) => write!(f, "[{t}]"),
            DataType::Tuple(ts) => {
                f.write_str("(")?;
                for (i, t) in ts.iter().enumerate() {
                    if i > 0 {
                        f.write_str(", ")?;
                    }
                    write!(f, "{t}")?;
                }
                f.write_str(")")
            }
        }
    }
}

fn write_float(f: &mut fmt::Formatter<'_>, x: f64) -> fmt::Result {
    if x.is_nan() {
        f.write_str("nan")
    } else if x.is_infinite() {
        f.write_str(if x > 0.0 { "inf" } else { "-inf" })
    } else {
        // Debug formatting is the shortest representation that round-trips
        // and always contains a `.` or an exponent.
        write!(f, "{x:?}")
    }
}

fn write_str_literal(f: &mut fmt::Formatter<'_>, s: &str) -> fmt::Result {
    f.write_str("\"")?;
    for c in s.chars() {
        match c {
            '"' => f.write_str("\\\"")?,
            '\\' => f.write_str("\\\\")?,
            '\n' => f.write_str("\\n")?,
            '\t' => f.write_str("\\t")?,
            '\r' => f.write_str("\\r")?,
            c if c.is_control() => write!(f, "\\u{{{:x}}}", c as u32)?,
            c => write!(f, "{c}")?,
        }
    }
    f.write_str("\"")
}

/// Literal syntax: `1`, `1.5`, `"str"`, `true`, `(v1, v2)`, `[v1, v2]`, `unit`.
impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Unit => f.write_str("unit"),
            Value::Bool(b) => write!(f, "{b}"),
            Value::Int(n) => write!(f, "{n}"),
            Value::Float(x) => write_float(f, *x),
            Value::Str(s) => write_str_literal(f, s),
            Value::Tuple(vs) | Value::List(vs) => {
                let (open, close) = if matches!(self, Value::Tuple(_)) {
                    ("(", ")")
                } else {
                    ("[", "]")
                };
                f.write_str(open)?;
                for (i, v) in vs.iter().enumerate() {
                    if i > 0 {
                        f.write_str(", ")?;
                    }
                    write!(f, "{v}")?;
                }
                f.write_str(close)
            }
        }
    }
}

impl FromStr for Value {
    type Err = SyntaxError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Value::parse_literal(s)
    }
}

/// Parses one value literal at the cursor.
pub(crate) fn parse_value(cur: &mut Cursor) -> Result<Value, SyntaxError> {
    let span = cur.span();
    match cur.peek().clone() {
        Tok::Minus => {
            cur.next();
            match cur.next().tok {
                Tok::Int(n) => negate_int(n)
                    .map(Value::Int)
                    .ok_or_else(|| SyntaxError::new(span, "integer literal out of range")),
                Tok::Float(x) => Ok(Value::Float(-x)),
                Tok::Ident(w) if w == "inf" => Ok(Value::Float(f64::NEG_INFINITY)),
                _ => Err(SyntaxError::new(span, "expected a number after `-`")),
            }
        }
        Tok::Int(n) => {
            cur.next();
            i64::try_from(n)
                .map(Value::Int)
                .map_err(|_| SyntaxError::new(span, "integer literal out of range"))
        }
        Tok::Float(x) => {
            cur.next();
            Ok(Value::Float(x))
        }
        Tok::Str(s) => {
            cur.next();
            Ok(Value::Str(s))
        }
        Tok::Ident(w) => {
            let v = match w.as_str() {
                "true" => Value::Bool(true),
                "false" => Value::Bool(false),
                "unit" => Value::Unit,
                "nan" => Value::Float(f64::NAN),
                "inf" => Value::Float(f64::INFINITY),
                _ => return Err(cur.unexpected("a value literal")),
            };
            cur.next();
            Ok(v)
        }
        Tok::LParen => {
            cur.next();
            let mut items = vec![parse_value(cur)?];
            while cur.eat(&Tok::Comma) {
                items.push(parse_value(cur)?);
            }
            cur.expect(&Tok::RParen)?;
            if items.len() == 1 {
                Ok(items.pop().unwrap())
            } else {
                Ok(Value::Tuple(items))
            }
        }
        Tok::LBracket => {
            cur.next();
            let mut items = Vec::new();
            if !cur.eat(&Tok::RBracket) {
                items.push(parse_value(cur)?);
                while cur.eat(&Tok::Comma) {
                    items.push(parse_value(cur)?);
                }
                cur.expect(&Tok::RBracket)?;
            }
            let v = Value::List(items);
            type_of(&v).map_err(|e| SyntaxError::new(span, e.to_string()))?;
            Ok(v)
        }
        _ => Err(cur.unexpected("a value literal")),
    }
}

pub(crate) fn negate_int(magnitude: u64) -> Option<i64> {
    if magnitude == i64::MIN.unsigned_abs() {
        Some(i64::MIN)
    } else {
        i64::try_from(magnitude).ok().map(|n| -n)
    }
}
