//! Sources and sinks.

use std::fs;
use std::io::{self, BufRead, BufReader, Write};
use std::net::TcpStream;
use std::path::Path;

use thiserror::Error;

use crate::ast::{Sink, Source};
use crate::collections::{CollectionType, SemCollection};
use crate::values::{DataType, Value};

use super::ExecConfig;

#[derive(Debug, Error)]
pub enum IoError {
    #[error("{target}: {source}")]
    Io { target: String, source: io::Error },
    #[error("{target}:{line}: {message}")]
    Record { target: String, line: usize, message: String },
}

fn io_err(target: &str) -> impl FnOnce(io::Error) -> IoError + '_ {
    move |source| IoError::Io {
        target: target.to_string(),
        source,
    }
}

/// Coerces `v` to `ty`, widening ints to floats where a float is expected.
pub fn conform(v: Value, ty: &DataType) -> Option<Value> {
    match (v, ty) {
        (v, DataType::Bottom | DataType::Var(_)) => Some(v),
        (Value::Int(n), DataType::Float) => Some(Value::Float(n as f64)),
        (v @ Value::Unit, DataType::Unit)
        | (v @ Value::Bool(_), DataType::Bool)
        | (v @ Value::Int(_), DataType::Int)
        | (v @ Value::Float(_), DataType::Float)
        | (v @ Value::Str(_), DataType::Str) => Some(v),
        (Value::Tuple(vs), DataType::Tuple(ts)) if vs.len() == ts.len() => {
            vs.into_iter().zip(ts).map(|(v, t)| conform(v, t)).collect::<Option<_>>().map(Value::Tuple)
        }
        (Value::List(vs), DataType::List(t)) => {
            vs.into_iter().map(|v| conform(v, t)).collect::<Option<_>>().map(Value::List)
        }
        _ => None,
    }
}

/// Parses one record body. Strings may be given bare.
fn parse_record(text: &str, ty: &DataType) -> Result<Value, String> {
    let parsed = match Value::parse_literal(text) {
        Ok(v) => v,
        Err(_) if *ty == DataType::Str => return Ok(Value::str(text)),
        Err(e) => return Err(e.to_string()),
    };
    conform(parsed.clone(), ty).ok_or_else(|| format!("{parsed} is not a value of type {ty}"))
}

fn lines_of(target: &str, reader: impl BufRead) -> Result<Vec<String>, IoError> {
    reader.lines().collect::<Result<_, _>>().map_err(io_err(target))
}

/// Reads plain records: raw lines for `str`, literals otherwise; the line
/// ordinal is the timestamp.
fn plain_records(target: &str, lines: Vec<String>, ty: &DataType) -> Result<Vec<(u64, Value)>, IoError> {
    let mut out = Vec::with_capacity(lines.len());
    for (i, line) in lines.into_iter().enumerate() {
        if *ty == DataType::Str {
            out.push((i as u64, Value::Str(line)));
            continue;
        }
        if line.trim().is_empty() {
            continue;
        }
        let v = parse_record(line.trim(), ty).map_err(|message| IoError::Record {
            target: target.to_string(),
            line: i + 1,
            message,
        })?;
        out.push((i as u64, v));
    }
    Ok(out)
}

/// Reads `<timestamp>\t<literal>` records.
fn replay_records(target: &str, lines: Vec<String>, ty: &DataType) -> Result<Vec<(u64, Value)>, IoError> {
    let mut out = Vec::with_capacity(lines.len());
    for (i, line) in lines.iter().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let record = |message: String| IoError::Record {
            target: target.to_string(),
            line: i + 1,
            message,
        };
        let (ts, body) = line
            .split_once('\t')
            .ok_or_else(|| record("expected `<timestamp>\\t<value>`".to_string()))?;
        let ts: u64 = ts.trim().parse().map_err(|_| record(format!("bad timestamp `{ts}`")))?;
        out.push((ts, parse_record(body.trim(), ty).map_err(record)?));
    }
    Ok(out)
}

pub fn read_source(src: &Source, ty: &CollectionType, cfg: &ExecConfig) -> Result<SemCollection, IoError> {
    let items = match src {
        Source::File(name) => {
            let path = cfg.input_path(name);
            let target = path.display().to_string();
            let file = fs::File::open(&path).map_err(io_err(&target))?;
            plain_records(&target, lines_of(&target, BufReader::new(file))?, &ty.data)?
        }
        Source::Replay(name) => {
            let path = cfg.replay_path(name);
            let target = path.display().to_string();
            let file = fs::File::open(&path).map_err(io_err(&target))?;
            replay_records(&target, lines_of(&target, BufReader::new(file))?, &ty.data)?
        }
        Source::Socket(name) => {
            let addr = cfg.socket_addr(name);
            let stream = TcpStream::connect(&addr).map_err(io_err(&addr))?;
            plain_records(&addr, lines_of(&addr, BufReader::new(stream))?, &ty.data)?
        }
    };
    Ok(SemCollection::of(ty.structure, items))
}

/// Sink lines: one literal per item (strings raw), bags sorted textually.
pub fn render(c: &SemCollection, ty: &CollectionType) -> Vec<String> {
    let line = |v: &Value| match v {
        Value::Str(s) if ty.data == DataType::Str => s.clone(),
        v => v.to_string(),
    };
    let mut lines: Vec<String> = c.values().map(line).collect();
    if matches!(c, SemCollection::Multiset(_)) {
        lines.sort();
    }
    lines
}

/// Writes `c` to `sink`, returning the target description and the lines.
pub fn write_sink(
    sink: &Sink,
    ty: &CollectionType,
    c: &SemCollection,
    cfg: &ExecConfig,
    stdout: &mut dyn Write,
) -> Result<(String, Vec<String>), IoError> {
    let lines = render(c, ty);
    let mut text = String::new();
    for l in &lines {
        text.push_str(l);
        text.push('\n');
    }
    let target = match sink {
        Sink::File(name) => {
            let path = cfg.output_path(name);
            let target = path.display().to_string();
            if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
                fs::create_dir_all(dir).map_err(io_err(&target))?;
            }
            fs::write(&path, &text).map_err(io_err(&target))?;
            target
        }
        Sink::Socket(name) => {
            let addr = cfg.socket_addr(name);
            let mut stream = TcpStream::connect(&addr).map_err(io_err(&addr))?;
            stream.write_all(text.as_bytes()).map_err(io_err(&addr))?;
            addr
        }
        Sink::Stdout => {
            stdout.write_all(text.as_bytes()).map_err(io_err("stdout"))?;
            "stdout".to_string()
        }
    };
    Ok((target, lines))
}

pub(super) fn resolve(base: Option<&Path>, name: &str) -> std::path::PathBuf {
    match base {
        Some(b) if Path::new(name).is_relative() => b.join(name),
        _ => Path::new(name).to_path_buf(),
    }
}
