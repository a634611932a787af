use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use pico::dataflow::build_graph;
use pico::executor::{run_graph, ExecConfig};
use pico::parser::{parse_program, ParseError, Program};
use pico::typecheck::{check_toplevel, type_program};

const EXIT_USAGE: u8 = 1;
const EXIT_STATIC: u8 = 2;
const EXIT_RUNTIME: u8 = 3;

/// Type check, inspect and run pico pipeline programs.
#[derive(Parser, Debug)]
#[command(name = "pico", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Type check a program and print the type of every pipeline.
    Check {
        file: PathBuf,
    },
    /// Print the dataflow graph of the entry pipeline in DOT format.
    Graph {
        file: PathBuf,
        /// Write the DOT text to this file instead of stdout.
        #[arg(long, value_name = "PATH")]
        dot: Option<PathBuf>,
    },
    /// Run a top-level program.
    Run(RunArgs),
}

#[derive(clap::Args, Debug)]
struct RunArgs {
    file: PathBuf,
    /// Bind a `from-replay` name to a file.
    #[arg(long, value_name = "NAME=PATH", value_parser = binding)]
    replay: Vec<(String, String)>,
    /// Bind a socket name to an address.
    #[arg(long, value_name = "NAME=HOST:PORT", value_parser = binding)]
    socket: Vec<(String, String)>,
    /// Read every `from-file` source from this file.
    #[arg(long = "in", value_name = "PATH")]
    input: Option<PathBuf>,
    /// Write every `to-file` sink to this file.
    #[arg(long = "out", value_name = "PATH")]
    output: Option<PathBuf>,
    /// Batch size for element-wise and per-key operators on streams.
    #[arg(long, value_name = "N", value_parser = clap::value_parser!(u64).range(1..))]
    batch: Option<u64>,
    /// Interleave merged sequences at random instead of by timestamp.
    #[arg(long)]
    nondeterministic_merge: bool,
    /// Seed for the random merge order.
    #[arg(long, value_name = "N")]
    seed: Option<u64>,
    /// Write the run report as JSON.
    #[arg(long, value_name = "PATH")]
    emit_report: Option<PathBuf>,
}

fn binding(s: &str) -> Result<(String, String), String> {
    match s.split_once('=') {
        Some((name, value)) if !name.is_empty() && !value.is_empty() => Ok((name.to_string(), value.to_string())),
        _ => Err(format!("expected NAME=VALUE, got `{s}`")),
    }
}

struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn new(code: u8, message: impl Into<String>) -> Self {
        Failure {
            code,
            message: message.into(),
        }
    }
}

fn render_parse_error(file: &str, e: &ParseError) -> String {
    match e {
        ParseError::NoPipeline => format!("{file}: {e}"),
        _ => format!("{file}:{e}"),
    }
}

/// Reads, parses and type checks a program.
fn load(file: &Path) -> Result<Program, Failure> {
    let name = file.display().to_string();
    let src = fs::read_to_string(file).map_err(|e| Failure::new(EXIT_USAGE, format!("{name}: {e}")))?;
    let prog = parse_program(&src).map_err(|e| Failure::new(EXIT_STATIC, render_parse_error(&name, &e)))?;
    type_program(&prog).map_err(|e| Failure::new(EXIT_STATIC, e.render(&name)))?;
    Ok(prog)
}

fn check(file: &Path) -> Result<(), Failure> {
    let name = file.display().to_string();
    let prog = load(file)?;
    let types = type_program(&prog).map_err(|e| Failure::new(EXIT_STATIC, e.render(&name)))?;
    for (p, t) in &types.pipelines {
        println!("{p} : {t}");
    }
    check_toplevel(&prog).map_err(|e| Failure::new(EXIT_STATIC, e.render(&name)))?;
    println!("{name}: ok, entry `{}` is top-level", prog.entry);
    Ok(())
}

fn graph(file: &Path, dot: Option<&Path>) -> Result<(), Failure> {
    let prog = load(file)?;
    let text = build_graph(prog.entry_pipeline()).export_dot();
    match dot {
        Some(path) => fs::write(path, text).map_err(|e| Failure::new(EXIT_USAGE, format!("{}: {e}", path.display()))),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn run(args: &RunArgs) -> Result<(), Failure> {
    let name = args.file.display().to_string();
    let prog = load(&args.file)?;
    check_toplevel(&prog).map_err(|e| Failure::new(EXIT_STATIC, e.render(&name)))?;
    let mut cfg = ExecConfig::default();
    if let Some(dir) = args.file.parent() {
        cfg.base_dir = Some(dir.to_path_buf());
    }
    if let Some(n) = args.batch {
        cfg = cfg.with_batch(n);
    }
    for (k, v) in &args.replay {
        cfg = cfg.bind_replay(k, v);
    }
    for (k, v) in &args.socket {
        cfg = cfg.bind_socket(k, v);
    }
    cfg.input = args.input.clone();
    cfg.output = args.output.clone();
    cfg.deterministic_merge = !args.nondeterministic_merge;
    cfg.seed = args.seed;
    let report = run_graph(&build_graph(prog.entry_pipeline()), &cfg)
        .map_err(|e| Failure::new(EXIT_RUNTIME, format!("{name}: {e}")))?;
    for late in &report.late {
        eprintln!("{name}: vertex `{}` dropped {} late item(s)", late.label, late.dropped);
    }
    if let Some(path) = &args.emit_report {
        let json = serde_json::to_string_pretty(&report).expect("run reports serialize");
        fs::write(path, json + "\n").map_err(|e| Failure::new(EXIT_USAGE, format!("{}: {e}", path.display())))?;
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_USAGE } else { 0 });
        }
    };
    let result = match &cli.command {
        Command::Check { file } => check(file),
        Command::Graph { file, dot } => graph(file, dot.as_deref()),
        Command::Run(args) => run(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("{}", f.message);
            ExitCode::from(f.code)
        }
    }
}
