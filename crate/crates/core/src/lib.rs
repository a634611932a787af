mod lexer;
pub mod ast;
pub mod collections;
pub mod dataflow;
pub mod executor;
pub mod kernel;
pub mod parser;
pub mod typecheck;
pub mod values;

pub use lexer::{Span, SyntaxError};
