//! C-subset frontend: lexing, parsing into an arena AST, and identifier
//! normalization.

mod ast;
mod lexer;
mod normalize;
mod parser;

pub use ast::{
    Ast, AstKind, AstNode, Declarator, Function, NodeId, SourceUnit, Span, Statement, StmtId, ALL_KINDS,
};
pub use lexer::{strip_comments, tokenize, Token, TokenKind, KEYWORDS, OPERATORS};
pub use normalize::{normalize, parse_keep_list, NameMapping};
pub use parser::{parse, BUILTIN_TYPE_NAMES};

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum FrontendError {
    #[error("{line}:{column}: lexical error: {message}")]
    Lex { line: u32, column: u32, message: String },
    #[error("{line}:{column}: parse error: found `{found}`, expected {expected}")]
    Parse { line: u32, column: u32, found: String, expected: String },
}

/// Tokenizes and parses `source`, recording `path` and the raw lines.
pub fn parse_source(path: &str, source: &str) -> Result<SourceUnit, FrontendError> {
    let tokens = tokenize(source)?;
    let mut unit = parse(&tokens)?;
    unit.path = path.to_string();
    unit.ast.node_mut(Ast::ROOT).text = path.to_string();
    unit.raw_lines = source.lines().map(str::to_string).collect();
    Ok(unit)
}
