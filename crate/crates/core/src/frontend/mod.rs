//! Lexer, parser and AST printer.

pub mod ast;
mod error;
mod lexer;
mod parser;
mod pretty;

pub use error::{FrontendError, LexError, ParseError};
pub use lexer::{tokenize, Token, TokenKind, KEYWORDS};
pub use parser::parse;
pub use pretty::{print_expr, print_program};

/// Tokenize and parse a complete source file.
pub fn parse_source(source: &str) -> Result<ast::Block, FrontendError> {
    let tokens = tokenize(source)?;
    Ok(parse(&tokens)?)
}
