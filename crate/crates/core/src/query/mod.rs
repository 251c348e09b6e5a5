//! The retrieval surface: a small query language with a tabular dialect and
//! a graph dialect, executed over the database views.
//!
//! The grammar is documented in `docs/query-grammar.ebnf`. Keywords are
//! case-insensitive, identifiers case-sensitive, strings quote with `'` or
//! `"` (double the quote to escape). The tabular dialect has no joins;
//! multi-table reasoning happens across retrieval steps.

mod ast;
mod exec;
mod lexer;
mod parser;
mod schema;
mod symbols;

pub use ast::{
    Agg, AggArg, CmpOp, Dialect, Filter, GraphOrderBy, GraphQuery, Literal, OrderBy, Pattern,
    ProjItem, Projection, PropFilter, PropRef, QueryAst, ReturnItem, TableQuery,
};
pub use exec::{execute, execute_graph, execute_table, ExecError, ResultTable, Views, ROW_CAP};
pub use schema::{columns_of_table, EdgeSchema, LabelSchema, Schema, TableSchema};
pub use symbols::{column_symbol, touched_symbols, Symbol};

use thiserror::Error;

/// Positioned parse failure with the expected-token set.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub struct ParseError {
    /// 1-based token position.
    pub position: usize,
    /// Byte offset in the query text.
    pub offset: usize,
    pub found: String,
    pub expected: Vec<String>,
}

impl ParseError {
    fn at_offset(position: usize, offset: usize, found: &str, expected: &[&str]) -> ParseError {
        ParseError {
            position,
            offset,
            found: found.to_string(),
            expected: expected.iter().map(|s| s.to_string()).collect(),
        }
    }
}

impl std::fmt::Display for ParseError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "parse error at token {} ('{}'): expected {}",
            self.position,
            self.found,
            self.expected.join(" or ")
        )
    }
}

/// Parse query text against the active schema.
pub fn parse(text: &str, schema: &Schema) -> Result<QueryAst, ParseError> {
    parser::parse(text, schema)
}
