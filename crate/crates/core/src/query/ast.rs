//! Query AST for both dialects, with canonical printing.
//!
//! `Display` renders a canonical form (uppercase keywords, single-quoted
//! strings with `''` escapes) that reparses to a structurally identical AST.

use serde::{Deserialize, Serialize};
use std::fmt;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Dialect {
    Table,
    Graph,
}

impl Dialect {
    pub fn as_str(self) -> &'static str {
        match self {
            Dialect::Table => "table",
            Dialect::Graph => "graph",
        }
    }
}

impl fmt::Display for Dialect {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CmpOp {
    Eq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
}

impl fmt::Display for CmpOp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CmpOp::Eq => "=",
            CmpOp::Ne => "!=",
            CmpOp::Lt => "<",
            CmpOp::Le => "<=",
            CmpOp::Gt => ">",
            CmpOp::Ge => ">=",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Literal {
    Num(f64),
    Str(String),
    Bool(bool),
    Null,
}

impl fmt::Display for Literal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Literal::Num(n) => write!(f, "{n}"),
            Literal::Str(s) => write!(f, "'{}'", s.replace('\'', "''")),
            Literal::Bool(b) => write!(f, "{b}"),
            Literal::Null => write!(f, "null"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Agg {
    Sum,
    Avg,
    Min,
    Max,
    Count,
}

impl fmt::Display for Agg {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Agg::Sum => "SUM",
            Agg::Avg => "AVG",
            Agg::Min => "MIN",
            Agg::Max => "MAX",
            Agg::Count => "COUNT",
        })
    }
}

/// Aggregate argument: `*` (COUNT only) or a column/property.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum AggArg {
    Star,
    Column(String),
}

#[derive(Debug, Clone, PartialEq)]
pub enum ProjItem {
    Column(String),
    Aggregate(Agg, AggArg),
}

impl ProjItem {
    /// Output column name in result tables.
    pub fn out_name(&self) -> String {
        match self {
            ProjItem::Column(c) => c.clone(),
            ProjItem::Aggregate(a, AggArg::Star) => format!("{a}(*)"),
            ProjItem::Aggregate(a, AggArg::Column(c)) => format!("{a}({c})"),
        }
    }
}

impl fmt::Display for ProjItem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.out_name())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Projection {
    Star,
    Items(Vec<ProjItem>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Filter {
    pub column: String,
    pub op: CmpOp,
    pub value: Literal,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OrderBy {
    pub key: ProjItem,
    pub desc: bool,
}

/// A tabular-dialect query: projection over one table with conjunctive
/// filters, optional grouping, ordering, and a limit. No joins — multi-table
/// reasoning happens across retrieval steps.
#[derive(Debug, Clone, PartialEq)]
pub struct TableQuery {
    pub projection: Projection,
    pub table: String,
    pub filters: Vec<Filter>,
    pub group_by: Vec<String>,
    pub order_by: Option<OrderBy>,
    pub limit: Option<u64>,
}

/// A single vertex or vertex-edge-vertex pattern.
#[derive(Debug, Clone, PartialEq)]
pub enum Pattern {
    Vertex {
        var: String,
        label: String,
    },
    Edge {
        left_var: String,
        left_label: String,
        edge_var: String,
        edge_type: String,
        right_var: String,
        right_label: String,
        directed: bool,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct PropRef {
    pub var: String,
    pub prop: String,
}

impl fmt::Display for PropRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}.{}", self.var, self.prop)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PropFilter {
    pub target: PropRef,
    pub op: CmpOp,
    pub value: Literal,
}

#[derive(Debug, Clone, PartialEq)]
pub enum ReturnItem {
    Prop(PropRef),
    Aggregate(Agg, Option<PropRef>),
}

impl ReturnItem {
    pub fn out_name(&self) -> String {
        match self {
            ReturnItem::Prop(p) => p.to_string(),
            ReturnItem::Aggregate(a, None) => format!("{a}(*)"),
            ReturnItem::Aggregate(a, Some(p)) => format!("{a}({p})"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GraphOrderBy {
    pub key: PropRef,
    pub desc: bool,
}

/// A graph-dialect query: one pattern, property filters, and a RETURN list.
/// Mixing plain properties with aggregates groups implicitly by the plain
/// properties.
#[derive(Debug, Clone, PartialEq)]
pub struct GraphQuery {
    pub pattern: Pattern,
    pub filters: Vec<PropFilter>,
    pub returns: Vec<ReturnItem>,
    pub order_by: Option<GraphOrderBy>,
    pub limit: Option<u64>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum QueryAst {
    Table(TableQuery),
    Graph(GraphQuery),
}

impl QueryAst {
    pub fn dialect(&self) -> Dialect {
        match self {
            QueryAst::Table(_) => Dialect::Table,
            QueryAst::Graph(_) => Dialect::Graph,
        }
    }
}

impl fmt::Display for TableQuery {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "SELECT ")?;
        match &self.projection {
            Projection::Star => write!(f, "*")?,
            Projection::Items(items) => {
                for (i, item) in items.iter().enumerate() {
                    if i > 0 {
                        write!(f, ", ")?;
                    }
                    write!(f, "{item}")?;
                }
            }
        }
        write!(f, " FROM {}", self.table)?;
        for (i, c) in self.filters.iter().enumerate() {
            write!(f, " {} ", if i == 0 { "WHERE" } else { "AND" })?;
            write!(f, "{} {} {}", c.column, c.op, c.value)?;
        }
        if !self.group_by.is_empty() {
            write!(f, " GROUP BY {}", self.group_by.join(", "))?;
        }
        if let Some(o) = &self.order_by {
            write!(
                f,
                " ORDER BY {}{}",
                o.key,
                if o.desc { " DESC" } else { "" }
            )?;
        }
        if let Some(n) = self.limit {
            write!(f, " LIMIT {n}")?;
        }
        Ok(())
    }
}

impl fmt::Display for GraphQuery {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "MATCH ")?;
        match &self.pattern {
            Pattern::Vertex { var, label } => write!(f, "({var}:{label})")?,
            Pattern::Edge {
                left_var,
                left_label,
                edge_var,
                edge_type,
                right_var,
                right_label,
                directed,
            } => {
                write!(
                    f,
                    "({left_var}:{left_label})-[{edge_var}:{edge_type}]{}({right_var}:{right_label})",
                    if *directed { "->" } else { "-" }
                )?;
            }
        }
        for (i, c) in self.filters.iter().enumerate() {
            write!(f, " {} ", if i == 0 { "WHERE" } else { "AND" })?;
            write!(f, "{} {} {}", c.target, c.op, c.value)?;
        }
        write!(f, " RETURN ")?;
        for (i, r) in self.returns.iter().enumerate() {
            if i > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{}", r.out_name())?;
        }
        if let Some(o) = &self.order_by {
            write!(
                f,
                " ORDER BY {}{}",
                o.key,
                if o.desc { " DESC" } else { "" }
            )?;
        }
        if let Some(n) = self.limit {
            write!(f, " LIMIT {n}")?;
        }
        Ok(())
    }
}

impl fmt::Display for QueryAst {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            QueryAst::Table(q) => q.fmt(f),
            QueryAst::Graph(q) => q.fmt(f),
        }
    }
}
