//! Recursive-descent parser for both dialects. Keywords are
//! case-insensitive; identifiers are case-sensitive. Every error carries the
//! 1-based token position, the offending text, and the expected-token set so
//! an agent (or a human) can self-correct.

use super::ast::*;
use super::lexer::{lex, Token, TokenKind};
use super::schema::Schema;
use super::ParseError;

const KEYWORDS: &[&str] = &[
    "SELECT", "FROM", "WHERE", "AND", "GROUP", "BY", "ORDER", "LIMIT", "ASC", "DESC", "SUM", "AVG",
    "MIN", "MAX", "COUNT", "MATCH", "RETURN", "TRUE", "FALSE", "NULL",
];

struct Spanned<T> {
    v: T,
    at: usize,
    offset: usize,
    found: String,
}

fn err_span<T>(s: &Spanned<T>, expected: Vec<String>) -> ParseError {
    ParseError {
        position: s.at,
        offset: s.offset,
        found: s.found.clone(),
        expected,
    }
}

/// Pattern variable bindings used to validate property references.
struct Bindings<'a> {
    schema: &'a Schema,
    vertex_vars: Vec<(String, &'static str)>,
    edge_var: Option<(String, &'static str)>,
}

impl Bindings<'_> {
    fn props_of(&self, var: &str) -> Option<&'static [&'static str]> {
        if let Some((_, label)) = self.vertex_vars.iter().find(|(v, _)| v == var) {
            return self.schema.label(label).map(|l| l.props);
        }
        match &self.edge_var {
            Some((v, etype)) if v == var => self.schema.edge(etype).map(|e| e.props),
            _ => None,
        }
    }

    fn resolve(&self, p: &Spanned<(String, String)>) -> Result<PropRef, ParseError> {
        let (var, prop) = &p.v;
        let Some(props) = self.props_of(var) else {
            return Err(err_span(
                p,
                vec![format!("a bound variable (unknown: {var})")],
            ));
        };
        if !props.contains(&prop.as_str()) {
            return Err(err_span(p, vec![format!("a property of {var}")]));
        }
        Ok(PropRef {
            var: var.clone(),
            prop: prop.clone(),
        })
    }
}

pub fn parse(text: &str, schema: &Schema) -> Result<QueryAst, ParseError> {
    let tokens = lex(text)?;
    let mut p = Parser {
        tokens,
        pos: 0,
        end_offset: text.len(),
        schema,
    };
    let first = p.peek_keyword();
    let ast = match first.as_deref() {
        Some("SELECT") => QueryAst::Table(p.table_query()?),
        Some("MATCH") => QueryAst::Graph(p.graph_query()?),
        _ => return Err(p.err_here(&["SELECT", "MATCH"])),
    };
    if p.pos < p.tokens.len() {
        return Err(p.err_here(&["end of query"]));
    }
    Ok(ast)
}

struct Parser<'a> {
    tokens: Vec<Token>,
    pos: usize,
    end_offset: usize,
    schema: &'a Schema,
}

impl<'a> Parser<'a> {
    fn peek(&self) -> Option<&Token> {
        self.tokens.get(self.pos)
    }

    /// Uppercased keyword at the cursor, if the current token is one.
    fn peek_keyword(&self) -> Option<String> {
        match self.peek() {
            Some(Token {
                kind: TokenKind::Ident(s),
                ..
            }) => {
                let up = s.to_uppercase();
                KEYWORDS.contains(&up.as_str()).then_some(up)
            }
            _ => None,
        }
    }

    fn eat_keyword(&mut self, kw: &str) -> bool {
        if self.peek_keyword().as_deref() == Some(kw) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expect_keyword(&mut self, kw: &str) -> Result<(), ParseError> {
        if self.eat_keyword(kw) {
            Ok(())
        } else {
            Err(self.err_here(&[kw]))
        }
    }

    fn err_here(&self, expected: &[&str]) -> ParseError {
        match self.peek() {
            Some(t) => ParseError::at_offset(t.index, t.offset, &t.kind.describe(), expected),
            None => ParseError::at_offset(
                self.tokens.len() + 1,
                self.end_offset,
                "end of query",
                expected,
            ),
        }
    }

    fn err_at<T>(&self, s: &Spanned<T>, expected: &[String]) -> ParseError {
        ParseError {
            position: s.at,
            offset: s.offset,
            found: s.found.clone(),
            expected: expected.to_vec(),
        }
    }

    /// A non-keyword identifier (column, table, label, variable).
    fn ident(&mut self, what: &str) -> Result<Spanned<String>, ParseError> {
        match self.peek() {
            Some(Token {
                kind: TokenKind::Ident(s),
                index,
                offset,
            }) if !KEYWORDS.contains(&s.to_uppercase().as_str()) => {
                let out = Spanned {
                    v: s.clone(),
                    at: *index,
                    offset: *offset,
                    found: s.clone(),
                };
                self.pos += 1;
                Ok(out)
            }
            _ => Err(self.err_here(&[what])),
        }
    }

    fn eat(&mut self, kind: &TokenKind) -> bool {
        if self.peek().map(|t| &t.kind) == Some(kind) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expect(&mut self, kind: TokenKind, what: &str) -> Result<(), ParseError> {
        if self.eat(&kind) {
            Ok(())
        } else {
            Err(self.err_here(&[what]))
        }
    }

    fn cmp_op(&mut self) -> Result<CmpOp, ParseError> {
        let op = match self.peek().map(|t| &t.kind) {
            Some(TokenKind::Eq) => CmpOp::Eq,
            Some(TokenKind::Ne) => CmpOp::Ne,
            Some(TokenKind::Lt) => CmpOp::Lt,
            Some(TokenKind::Le) => CmpOp::Le,
            Some(TokenKind::Gt) => CmpOp::Gt,
            Some(TokenKind::Ge) => CmpOp::Ge,
            _ => return Err(self.err_here(&["=", "!=", "<", "<=", ">", ">="])),
        };
        self.pos += 1;
        Ok(op)
    }

    fn literal(&mut self) -> Result<Literal, ParseError> {
        if let Some(kw) = self.peek_keyword() {
            match kw.as_str() {
                "TRUE" => {
                    self.pos += 1;
                    return Ok(Literal::Bool(true));
                }
                "FALSE" => {
                    self.pos += 1;
                    return Ok(Literal::Bool(false));
                }
                "NULL" => {
                    self.pos += 1;
                    return Ok(Literal::Null);
                }
                _ => {}
            }
        }
        match self.peek().map(|t| t.kind.clone()) {
            Some(TokenKind::Num(n)) => {
                self.pos += 1;
                Ok(Literal::Num(n))
            }
            Some(TokenKind::Minus) => {
                self.pos += 1;
                match self.peek().map(|t| t.kind.clone()) {
                    Some(TokenKind::Num(n)) => {
                        self.pos += 1;
                        Ok(Literal::Num(-n))
                    }
                    _ => Err(self.err_here(&["a number"])),
                }
            }
            Some(TokenKind::Str(s)) => {
                self.pos += 1;
                Ok(Literal::Str(s))
            }
            _ => Err(self.err_here(&["a literal (number, 'string', true, false, null)"])),
        }
    }

    fn agg_keyword(&mut self) -> Option<Agg> {
        let agg = match self.peek_keyword().as_deref() {
            Some("SUM") => Agg::Sum,
            Some("AVG") => Agg::Avg,
            Some("MIN") => Agg::Min,
            Some("MAX") => Agg::Max,
            Some("COUNT") => Agg::Count,
            _ => return None,
        };
        // Only an aggregate when followed by '('.
        if self.tokens.get(self.pos + 1).map(|t| &t.kind) == Some(&TokenKind::LParen) {
            self.pos += 1;
            Some(agg)
        } else {
            None
        }
    }

    fn limit(&mut self) -> Result<Option<u64>, ParseError> {
        if !self.eat_keyword("LIMIT") {
            return Ok(None);
        }
        match self.peek().map(|t| t.kind.clone()) {
            Some(TokenKind::Num(n)) if n >= 1.0 && n.fract() == 0.0 => {
                self.pos += 1;
                Ok(Some(n as u64))
            }
            _ => Err(self.err_here(&["a positive integer limit"])),
        }
    }

    // ----- tabular dialect -----

    fn table_query(&mut self) -> Result<TableQuery, ParseError> {
        self.expect_keyword("SELECT")?;

        // Raw projection items: the spanned column (or "*") plus, for
        // aggregates, the function and its spanned argument.
        type RawItem = (Spanned<String>, Option<(Agg, Option<Spanned<String>>)>);
        let mut items: Vec<RawItem> = Vec::new();
        let star_projection = self.eat(&TokenKind::Star);
        if !star_projection {
            loop {
                if let Some(agg) = self.agg_keyword() {
                    let open = self.peek().cloned();
                    self.expect(TokenKind::LParen, "(")?;
                    if self.eat(&TokenKind::Star) {
                        if agg != Agg::Count {
                            let t = open.expect("just matched");
                            return Err(ParseError::at_offset(
                                t.index,
                                t.offset,
                                "*",
                                &["a column name (only COUNT may take *)"],
                            ));
                        }
                        self.expect(TokenKind::RParen, ")")?;
                        items.push((
                            Spanned {
                                v: "*".into(),
                                at: 0,
                                offset: 0,
                                found: "*".into(),
                            },
                            Some((agg, None)),
                        ));
                    } else {
                        let col = self.ident("a column name")?;
                        self.expect(TokenKind::RParen, ")")?;
                        items.push((
                            Spanned {
                                v: col.v.clone(),
                                at: col.at,
                                offset: col.offset,
                                found: col.found.clone(),
                            },
                            Some((agg, Some(col))),
                        ));
                    }
                } else {
                    let col = self.ident("a column name or aggregate")?;
                    items.push((col, None));
                }
                if !self.eat(&TokenKind::Comma) {
                    break;
                }
            }
        }

        self.expect_keyword("FROM")?;
        let table = self.ident("a table name")?;
        let table_schema = self.schema.table(&table.v).ok_or_else(|| {
            self.err_at(
                &table,
                &[format!(
                    "a table name ({})",
                    self.schema.table_names().join(", ")
                )],
            )
        })?;
        let column_exists = |c: &str| table_schema.columns.contains(&c);
        let column_expected = || vec![format!("a column of {}", table_schema.name)];

        let mut filters = Vec::new();
        if self.eat_keyword("WHERE") {
            loop {
                let col = self.ident("a column name")?;
                if !column_exists(&col.v) {
                    return Err(self.err_at(&col, &column_expected()));
                }
                let op = self.cmp_op()?;
                let value = self.literal()?;
                filters.push(Filter {
                    column: col.v,
                    op,
                    value,
                });
                if !self.eat_keyword("AND") {
                    break;
                }
            }
        }

        let mut group_by = Vec::new();
        if self.eat_keyword("GROUP") {
            self.expect_keyword("BY")?;
            loop {
                let col = self.ident("a column name")?;
                if !column_exists(&col.v) {
                    return Err(self.err_at(&col, &column_expected()));
                }
                group_by.push(col.v);
                if !self.eat(&TokenKind::Comma) {
                    break;
                }
            }
        }

        // Validate projection against table and grouping rules.
        let mut proj_items = Vec::new();
        let has_aggregate = items.iter().any(|(_, agg)| agg.is_some());
        for (span, agg) in &items {
            match agg {
                None => {
                    if !column_exists(&span.v) {
                        return Err(self.err_at(span, &column_expected()));
                    }
                    if (has_aggregate || !group_by.is_empty()) && !group_by.contains(&span.v) {
                        return Err(
                            self.err_at(span, &[format!("{} to appear in GROUP BY", span.v)])
                        );
                    }
                    proj_items.push(ProjItem::Column(span.v.clone()));
                }
                Some((agg, arg)) => match arg {
                    None => proj_items.push(ProjItem::Aggregate(*agg, AggArg::Star)),
                    Some(col) => {
                        if !column_exists(&col.v) {
                            return Err(self.err_at(col, &column_expected()));
                        }
                        proj_items.push(ProjItem::Aggregate(*agg, AggArg::Column(col.v.clone())));
                    }
                },
            }
        }
        let projection = if star_projection {
            if !group_by.is_empty() {
                return Err(self.err_here(&["explicit columns when GROUP BY is used"]));
            }
            Projection::Star
        } else {
            Projection::Items(proj_items)
        };

        let order_by = if self.eat_keyword("ORDER") {
            self.expect_keyword("BY")?;
            let key = if let Some(agg) = self.agg_keyword() {
                self.expect(TokenKind::LParen, "(")?;
                let arg = if self.eat(&TokenKind::Star) {
                    AggArg::Star
                } else {
                    AggArg::Column(self.ident("a column name")?.v)
                };
                self.expect(TokenKind::RParen, ")")?;
                ProjItem::Aggregate(agg, arg)
            } else {
                let col = self.ident("a column name")?;
                if !column_exists(&col.v) {
                    return Err(self.err_at(&col, &column_expected()));
                }
                ProjItem::Column(col.v)
            };
            // The key must name an output column.
            let in_output = match &projection {
                Projection::Star => matches!(&key, ProjItem::Column(_)),
                Projection::Items(items) => items.iter().any(|i| i.out_name() == key.out_name()),
            };
            if !in_output {
                return Err(self.err_here(&[&format!(
                    "ORDER BY key {} to be one of the selected columns",
                    key.out_name()
                )]));
            }
            let desc = if self.eat_keyword("DESC") {
                true
            } else {
                self.eat_keyword("ASC");
                false
            };
            Some(OrderBy { key, desc })
        } else {
            None
        };

        let limit = self.limit()?;

        Ok(TableQuery {
            projection,
            table: table.v,
            filters,
            group_by,
            order_by,
            limit,
        })
    }

    // ----- graph dialect -----

    fn vertex(&mut self) -> Result<(Spanned<String>, Spanned<String>), ParseError> {
        self.expect(TokenKind::LParen, "(")?;
        let var = self.ident("a variable name")?;
        self.expect(TokenKind::Colon, ":")?;
        let label = self.ident("a vertex label")?;
        self.expect(TokenKind::RParen, ")")?;
        Ok((var, label))
    }

    fn graph_query(&mut self) -> Result<GraphQuery, ParseError> {
        self.expect_keyword("MATCH")?;

        let (left_var, left_label) = self.vertex()?;
        if self.schema.label(&left_label.v).is_none() {
            return Err(self.err_at(&left_label, &[self.label_expected()]));
        }

        // Bindings: var -> either a vertex label or an edge type.
        let mut vertex_vars: Vec<(String, &'static str)> = Vec::new();
        let mut edge_var: Option<(String, &'static str)> = None;

        let pattern = if self.eat(&TokenKind::Minus) {
            self.expect(TokenKind::LBracket, "[")?;
            let evar = self.ident("an edge variable")?;
            self.expect(TokenKind::Colon, ":")?;
            let etype = self.ident("an edge type")?;
            let edge_schema = self
                .schema
                .edge(&etype.v)
                .ok_or_else(|| self.err_at(&etype, &[self.edge_expected()]))?;
            self.expect(TokenKind::RBracket, "]")?;
            let directed = if self.eat(&TokenKind::Arrow) {
                true
            } else if self.eat(&TokenKind::Minus) {
                false
            } else {
                return Err(self.err_here(&["->", "-"]));
            };
            let (right_var, right_label) = self.vertex()?;
            let right_schema = self
                .schema
                .label(&right_label.v)
                .ok_or_else(|| self.err_at(&right_label, &[self.label_expected()]))?;
            let left_schema = self.schema.label(&left_label.v).expect("validated above");
            if left_var.v == right_var.v || left_var.v == evar.v || right_var.v == evar.v {
                return Err(self.err_at(&right_var, &["distinct variable names".to_string()]));
            }
            vertex_vars.push((left_var.v.clone(), left_schema.label));
            vertex_vars.push((right_var.v.clone(), right_schema.label));
            edge_var = Some((evar.v.clone(), edge_schema.etype));
            Pattern::Edge {
                left_var: left_var.v,
                left_label: left_label.v,
                edge_var: evar.v,
                edge_type: etype.v,
                right_var: right_var.v,
                right_label: right_label.v,
                directed,
            }
        } else {
            let left_schema = self.schema.label(&left_label.v).expect("validated above");
            vertex_vars.push((left_var.v.clone(), left_schema.label));
            Pattern::Vertex {
                var: left_var.v,
                label: left_label.v,
            }
        };

        let bindings = Bindings {
            schema: self.schema,
            vertex_vars,
            edge_var,
        };

        let mut filters = Vec::new();
        if self.eat_keyword("WHERE") {
            loop {
                let pr = self.prop_ref()?;
                let target = bindings.resolve(&pr)?;
                let op = self.cmp_op()?;
                let value = self.literal()?;
                filters.push(PropFilter { target, op, value });
                if !self.eat_keyword("AND") {
                    break;
                }
            }
        }

        self.expect_keyword("RETURN")?;
        let mut returns = Vec::new();
        loop {
            if let Some(agg) = self.agg_keyword() {
                self.expect(TokenKind::LParen, "(")?;
                if self.eat(&TokenKind::Star) {
                    if agg != Agg::Count {
                        return Err(self.err_here(&["a property (only COUNT may take *)"]));
                    }
                    self.expect(TokenKind::RParen, ")")?;
                    returns.push(ReturnItem::Aggregate(agg, None));
                } else {
                    let pr = self.prop_ref()?;
                    let target = bindings.resolve(&pr)?;
                    self.expect(TokenKind::RParen, ")")?;
                    returns.push(ReturnItem::Aggregate(agg, Some(target)));
                }
            } else {
                let pr = self.prop_ref()?;
                let target = bindings.resolve(&pr)?;
                returns.push(ReturnItem::Prop(target));
            }
            if !self.eat(&TokenKind::Comma) {
                break;
            }
        }

        let order_by = if self.eat_keyword("ORDER") {
            self.expect_keyword("BY")?;
            let pr = self.prop_ref()?;
            let key = bindings.resolve(&pr)?;
            if !returns
                .iter()
                .any(|r| matches!(r, ReturnItem::Prop(p) if *p == key))
            {
                return Err(self.err_at(
                    &pr,
                    &[format!(
                        "ORDER BY key {key} to be one of the returned properties"
                    )],
                ));
            }
            let desc = if self.eat_keyword("DESC") {
                true
            } else {
                self.eat_keyword("ASC");
                false
            };
            Some(GraphOrderBy { key, desc })
        } else {
            None
        };

        let limit = self.limit()?;

        Ok(GraphQuery {
            pattern,
            filters,
            returns,
            order_by,
            limit,
        })
    }

    fn prop_ref(&mut self) -> Result<Spanned<(String, String)>, ParseError> {
        let var = self.ident("a variable name")?;
        self.expect(TokenKind::Dot, ".")?;
        let prop = self.ident("a property name")?;
        Ok(Spanned {
            found: format!("{}.{}", var.v, prop.v),
            at: var.at,
            offset: var.offset,
            v: (var.v, prop.v),
        })
    }

    fn label_expected(&self) -> String {
        format!(
            "a vertex label ({})",
            self.schema
                .labels
                .iter()
                .map(|l| l.label)
                .collect::<Vec<_>>()
                .join(", ")
        )
    }

    fn edge_expected(&self) -> String {
        format!(
            "an edge type ({})",
            self.schema
                .edges
                .iter()
                .map(|e| e.etype)
                .collect::<Vec<_>>()
                .join(", ")
        )
    }
}
