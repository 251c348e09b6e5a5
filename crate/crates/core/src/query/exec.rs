//! Query execution over the table and graph views. Read-only and
//! deterministic: rows come out in ORDER BY order, otherwise primary-key
//! order, and results are truncated at a row cap with an explicit marker.

use super::ast::*;
use crate::model::views::{Edge, GraphView, TableView, Value, Vertex};
use thiserror::Error;

/// Results are cut at this many rows unless a smaller LIMIT applies.
pub const ROW_CAP: usize = 50;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ExecError {
    #[error("schema error: {0}")]
    Schema(String),
    #[error("type error: {0}")]
    Type(String),
}

/// A rectangular result with an explicit truncation marker.
#[derive(Debug, Clone, PartialEq)]
pub struct ResultTable {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Value>>,
    pub truncated: bool,
}

impl ResultTable {
    /// Plain-text rendering used as agent observations.
    pub fn render(&self) -> String {
        let mut widths: Vec<usize> = self.columns.iter().map(|c| c.len()).collect();
        let rendered: Vec<Vec<String>> = self
            .rows
            .iter()
            .map(|row| row.iter().map(Value::render).collect())
            .collect();
        for row in &rendered {
            for (i, cell) in row.iter().enumerate() {
                widths[i] = widths[i].max(cell.len());
            }
        }
        let mut out = String::new();
        let line = |cells: &[String], widths: &[usize]| {
            cells
                .iter()
                .enumerate()
                .map(|(i, c)| format!("{:w$}", c, w = widths[i]))
                .collect::<Vec<_>>()
                .join(" | ")
                .trim_end()
                .to_string()
        };
        out.push_str(&line(&self.columns.to_vec(), &widths));
        out.push('\n');
        out.push_str(
            &widths
                .iter()
                .map(|w| "-".repeat(*w))
                .collect::<Vec<_>>()
                .join("-+-"),
        );
        out.push('\n');
        for row in &rendered {
            out.push_str(&line(row, &widths));
            out.push('\n');
        }
        if self.truncated {
            out.push_str(&format!(
                "({} rows, truncated at {ROW_CAP})\n",
                self.rows.len()
            ));
        } else {
            out.push_str(&format!("({} rows)\n", self.rows.len()));
        }
        out
    }
}

/// Both views of one database, built once and shared read-only.
#[derive(Debug, Clone)]
pub struct Views {
    pub table: TableView,
    pub graph: GraphView,
}

impl Views {
    pub fn of(db: &crate::model::Database) -> Views {
        Views {
            table: crate::model::views::table_view(db),
            graph: crate::model::views::graph_view(db),
        }
    }
}

/// Execute a query against the view matching its dialect.
pub fn execute(ast: &QueryAst, views: &Views) -> Result<ResultTable, ExecError> {
    match ast {
        QueryAst::Table(q) => execute_table(q, &views.table),
        QueryAst::Graph(q) => execute_graph(q, &views.graph),
    }
}

fn matches(value: &Value, op: CmpOp, lit: &Literal) -> Result<bool, ExecError> {
    use std::cmp::Ordering;
    // Null literals only support presence checks.
    if let Literal::Null = lit {
        return Ok(match op {
            CmpOp::Eq => matches!(value, Value::Null),
            CmpOp::Ne => !matches!(value, Value::Null),
            _ => false,
        });
    }
    // A null value never matches a non-null literal, except by !=.
    if let Value::Null = value {
        return Ok(matches!(op, CmpOp::Ne));
    }
    let ord = match (value, lit) {
        (Value::Num(a), Literal::Num(b)) => a.partial_cmp(b).unwrap_or(Ordering::Equal),
        (Value::Str(a), Literal::Str(b)) => a.as_str().cmp(b.as_str()),
        (Value::Bool(a), Literal::Bool(b)) => match op {
            CmpOp::Eq | CmpOp::Ne => {
                if a == b {
                    Ordering::Equal
                } else {
                    Ordering::Less
                }
            }
            _ => return Err(ExecError::Type("booleans only support = and !=".into())),
        },
        _ => {
            return Err(ExecError::Type(format!(
                "cannot compare {} with {lit}",
                value.render()
            )))
        }
    };
    Ok(match op {
        CmpOp::Eq => ord == Ordering::Equal,
        CmpOp::Ne => ord != Ordering::Equal,
        CmpOp::Lt => ord == Ordering::Less,
        CmpOp::Le => ord != Ordering::Greater,
        CmpOp::Gt => ord == Ordering::Greater,
        CmpOp::Ge => ord != Ordering::Less,
    })
}

fn aggregate(agg: Agg, values: &[Value], star_count: Option<usize>) -> Result<Value, ExecError> {
    if let Some(n) = star_count {
        return Ok(Value::Num(n as f64));
    }
    let non_null: Vec<&Value> = values
        .iter()
        .filter(|v| !matches!(v, Value::Null))
        .collect();
    match agg {
        Agg::Count => Ok(Value::Num(non_null.len() as f64)),
        Agg::Sum | Agg::Avg => {
            let mut nums = Vec::with_capacity(non_null.len());
            for v in &non_null {
                match v {
                    Value::Num(n) => nums.push(*n),
                    other => {
                        return Err(ExecError::Type(format!(
                            "{agg} needs numeric values, found {}",
                            other.render()
                        )))
                    }
                }
            }
            if nums.is_empty() {
                return Ok(Value::Null);
            }
            let sum: f64 = nums.iter().sum();
            Ok(Value::Num(if agg == Agg::Avg {
                sum / nums.len() as f64
            } else {
                sum
            }))
        }
        Agg::Min | Agg::Max => {
            let mut best: Option<&Value> = None;
            for v in non_null {
                best = Some(match best {
                    None => v,
                    Some(b) => {
                        let take = match agg {
                            Agg::Min => v.cmp_total(b).is_lt(),
                            _ => v.cmp_total(b).is_gt(),
                        };
                        if take {
                            v
                        } else {
                            b
                        }
                    }
                });
            }
            Ok(best.cloned().unwrap_or(Value::Null))
        }
    }
}

/// Group rows by key columns (first-seen order) and evaluate the output
/// items per group. With no keys everything forms one group, and ungrouped
/// aggregates still emit one row over zero inputs.
struct SelectItem {
    name: String,
    kind: ItemKind,
}

enum ItemKind {
    /// Index into the key tuple.
    Key(usize),
    Aggregate(Agg, Option<usize>),
}

fn group_rows(
    items: &[SelectItem],
    keys_per_row: Vec<Vec<Value>>,
    agg_inputs_per_row: Vec<Vec<Value>>,
    grouped: bool,
) -> (Vec<String>, Vec<Vec<Value>>) {
    let columns: Vec<String> = items.iter().map(|i| i.name.clone()).collect();
    let mut order: Vec<Vec<Value>> = Vec::new();
    let mut groups: Vec<Vec<usize>> = Vec::new();
    if grouped {
        for (row_idx, key) in keys_per_row.iter().enumerate() {
            match order.iter().position(|k| k == key) {
                Some(g) => groups[g].push(row_idx),
                None => {
                    order.push(key.clone());
                    groups.push(vec![row_idx]);
                }
            }
        }
    } else {
        order.push(Vec::new());
        groups.push((0..keys_per_row.len()).collect());
    }
    let mut rows = Vec::with_capacity(groups.len());
    for (key, members) in order.iter().zip(groups.iter()) {
        let mut row = Vec::with_capacity(items.len());
        for item in items {
            match &item.kind {
                ItemKind::Key(i) => row.push(key[*i].clone()),
                ItemKind::Aggregate(agg, input) => {
                    let value = match input {
                        None => aggregate(*agg, &[], Some(members.len())),
                        Some(i) => {
                            let vals: Vec<Value> = members
                                .iter()
                                .map(|&r| agg_inputs_per_row[r][*i].clone())
                                .collect();
                            aggregate(*agg, &vals, None)
                        }
                    };
                    // Type errors in aggregates were checked before grouping.
                    row.push(value.unwrap_or(Value::Null));
                }
            }
        }
        rows.push(row);
    }
    (columns, rows)
}

fn finish(
    columns: Vec<String>,
    mut rows: Vec<Vec<Value>>,
    order_key: Option<(String, bool)>,
    limit: Option<u64>,
) -> Result<ResultTable, ExecError> {
    if let Some((key, desc)) = order_key {
        let idx = columns
            .iter()
            .position(|c| *c == key)
            .ok_or_else(|| ExecError::Schema(format!("ORDER BY key {key} not in result")))?;
        rows.sort_by(|a, b| {
            let ord = a[idx].cmp_total(&b[idx]);
            if desc {
                ord.reverse()
            } else {
                ord
            }
        });
    }
    if let Some(n) = limit {
        rows.truncate(n as usize);
    }
    let truncated = rows.len() > ROW_CAP;
    rows.truncate(ROW_CAP);
    Ok(ResultTable {
        columns,
        rows,
        truncated,
    })
}

pub fn execute_table(q: &TableQuery, view: &TableView) -> Result<ResultTable, ExecError> {
    let table = view
        .table(&q.table)
        .ok_or_else(|| ExecError::Schema(format!("unknown table {}", q.table)))?;
    let col_idx = |name: &str| -> Result<usize, ExecError> {
        table
            .columns
            .iter()
            .position(|c| c == name)
            .ok_or_else(|| ExecError::Schema(format!("unknown column {name} in {}", q.table)))
    };

    let mut selected: Vec<&Vec<Value>> = Vec::new();
    'rows: for row in &table.rows {
        for f in &q.filters {
            if !matches(&row[col_idx(&f.column)?], f.op, &f.value)? {
                continue 'rows;
            }
        }
        selected.push(row);
    }

    let items: Vec<ProjItem> = match &q.projection {
        Projection::Star => table
            .columns
            .iter()
            .map(|c| ProjItem::Column(c.clone()))
            .collect(),
        Projection::Items(items) => items.clone(),
    };
    let has_aggregate = items.iter().any(|i| matches!(i, ProjItem::Aggregate(..)));

    if !has_aggregate && q.group_by.is_empty() {
        // Plain projection.
        let idxs: Vec<usize> = items
            .iter()
            .map(|i| match i {
                ProjItem::Column(c) => col_idx(c),
                ProjItem::Aggregate(..) => unreachable!("no aggregates here"),
            })
            .collect::<Result<_, _>>()?;
        let columns = items.iter().map(|i| i.out_name()).collect();
        let rows = selected
            .iter()
            .map(|row| idxs.iter().map(|&i| row[i].clone()).collect())
            .collect();
        return finish(
            columns,
            rows,
            q.order_by.as_ref().map(|o| (o.key.out_name(), o.desc)),
            q.limit,
        );
    }

    // Grouped/aggregated projection.
    let key_cols: Vec<usize> = q
        .group_by
        .iter()
        .map(|c| col_idx(c))
        .collect::<Result<_, _>>()?;
    let mut select_items = Vec::new();
    let mut agg_cols: Vec<usize> = Vec::new();
    for item in &items {
        match item {
            ProjItem::Column(c) => {
                let key_pos = q
                    .group_by
                    .iter()
                    .position(|g| g == c)
                    .ok_or_else(|| ExecError::Schema(format!("{c} is not grouped")))?;
                select_items.push(SelectItem {
                    name: item.out_name(),
                    kind: ItemKind::Key(key_pos),
                });
            }
            ProjItem::Aggregate(agg, AggArg::Star) => select_items.push(SelectItem {
                name: item.out_name(),
                kind: ItemKind::Aggregate(*agg, None),
            }),
            ProjItem::Aggregate(agg, AggArg::Column(c)) => {
                let idx = col_idx(c)?;
                // Probe the aggregate's type constraints up front so errors
                // surface deterministically even for empty groups.
                if matches!(agg, Agg::Sum | Agg::Avg) {
                    for row in &selected {
                        if !matches!(row[idx], Value::Num(_) | Value::Null) {
                            return Err(ExecError::Type(format!(
                                "{agg} needs numeric values in column {c}"
                            )));
                        }
                    }
                }
                select_items.push(SelectItem {
                    name: item.out_name(),
                    kind: ItemKind::Aggregate(*agg, Some(agg_cols.len())),
                });
                agg_cols.push(idx);
            }
        }
    }
    let keys_per_row: Vec<Vec<Value>> = selected
        .iter()
        .map(|row| key_cols.iter().map(|&i| row[i].clone()).collect())
        .collect();
    let agg_inputs: Vec<Vec<Value>> = selected
        .iter()
        .map(|row| agg_cols.iter().map(|&i| row[i].clone()).collect())
        .collect();
    let (columns, rows) = group_rows(
        &select_items,
        keys_per_row,
        agg_inputs,
        !q.group_by.is_empty(),
    );
    finish(
        columns,
        rows,
        q.order_by.as_ref().map(|o| (o.key.out_name(), o.desc)),
        q.limit,
    )
}

/// One pattern match: bound vertices and, for edge patterns, the edge.
enum Binding<'a> {
    Vertex(&'a Vertex),
    Triple {
        left: &'a Vertex,
        edge: &'a Edge,
        right: &'a Vertex,
    },
}

impl<'a> Binding<'a> {
    fn resolve(&self, q: &GraphQuery, var: &str, prop: &str) -> Result<Value, ExecError> {
        let missing = || ExecError::Schema(format!("unknown property {var}.{prop}"));
        match self {
            Binding::Vertex(v) => v.prop(prop).cloned().ok_or_else(missing),
            Binding::Triple { left, edge, right } => {
                let (lv, ev, rv) = match &q.pattern {
                    Pattern::Edge {
                        left_var,
                        edge_var,
                        right_var,
                        ..
                    } => (left_var, edge_var, right_var),
                    Pattern::Vertex { .. } => unreachable!("triple from vertex pattern"),
                };
                if var == lv {
                    left.prop(prop).cloned().ok_or_else(missing)
                } else if var == rv {
                    right.prop(prop).cloned().ok_or_else(missing)
                } else if var == ev {
                    edge.prop(prop).cloned().ok_or_else(missing)
                } else {
                    Err(ExecError::Schema(format!("unbound variable {var}")))
                }
            }
        }
    }
}

pub fn execute_graph(q: &GraphQuery, view: &GraphView) -> Result<ResultTable, ExecError> {
    // Enumerate bindings in view order (vertices and edges are primary-key
    // sorted), forward orientation before reverse.
    let mut bindings: Vec<Binding> = Vec::new();
    match &q.pattern {
        Pattern::Vertex { label, .. } => {
            if !view.vertices.iter().any(|v| v.label == label.as_str()) {
                // Unknown labels were rejected at parse time; an empty label
                // set here just yields no rows.
            }
            for v in view.vertices.iter().filter(|v| v.label == label.as_str()) {
                bindings.push(Binding::Vertex(v));
            }
        }
        Pattern::Edge {
            left_label,
            edge_type,
            right_label,
            directed,
            ..
        } => {
            let vertex = |label: &str, id: &str| {
                view.vertices
                    .iter()
                    .find(|v| v.label == label && v.id == id)
            };
            for e in view.edges.iter().filter(|e| e.etype == edge_type.as_str()) {
                // Forward orientation: pattern left = edge source.
                if e.from_label == left_label.as_str() && e.to_label == right_label.as_str() {
                    if let (Some(l), Some(r)) = (
                        vertex(e.from_label, &e.from_id),
                        vertex(e.to_label, &e.to_id),
                    ) {
                        bindings.push(Binding::Triple {
                            left: l,
                            edge: e,
                            right: r,
                        });
                    }
                }
                // Reverse orientation for undirected patterns or undirected
                // edges (a directed pattern over an undirected relation is
                // treated as undirected).
                if (!directed || !e.directed)
                    && e.to_label == left_label.as_str()
                    && e.from_label == right_label.as_str()
                {
                    if let (Some(l), Some(r)) = (
                        vertex(e.to_label, &e.to_id),
                        vertex(e.from_label, &e.from_id),
                    ) {
                        bindings.push(Binding::Triple {
                            left: l,
                            edge: e,
                            right: r,
                        });
                    }
                }
            }
        }
    }

    let mut kept: Vec<&Binding> = Vec::new();
    'bind: for b in &bindings {
        for f in &q.filters {
            let v = b.resolve(q, &f.target.var, &f.target.prop)?;
            if !matches(&v, f.op, &f.value)? {
                continue 'bind;
            }
        }
        kept.push(b);
    }

    let has_aggregate = q
        .returns
        .iter()
        .any(|r| matches!(r, ReturnItem::Aggregate(..)));

    if !has_aggregate {
        let columns: Vec<String> = q.returns.iter().map(|r| r.out_name()).collect();
        let mut rows = Vec::with_capacity(kept.len());
        for b in &kept {
            let mut row = Vec::with_capacity(q.returns.len());
            for r in &q.returns {
                match r {
                    ReturnItem::Prop(p) => row.push(b.resolve(q, &p.var, &p.prop)?),
                    ReturnItem::Aggregate(..) => unreachable!("no aggregates here"),
                }
            }
            rows.push(row);
        }
        return finish(
            columns,
            rows,
            q.order_by.as_ref().map(|o| (o.key.to_string(), o.desc)),
            q.limit,
        );
    }

    // Implicit grouping by the plain return items.
    let plain: Vec<&PropRef> = q
        .returns
        .iter()
        .filter_map(|r| match r {
            ReturnItem::Prop(p) => Some(p),
            _ => None,
        })
        .collect();
    let mut select_items = Vec::new();
    let mut agg_refs: Vec<&PropRef> = Vec::new();
    for r in &q.returns {
        match r {
            ReturnItem::Prop(p) => {
                let key_pos = plain.iter().position(|k| **k == *p).expect("from plain");
                select_items.push(SelectItem {
                    name: r.out_name(),
                    kind: ItemKind::Key(key_pos),
                });
            }
            ReturnItem::Aggregate(agg, None) => select_items.push(SelectItem {
                name: r.out_name(),
                kind: ItemKind::Aggregate(*agg, None),
            }),
            ReturnItem::Aggregate(agg, Some(p)) => {
                select_items.push(SelectItem {
                    name: r.out_name(),
                    kind: ItemKind::Aggregate(*agg, Some(agg_refs.len())),
                });
                agg_refs.push(p);
            }
        }
    }
    let mut keys_per_row = Vec::with_capacity(kept.len());
    let mut agg_inputs = Vec::with_capacity(kept.len());
    for b in &kept {
        let mut key = Vec::with_capacity(plain.len());
        for p in &plain {
            key.push(b.resolve(q, &p.var, &p.prop)?);
        }
        keys_per_row.push(key);
        let mut inputs = Vec::with_capacity(agg_refs.len());
        for p in &agg_refs {
            inputs.push(b.resolve(q, &p.var, &p.prop)?);
        }
        agg_inputs.push(inputs);
    }
    // Pre-check SUM/AVG type constraints like the table path, so errors
    // surface deterministically even for empty groups.
    for item in &select_items {
        if let ItemKind::Aggregate(agg @ (Agg::Sum | Agg::Avg), Some(k)) = &item.kind {
            for inputs in &agg_inputs {
                if !matches!(inputs[*k], Value::Num(_) | Value::Null) {
                    return Err(ExecError::Type(format!(
                        "{agg} needs numeric values in {}",
                        agg_refs[*k]
                    )));
                }
            }
        }
    }
    let (columns, rows) = group_rows(&select_items, keys_per_row, agg_inputs, !plain.is_empty());
    finish(
        columns,
        rows,
        q.order_by.as_ref().map(|o| (o.key.to_string(), o.desc)),
        q.limit,
    )
}
