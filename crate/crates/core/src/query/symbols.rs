//! Canonical analysis symbols touched by a query.
//!
//! Columns and properties map to the quantity they expose (`ingoing` -> IV,
//! `total_power` -> TP_total, `current_output` -> CO, ...). Two aggregate
//! shapes additionally derive a computed quantity:
//!
//! - `SUM(flow)` keyed by destination (GROUP BY dest, a dest filter, or a
//!   directed flow pattern grouped/filtered on the head vertex) computes the
//!   ingoing-value sum, so it also touches IV;
//! - `SUM(power)` keyed by node computes the node's total power, so it also
//!   touches TP_total.
//!
//! Identifier columns (names, codes, ids, endpoints) carry no symbol.

use super::ast::*;
use super::schema::columns_of_table;
use serde::Serialize;
use std::collections::BTreeSet;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize)]
pub enum Symbol {
    #[serde(rename = "LV")]
    Lv,
    #[serde(rename = "IV")]
    Iv,
    #[serde(rename = "outgoing")]
    Outgoing,
    #[serde(rename = "TP_total")]
    TpTotal,
    #[serde(rename = "TP_country")]
    TpCountry,
    #[serde(rename = "base_trading_power")]
    BaseTradingPower,
    #[serde(rename = "flow")]
    Flow,
    #[serde(rename = "profit")]
    Profit,
    #[serde(rename = "development")]
    Development,
    #[serde(rename = "is_inland")]
    IsInland,
    #[serde(rename = "has_merchant")]
    HasMerchant,
    #[serde(rename = "steer_dest")]
    SteerDest,
    #[serde(rename = "BP")]
    Bp,
    #[serde(rename = "CP")]
    Cp,
    #[serde(rename = "PD")]
    Pd,
    #[serde(rename = "MS")]
    Ms,
    #[serde(rename = "MD")]
    Md,
    #[serde(rename = "CI")]
    Ci,
    #[serde(rename = "CO")]
    Co,
    #[serde(rename = "level")]
    Level,
}

impl Symbol {
    pub fn as_str(self) -> &'static str {
        match self {
            Symbol::Lv => "LV",
            Symbol::Iv => "IV",
            Symbol::Outgoing => "outgoing",
            Symbol::TpTotal => "TP_total",
            Symbol::TpCountry => "TP_country",
            Symbol::BaseTradingPower => "base_trading_power",
            Symbol::Flow => "flow",
            Symbol::Profit => "profit",
            Symbol::Development => "development",
            Symbol::IsInland => "is_inland",
            Symbol::HasMerchant => "has_merchant",
            Symbol::SteerDest => "steer_dest",
            Symbol::Bp => "BP",
            Symbol::Cp => "CP",
            Symbol::Pd => "PD",
            Symbol::Ms => "MS",
            Symbol::Md => "MD",
            Symbol::Ci => "CI",
            Symbol::Co => "CO",
            Symbol::Level => "level",
        }
    }

    pub fn parse(s: &str) -> Option<Symbol> {
        ALL.iter().copied().find(|sym| sym.as_str() == s)
    }
}

const ALL: &[Symbol] = &[
    Symbol::Lv,
    Symbol::Iv,
    Symbol::Outgoing,
    Symbol::TpTotal,
    Symbol::TpCountry,
    Symbol::BaseTradingPower,
    Symbol::Flow,
    Symbol::Profit,
    Symbol::Development,
    Symbol::IsInland,
    Symbol::HasMerchant,
    Symbol::SteerDest,
    Symbol::Bp,
    Symbol::Cp,
    Symbol::Pd,
    Symbol::Ms,
    Symbol::Md,
    Symbol::Ci,
    Symbol::Co,
    Symbol::Level,
];

impl std::fmt::Display for Symbol {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// The symbol a column or property exposes, if any.
pub fn column_symbol(column: &str) -> Option<Symbol> {
    Some(match column {
        "local_value" => Symbol::Lv,
        "ingoing" => Symbol::Iv,
        "outgoing" => Symbol::Outgoing,
        "total_power" => Symbol::TpTotal,
        "power" => Symbol::TpCountry,
        "base_trading_power" => Symbol::BaseTradingPower,
        "flow" => Symbol::Flow,
        "profit" => Symbol::Profit,
        "development" => Symbol::Development,
        "is_inland" => Symbol::IsInland,
        "has_merchant" => Symbol::HasMerchant,
        "steer_dest" => Symbol::SteerDest,
        "base_price" => Symbol::Bp,
        "current_price" => Symbol::Cp,
        "pop_demand" => Symbol::Pd,
        "max_supply" => Symbol::Ms,
        "current_output" => Symbol::Co,
        "max_demand" => Symbol::Md,
        "current_input" => Symbol::Ci,
        "level" => Symbol::Level,
        _ => return None,
    })
}

/// Canonical symbols referenced or derived by a query.
pub fn touched_symbols(ast: &QueryAst) -> BTreeSet<Symbol> {
    let mut out = BTreeSet::new();
    match ast {
        QueryAst::Table(q) => {
            let mut add = |col: &str| {
                if let Some(s) = column_symbol(col) {
                    out.insert(s);
                }
            };
            let mut sums: Vec<&str> = Vec::new();
            match &q.projection {
                Projection::Star => {
                    if let Some(cols) = columns_of_table(&q.table) {
                        for c in cols {
                            add(c);
                        }
                    }
                }
                Projection::Items(items) => {
                    for item in items {
                        match item {
                            ProjItem::Column(c) => add(c),
                            ProjItem::Aggregate(agg, AggArg::Column(c)) => {
                                add(c);
                                if *agg == Agg::Sum {
                                    sums.push(c);
                                }
                            }
                            ProjItem::Aggregate(_, AggArg::Star) => {}
                        }
                    }
                }
            }
            for f in &q.filters {
                add(&f.column);
            }
            for g in &q.group_by {
                add(g);
            }
            if let Some(o) = &q.order_by {
                if let ProjItem::Column(c) = &o.key {
                    add(c);
                }
            }
            let keyed_by = |col: &str| {
                q.group_by.iter().any(|g| g == col)
                    || q.filters
                        .iter()
                        .any(|f| f.column == col && f.op == CmpOp::Eq)
            };
            if sums.contains(&"flow") && q.table == "TradingFlow" && keyed_by("dest") {
                out.insert(Symbol::Iv);
            }
            if sums.contains(&"power") && q.table == "NodeCountry" && keyed_by("node") {
                out.insert(Symbol::TpTotal);
            }
        }
        QueryAst::Graph(q) => {
            let mut add = |prop: &str| {
                if let Some(s) = column_symbol(prop) {
                    out.insert(s);
                }
            };
            let mut sums: Vec<&PropRef> = Vec::new();
            for r in &q.returns {
                match r {
                    ReturnItem::Prop(p) => add(&p.prop),
                    ReturnItem::Aggregate(agg, Some(p)) => {
                        add(&p.prop);
                        if *agg == Agg::Sum {
                            sums.push(p);
                        }
                    }
                    ReturnItem::Aggregate(_, None) => {}
                }
            }
            for f in &q.filters {
                add(&f.target.prop);
            }
            if let Some(o) = &q.order_by {
                add(&o.key.prop);
            }

            // Derived quantities need the pattern to identify the key side.
            if let Pattern::Edge {
                left_var,
                left_label,
                edge_var,
                edge_type,
                right_var,
                right_label,
                directed,
            } = &q.pattern
            {
                let keyed_on = |var: &str| {
                    q.returns.iter().any(
                        |r| matches!(r, ReturnItem::Prop(p) if p.var == var && p.prop == "name"),
                    ) || q.filters.iter().any(|f| {
                        f.target.var == var && f.target.prop == "name" && f.op == CmpOp::Eq
                    })
                };
                let sum_of = |prop: &str| sums.iter().any(|p| p.var == *edge_var && p.prop == prop);
                if edge_type == "TradingFlow" && *directed && sum_of("flow") && keyed_on(right_var)
                {
                    out.insert(Symbol::Iv);
                }
                if edge_type == "NodeCountry" && sum_of("power") {
                    let node_var = if left_label == "TradingNode" {
                        Some(left_var)
                    } else if right_label == "TradingNode" {
                        Some(right_var)
                    } else {
                        None
                    };
                    if let Some(nv) = node_var {
                        if keyed_on(nv) {
                            out.insert(Symbol::TpTotal);
                        }
                    }
                }
            }
        }
    }
    out
}
