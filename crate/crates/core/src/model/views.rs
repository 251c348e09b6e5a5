//! Tabular and graph views over a scenario database.
//!
//! Both views are read-only projections of the same underlying rows. Every
//! scalar cell reachable through one view is reachable through the other:
//! table rows become vertices (entity tables) or edges (relation tables),
//! and all columns — including the key columns — are carried as properties.
//!
//! Rows, vertices and edges are emitted in primary-key order, which makes
//! query results deterministic regardless of storage order.

use super::{Database, Market, TradeWorld};
use serde::Serialize;
use std::cmp::Ordering;

/// A scalar cell value.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(untagged)]
pub enum Value {
    Null,
    Bool(bool),
    Num(f64),
    Str(String),
}

impl Value {
    pub fn opt_str(v: &Option<String>) -> Value {
        match v {
            Some(s) => Value::Str(s.clone()),
            None => Value::Null,
        }
    }

    /// Total order used for ORDER BY: Null < Bool < Num < Str, numbers by
    /// magnitude (no NaN is ever stored), strings lexicographic.
    pub fn cmp_total(&self, other: &Value) -> Ordering {
        use Value::*;
        fn rank(v: &Value) -> u8 {
            match v {
                Null => 0,
                Bool(_) => 1,
                Num(_) => 2,
                Str(_) => 3,
            }
        }
        match (self, other) {
            (Null, Null) => Ordering::Equal,
            (Bool(a), Bool(b)) => a.cmp(b),
            (Num(a), Num(b)) => a.partial_cmp(b).unwrap_or(Ordering::Equal),
            (Str(a), Str(b)) => a.cmp(b),
            _ => rank(self).cmp(&rank(other)),
        }
    }

    pub fn render(&self) -> String {
        match self {
            Value::Null => "null".to_string(),
            Value::Bool(b) => b.to_string(),
            Value::Num(n) => n.to_string(),
            Value::Str(s) => s.clone(),
        }
    }
}

/// Column names of the Locating tables.
pub const TRADING_NODE_COLS: &[&str] = &[
    "name",
    "local_value",
    "ingoing",
    "outgoing",
    "total_power",
    "is_inland",
];
pub const COUNTRY_COLS: &[&str] = &["code", "development", "home_node", "profit"];
pub const TRADING_FLOW_COLS: &[&str] = &["src", "dest", "flow"];
pub const NODE_COUNTRY_COLS: &[&str] = &[
    "node",
    "country",
    "base_trading_power",
    "power",
    "has_merchant",
    "steer_dest",
];

/// Column names of the Building tables.
pub const GOODS_COLS: &[&str] = &["code", "name", "base_price", "current_price", "pop_demand"];
pub const BUILDINGS_COLS: &[&str] = &["id", "name", "level"];
pub const SUPPLY_COLS: &[&str] = &["building", "goods", "max_supply", "current_output", "level"];
pub const DEMAND_COLS: &[&str] = &["goods", "building", "max_demand", "current_input", "level"];

/// One named table with ordered columns and rows.
#[derive(Debug, Clone)]
pub struct Table {
    pub name: &'static str,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Value>>,
}

/// The tabular view: four named tables per scenario.
#[derive(Debug, Clone)]
pub struct TableView {
    pub tables: Vec<Table>,
}

impl TableView {
    pub fn table(&self, name: &str) -> Option<&Table> {
        self.tables.iter().find(|t| t.name == name)
    }

    pub fn table_names(&self) -> Vec<&'static str> {
        self.tables.iter().map(|t| t.name).collect()
    }
}

/// A labeled vertex carrying all entity columns as properties.
#[derive(Debug, Clone)]
pub struct Vertex {
    pub label: &'static str,
    pub id: String,
    pub props: Vec<(String, Value)>,
}

/// A typed edge; endpoint ids double as properties so the graph view loses
/// no cells relative to the tables.
#[derive(Debug, Clone)]
pub struct Edge {
    pub etype: &'static str,
    pub from_label: &'static str,
    pub from_id: String,
    pub to_label: &'static str,
    pub to_id: String,
    pub directed: bool,
    pub props: Vec<(String, Value)>,
}

/// The graph view: entity tables as vertices, relation tables as edges.
#[derive(Debug, Clone)]
pub struct GraphView {
    pub vertices: Vec<Vertex>,
    pub edges: Vec<Edge>,
}

impl Vertex {
    pub fn prop(&self, name: &str) -> Option<&Value> {
        self.props.iter().find(|(k, _)| k == name).map(|(_, v)| v)
    }
}

impl Edge {
    pub fn prop(&self, name: &str) -> Option<&Value> {
        self.props.iter().find(|(k, _)| k == name).map(|(_, v)| v)
    }
}

fn cols(names: &[&str]) -> Vec<String> {
    names.iter().map(|s| s.to_string()).collect()
}

fn world_tables(w: &TradeWorld) -> Vec<Table> {
    let mut w = w.clone();
    w.sort_canonical();
    vec![
        Table {
            name: "TradingNode",
            columns: cols(TRADING_NODE_COLS),
            rows: w
                .nodes
                .iter()
                .map(|n| {
                    vec![
                        Value::Str(n.name.clone()),
                        Value::Num(n.local_value),
                        Value::Num(n.ingoing),
                        Value::Num(n.outgoing),
                        Value::Num(n.total_power),
                        Value::Bool(n.is_inland),
                    ]
                })
                .collect(),
        },
        Table {
            name: "Country",
            columns: cols(COUNTRY_COLS),
            rows: w
                .countries
                .iter()
                .map(|c| {
                    vec![
                        Value::Str(c.code.clone()),
                        Value::Num(c.development),
                        Value::Str(c.home_node.clone()),
                        Value::Num(c.profit),
                    ]
                })
                .collect(),
        },
        Table {
            name: "TradingFlow",
            columns: cols(TRADING_FLOW_COLS),
            rows: w
                .flows
                .iter()
                .map(|f| {
                    vec![
                        Value::Str(f.src.clone()),
                        Value::Str(f.dest.clone()),
                        Value::Num(f.flow),
                    ]
                })
                .collect(),
        },
        Table {
            name: "NodeCountry",
            columns: cols(NODE_COUNTRY_COLS),
            rows: w
                .node_countries
                .iter()
                .map(|nc| {
                    vec![
                        Value::Str(nc.node.clone()),
                        Value::Str(nc.country.clone()),
                        Value::Num(nc.base_trading_power),
                        Value::Num(nc.power),
                        Value::Bool(nc.has_merchant),
                        Value::opt_str(&nc.steer_dest),
                    ]
                })
                .collect(),
        },
    ]
}

fn market_tables(m: &Market) -> Vec<Table> {
    let mut m = m.clone();
    m.sort_canonical();
    vec![
        Table {
            name: "Goods",
            columns: cols(GOODS_COLS),
            rows: m
                .goods
                .iter()
                .map(|g| {
                    vec![
                        Value::Str(g.code.clone()),
                        Value::Str(g.name.clone()),
                        Value::Num(g.base_price),
                        Value::Num(g.current_price),
                        Value::Num(g.pop_demand),
                    ]
                })
                .collect(),
        },
        Table {
            name: "Buildings",
            columns: cols(BUILDINGS_COLS),
            rows: m
                .buildings
                .iter()
                .map(|b| {
                    vec![
                        Value::Str(b.id.clone()),
                        Value::Str(b.name.clone()),
                        Value::Num(b.level as f64),
                    ]
                })
                .collect(),
        },
        Table {
            name: "Supply",
            columns: cols(SUPPLY_COLS),
            rows: m
                .supplies
                .iter()
                .map(|s| {
                    vec![
                        Value::Str(s.building.clone()),
                        Value::Str(s.goods.clone()),
                        Value::Num(s.max_supply),
                        Value::Num(s.current_output),
                        Value::Num(s.level as f64),
                    ]
                })
                .collect(),
        },
        Table {
            name: "Demand",
            columns: cols(DEMAND_COLS),
            rows: m
                .demands
                .iter()
                .map(|d| {
                    vec![
                        Value::Str(d.goods.clone()),
                        Value::Str(d.building.clone()),
                        Value::Num(d.max_demand),
                        Value::Num(d.current_input),
                        Value::Num(d.level as f64),
                    ]
                })
                .collect(),
        },
    ]
}

/// Build the tabular view of a database.
pub fn table_view(db: &Database) -> TableView {
    let tables = match db {
        Database::Locating(w) => world_tables(w),
        Database::Building(m) => market_tables(m),
    };
    TableView { tables }
}

fn props_from(columns: &[&str], row: &[Value]) -> Vec<(String, Value)> {
    columns
        .iter()
        .zip(row.iter())
        .map(|(c, v)| (c.to_string(), v.clone()))
        .collect()
}

/// Build the graph view of a database: entity rows become vertices, relation
/// rows become edges.
pub fn graph_view(db: &Database) -> GraphView {
    match db {
        Database::Locating(w) => {
            let mut w = w.clone();
            w.sort_canonical();
            let vertices = w
                .nodes
                .iter()
                .map(|n| Vertex {
                    label: "TradingNode",
                    id: n.name.clone(),
                    props: props_from(
                        TRADING_NODE_COLS,
                        &[
                            Value::Str(n.name.clone()),
                            Value::Num(n.local_value),
                            Value::Num(n.ingoing),
                            Value::Num(n.outgoing),
                            Value::Num(n.total_power),
                            Value::Bool(n.is_inland),
                        ],
                    ),
                })
                .chain(w.countries.iter().map(|c| Vertex {
                    label: "Country",
                    id: c.code.clone(),
                    props: props_from(
                        COUNTRY_COLS,
                        &[
                            Value::Str(c.code.clone()),
                            Value::Num(c.development),
                            Value::Str(c.home_node.clone()),
                            Value::Num(c.profit),
                        ],
                    ),
                }))
                .collect();
            let edges = w
                .flows
                .iter()
                .map(|f| Edge {
                    etype: "TradingFlow",
                    from_label: "TradingNode",
                    from_id: f.src.clone(),
                    to_label: "TradingNode",
                    to_id: f.dest.clone(),
                    directed: true,
                    props: props_from(
                        TRADING_FLOW_COLS,
                        &[
                            Value::Str(f.src.clone()),
                            Value::Str(f.dest.clone()),
                            Value::Num(f.flow),
                        ],
                    ),
                })
                .chain(w.node_countries.iter().map(|nc| Edge {
                    etype: "NodeCountry",
                    from_label: "TradingNode",
                    from_id: nc.node.clone(),
                    to_label: "Country",
                    to_id: nc.country.clone(),
                    directed: false,
                    props: props_from(
                        NODE_COUNTRY_COLS,
                        &[
                            Value::Str(nc.node.clone()),
                            Value::Str(nc.country.clone()),
                            Value::Num(nc.base_trading_power),
                            Value::Num(nc.power),
                            Value::Bool(nc.has_merchant),
                            Value::opt_str(&nc.steer_dest),
                        ],
                    ),
                }))
                .collect();
            GraphView { vertices, edges }
        }
        Database::Building(m) => {
            let mut m = m.clone();
            m.sort_canonical();
            let vertices = m
                .goods
                .iter()
                .map(|g| Vertex {
                    label: "Goods",
                    id: g.code.clone(),
                    props: props_from(
                        GOODS_COLS,
                        &[
                            Value::Str(g.code.clone()),
                            Value::Str(g.name.clone()),
                            Value::Num(g.base_price),
                            Value::Num(g.current_price),
                            Value::Num(g.pop_demand),
                        ],
                    ),
                })
                .chain(m.buildings.iter().map(|b| Vertex {
                    label: "Building",
                    id: b.id.clone(),
                    props: props_from(
                        BUILDINGS_COLS,
                        &[
                            Value::Str(b.id.clone()),
                            Value::Str(b.name.clone()),
                            Value::Num(b.level as f64),
                        ],
                    ),
                }))
                .collect();
            let edges = m
                .supplies
                .iter()
                .map(|s| Edge {
                    etype: "Supply",
                    from_label: "Building",
                    from_id: s.building.clone(),
                    to_label: "Goods",
                    to_id: s.goods.clone(),
                    directed: true,
                    props: props_from(
                        SUPPLY_COLS,
                        &[
                            Value::Str(s.building.clone()),
                            Value::Str(s.goods.clone()),
                            Value::Num(s.max_supply),
                            Value::Num(s.current_output),
                            Value::Num(s.level as f64),
                        ],
                    ),
                })
                .chain(m.demands.iter().map(|d| Edge {
                    etype: "Demand",
                    from_label: "Goods",
                    from_id: d.goods.clone(),
                    to_label: "Building",
                    to_id: d.building.clone(),
                    directed: true,
                    props: props_from(
                        DEMAND_COLS,
                        &[
                            Value::Str(d.goods.clone()),
                            Value::Str(d.building.clone()),
                            Value::Num(d.max_demand),
                            Value::Num(d.current_input),
                            Value::Num(d.level as f64),
                        ],
                    ),
                }))
                .collect();
            GraphView { vertices, edges }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::super::{
        Building, Country, Database, DemandEdge, Goods, Market, NodeCountry, SupplyEdge,
        TradeWorld, TradingFlow, TradingNode,
    };
    use super::*;
    use std::collections::BTreeSet;

    fn fig1_world() -> Database {
        // Four nodes, one country, three flow edges, two power relations.
        Database::Locating(TradeWorld {
            nodes: vec![
                TradingNode::new("Doab", 3.0, false),
                TradingNode::new("Ganges", 2.0, false),
                TradingNode::new("Deccan", 5.0, false),
                TradingNode::new("Bengal", 1.0, false),
            ],
            countries: vec![Country::new("BAH", 9.0, "Deccan")],
            flows: vec![
                TradingFlow::new("Doab", "Deccan"),
                TradingFlow::new("Ganges", "Deccan"),
                TradingFlow::new("Bengal", "Ganges"),
            ],
            node_countries: vec![
                NodeCountry::new("Deccan", "BAH", 5.0),
                NodeCountry::new("Doab", "BAH", 2.0),
            ],
        })
    }

    fn small_market() -> Database {
        Database::Building(Market {
            goods: vec![
                Goods::new("furniture", "Furniture", 10.0, 50.0),
                Goods::new("wood", "Wood", 4.0, 0.0),
                Goods::new("hardwood", "Hardwood", 6.0, 0.0),
            ],
            buildings: vec![
                Building::new("B1", "Furniture Factory", 1),
                Building::new("B2", "Lumber Mill", 1),
            ],
            supplies: vec![
                SupplyEdge::new("B1", "furniture", 40.0, 1),
                SupplyEdge::new("B2", "wood", 20.0, 1),
            ],
            demands: vec![
                DemandEdge::new("wood", "B1", 30.0, 1),
                DemandEdge::new("hardwood", "B2", 20.0, 1),
            ],
        })
    }

    #[test]
    fn graph_view_counts() {
        let gv = graph_view(&fig1_world());
        assert_eq!(gv.vertices.len(), 5);
        assert_eq!(gv.edges.len(), 3 + 2);

        let gv = graph_view(&small_market());
        assert_eq!(gv.vertices.len(), 5);
        assert_eq!(gv.edges.len(), 4);
    }

    #[test]
    fn empty_db_gives_empty_graph() {
        let gv = graph_view(&Database::Locating(TradeWorld::default()));
        assert!(gv.vertices.is_empty());
        assert!(gv.edges.is_empty());
    }

    #[test]
    fn table_view_names_and_counts() {
        let tv = table_view(&fig1_world());
        assert_eq!(
            tv.table_names(),
            vec!["TradingNode", "Country", "TradingFlow", "NodeCountry"]
        );
        assert_eq!(tv.table("TradingNode").unwrap().rows.len(), 4);
        assert_eq!(tv.table("Country").unwrap().rows.len(), 1);

        let tv = table_view(&small_market());
        assert_eq!(
            tv.table_names(),
            vec!["Goods", "Buildings", "Supply", "Demand"]
        );
        assert_eq!(tv.table("Supply").unwrap().rows.len(), 2);
    }

    /// Canonical cell set of a table view: (table, key, column, value).
    fn table_cells(tv: &TableView) -> BTreeSet<(String, String, String, String)> {
        let mut out = BTreeSet::new();
        for t in &tv.tables {
            for row in &t.rows {
                // Entity tables key on the first column; relation tables on
                // the first two.
                let key = match t.name {
                    "TradingFlow" | "NodeCountry" | "Supply" | "Demand" => {
                        format!("{}|{}", row[0].render(), row[1].render())
                    }
                    _ => row[0].render(),
                };
                for (c, v) in t.columns.iter().zip(row.iter()) {
                    out.insert((t.name.to_string(), key.clone(), c.clone(), v.render()));
                }
            }
        }
        out
    }

    fn graph_cells(gv: &GraphView) -> BTreeSet<(String, String, String, String)> {
        let mut out = BTreeSet::new();
        for v in &gv.vertices {
            let table = match v.label {
                "Building" => "Buildings".to_string(),
                other => other.to_string(),
            };
            for (p, val) in &v.props {
                out.insert((table.clone(), v.id.clone(), p.clone(), val.render()));
            }
        }
        for e in &gv.edges {
            let key = format!("{}|{}", e.props[0].1.render(), e.props[1].1.render());
            for (p, val) in &e.props {
                out.insert((e.etype.to_string(), key.clone(), p.clone(), val.render()));
            }
        }
        out
    }

    #[test]
    fn views_expose_identical_cells() {
        for db in [fig1_world(), small_market()] {
            let tv = table_view(&db);
            let gv = graph_view(&db);
            assert_eq!(table_cells(&tv), graph_cells(&gv));
        }
    }

    #[test]
    fn views_expose_identical_cells_on_generated_databases() {
        use crate::genesis::{self, GenConfig, ScalePreset};
        use crate::model::Scenario;
        for seed in 0..4u64 {
            for scenario in [Scenario::Locating, Scenario::Building] {
                let inst =
                    genesis::generate(&GenConfig::preset(scenario, ScalePreset::Small, seed))
                        .unwrap();
                let entity_count = match &inst.database {
                    Database::Locating(w) => {
                        w.nodes.len() + w.countries.len() + w.flows.len() + w.node_countries.len()
                    }
                    Database::Building(m) => {
                        m.goods.len() + m.buildings.len() + m.supplies.len() + m.demands.len()
                    }
                };
                assert!(entity_count <= 50, "exhaustive check wants small instances");
                let tv = table_view(&inst.database);
                let gv = graph_view(&inst.database);
                assert_eq!(table_cells(&tv), graph_cells(&gv));
            }
        }
    }

    #[test]
    fn value_total_order() {
        let mut vals = vec![
            Value::Str("b".into()),
            Value::Num(2.0),
            Value::Null,
            Value::Num(-1.0),
            Value::Bool(true),
            Value::Str("a".into()),
        ];
        vals.sort_by(|a, b| a.cmp_total(b));
        assert_eq!(
            vals,
            vec![
                Value::Null,
                Value::Bool(true),
                Value::Num(-1.0),
                Value::Num(2.0),
                Value::Str("a".into()),
                Value::Str("b".into()),
            ]
        );
    }
}
