//! Static query schemas for both scenarios: table/column names for the
//! tabular dialect, vertex labels and edge types for the graph dialect.

use crate::model::views;
use crate::model::Scenario;

#[derive(Debug, Clone, Copy)]
pub struct TableSchema {
    pub name: &'static str,
    pub columns: &'static [&'static str],
}

#[derive(Debug, Clone, Copy)]
pub struct LabelSchema {
    pub label: &'static str,
    pub props: &'static [&'static str],
}

#[derive(Debug, Clone, Copy)]
pub struct EdgeSchema {
    pub etype: &'static str,
    pub from_label: &'static str,
    pub to_label: &'static str,
    pub directed: bool,
    pub props: &'static [&'static str],
}

/// The active schema a query is parsed and validated against.
#[derive(Debug, Clone, Copy)]
pub struct Schema {
    pub scenario: Scenario,
    pub tables: &'static [TableSchema],
    pub labels: &'static [LabelSchema],
    pub edges: &'static [EdgeSchema],
}

const LOCATING_TABLES: &[TableSchema] = &[
    TableSchema {
        name: "TradingNode",
        columns: views::TRADING_NODE_COLS,
    },
    TableSchema {
        name: "Country",
        columns: views::COUNTRY_COLS,
    },
    TableSchema {
        name: "TradingFlow",
        columns: views::TRADING_FLOW_COLS,
    },
    TableSchema {
        name: "NodeCountry",
        columns: views::NODE_COUNTRY_COLS,
    },
];

const LOCATING_LABELS: &[LabelSchema] = &[
    LabelSchema {
        label: "TradingNode",
        props: views::TRADING_NODE_COLS,
    },
    LabelSchema {
        label: "Country",
        props: views::COUNTRY_COLS,
    },
];

const LOCATING_EDGES: &[EdgeSchema] = &[
    EdgeSchema {
        etype: "TradingFlow",
        from_label: "TradingNode",
        to_label: "TradingNode",
        directed: true,
        props: views::TRADING_FLOW_COLS,
    },
    EdgeSchema {
        etype: "NodeCountry",
        from_label: "TradingNode",
        to_label: "Country",
        directed: false,
        props: views::NODE_COUNTRY_COLS,
    },
];

const BUILDING_TABLES: &[TableSchema] = &[
    TableSchema {
        name: "Goods",
        columns: views::GOODS_COLS,
    },
    TableSchema {
        name: "Buildings",
        columns: views::BUILDINGS_COLS,
    },
    TableSchema {
        name: "Supply",
        columns: views::SUPPLY_COLS,
    },
    TableSchema {
        name: "Demand",
        columns: views::DEMAND_COLS,
    },
];

const BUILDING_LABELS: &[LabelSchema] = &[
    LabelSchema {
        label: "Goods",
        props: views::GOODS_COLS,
    },
    LabelSchema {
        label: "Building",
        props: views::BUILDINGS_COLS,
    },
];

const BUILDING_EDGES: &[EdgeSchema] = &[
    EdgeSchema {
        etype: "Supply",
        from_label: "Building",
        to_label: "Goods",
        directed: true,
        props: views::SUPPLY_COLS,
    },
    EdgeSchema {
        etype: "Demand",
        from_label: "Goods",
        to_label: "Building",
        directed: true,
        props: views::DEMAND_COLS,
    },
];

impl Schema {
    pub fn for_scenario(scenario: Scenario) -> Schema {
        match scenario {
            Scenario::Locating => Schema {
                scenario,
                tables: LOCATING_TABLES,
                labels: LOCATING_LABELS,
                edges: LOCATING_EDGES,
            },
            Scenario::Building => Schema {
                scenario,
                tables: BUILDING_TABLES,
                labels: BUILDING_LABELS,
                edges: BUILDING_EDGES,
            },
        }
    }

    pub fn table(&self, name: &str) -> Option<&'static TableSchema> {
        self.tables.iter().find(|t| t.name == name)
    }

    pub fn label(&self, label: &str) -> Option<&'static LabelSchema> {
        self.labels.iter().find(|l| l.label == label)
    }

    pub fn edge(&self, etype: &str) -> Option<&'static EdgeSchema> {
        self.edges.iter().find(|e| e.etype == etype)
    }

    pub fn table_names(&self) -> Vec<&'static str> {
        self.tables.iter().map(|t| t.name).collect()
    }

    /// Human-readable schema summary used in agent prompts.
    pub fn describe(&self, dialect: super::Dialect) -> String {
        let mut out = String::new();
        match dialect {
            super::Dialect::Table => {
                for t in self.tables {
                    out.push_str(&format!("table {}({})\n", t.name, t.columns.join(", ")));
                }
            }
            super::Dialect::Graph => {
                for l in self.labels {
                    out.push_str(&format!("vertex {}({})\n", l.label, l.props.join(", ")));
                }
                for e in self.edges {
                    out.push_str(&format!(
                        "edge {}: ({}){}({}), properties ({})\n",
                        e.etype,
                        e.from_label,
                        if e.directed { "->" } else { "--" },
                        e.to_label,
                        e.props.join(", ")
                    ));
                }
            }
        }
        out
    }
}

/// Table columns by name, independent of scenario (table names are disjoint
/// across the two schemas). Used for `SELECT *` symbol expansion.
pub fn columns_of_table(name: &str) -> Option<&'static [&'static str]> {
    LOCATING_TABLES
        .iter()
        .chain(BUILDING_TABLES)
        .find(|t| t.name == name)
        .map(|t| t.columns)
}
