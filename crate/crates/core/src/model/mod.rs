//! Scenario databases and their invariants.
//!
//! Two database shapes exist, one per scenario:
//!
//! - [`TradeWorld`] — trading nodes, countries, directed trade flows, and
//!   node–country power relations (the Locating scenario)
//! - [`Market`] — goods, buildings, supply edges, demand edges (the Building
//!   scenario)
//!
//! Both expose the same underlying data through a tabular view
//! ([`views::TableView`]) and a graph view ([`views::GraphView`]).
//!
//! Computed columns (`flow`, `ingoing`, `outgoing`, `total_power`, `power`,
//! `profit`, `current_input`, `current_output`, `current_price`) are stored
//! materialized and stamped by a simulation pass. Before simulation they hold
//! the generator's initial values: zeros for flow-derived quantities, the
//! base price for `current_price`.
//!
//! Databases are immutable after construction and simulation; mutation
//! happens only by producing a new database value, so they are safe to share
//! read-only across concurrent workers.

mod dataset;
mod validate;
pub mod views;

pub use dataset::{
    load_dataset, load_instance, save_instance, write_atomic, DatasetError, Manifest,
    ManifestEntry, MANIFEST_FILE, REJECTED_DIR,
};
pub use validate::{validate, Violation};

use serde::{Deserialize, Serialize};

/// Which scenario a database or instance belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Scenario {
    Locating,
    Building,
}

impl Scenario {
    pub fn as_str(self) -> &'static str {
        match self {
            Scenario::Locating => "Locating",
            Scenario::Building => "Building",
        }
    }
}

impl std::fmt::Display for Scenario {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// A trading node in the Locating scenario.
///
/// `ingoing`, `outgoing` and `total_power` are computed columns stamped by
/// the simulator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TradingNode {
    pub name: String,
    pub local_value: f64,
    #[serde(default)]
    pub ingoing: f64,
    #[serde(default)]
    pub outgoing: f64,
    #[serde(default)]
    pub total_power: f64,
    pub is_inland: bool,
}

impl TradingNode {
    pub fn new(name: impl Into<String>, local_value: f64, is_inland: bool) -> Self {
        Self {
            name: name.into(),
            local_value,
            ingoing: 0.0,
            outgoing: 0.0,
            total_power: 0.0,
            is_inland,
        }
    }
}

/// A country with an anonymized 3-letter code and a single home trading node.
///
/// `profit` is a computed column stamped by the simulator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Country {
    pub code: String,
    pub development: f64,
    pub home_node: String,
    #[serde(default)]
    pub profit: f64,
}

impl Country {
    pub fn new(code: impl Into<String>, development: f64, home_node: impl Into<String>) -> Self {
        Self {
            code: code.into(),
            development,
            home_node: home_node.into(),
            profit: 0.0,
        }
    }
}

/// A directed trade-flow edge between two trading nodes.
///
/// `flow` is a computed column; the edge set must form a DAG.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TradingFlow {
    pub src: String,
    pub dest: String,
    #[serde(default)]
    pub flow: f64,
}

impl TradingFlow {
    pub fn new(src: impl Into<String>, dest: impl Into<String>) -> Self {
        Self {
            src: src.into(),
            dest: dest.into(),
            flow: 0.0,
        }
    }
}

/// A country's presence at a trading node.
///
/// `power` is the computed merchant-adjusted trading power; `steer_dest` may
/// only be set while a merchant is present and must name a flow destination
/// of `node`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeCountry {
    pub node: String,
    pub country: String,
    pub base_trading_power: f64,
    #[serde(default)]
    pub power: f64,
    #[serde(default)]
    pub has_merchant: bool,
    #[serde(default)]
    pub steer_dest: Option<String>,
}

impl NodeCountry {
    pub fn new(node: impl Into<String>, country: impl Into<String>, base: f64) -> Self {
        Self {
            node: node.into(),
            country: country.into(),
            base_trading_power: base,
            power: 0.0,
            has_merchant: false,
            steer_dest: None,
        }
    }
}

/// The Locating-scenario database.
///
/// Serializes as the instance file's `tables` object, keyed by table name.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct TradeWorld {
    #[serde(rename = "TradingNode")]
    pub nodes: Vec<TradingNode>,
    #[serde(rename = "Country")]
    pub countries: Vec<Country>,
    #[serde(rename = "TradingFlow")]
    pub flows: Vec<TradingFlow>,
    #[serde(rename = "NodeCountry")]
    pub node_countries: Vec<NodeCountry>,
}

impl TradeWorld {
    pub fn node(&self, name: &str) -> Option<&TradingNode> {
        self.nodes.iter().find(|n| n.name == name)
    }

    pub fn country(&self, code: &str) -> Option<&Country> {
        self.countries.iter().find(|c| c.code == code)
    }

    pub fn node_country(&self, node: &str, country: &str) -> Option<&NodeCountry> {
        self.node_countries
            .iter()
            .find(|nc| nc.node == node && nc.country == country)
    }

    /// Flow destinations of `node`, in stored edge order.
    pub fn dests_of(&self, node: &str) -> Vec<&str> {
        self.flows
            .iter()
            .filter(|f| f.src == node)
            .map(|f| f.dest.as_str())
            .collect()
    }

    /// Flow sources of `node`, in stored edge order.
    pub fn sources_of(&self, node: &str) -> Vec<&str> {
        self.flows
            .iter()
            .filter(|f| f.dest == node)
            .map(|f| f.src.as_str())
            .collect()
    }

    /// Sort all collections by primary key. Generated databases are stored
    /// in this order so that files and views are byte-stable.
    pub fn sort_canonical(&mut self) {
        self.nodes.sort_by(|a, b| a.name.cmp(&b.name));
        self.countries.sort_by(|a, b| a.code.cmp(&b.code));
        self.flows.sort_by(|a, b| {
            (a.src.as_str(), a.dest.as_str()).cmp(&(b.src.as_str(), b.dest.as_str()))
        });
        self.node_countries.sort_by(|a, b| {
            (a.node.as_str(), a.country.as_str()).cmp(&(b.node.as_str(), b.country.as_str()))
        });
    }
}

/// Goods traded in the Building scenario.
///
/// `current_price` is a computed column; constructors initialize it to the
/// base price.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Goods {
    pub code: String,
    pub name: String,
    pub base_price: f64,
    #[serde(default)]
    pub current_price: f64,
    pub pop_demand: f64,
}

impl Goods {
    pub fn new(
        code: impl Into<String>,
        name: impl Into<String>,
        base_price: f64,
        pop_demand: f64,
    ) -> Self {
        Self {
            code: code.into(),
            name: name.into(),
            base_price,
            current_price: base_price,
            pop_demand,
        }
    }
}

/// A production building with an expansion level.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Building {
    pub id: String,
    pub name: String,
    pub level: u32,
}

impl Building {
    pub fn new(id: impl Into<String>, name: impl Into<String>, level: u32) -> Self {
        Self {
            id: id.into(),
            name: name.into(),
            level,
        }
    }
}

/// A supply relation from a building to the goods it produces.
///
/// `current_output` is computed; `level` mirrors the owning building's level
/// and `max_supply / level` stays constant under expansion.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SupplyEdge {
    pub building: String,
    pub goods: String,
    pub max_supply: f64,
    #[serde(default)]
    pub current_output: f64,
    pub level: u32,
}

impl SupplyEdge {
    pub fn new(
        building: impl Into<String>,
        goods: impl Into<String>,
        max_supply: f64,
        level: u32,
    ) -> Self {
        Self {
            building: building.into(),
            goods: goods.into(),
            max_supply,
            current_output: 0.0,
            level,
        }
    }
}

/// A demand relation from goods to a consuming building.
///
/// `current_input` is computed; `max_demand / level` stays constant under
/// expansion.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DemandEdge {
    pub goods: String,
    pub building: String,
    pub max_demand: f64,
    #[serde(default)]
    pub current_input: f64,
    pub level: u32,
}

impl DemandEdge {
    pub fn new(
        goods: impl Into<String>,
        building: impl Into<String>,
        max_demand: f64,
        level: u32,
    ) -> Self {
        Self {
            goods: goods.into(),
            building: building.into(),
            max_demand,
            current_input: 0.0,
            level,
        }
    }
}

/// The Building-scenario database.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Market {
    #[serde(rename = "Goods")]
    pub goods: Vec<Goods>,
    #[serde(rename = "Buildings")]
    pub buildings: Vec<Building>,
    #[serde(rename = "Supply")]
    pub supplies: Vec<SupplyEdge>,
    #[serde(rename = "Demand")]
    pub demands: Vec<DemandEdge>,
}

impl Market {
    pub fn goods_by_code(&self, code: &str) -> Option<&Goods> {
        self.goods.iter().find(|g| g.code == code)
    }

    pub fn building(&self, id: &str) -> Option<&Building> {
        self.buildings.iter().find(|b| b.id == id)
    }

    pub fn sort_canonical(&mut self) {
        self.goods.sort_by(|a, b| a.code.cmp(&b.code));
        self.buildings.sort_by(|a, b| a.id.cmp(&b.id));
        self.supplies.sort_by(|a, b| {
            (a.building.as_str(), a.goods.as_str()).cmp(&(b.building.as_str(), b.goods.as_str()))
        });
        self.demands.sort_by(|a, b| {
            (a.goods.as_str(), a.building.as_str()).cmp(&(b.goods.as_str(), b.building.as_str()))
        });
    }
}

/// Either scenario database. Serializes as the `tables` object of an
/// instance file; the variants are distinguished by their table names.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Database {
    Locating(TradeWorld),
    Building(Market),
}

impl Database {
    pub fn scenario(&self) -> Scenario {
        match self {
            Database::Locating(_) => Scenario::Locating,
            Database::Building(_) => Scenario::Building,
        }
    }

    pub fn as_world(&self) -> Option<&TradeWorld> {
        match self {
            Database::Locating(w) => Some(w),
            Database::Building(_) => None,
        }
    }

    pub fn as_market(&self) -> Option<&Market> {
        match self {
            Database::Building(m) => Some(m),
            Database::Locating(_) => None,
        }
    }
}

/// One benchmark instance: a database plus a rendered question, and (after
/// annotation) the gold decision id and the margin to the runner-up.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Instance {
    pub id: String,
    pub scenario: Scenario,
    pub question: String,
    pub gold: Option<String>,
    pub margin: Option<f64>,
    pub seed: u64,
    #[serde(rename = "tables")]
    pub database: Database,
}

impl Instance {
    pub fn is_annotated(&self) -> bool {
        self.gold.is_some()
    }

    /// Serialize to the documented instance file format (pretty JSON).
    pub fn to_json(&self) -> String {
        let mut out = serde_json::to_string_pretty(self).expect("instance serializes");
        out.push('\n');
        out
    }

    /// Parse an instance file, cross-checking the `scenario` field against
    /// the shape of `tables`.
    pub fn from_json(text: &str) -> Result<Self, DatasetError> {
        let inst: Instance =
            serde_json::from_str(text).map_err(|e| DatasetError::Malformed(e.to_string()))?;
        if inst.database.scenario() != inst.scenario {
            return Err(DatasetError::Malformed(format!(
                "instance {}: scenario field is {} but tables are {}",
                inst.id,
                inst.scenario,
                inst.database.scenario()
            )));
        }
        Ok(inst)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_world() -> TradeWorld {
        TradeWorld {
            nodes: vec![
                TradingNode::new("Aden", 5.0, false),
                TradingNode::new("Basra", 3.0, false),
                TradingNode::new("Doab", 2.0, true),
            ],
            countries: vec![Country::new("BAH", 12.0, "Basra")],
            flows: vec![
                TradingFlow::new("Aden", "Basra"),
                TradingFlow::new("Doab", "Basra"),
            ],
            node_countries: vec![
                NodeCountry::new("Aden", "BAH", 4.0),
                NodeCountry::new("Basra", "BAH", 6.0),
            ],
        }
    }

    #[test]
    fn instance_json_round_trip() {
        let inst = Instance {
            id: "loc-test".into(),
            scenario: Scenario::Locating,
            question: "q".into(),
            gold: None,
            margin: None,
            seed: 7,
            database: Database::Locating(small_world()),
        };
        let text = inst.to_json();
        let back = Instance::from_json(&text).unwrap();
        assert_eq!(inst, back);
        assert!(text.contains("\"TradingNode\""));
        assert!(text.contains("\"tables\""));
    }

    #[test]
    fn scenario_mismatch_is_rejected() {
        let inst = Instance {
            id: "x".into(),
            scenario: Scenario::Building,
            question: "q".into(),
            gold: None,
            margin: None,
            seed: 0,
            database: Database::Locating(small_world()),
        };
        let text = inst.to_json();
        let err = Instance::from_json(&text).unwrap_err();
        assert!(err.to_string().contains("scenario"));
    }

    #[test]
    fn sources_and_dests() {
        let w = small_world();
        assert_eq!(w.sources_of("Basra"), vec!["Aden", "Doab"]);
        assert_eq!(w.dests_of("Aden"), vec!["Basra"]);
        assert!(w.dests_of("Basra").is_empty());
    }
}
