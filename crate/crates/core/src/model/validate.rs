//! Database validation. Violations are data, not errors: `validate` always
//! returns, and an empty list means every invariant holds.

use super::{Database, Market, TradeWorld};
use serde::Serialize;
use std::collections::{BTreeMap, BTreeSet};

const TOL: f64 = 1e-9;

/// One broken invariant, naming the offending entity and the rule.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Violation {
    pub entity: String,
    pub rule: String,
}

impl Violation {
    fn new(entity: impl Into<String>, rule: impl Into<String>) -> Self {
        Self {
            entity: entity.into(),
            rule: rule.into(),
        }
    }
}

impl std::fmt::Display for Violation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}: {}", self.entity, self.rule)
    }
}

/// Check every type invariant and referential-integrity rule of a database.
///
/// Idempotent and side-effect free; post-simulation consistency checks
/// (`total_power`, `ingoing`) hold trivially on unsimulated databases where
/// the computed columns are still zero.
pub fn validate(db: &Database) -> Vec<Violation> {
    match db {
        Database::Locating(w) => validate_world(w),
        Database::Building(m) => validate_market(m),
    }
}

fn validate_world(w: &TradeWorld) -> Vec<Violation> {
    let mut out = Vec::new();
    let mut node_names = BTreeSet::new();
    for n in &w.nodes {
        if !node_names.insert(n.name.as_str()) {
            out.push(Violation::new(
                format!("TradingNode {}", n.name),
                "duplicate node name",
            ));
        }
        if n.local_value < 0.0 {
            out.push(Violation::new(
                format!("TradingNode {}", n.name),
                "local_value must be non-negative",
            ));
        }
        if n.ingoing < 0.0 || n.outgoing < 0.0 || n.total_power < 0.0 {
            out.push(Violation::new(
                format!("TradingNode {}", n.name),
                "computed columns must be non-negative",
            ));
        }
    }

    let mut codes = BTreeSet::new();
    for c in &w.countries {
        if !codes.insert(c.code.as_str()) {
            out.push(Violation::new(
                format!("Country {}", c.code),
                "duplicate country code",
            ));
        }
        if !node_names.contains(c.home_node.as_str()) {
            out.push(Violation::new(
                format!("Country {}", c.code),
                format!("home_node {} does not exist", c.home_node),
            ));
        }
        if c.development < 0.0 {
            out.push(Violation::new(
                format!("Country {}", c.code),
                "development must be non-negative",
            ));
        }
    }

    let mut flow_keys = BTreeSet::new();
    for f in &w.flows {
        let entity = format!("TradingFlow {}->{}", f.src, f.dest);
        if !flow_keys.insert((f.src.as_str(), f.dest.as_str())) {
            out.push(Violation::new(&entity, "duplicate flow edge"));
        }
        if f.src == f.dest {
            out.push(Violation::new(&entity, "src and dest must differ"));
        }
        for endpoint in [&f.src, &f.dest] {
            if !node_names.contains(endpoint.as_str()) {
                out.push(Violation::new(
                    &entity,
                    format!("node {endpoint} does not exist"),
                ));
            }
        }
        if f.flow < 0.0 {
            out.push(Violation::new(&entity, "flow must be non-negative"));
        }
    }

    if let Some(cycle) = find_cycle(w) {
        out.push(Violation::new(
            "TradingFlow",
            format!(
                "flow edges must form a DAG; cycle through {{{}}}",
                cycle.join(", ")
            ),
        ));
    }

    let mut nc_keys = BTreeSet::new();
    for nc in &w.node_countries {
        let entity = format!("NodeCountry ({}, {})", nc.node, nc.country);
        if !nc_keys.insert((nc.node.as_str(), nc.country.as_str())) {
            out.push(Violation::new(
                &entity,
                "duplicate (node, country) relation",
            ));
        }
        if !node_names.contains(nc.node.as_str()) {
            out.push(Violation::new(
                &entity,
                format!("node {} does not exist", nc.node),
            ));
        }
        if !codes.contains(nc.country.as_str()) {
            out.push(Violation::new(
                &entity,
                format!("country {} does not exist", nc.country),
            ));
        }
        if nc.base_trading_power < 0.0 || nc.power < 0.0 {
            out.push(Violation::new(
                &entity,
                "trading power must be non-negative",
            ));
        }
        match &nc.steer_dest {
            Some(d) if !nc.has_merchant => {
                out.push(Violation::new(
                    &entity,
                    format!("steer_dest {d} set without a merchant"),
                ));
            }
            Some(d) => {
                let is_dest = w.flows.iter().any(|f| f.src == nc.node && &f.dest == d);
                if !is_dest {
                    out.push(Violation::new(
                        &entity,
                        format!("steer_dest {d} is not a flow destination of {}", nc.node),
                    ));
                }
            }
            None => {}
        }
    }

    // Post-simulation consistency: total_power matches the sum of powers and
    // ingoing matches 1.05x the flow inflow. Both hold as 0 == 0 before
    // simulation.
    let mut power_sum: BTreeMap<&str, f64> = BTreeMap::new();
    for nc in &w.node_countries {
        *power_sum.entry(nc.node.as_str()).or_insert(0.0) += nc.power;
    }
    let mut inflow: BTreeMap<&str, f64> = BTreeMap::new();
    for f in &w.flows {
        *inflow.entry(f.dest.as_str()).or_insert(0.0) += f.flow;
    }
    for n in &w.nodes {
        let expect_tp = power_sum.get(n.name.as_str()).copied().unwrap_or(0.0);
        if (n.total_power - expect_tp).abs() > TOL {
            out.push(Violation::new(
                format!("TradingNode {}", n.name),
                format!(
                    "total_power {} does not equal the sum of country powers {expect_tp}",
                    n.total_power
                ),
            ));
        }
        let expect_iv = 1.05 * inflow.get(n.name.as_str()).copied().unwrap_or(0.0);
        if (n.ingoing - expect_iv).abs() > TOL {
            out.push(Violation::new(
                format!("TradingNode {}", n.name),
                format!(
                    "ingoing {} does not equal 1.05 x inflow sum {expect_iv}",
                    n.ingoing
                ),
            ));
        }
    }

    out
}

/// Kahn's algorithm; returns the nodes stuck on a cycle, if any.
fn find_cycle(w: &TradeWorld) -> Option<Vec<String>> {
    let names: Vec<&str> = w.nodes.iter().map(|n| n.name.as_str()).collect();
    let index: BTreeMap<&str, usize> = names.iter().enumerate().map(|(i, n)| (*n, i)).collect();
    let mut indegree = vec![0usize; names.len()];
    let mut adj: Vec<Vec<usize>> = vec![Vec::new(); names.len()];
    for f in &w.flows {
        if let (Some(&s), Some(&d)) = (index.get(f.src.as_str()), index.get(f.dest.as_str())) {
            adj[s].push(d);
            indegree[d] += 1;
        }
    }
    let mut removed = vec![false; names.len()];
    let mut remaining = names.len();
    loop {
        let mut progress = false;
        for i in 0..names.len() {
            if !removed[i] && indegree[i] == 0 {
                removed[i] = true;
                remaining -= 1;
                for &d in &adj[i] {
                    indegree[d] -= 1;
                }
                progress = true;
            }
        }
        if !progress {
            break;
        }
    }
    if remaining == 0 {
        None
    } else {
        Some(
            names
                .iter()
                .zip(removed.iter())
                .filter(|(_, &r)| !r)
                .map(|(n, _)| n.to_string())
                .collect(),
        )
    }
}

fn validate_market(m: &Market) -> Vec<Violation> {
    let mut out = Vec::new();

    let mut goods_codes = BTreeSet::new();
    for g in &m.goods {
        let entity = format!("Goods {}", g.code);
        if !goods_codes.insert(g.code.as_str()) {
            out.push(Violation::new(&entity, "duplicate goods code"));
        }
        if g.base_price <= 0.0 {
            out.push(Violation::new(&entity, "base_price must be positive"));
        }
        if g.pop_demand < 0.0 {
            out.push(Violation::new(&entity, "pop_demand must be non-negative"));
        }
        // current_price == 0 means "not yet stamped"; once stamped it must
        // stay inside the clearing-price envelope.
        if g.current_price != 0.0
            && (g.current_price < 0.25 * g.base_price - TOL
                || g.current_price > 1.75 * g.base_price + TOL)
        {
            out.push(Violation::new(
                &entity,
                format!(
                    "current_price {} outside [0.25, 1.75] x base_price {}",
                    g.current_price, g.base_price
                ),
            ));
        }
    }

    let mut building_levels: BTreeMap<&str, u32> = BTreeMap::new();
    for b in &m.buildings {
        let entity = format!("Building {}", b.id);
        if building_levels.insert(b.id.as_str(), b.level).is_some() {
            out.push(Violation::new(&entity, "duplicate building id"));
        }
        if b.level < 1 {
            out.push(Violation::new(&entity, "level must be >= 1"));
        }
    }

    let mut supply_keys = BTreeSet::new();
    for s in &m.supplies {
        let entity = format!("Supply ({}, {})", s.building, s.goods);
        if !supply_keys.insert((s.building.as_str(), s.goods.as_str())) {
            out.push(Violation::new(
                &entity,
                "duplicate (building, goods) supply edge",
            ));
        }
        match building_levels.get(s.building.as_str()) {
            None => out.push(Violation::new(
                &entity,
                format!("building {} does not exist", s.building),
            )),
            Some(&lvl) if lvl != s.level => out.push(Violation::new(
                &entity,
                format!("edge level {} differs from building level {lvl}", s.level),
            )),
            _ => {}
        }
        if !goods_codes.contains(s.goods.as_str()) {
            out.push(Violation::new(
                &entity,
                format!("goods {} does not exist", s.goods),
            ));
        }
        if s.max_supply < 0.0 || s.current_output < 0.0 {
            out.push(Violation::new(
                &entity,
                "supply quantities must be non-negative",
            ));
        }
    }

    let mut demand_keys = BTreeSet::new();
    for d in &m.demands {
        let entity = format!("Demand ({}, {})", d.goods, d.building);
        if !demand_keys.insert((d.goods.as_str(), d.building.as_str())) {
            out.push(Violation::new(
                &entity,
                "duplicate (goods, building) demand edge",
            ));
        }
        match building_levels.get(d.building.as_str()) {
            None => out.push(Violation::new(
                &entity,
                format!("building {} does not exist", d.building),
            )),
            Some(&lvl) if lvl != d.level => out.push(Violation::new(
                &entity,
                format!("edge level {} differs from building level {lvl}", d.level),
            )),
            _ => {}
        }
        if !goods_codes.contains(d.goods.as_str()) {
            out.push(Violation::new(
                &entity,
                format!("goods {} does not exist", d.goods),
            ));
        }
        if d.max_demand < 0.0 || d.current_input < 0.0 {
            out.push(Violation::new(
                &entity,
                "demand quantities must be non-negative",
            ));
        }
    }

    out
}
