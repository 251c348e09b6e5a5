//! Deterministic trade-network simulator for the Locating scenario.
//!
//! A simulation pass recomputes every materialized column from the base
//! columns, so `simulate` is a pure function of the input world and is
//! idempotent:
//!
//! 1. [`trading_power_estimate`] stamps each country's merchant-adjusted
//!    trading power and each node's `total_power`.
//! 2. Value propagates through the flow DAG in upstream-first topological
//!    order ([`topo_order`], [`FlowPass`]): a node's available value is
//!    `local_value + ingoing`, and each destination receives 1.05x the flow
//!    sent to it.
//! 3. Each country's profit is its trading-power share of the value pooled
//!    at its home node.
//!
//! Outflow at a node splits per country share. A country whose home node is
//! this node keeps its share (retained, monetized as profit). A country
//! whose home is one of the destinations pulls its share to its home — a
//! merchant held there adds power but never double-counts the share. A
//! merchant-holding country may steer its share to a chosen destination.
//! Every remaining share is passive: it follows the pull/steered outflows
//! proportionally, split equally when those are all zero.
//!
//! All functions take worlds by reference and return new values; candidate
//! simulations can run concurrently on shared read-only input.

use crate::model::{NodeCountry, TradeWorld};
use serde::Serialize;
use std::collections::BTreeMap;
use thiserror::Error;

/// Multiplier applied to a flow when it arrives at its destination.
pub const INGOING_GAIN: f64 = 1.05;
/// Multiplier applied to a merchant-boosted trading power.
pub const MERCHANT_GAIN: f64 = 1.05;
/// Base trading-power bonus of a merchant.
pub const MERCHANT_BONUS: f64 = 2.0;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LocatingError {
    #[error("flow graph has a cycle through {{{0}}}")]
    Cycle(String),
    #[error("node {node} is not ready: predecessor {predecessor} is unprocessed")]
    NotReady { node: String, predecessor: String },
    #[error("unknown node {0}")]
    UnknownNode(String),
    #[error("unknown country {0}")]
    UnknownCountry(String),
    #[error("invalid decision: {0}")]
    InvalidDecision(String),
}

/// Place a merchant for `country` on `node`, steering that country's share
/// toward `steer_dest`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct MerchantDecision {
    pub country: String,
    pub node: String,
    pub steer_dest: String,
}

/// Where one node's value went: per-destination pull/steered/passive
/// components plus the value retained at the node.
///
/// `retained + sum(pull + steered + passive)` equals `local_value + ingoing`
/// up to rounding.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FlowBreakdown {
    pub node: String,
    /// Value available at the node when it was processed (LV + IV).
    pub value: f64,
    pub retained: f64,
    pub dests: Vec<DestFlow>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DestFlow {
    pub dest: String,
    pub pull: f64,
    pub steered: f64,
    pub passive: f64,
}

impl DestFlow {
    pub fn total(&self) -> f64 {
        self.pull + self.steered + self.passive
    }
}

impl FlowBreakdown {
    pub fn total_out(&self) -> f64 {
        self.dests.iter().map(DestFlow::total).sum()
    }
}

/// A fully simulated world plus per-node flow diagnostics and any non-fatal
/// conditions (countries whose home node holds zero total power).
#[derive(Debug, Clone)]
pub struct SimOutcome {
    pub world: TradeWorld,
    pub breakdowns: Vec<FlowBreakdown>,
    pub diagnostics: Vec<String>,
}

/// Stamp `power` on every node–country relation and `total_power` on every
/// node.
///
/// Without a merchant the power is the base trading power. A merchant adds 2
/// and amplifies by 1.05; if the node or any flow-adjacent node is inland,
/// the added value becomes `2 + max(development / 3, 50)`.
pub fn trading_power_estimate(world: &TradeWorld) -> TradeWorld {
    let mut w = world.clone();

    let inland: BTreeMap<&str, bool> = w
        .nodes
        .iter()
        .map(|n| (n.name.as_str(), n.is_inland))
        .collect();
    let node_is = |name: &str| inland.get(name).copied().unwrap_or(false);
    let touches_inland = |name: &str| {
        node_is(name)
            || w.flows
                .iter()
                .any(|f| (f.src == name && node_is(&f.dest)) || (f.dest == name && node_is(&f.src)))
    };

    let development: BTreeMap<&str, f64> = w
        .countries
        .iter()
        .map(|c| (c.code.as_str(), c.development))
        .collect();

    let mut totals: BTreeMap<String, f64> = BTreeMap::new();
    for nc in &mut w.node_countries {
        nc.power = if nc.has_merchant {
            let dev = development.get(nc.country.as_str()).copied().unwrap_or(0.0);
            let bonus = if touches_inland(&nc.node) {
                MERCHANT_BONUS + (dev / 3.0).max(50.0)
            } else {
                MERCHANT_BONUS
            };
            (nc.base_trading_power + bonus) * MERCHANT_GAIN
        } else {
            nc.base_trading_power
        };
        *totals.entry(nc.node.clone()).or_insert(0.0) += nc.power;
    }
    for n in &mut w.nodes {
        n.total_power = totals.get(&n.name).copied().unwrap_or(0.0);
        n.ingoing = 0.0;
        n.outgoing = 0.0;
    }
    for f in &mut w.flows {
        f.flow = 0.0;
    }
    w
}

/// Upstream-first topological order of the flow DAG: every node appears only
/// after all of its flow predecessors, so its ingoing value is final when it
/// is processed.
pub fn topo_order(world: &TradeWorld) -> Result<Vec<String>, LocatingError> {
    let names: Vec<&str> = world.nodes.iter().map(|n| n.name.as_str()).collect();
    let index: BTreeMap<&str, usize> = names.iter().enumerate().map(|(i, n)| (*n, i)).collect();
    let mut indegree = vec![0usize; names.len()];
    for f in &world.flows {
        if let Some(&d) = index.get(f.dest.as_str()) {
            indegree[d] += 1;
        }
    }
    let mut order = Vec::with_capacity(names.len());
    let mut done = vec![false; names.len()];
    // O(n^2) scan keeps the order deterministic: among ready nodes the one
    // stored first goes first.
    for _ in 0..names.len() {
        let Some(next) = (0..names.len()).find(|&i| !done[i] && indegree[i] == 0) else {
            let stuck: Vec<&str> = names
                .iter()
                .zip(done.iter())
                .filter(|(_, &d)| !d)
                .map(|(n, _)| *n)
                .collect();
            return Err(LocatingError::Cycle(stuck.join(", ")));
        };
        done[next] = true;
        order.push(names[next].to_string());
        for f in &world.flows {
            if f.src == names[next] {
                if let Some(&d) = index.get(f.dest.as_str()) {
                    indegree[d] -= 1;
                }
            }
        }
    }
    Ok(order)
}

/// Single-node flow estimation over a world whose trading powers are already
/// stamped. Nodes must be processed in an upstream-first order; processing a
/// node before its predecessors is an error.
pub struct FlowPass {
    world: TradeWorld,
    processed: BTreeMap<String, bool>,
}

impl FlowPass {
    /// Start a pass. Flow columns are reset so the pass always starts from a
    /// clean slate regardless of any previous simulation stamped on `world`.
    pub fn new(world: TradeWorld) -> Self {
        let mut world = world;
        for n in &mut world.nodes {
            n.ingoing = 0.0;
            n.outgoing = 0.0;
        }
        for f in &mut world.flows {
            f.flow = 0.0;
        }
        let processed = world
            .nodes
            .iter()
            .map(|n| (n.name.clone(), false))
            .collect();
        Self { world, processed }
    }

    pub fn world(&self) -> &TradeWorld {
        &self.world
    }

    pub fn into_world(self) -> TradeWorld {
        self.world
    }

    /// Distribute the value available at `node` over its destinations and
    /// credit each destination's ingoing with 1.05x the flow.
    pub fn estimate(&mut self, node: &str) -> Result<FlowBreakdown, LocatingError> {
        let node_idx = self
            .world
            .nodes
            .iter()
            .position(|n| n.name == node)
            .ok_or_else(|| LocatingError::UnknownNode(node.to_string()))?;
        for f in &self.world.flows {
            if f.dest == node && !self.processed.get(f.src.as_str()).copied().unwrap_or(true) {
                return Err(LocatingError::NotReady {
                    node: node.to_string(),
                    predecessor: f.src.clone(),
                });
            }
        }

        let value = self.world.nodes[node_idx].local_value + self.world.nodes[node_idx].ingoing;
        let total_power = self.world.nodes[node_idx].total_power;
        let dests: Vec<String> = self
            .world
            .flows
            .iter()
            .filter(|f| f.src == node)
            .map(|f| f.dest.clone())
            .collect();

        let home_of: BTreeMap<&str, &str> = self
            .world
            .countries
            .iter()
            .map(|c| (c.code.as_str(), c.home_node.as_str()))
            .collect();

        let mut pull: BTreeMap<&str, f64> = dests.iter().map(|d| (d.as_str(), 0.0)).collect();
        let mut steered: BTreeMap<&str, f64> = dests.iter().map(|d| (d.as_str(), 0.0)).collect();
        let mut retained = 0.0;
        let mut passive_pool = 0.0;

        if total_power <= 0.0 {
            // No trading power present: nothing can move the value.
            retained = value;
        } else {
            for nc in self
                .world
                .node_countries
                .iter()
                .filter(|nc| nc.node == node)
            {
                let share = nc.power / total_power * value;
                let home = home_of.get(nc.country.as_str()).copied();
                if home == Some(node) {
                    // The country collects profit here; its share stays.
                    retained += share;
                } else if let Some(h) = home.filter(|h| dests.iter().any(|d| d == h)) {
                    // Home is a destination: the share is pulled there. A
                    // merchant's steering never double-counts this share.
                    *pull.get_mut(h).unwrap() += share;
                } else if let Some(d) = nc
                    .steer_dest
                    .as_deref()
                    .filter(|_| nc.has_merchant)
                    .filter(|d| dests.iter().any(|x| x == d))
                {
                    *steered.get_mut(d).unwrap() += share;
                } else {
                    passive_pool += share;
                }
            }
        }

        if dests.is_empty() {
            // Terminal node: everything pools here.
            retained = value;
            passive_pool = 0.0;
        }

        let base_total: f64 = dests
            .iter()
            .map(|d| pull[d.as_str()] + steered[d.as_str()])
            .sum();
        let mut dest_flows = Vec::with_capacity(dests.len());
        for d in &dests {
            let base = pull[d.as_str()] + steered[d.as_str()];
            let passive = if passive_pool == 0.0 {
                0.0
            } else if base_total > 0.0 {
                passive_pool * base / base_total
            } else {
                passive_pool / dests.len() as f64
            };
            dest_flows.push(DestFlow {
                dest: d.clone(),
                pull: pull[d.as_str()],
                steered: steered[d.as_str()],
                passive,
            });
        }

        let mut outgoing = 0.0;
        for df in &dest_flows {
            let flow = df.total();
            outgoing += flow;
            let edge = self
                .world
                .flows
                .iter_mut()
                .find(|f| f.src == node && f.dest == df.dest)
                .expect("dest came from the edge list");
            edge.flow = flow;
            let dest_node = self
                .world
                .nodes
                .iter_mut()
                .find(|n| n.name == df.dest)
                .ok_or_else(|| LocatingError::UnknownNode(df.dest.clone()))?;
            dest_node.ingoing += INGOING_GAIN * flow;
        }
        self.world.nodes[node_idx].outgoing = outgoing;
        self.processed.insert(node.to_string(), true);

        Ok(FlowBreakdown {
            node: node.to_string(),
            value,
            retained,
            dests: dest_flows,
        })
    }
}

/// Full simulation pass: trading powers, flow propagation in topological
/// order, then per-country profit.
pub fn simulate(world: &TradeWorld) -> Result<SimOutcome, LocatingError> {
    let powered = trading_power_estimate(world);
    let order = topo_order(&powered)?;
    let mut pass = FlowPass::new(powered);
    let mut breakdowns = Vec::with_capacity(order.len());
    for node in &order {
        breakdowns.push(pass.estimate(node)?);
    }
    let mut w = pass.into_world();

    let mut diagnostics = Vec::new();
    let node_vals: BTreeMap<String, (f64, f64)> = w
        .nodes
        .iter()
        .map(|n| (n.name.clone(), (n.local_value + n.ingoing, n.total_power)))
        .collect();
    let powers: BTreeMap<(String, String), f64> = w
        .node_countries
        .iter()
        .map(|nc| ((nc.node.clone(), nc.country.clone()), nc.power))
        .collect();
    for c in &mut w.countries {
        let Some(&(value, total_power)) = node_vals.get(&c.home_node) else {
            c.profit = 0.0;
            continue;
        };
        if total_power <= 0.0 {
            diagnostics.push(format!(
                "country {} has zero total power at home node {}; profit set to 0",
                c.code, c.home_node
            ));
            c.profit = 0.0;
            continue;
        }
        let power = powers
            .get(&(c.home_node.clone(), c.code.clone()))
            .copied()
            .unwrap_or(0.0);
        c.profit = value * power / total_power;
    }

    Ok(SimOutcome {
        world: w,
        breakdowns,
        diagnostics,
    })
}

/// Apply a merchant decision, returning a new world. Does not simulate.
///
/// The `(node, country)` relation gains the merchant and steering target; a
/// relation is created with zero base power when the country holds none at
/// the node (the merchant bonus is additive).
pub fn apply_decision(
    world: &TradeWorld,
    decision: &MerchantDecision,
) -> Result<TradeWorld, LocatingError> {
    let country = world
        .country(&decision.country)
        .ok_or_else(|| LocatingError::UnknownCountry(decision.country.clone()))?;
    if world.node(&decision.node).is_none() {
        return Err(LocatingError::UnknownNode(decision.node.clone()));
    }
    if world.node(&decision.steer_dest).is_none() {
        return Err(LocatingError::UnknownNode(decision.steer_dest.clone()));
    }
    if country.home_node == decision.node {
        return Err(LocatingError::InvalidDecision(format!(
            "{} cannot place a merchant on its own home node {}",
            decision.country, decision.node
        )));
    }
    let is_dest = world
        .flows
        .iter()
        .any(|f| f.src == decision.node && f.dest == decision.steer_dest);
    if !is_dest {
        return Err(LocatingError::InvalidDecision(format!(
            "{} is not a flow destination of {}",
            decision.steer_dest, decision.node
        )));
    }

    let mut w = world.clone();
    match w
        .node_countries
        .iter_mut()
        .find(|nc| nc.node == decision.node && nc.country == decision.country)
    {
        Some(nc) => {
            nc.has_merchant = true;
            nc.steer_dest = Some(decision.steer_dest.clone());
        }
        None => {
            let mut nc = NodeCountry::new(decision.node.clone(), decision.country.clone(), 0.0);
            nc.has_merchant = true;
            nc.steer_dest = Some(decision.steer_dest.clone());
            w.node_countries.push(nc);
            w.sort_canonical();
        }
    }
    Ok(w)
}

/// Profit change for `country` when `decision` is applied, relative to the
/// undecided baseline.
pub fn delta_profit(
    world: &TradeWorld,
    country: &str,
    decision: &MerchantDecision,
) -> Result<f64, LocatingError> {
    let baseline = simulate(world)?;
    let decided = simulate(&apply_decision(world, decision)?)?;
    let profit = |w: &TradeWorld| {
        w.country(country)
            .map(|c| c.profit)
            .ok_or_else(|| LocatingError::UnknownCountry(country.to_string()))
    };
    Ok(profit(&decided.world)? - profit(&baseline.world)?)
}
