//! Deterministic supply/demand price simulator for the Building scenario.
//!
//! Total demand per goods is fixed up front (pop demand plus the max demand
//! of every consuming edge). Total supply starts at the sum of max supplies,
//! then exactly ten input/output cycles run regardless of convergence:
//!
//! - inputs: `current_input = max_demand * TS(g) / TD(g)` per demand edge
//! - outputs: each building's fill ratio is the average of
//!   `min(1, current_input / max_demand)` over its own demand edges, and
//!   every supply edge produces `max_supply * fill`
//! - total supply is recomputed from the fresh outputs
//!
//! Clearing prices come last: `BP * (1 + 0.75 * (TD - TS) / max(TD, TS))`,
//! which pins every price inside `[0.25 * BP, 1.75 * BP]`.
//!
//! [`CoRule`] selects how outputs respond to inputs. The default
//! (`BuildingInputs`) averages over the producing building's own inputs and
//! carries shortages across goods chains. The alternative
//! (`GoodsDemandLiteral`) averages over the demand edges of the produced
//! goods instead, which decouples chains; it is kept for comparison.
//!
//! Like the trade simulator, everything here is a pure function over
//! immutable markets.

use crate::model::Market;
use serde::Serialize;
use std::collections::BTreeMap;
use thiserror::Error;

/// Number of input/output cycles per simulation, run unconditionally.
pub const CYCLE_COUNT: usize = 10;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum BuildingError {
    #[error("unknown goods {0}")]
    UnknownGoods(String),
    #[error("unknown building {0}")]
    UnknownBuilding(String),
    #[error("invalid decision: {0}")]
    InvalidDecision(String),
}

/// Expand a building by a number of levels (the benchmark questions use 5).
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ExpansionDecision {
    pub building: String,
    pub levels: u32,
}

impl ExpansionDecision {
    pub fn new(building: impl Into<String>, levels: u32) -> Result<Self, BuildingError> {
        if levels == 0 {
            return Err(BuildingError::InvalidDecision(
                "expansion must add at least one level".into(),
            ));
        }
        Ok(Self {
            building: building.into(),
            levels,
        })
    }

    /// The standard +5 expansion used by the benchmark questions.
    pub fn plus_five(building: impl Into<String>) -> Self {
        Self {
            building: building.into(),
            levels: 5,
        }
    }
}

/// Which output rule the cycle uses; see the module docs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum CoRule {
    #[default]
    BuildingInputs,
    GoodsDemandLiteral,
}

#[derive(Debug, Clone, Copy, Default)]
pub struct SimOptions {
    pub co_rule: CoRule,
}

/// Per-goods totals recorded for one cycle.
#[derive(Debug, Clone, Serialize)]
pub struct CycleState {
    pub cycle: usize,
    pub totals: BTreeMap<String, GoodsTotals>,
}

#[derive(Debug, Clone, Serialize)]
pub struct GoodsTotals {
    pub td: f64,
    pub ts: f64,
    /// Price the market would clear at with this cycle's totals.
    pub cp: f64,
}

/// Cycle-by-cycle totals; at most [`CYCLE_COUNT`] entries.
#[derive(Debug, Clone, Serialize)]
pub struct MarketState {
    pub cycles: Vec<CycleState>,
}

/// Total demand for goods `g`: pop demand plus every consuming edge's max
/// demand. Invariant across cycles.
pub fn total_demand(market: &Market, g: &str) -> Result<f64, BuildingError> {
    let goods = market
        .goods_by_code(g)
        .ok_or_else(|| BuildingError::UnknownGoods(g.to_string()))?;
    let md: f64 = market
        .demands
        .iter()
        .filter(|d| d.goods == g)
        .map(|d| d.max_demand)
        .sum();
    Ok(goods.pop_demand + md)
}

/// Total supply for goods `g` from the currently stored outputs.
pub fn total_supply(market: &Market, g: &str) -> Result<f64, BuildingError> {
    if market.goods_by_code(g).is_none() {
        return Err(BuildingError::UnknownGoods(g.to_string()));
    }
    Ok(market
        .supplies
        .iter()
        .filter(|s| s.goods == g)
        .map(|s| s.current_output)
        .sum())
}

/// Supply/demand price adjustment. A dead market (no demand, no supply)
/// clears at the base price.
pub fn clearing_price(base_price: f64, td: f64, ts: f64) -> f64 {
    let denom = td.max(ts);
    if denom == 0.0 {
        return base_price;
    }
    base_price * (1.0 + 0.75 * (td - ts) / denom)
}

/// One input step: every demand edge draws its share of the available
/// supply. Goods demanded by nobody (TD = 0) leave inputs unconstrained at
/// max demand.
pub fn step_inputs(market: &Market) -> Market {
    let mut m = market.clone();
    let td: BTreeMap<String, f64> = totals_demand(&m);
    let ts: BTreeMap<String, f64> = totals_supply(&m);
    for d in &mut m.demands {
        let td_g = td.get(&d.goods).copied().unwrap_or(0.0);
        let ts_g = ts.get(&d.goods).copied().unwrap_or(0.0);
        d.current_input = if td_g == 0.0 {
            d.max_demand
        } else {
            d.max_demand * ts_g / td_g
        };
    }
    m
}

/// One output step: supply edges produce their max scaled by the fill ratio
/// of the selected [`CoRule`]. Buildings with nothing to consume produce at
/// max.
pub fn step_outputs(market: &Market, opts: &SimOptions) -> Market {
    let mut m = market.clone();
    match opts.co_rule {
        CoRule::BuildingInputs => {
            let mut fill: BTreeMap<&str, f64> = BTreeMap::new();
            for b in &m.buildings {
                let ratios: Vec<f64> = m
                    .demands
                    .iter()
                    .filter(|d| d.building == b.id)
                    .map(|d| {
                        if d.max_demand == 0.0 {
                            1.0
                        } else {
                            (d.current_input / d.max_demand).min(1.0)
                        }
                    })
                    .collect();
                let f = if ratios.is_empty() {
                    1.0
                } else {
                    ratios.iter().sum::<f64>() / ratios.len() as f64
                };
                fill.insert(b.id.as_str(), f);
            }
            let fills: BTreeMap<String, f64> =
                fill.into_iter().map(|(k, v)| (k.to_string(), v)).collect();
            for s in &mut m.supplies {
                let f = fills.get(&s.building).copied().unwrap_or(1.0);
                s.current_output = s.max_supply * f;
            }
        }
        CoRule::GoodsDemandLiteral => {
            let mut fill: BTreeMap<&str, f64> = BTreeMap::new();
            for g in &m.goods {
                let ratios: Vec<f64> = m
                    .demands
                    .iter()
                    .filter(|d| d.goods == g.code)
                    .map(|d| {
                        if d.max_demand == 0.0 {
                            1.0
                        } else {
                            (d.current_input / d.max_demand).min(1.0)
                        }
                    })
                    .collect();
                let f = if ratios.is_empty() {
                    1.0
                } else {
                    ratios.iter().sum::<f64>() / ratios.len() as f64
                };
                fill.insert(g.code.as_str(), f);
            }
            let fills: BTreeMap<String, f64> =
                fill.into_iter().map(|(k, v)| (k.to_string(), v)).collect();
            for s in &mut m.supplies {
                let f = fills.get(&s.goods).copied().unwrap_or(1.0);
                s.current_output = s.max_supply * f;
            }
        }
    }
    m
}

fn totals_demand(m: &Market) -> BTreeMap<String, f64> {
    let mut td: BTreeMap<String, f64> = m
        .goods
        .iter()
        .map(|g| (g.code.clone(), g.pop_demand))
        .collect();
    for d in &m.demands {
        if let Some(t) = td.get_mut(&d.goods) {
            *t += d.max_demand;
        }
    }
    td
}

fn totals_supply(m: &Market) -> BTreeMap<String, f64> {
    let mut ts: BTreeMap<String, f64> = m.goods.iter().map(|g| (g.code.clone(), 0.0)).collect();
    for s in &m.supplies {
        if let Some(t) = ts.get_mut(&s.goods) {
            *t += s.current_output;
        }
    }
    ts
}

/// Run the full simulation with default options.
pub fn simulate(market: &Market) -> Market {
    simulate_with(market, &SimOptions::default()).0
}

/// Run the full simulation, also returning the per-cycle totals.
pub fn simulate_with(market: &Market, opts: &SimOptions) -> (Market, MarketState) {
    let mut m = market.clone();
    // Seeding outputs at max supply makes the first cycle's total supply the
    // sum of max supplies, which keeps prices off a spurious low fixed point.
    for s in &mut m.supplies {
        s.current_output = s.max_supply;
    }
    let td = totals_demand(&m);
    let mut cycles = Vec::with_capacity(CYCLE_COUNT);
    for cycle in 0..CYCLE_COUNT {
        let ts = totals_supply(&m);
        let totals = m
            .goods
            .iter()
            .map(|g| {
                let td_g = td.get(&g.code).copied().unwrap_or(0.0);
                let ts_g = ts.get(&g.code).copied().unwrap_or(0.0);
                (
                    g.code.clone(),
                    GoodsTotals {
                        td: td_g,
                        ts: ts_g,
                        cp: clearing_price(g.base_price, td_g, ts_g),
                    },
                )
            })
            .collect();
        cycles.push(CycleState { cycle, totals });
        m = step_inputs(&m);
        m = step_outputs(&m, opts);
    }
    let ts = totals_supply(&m);
    for g in &mut m.goods {
        let td_g = td.get(&g.code).copied().unwrap_or(0.0);
        let ts_g = ts.get(&g.code).copied().unwrap_or(0.0);
        g.current_price = clearing_price(g.base_price, td_g, ts_g);
    }
    (m, MarketState { cycles })
}

/// Expand a building, scaling the max supply and max demand of its edges
/// proportionally to the level change. Does not simulate.
pub fn apply_decision(
    market: &Market,
    decision: &ExpansionDecision,
) -> Result<Market, BuildingError> {
    if decision.levels == 0 {
        return Err(BuildingError::InvalidDecision(
            "expansion must add at least one level".into(),
        ));
    }
    let mut m = market.clone();
    let b = m
        .buildings
        .iter_mut()
        .find(|b| b.id == decision.building)
        .ok_or_else(|| BuildingError::UnknownBuilding(decision.building.clone()))?;
    let old_level = b.level;
    let new_level = old_level + decision.levels;
    let scale = new_level as f64 / old_level as f64;
    b.level = new_level;
    for s in &mut m.supplies {
        if s.building == decision.building {
            s.max_supply *= scale;
            s.level = new_level;
        }
    }
    for d in &mut m.demands {
        if d.building == decision.building {
            d.max_demand *= scale;
            d.level = new_level;
        }
    }
    Ok(m)
}

/// How much the clearing price of `goods` falls when `decision` is applied
/// (positive means the price dropped).
pub fn price_drop(
    market: &Market,
    goods: &str,
    decision: &ExpansionDecision,
) -> Result<f64, BuildingError> {
    if market.goods_by_code(goods).is_none() {
        return Err(BuildingError::UnknownGoods(goods.to_string()));
    }
    let baseline = simulate(market);
    let expanded = simulate(&apply_decision(market, decision)?);
    let cp = |m: &Market| m.goods_by_code(goods).map(|g| g.current_price).unwrap();
    Ok(cp(&baseline) - cp(&expanded))
}
