//! Ground-truth annotation by exhaustive simulation.
//!
//! Candidates are enumerated per scenario, every candidate is simulated, and
//! the best decision becomes the gold answer. The margin between the best
//! and second-best objective is recorded; instances whose margin does not
//! clear [`TIE_THRESHOLD`] are rejected so every kept question has a unique
//! answer. Candidate evaluation never mutates the input database and the
//! result is independent of candidate order.

use crate::building::{self, BuildingError, ExpansionDecision};
use crate::genesis::question::{parse_target, QuestionError, Target};
use crate::locating::{self, LocatingError, MerchantDecision};
use crate::model::{Database, Instance, Market, TradeWorld};
use thiserror::Error;

/// Margins at or below this are ties.
pub const TIE_THRESHOLD: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum OracleError {
    #[error("candidate {candidate}: {source}")]
    Locating {
        candidate: String,
        #[source]
        source: LocatingError,
    },
    #[error("candidate {candidate}: {source}")]
    Building {
        candidate: String,
        #[source]
        source: BuildingError,
    },
    #[error("unknown country {0}")]
    UnknownCountry(String),
    #[error("unknown goods {0}")]
    UnknownGoods(String),
    #[error(transparent)]
    Question(#[from] QuestionError),
    #[error("question target does not match the database scenario")]
    ScenarioMismatch,
}

/// Annotation result: a unique gold decision, or the reason the instance
/// cannot be kept.
#[derive(Debug, Clone, PartialEq)]
pub enum Annotation {
    Annotated(GoldLabel),
    Rejected(RejectReason),
}

#[derive(Debug, Clone, PartialEq)]
pub struct GoldLabel {
    pub gold: String,
    /// Objective gap to the runner-up; infinite for a single candidate.
    pub margin: f64,
    /// True when only one candidate existed (trivially guessable; such
    /// instances are excluded from generated datasets).
    pub degenerate: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub enum RejectReason {
    /// Best and second-best objectives are within the tie threshold.
    Tie {
        margin: f64,
    },
    NoCandidates,
}

impl std::fmt::Display for RejectReason {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            RejectReason::Tie { margin } => write!(f, "tie (margin {margin})"),
            RejectReason::NoCandidates => write!(f, "no candidates"),
        }
    }
}

/// One merchant decision per source node of the country's home node,
/// steering toward home. The home node itself is never a candidate.
pub fn candidates_locating(
    world: &TradeWorld,
    country: &str,
) -> Result<Vec<MerchantDecision>, OracleError> {
    let c = world
        .country(country)
        .ok_or_else(|| OracleError::UnknownCountry(country.to_string()))?;
    Ok(world
        .sources_of(&c.home_node)
        .into_iter()
        .filter(|s| *s != c.home_node)
        .map(|s| MerchantDecision {
            country: country.to_string(),
            node: s.to_string(),
            steer_dest: c.home_node.clone(),
        })
        .collect())
}

/// One +5 expansion decision per building in the market.
pub fn candidates_building(
    market: &Market,
    goods: &str,
) -> Result<Vec<ExpansionDecision>, OracleError> {
    if market.goods_by_code(goods).is_none() {
        return Err(OracleError::UnknownGoods(goods.to_string()));
    }
    Ok(market
        .buildings
        .iter()
        .map(|b| ExpansionDecision::plus_five(b.id.clone()))
        .collect())
}

/// Candidate decision ids for a question target (node names for Locating,
/// building ids for Building).
pub fn candidate_ids(db: &Database, target: &Target) -> Result<Vec<String>, OracleError> {
    match (db, target) {
        (Database::Locating(w), Target::Locating { country, .. }) => {
            Ok(candidates_locating(w, country)?
                .into_iter()
                .map(|d| d.node)
                .collect())
        }
        (Database::Building(m), Target::Building { goods }) => Ok(candidates_building(m, goods)?
            .into_iter()
            .map(|d| d.building)
            .collect()),
        _ => Err(OracleError::ScenarioMismatch),
    }
}

fn select(mut scored: Vec<(String, f64)>) -> Annotation {
    if scored.is_empty() {
        return Annotation::Rejected(RejectReason::NoCandidates);
    }
    // Lexicographic id order first, so the argmax is stable under any
    // permutation of the incoming candidate list; exact ties are filtered
    // right after anyway.
    scored.sort_by(|a, b| a.0.cmp(&b.0));
    scored.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap_or(std::cmp::Ordering::Equal));
    if scored.len() == 1 {
        return Annotation::Annotated(GoldLabel {
            gold: scored[0].0.clone(),
            margin: f64::INFINITY,
            degenerate: true,
        });
    }
    let margin = scored[0].1 - scored[1].1;
    if margin <= TIE_THRESHOLD {
        Annotation::Rejected(RejectReason::Tie { margin })
    } else {
        Annotation::Annotated(GoldLabel {
            gold: scored[0].0.clone(),
            margin,
            degenerate: false,
        })
    }
}

/// Simulate every candidate for the question target and pick the best.
pub fn annotate(db: &Database, target: &Target) -> Result<Annotation, OracleError> {
    match (db, target) {
        (Database::Locating(w), Target::Locating { country, .. }) => {
            let mut scored = Vec::new();
            for d in candidates_locating(w, country)? {
                let delta = locating::delta_profit(w, country, &d).map_err(|source| {
                    OracleError::Locating {
                        candidate: d.node.clone(),
                        source,
                    }
                })?;
                scored.push((d.node, delta));
            }
            Ok(select(scored))
        }
        (Database::Building(m), Target::Building { goods }) => {
            let mut scored = Vec::new();
            for d in candidates_building(m, goods)? {
                let drop =
                    building::price_drop(m, goods, &d).map_err(|source| OracleError::Building {
                        candidate: d.building.clone(),
                        source,
                    })?;
                scored.push((d.building, drop));
            }
            Ok(select(scored))
        }
        _ => Err(OracleError::ScenarioMismatch),
    }
}

/// Annotate an instance by recovering the question target from its rendered
/// question text.
pub fn annotate_instance(inst: &Instance) -> Result<Annotation, OracleError> {
    let target = parse_target(inst.scenario, &inst.question)?;
    annotate(&inst.database, &target)
}

/// Two-candidate test fixture tuned so the objective values are 0.23 and
/// 0.03. With the merchant, the target country's power at the source is
/// (0 + 2) * 1.05 = 2.1, matching the filler country's base power, so half
/// the source's local value flows home:
///   delta = 1.05 * (LV / 2) * TPR(home) = 0.525 * LV * 0.5
/// LV(Doab) = 92/105 gives 0.23; LV(Ganges) = 12/105 gives 0.03.
#[cfg(test)]
pub(crate) fn worked_example_world() -> TradeWorld {
    use crate::model::{Country, NodeCountry, TradingFlow, TradingNode};
    TradeWorld {
        nodes: vec![
            TradingNode::new("Doab", 92.0 / 105.0, false),
            TradingNode::new("Ganges", 12.0 / 105.0, false),
            TradingNode::new("Deccan", 4.0, false),
        ],
        countries: vec![
            Country::new("BAH", 10.0, "Deccan"),
            Country::new("DLI", 10.0, "Doab"),
            Country::new("GUJ", 10.0, "Ganges"),
        ],
        flows: vec![
            TradingFlow::new("Doab", "Deccan"),
            TradingFlow::new("Ganges", "Deccan"),
        ],
        node_countries: vec![
            NodeCountry::new("Deccan", "BAH", 1.0),
            NodeCountry::new("Deccan", "GUJ", 1.0),
            NodeCountry::new("Doab", "BAH", 0.0),
            NodeCountry::new("Doab", "DLI", 2.1),
            NodeCountry::new("Ganges", "BAH", 0.0),
            NodeCountry::new("Ganges", "GUJ", 2.1),
        ],
    }
}
