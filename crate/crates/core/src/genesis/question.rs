//! Question rendering and the inverse mapping used by the oracle.
//!
//! Both scenarios use a fixed template with substituted placeholders, so the
//! decision target can be recovered from the question text alone and the
//! instance file needs no extra target field.

use crate::model::Scenario;
use thiserror::Error;

const LOCATING_PREFIX: &str = "Where should I locate my merchant? My goal is maximizing ";
const LOCATING_MID: &str = "'s profit on home node, ";
const BUILDING_PREFIX: &str =
    "Which building ID should we increase a level by 5 to maximally decrease the market price of ";

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum QuestionError {
    #[error("question does not match the {0} template: {1}")]
    TemplateMismatch(Scenario, String),
}

/// The decision target named by a question.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Target {
    Locating { country: String, home: String },
    Building { goods: String },
}

impl Target {
    pub fn scenario(&self) -> Scenario {
        match self {
            Target::Locating { .. } => Scenario::Locating,
            Target::Building { .. } => Scenario::Building,
        }
    }
}

/// Render the question for a target, placeholders substituted into the
/// fixed per-scenario template.
pub fn render(target: &Target) -> String {
    match target {
        Target::Locating { country, home } => {
            format!("{LOCATING_PREFIX}{country}{LOCATING_MID}{home}")
        }
        Target::Building { goods } => format!("{BUILDING_PREFIX}{goods}?"),
    }
}

/// Recover the target from a rendered question.
pub fn parse_target(scenario: Scenario, question: &str) -> Result<Target, QuestionError> {
    let mismatch = || QuestionError::TemplateMismatch(scenario, question.to_string());
    match scenario {
        Scenario::Locating => {
            let rest = question
                .strip_prefix(LOCATING_PREFIX)
                .ok_or_else(mismatch)?;
            let (country, home) = rest.split_once(LOCATING_MID).ok_or_else(mismatch)?;
            if country.is_empty() || home.is_empty() {
                return Err(mismatch());
            }
            Ok(Target::Locating {
                country: country.to_string(),
                home: home.to_string(),
            })
        }
        Scenario::Building => {
            let rest = question
                .strip_prefix(BUILDING_PREFIX)
                .ok_or_else(mismatch)?;
            let goods = rest.strip_suffix('?').ok_or_else(mismatch)?;
            if goods.is_empty() {
                return Err(mismatch());
            }
            Ok(Target::Building {
                goods: goods.to_string(),
            })
        }
    }
}
