//! Prompt templates. Every prompt is assembled from exactly three content
//! pieces — the question Q, the business rules R, and the schema S — plus
//! fixed protocol instructions per strategy and dialect. Zero-shot by
//! design: no worked examples anywhere.

use super::backend::Message;
use super::transcript::Strategy;
use crate::model::Scenario;
use crate::query::{Dialect, Schema};

/// Business rules handed to agents for the Locating scenario.
pub const LOCATING_RULES: &str = r#"A "Trading node" has a "local_value", "total_power", "outgoing", "ingoing" and **whether it's inland**. A "Country" has a "name", "development" and a "home_node" (home node). Between "Trading nodes", there can be a directional edge [source]. It connects from a higher node to a lower node. A "Country" can have a non-directional connection to a trading node. Each connection has a unique "base_trading_power" for each node.
If a specific node is the home node of a country, that country earns profit from that node. The profit is proportional to the "local_value" plus "ingoing" and the ratio of the country's trading power and the total trading power of that node. i.e. (local_value+ingoing)*(country_trading_power / total_trading_power)

If a specific node is source of a country's home node, the country moves a value to dest node, proportional to the ratio of the country's trading power to the node's total trading power and (local_value + ingoing). In the dest node, the moved value is increased by 1.05 times and added to the ingoing. A "Merchant" belongs to a country and can be assigned to a specific trading node. A "Merchant" belonging to a trading node adds 2 to the trading power of the country's trading node and amplifies it by 1.05 times. *If one of the edges has an inland node, the added value changes to 2+max(development/3, 50). (optional)* If a specific trading node has more than one dest node, and a country that doesn't have that node as its home node places a "Merchant" on the Trading node, it can decide which dest node to move the "current_value" to. That is, the country can move a "current_value" proportional to its trading power to a specific dest node. If no merchant is placed, when there's more than one dest node, they lose the right to decide the direction. In other words, the country's "current_value" proportional to its trading power flows out in proportion to other outflows to the dest nodes. If there's only one dest node, it doesn't matter."#;

/// Business rules handed to agents for the Building scenario.
pub const BUILDING_RULES: &str = r#"Goods have a "name", corresponding "code", "base_price", "current_price", and "pop_demand". Buildings have a unique "id" and a "name" and "level" corresponding to their type. There exists a relation called Supply from Buildings to Goods. Supply has "max_supply", "current_output", and "level". The level here is the same as the level of the Building. Furthermore, max_supply and level have a proportional relationship. There exists a relation called Demand from Goods to Buildings. Demand has "max_demand", "current_input", and "level". Also, max_demand and level have a proportional relationship. The demand of Goods is defined as the Goods' "pop_demand" plus sum of the "max_demand" of all Demands connected to the Goods. The supply of Goods is defined by the sum of "current_output" of all Supplies connected to Goods. The "current_input" of Demand is determined by the ratio of connected Building's "max_demand" to connected Goods' demand, and multiplied by the supply of Goods. The "current_output" of Supply is determined by the average ratio of the connected Building's "current_input" to connected Goods' "max_demand", and multiplied by the "max_supply" of Supply. The "current_price" of Goods is determined by base_price*(1+0.75(demand-supply)/max(demand,supply))."#;

pub fn rules_text(scenario: Scenario) -> &'static str {
    match scenario {
        Scenario::Locating => LOCATING_RULES,
        Scenario::Building => BUILDING_RULES,
    }
}

fn dialect_guide(dialect: Dialect) -> &'static str {
    match dialect {
        Dialect::Table => {
            "Queries use a small tabular dialect:\n\
             SELECT <columns or aggregates> FROM <table> [WHERE <col> <op> <value> [AND ...]] \
             [GROUP BY <cols>] [ORDER BY <key> [ASC|DESC]] [LIMIT n]\n\
             Aggregates: SUM, AVG, MIN, MAX, COUNT (COUNT(*) allowed). Comparison operators: \
             =, !=, <, <=, >, >=. Strings quote with single quotes. There are no joins; \
             query one table at a time."
        }
        Dialect::Graph => {
            "Queries use a small graph dialect:\n\
             MATCH (a:Label)-[e:Type]->(b:Label) [WHERE a.prop <op> <value> [AND ...]] \
             RETURN <props or aggregates> [ORDER BY a.prop [ASC|DESC]] [LIMIT n]\n\
             A single vertex pattern MATCH (v:Label) is also allowed, and an undirected edge \
             is written -[e:Type]-. Aggregates: SUM, AVG, MIN, MAX, COUNT; mixing plain \
             properties with aggregates groups by the plain properties. Comparison operators: \
             =, !=, <, <=, >, >=."
        }
    }
}

fn context_block(scenario: Scenario, dialect: Dialect, schema: &Schema) -> String {
    format!(
        "Business rules:\n{}\n\nDatabase schema:\n{}\n{}",
        rules_text(scenario),
        schema.describe(dialect),
        dialect_guide(dialect)
    )
}

/// Retrieval prompt of the single-turn strategy: one query, nothing else.
pub fn single_retrieval(
    scenario: Scenario,
    dialect: Dialect,
    schema: &Schema,
    question: &str,
) -> Vec<Message> {
    vec![
        Message::system(format!(
            "You write one database query that retrieves the data needed to answer a \
             decision-making question.\n\n{}",
            context_block(scenario, dialect, schema)
        )),
        Message::user(format!(
            "Question: {question}\n\nRespond with exactly one query and nothing else."
        )),
    ]
}

/// Answer prompt of the single-turn strategy: decide from the observation.
pub fn single_answer(
    scenario: Scenario,
    dialect: Dialect,
    schema: &Schema,
    question: &str,
    query: &str,
    observation: &str,
) -> Vec<Message> {
    vec![
        Message::system(format!(
            "You answer a decision-making question from a query result.\n\n{}",
            context_block(scenario, dialect, schema)
        )),
        Message::user(format!(
            "Question: {question}\n\nQuery:\n{query}\n\nQuery result:\n{observation}\n\n\
             Respond with the single best decision as:\nFinal Answer: <decision>"
        )),
    ]
}

const ITER_PROTOCOL: &str = "Interact using exactly this format:\n\n\
    Thought: your reasoning about what to do next\n\
    Action: query\n\
    Action Input: one query\n\
    Observation: the query result (filled in for you)\n\n\
    Thought/Action/Action Input/Observation may repeat. When you know the answer, respond with:\n\n\
    Final Answer: the single best decision";

/// System + question messages opening an iterative run.
pub fn iter_opening(
    scenario: Scenario,
    dialect: Dialect,
    schema: &Schema,
    question: &str,
) -> Vec<Message> {
    vec![
        Message::system(format!(
            "You are a decision maker answering a question by analyzing a database step by \
             step.\n\n{}\n\n{ITER_PROTOCOL}",
            context_block(scenario, dialect, schema)
        )),
        Message::user(format!("Question: {question}")),
    ]
}

const PLAN_INSTRUCTION: &str = "First make a plan for the data analysis needed to answer the \
    question, as a numbered list of steps. Respond with the plan only, starting with:\n\n\
    Plan:";

const REPLAN_INSTRUCTION: &str = "If an observation shows the current plan is not good enough, \
    you may replace it by responding with:\n\nRe-plan: a revised numbered plan";

/// System + question messages opening a plan-first run.
pub fn plan_opening(
    strategy: Strategy,
    scenario: Scenario,
    dialect: Dialect,
    schema: &Schema,
    question: &str,
) -> Vec<Message> {
    let replan = if strategy == Strategy::Plan {
        format!("\n\n{REPLAN_INSTRUCTION}")
    } else {
        String::new()
    };
    vec![
        Message::system(format!(
            "You are a decision maker answering a question by planning a data analysis and \
             then executing it against a database.\n\n{}\n\n{PLAN_INSTRUCTION}\n\nAfter the \
             plan is made, follow it using this format:\n\n{ITER_PROTOCOL}{replan}",
            context_block(scenario, dialect, schema)
        )),
        Message::user(format!("Question: {question}")),
    ]
}

/// User message carrying an observation back to the LM.
pub fn observation_message(observation: &str) -> Message {
    Message::user(format!("Observation:\n{observation}"))
}

/// User message acknowledging an accepted plan.
pub fn plan_ack(plan: &str) -> Message {
    Message::user(format!(
        "Current plan:\n{plan}\n\nFollow the plan using the Thought/Action/Action Input format."
    ))
}

/// User message after a malformed completion: restate the protocol once.
pub fn format_reminder() -> Message {
    Message::user(
        "Your last response did not follow the expected format. Respond with either an action:\n\
         Thought: ...\nAction: query\nAction Input: <one query>\n\nor a final answer:\n\
         Final Answer: <decision>",
    )
}

/// User message rejecting a re-plan when the strategy forbids it.
pub fn replan_rejected() -> Message {
    Message::user(
        "Re-planning is not available. Continue with the existing plan using the \
         Thought/Action/Action Input format, or give a Final Answer.",
    )
}

/// User message when the first completion of a plan run holds no plan.
pub fn plan_reminder() -> Message {
    Message::user("Respond with the plan only, as a numbered list starting with 'Plan:'.")
}

/// Truncate observation text at a character cap with an explicit marker.
pub fn cap_observation(text: &str, cap: usize) -> String {
    if text.len() <= cap {
        return text.to_string();
    }
    let mut cut = cap;
    while cut > 0 && !text.is_char_boundary(cut) {
        cut -= 1;
    }
    format!("{}\n... (observation truncated)", &text[..cut])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn prompts_cover_question_rules_and_schema() {
        let schema = Schema::for_scenario(Scenario::Locating);
        let msgs = iter_opening(Scenario::Locating, Dialect::Table, &schema, "Where?");
        assert!(msgs[0].content.contains("Business rules:"));
        assert!(msgs[0].content.contains("local_value"));
        assert!(msgs[0].content.contains("table TradingNode"));
        assert!(msgs[1].content.contains("Where?"));
    }

    #[test]
    fn no_replan_prompt_omits_replan_instructions() {
        let schema = Schema::for_scenario(Scenario::Building);
        let with = plan_opening(
            Strategy::Plan,
            Scenario::Building,
            Dialect::Graph,
            &schema,
            "q",
        );
        let without = plan_opening(
            Strategy::PlanNoReplan,
            Scenario::Building,
            Dialect::Graph,
            &schema,
            "q",
        );
        assert!(with[0].content.contains("Re-plan:"));
        assert!(!without[0].content.contains("Re-plan:"));
    }

    #[test]
    fn observation_cap_adds_marker() {
        let long = "x".repeat(3000);
        let capped = cap_observation(&long, 2000);
        assert!(capped.len() < 2100);
        assert!(capped.ends_with("(observation truncated)"));
        assert_eq!(cap_observation("short", 2000), "short");
    }
}
