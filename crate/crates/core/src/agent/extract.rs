//! Line-oriented protocol beneath the agent loops.
//!
//! The first recognized marker wins: `Action: query` followed by an
//! `Action Input:` line, `Final Answer:`, or a `Re-plan:` prefix. Everything
//! else is malformed (a value, not an error — runners re-prompt once).

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ExtractedAction {
    Query(String),
    Final(String),
    Replan(String),
    Malformed,
}

// Longest first: "action input:" must win over the "action:" prefix.
const MARKERS: &[&str] = &[
    "action input:",
    "final answer:",
    "observation:",
    "thought:",
    "re-plan:",
    "action:",
    "plan:",
];

fn marker_of(line: &str) -> Option<(&'static str, &str)> {
    let trimmed = line.trim_start();
    let lower = trimmed.to_lowercase();
    for m in MARKERS {
        if lower.starts_with(m) {
            return Some((m, trimmed[m.len()..].trim()));
        }
    }
    None
}

/// Collect `first` plus following lines up to the next marker line.
fn collect_block(first: &str, rest_lines: &[&str]) -> String {
    let mut parts: Vec<&str> = Vec::new();
    if !first.is_empty() {
        parts.push(first);
    }
    for line in rest_lines {
        if marker_of(line).is_some() {
            break;
        }
        parts.push(line.trim_end());
    }
    parts.join("\n").trim().to_string()
}

/// Extract the first actionable directive from an LM completion.
pub fn extract_action(text: &str) -> ExtractedAction {
    let lines: Vec<&str> = text.lines().collect();
    for (i, line) in lines.iter().enumerate() {
        match marker_of(line) {
            Some(("final answer:", rest)) => {
                return ExtractedAction::Final(collect_block(rest, &lines[i + 1..]));
            }
            Some(("re-plan:", rest)) => {
                return ExtractedAction::Replan(collect_block(rest, &lines[i + 1..]));
            }
            Some(("action:", rest)) => {
                if !rest.to_lowercase().contains("query") {
                    return ExtractedAction::Malformed;
                }
                for (j, input_line) in lines.iter().enumerate().skip(i + 1) {
                    match marker_of(input_line) {
                        Some(("action input:", rest)) => {
                            let query = strip_fences(&collect_block(rest, &lines[j + 1..]));
                            return ExtractedAction::Query(query);
                        }
                        Some(_) => return ExtractedAction::Malformed,
                        None => continue,
                    }
                }
                return ExtractedAction::Malformed;
            }
            _ => continue,
        }
    }
    ExtractedAction::Malformed
}

/// The thought text preceding the first action marker, when present.
pub fn extract_thought(text: &str) -> String {
    let lines: Vec<&str> = text.lines().collect();
    for (i, line) in lines.iter().enumerate() {
        match marker_of(line) {
            Some(("thought:", rest)) => return collect_block(rest, &lines[i + 1..]),
            Some(_) => return String::new(),
            None => continue,
        }
    }
    String::new()
}

/// Drop markdown code fences an LM may wrap a query in.
fn strip_fences(text: &str) -> String {
    let lines: Vec<&str> = text
        .lines()
        .filter(|l| !l.trim_start().starts_with("```"))
        .collect();
    lines.join("\n").trim().to_string()
}
