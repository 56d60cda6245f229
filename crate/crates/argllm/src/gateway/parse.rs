//! Parsing of model replies.

use std::sync::OnceLock;

use regex::Regex;

fn number_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"(\d+(?:\.\d+)?|\.\d+)\s*(%)?").expect("valid regex"))
}

fn item_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"^\s*(\d+)[.)]\s+(.*\S)\s*$").expect("valid regex"))
}

/// First decimal literal in `reply`, divided by 100 when followed by `%`,
/// clamped to [0, 1].
pub fn parse_score(reply: &str) -> Option<f64> {
    let caps = number_re().captures(reply)?;
    let mut value: f64 = caps[1].parse().ok()?;
    if caps.get(2).is_some() {
        value /= 100.0;
    }
    value.is_finite().then(|| value.clamp(0.0, 1.0))
}

/// Items of a `N. text` numbered list; `None` unless there are exactly
/// `count` distinct non-empty items.
pub fn parse_numbered_list(reply: &str, count: usize, max_chars: usize) -> Option<Vec<String>> {
    let items: Vec<String> = reply
        .lines()
        .filter_map(|line| item_re().captures(line))
        .map(|c| c[2].trim_matches(|ch: char| ch == '"' || ch == '*' || ch.is_whitespace()).to_owned())
        .collect();
    if items.len() != count || items.iter().any(|t| t.is_empty() || t.chars().count() > max_chars) {
        return None;
    }
    let mut seen = std::collections::HashSet::new();
    items.iter().all(|t| seen.insert(t.to_lowercase())).then_some(items)
}

/// Raw contribution as written by the model, before target checks.
#[derive(Debug, Clone, PartialEq)]
pub struct RawContribution {
    pub target: String,
    pub polarity: String,
    pub text: String,
}

/// Reply text and contributions from a chat-classification answer. A reply
/// that holds no JSON object is taken as plain conversation.
pub fn parse_chat_reply(reply: &str) -> (String, Vec<RawContribution>) {
    let parsed = match (reply.find('{'), reply.rfind('}')) {
        (Some(start), Some(end)) if start < end => serde_json::from_str::<serde_json::Value>(&reply[start..=end]).ok(),
        _ => None,
    };
    let Some(value) = parsed else {
        return (reply.trim().to_owned(), Vec::new());
    };
    let text = value.get("reply").and_then(|v| v.as_str()).unwrap_or_default().trim().to_owned();
    let contributions = value
        .get("contributions")
        .and_then(|v| v.as_array())
        .map(|items| {
            items
                .iter()
                .filter_map(|item| {
                    let field = |k: &str| item.get(k).and_then(|v| v.as_str()).map(|s| s.trim().to_owned());
                    Some(RawContribution { target: field("target")?, polarity: field("polarity")?, text: field("text")? })
                })
                .collect()
        })
        .unwrap_or_default();
    (text, contributions)
}
