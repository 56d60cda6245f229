use std::sync::OnceLock;

use async_trait::async_trait;
use regex::Regex;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{ChatBackend, ChatMessage, GatewayError, Role};

/// Canned reply returned whenever the prompt contains `contains`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScriptRule {
    pub contains: String,
    pub reply: String,
}

/// Deterministic offline backend.
///
/// Replies depend only on the seed and the concatenated message contents,
/// through SHA-256, so they are identical across runs and platforms. Script
/// rules are checked first, in order. Otherwise the mock recognises the
/// crate's prompt templates by their `task:` line and answers in the
/// requested format: a confidence, a numbered list of the requested length,
/// or a chat reply without contributions.
#[derive(Debug, Clone)]
pub struct MockBackend {
    seed: u64,
    script: Vec<ScriptRule>,
}

const ATTACK_LEADS: [&str; 4] =
    ["Critics point out that", "A key obstacle is that", "Available evidence suggests", "Historical precedent shows"];
const ATTACK_POINTS: [&str; 6] = [
    "the required reforms remain incomplete",
    "political consensus on the matter is fragile",
    "the proposed timeline is unusually short",
    "comparable cases took considerably longer",
    "promised funding has not materialised",
    "independent assessments report unresolved risks",
];
const SUPPORT_LEADS: [&str; 4] =
    ["Supporters note that", "Recent reports show that", "There is evidence that", "Experts observe that"];
const SUPPORT_POINTS: [&str; 6] = [
    "formal commitments have already been made",
    "momentum has grown steadily over recent years",
    "similar cases succeeded under comparable conditions",
    "key stakeholders have publicly endorsed it",
    "measurable progress has been documented",
    "expert surveys lean in this direction",
];

fn count_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"exactly (\d+)").expect("valid regex"))
}

impl MockBackend {
    pub fn new(seed: u64, script: Vec<ScriptRule>) -> Self {
        MockBackend { seed, script }
    }

    fn digest(&self, transcript: &str) -> [u8; 32] {
        let mut hasher = Sha256::new();
        hasher.update(self.seed.to_le_bytes());
        hasher.update(transcript.as_bytes());
        hasher.finalize().into()
    }

    fn word(digest: &[u8; 32], index: usize) -> u64 {
        let start = (index % 4) * 8;
        u64::from_le_bytes(digest[start..start + 8].try_into().expect("8 bytes"))
    }

    /// Reply for a transcript; exposed for golden tests.
    pub fn reply_for(&self, messages: &[ChatMessage]) -> String {
        let transcript: String = messages.iter().map(|m| m.content.as_str()).collect::<Vec<_>>().join("\n");
        if let Some(rule) = self.script.iter().find(|r| transcript.contains(&r.contains)) {
            return rule.reply.clone();
        }
        let digest = self.digest(&transcript);
        let last_user = messages.iter().rev().find(|m| m.role == Role::User).map_or("", |m| m.content.as_str());

        if last_user.contains("task: elicit_score") {
            let milli = 50 + Self::word(&digest, 0) % 901;
            format!("{}.{:03}", milli / 1000, milli % 1000)
        } else if last_user.contains("task: generate_args") {
            let count = count_re()
                .captures(last_user)
                .and_then(|c| c[1].parse::<usize>().ok())
                .unwrap_or(1);
            let attack = last_user.contains(" against the statement");
            let (leads, points) = if attack { (&ATTACK_LEADS, &ATTACK_POINTS) } else { (&SUPPORT_LEADS, &SUPPORT_POINTS) };
            let tag = format!("{:04x}", Self::word(&digest, 3) & 0xffff);
            (0..count)
                .map(|i| {
                    let w = Self::word(&digest, i);
                    let lead = leads[(w % leads.len() as u64) as usize];
                    let point = points[((w >> 8) as usize + i) % points.len()];
                    format!("{}. {lead} {point} (ref {tag}-{}).", i + 1, i + 1)
                })
                .collect::<Vec<_>>()
                .join("\n")
        } else if last_user.contains("task: chat_classify") {
            r#"{"reply": "Thanks, I have noted your message. It does not add new evidence to the tree.", "contributions": []}"#
                .to_owned()
        } else {
            let hex: String = digest[..8].iter().map(|b| format!("{b:02x}")).collect();
            format!("mock reply {hex}")
        }
    }
}

#[async_trait]
impl ChatBackend for MockBackend {
    async fn complete(&self, messages: &[ChatMessage]) -> Result<String, GatewayError> {
        Ok(self.reply_for(messages))
    }
}
