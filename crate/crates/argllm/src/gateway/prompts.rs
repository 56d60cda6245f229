//! Versioned prompt templates shipped with the crate.
//!
//! Template files live in `prompts/`. Lines starting with `#` document the
//! template and are stripped before rendering; `{name}` placeholders are
//! substituted verbatim.

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Template {
    ElicitScore,
    ElicitScoreStrict,
    GenerateArgs,
    GenerateArgsStrict,
    ChatClassify,
}

impl Template {
    pub const ALL: [Template; 5] = [
        Template::ElicitScore,
        Template::ElicitScoreStrict,
        Template::GenerateArgs,
        Template::GenerateArgsStrict,
        Template::ChatClassify,
    ];

    pub fn file_name(self) -> &'static str {
        match self {
            Template::ElicitScore => "elicit_score.txt",
            Template::ElicitScoreStrict => "elicit_score_strict.txt",
            Template::GenerateArgs => "generate_args.txt",
            Template::GenerateArgsStrict => "generate_args_strict.txt",
            Template::ChatClassify => "chat_classify.txt",
        }
    }

    pub fn source(self) -> &'static str {
        match self {
            Template::ElicitScore => include_str!("../../prompts/elicit_score.txt"),
            Template::ElicitScoreStrict => include_str!("../../prompts/elicit_score_strict.txt"),
            Template::GenerateArgs => include_str!("../../prompts/generate_args.txt"),
            Template::GenerateArgsStrict => include_str!("../../prompts/generate_args_strict.txt"),
            Template::ChatClassify => include_str!("../../prompts/chat_classify.txt"),
        }
    }

    pub fn placeholders(self) -> &'static [&'static str] {
        match self {
            Template::ElicitScore => &["statement", "context", "parent"],
            Template::ElicitScoreStrict => &["statement"],
            Template::GenerateArgs => &["statement", "polarity", "count", "context"],
            Template::GenerateArgsStrict => &["statement", "polarity", "count"],
            Template::ChatClassify => &["qbaf", "message"],
        }
    }

    /// Renders the template. Every declared placeholder must be supplied.
    pub fn render(self, values: &[(&str, &str)]) -> String {
        debug_assert!(self.placeholders().iter().all(|p| values.iter().any(|(k, _)| k == p)));
        let body: String = self
            .source()
            .lines()
            .filter(|l| !l.starts_with('#'))
            .map(|l| format!("{l}\n"))
            .collect();
        // single pass so substituted text is never re-scanned for placeholders
        let mut out = String::with_capacity(body.len());
        let mut rest = body.as_str();
        while let Some(start) = rest.find('{') {
            out.push_str(&rest[..start]);
            let tail = &rest[start..];
            let hit = values.iter().find(|(k, _)| {
                tail.len() > k.len() + 1 && tail[1..].starts_with(k) && tail[1 + k.len()..].starts_with('}')
            });
            match hit {
                Some((k, v)) => {
                    out.push_str(v);
                    rest = &tail[k.len() + 2..];
                }
                None => {
                    out.push('{');
                    rest = &tail[1..];
                }
            }
        }
        out.push_str(rest);
        out.trim_end().to_owned()
    }
}

/// Context block prepended to prompts when documents ground the session.
pub fn context_block(context: Option<&str>) -> String {
    match context {
        Some(text) if !text.trim().is_empty() => {
            format!("Trusted reference documents (use them as evidence where relevant):\n<<<\n{text}\n>>>\n\n")
        }
        _ => String::new(),
    }
}

pub fn parent_line(parent: Option<&str>) -> String {
    match parent {
        Some(text) => format!("This statement was raised as evidence about: {text}\n"),
        None => String::new(),
    }
}
