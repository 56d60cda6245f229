//! Building argument trees from a claim through the gateway.
//!
//! Construction is breadth-first. For every argument above the requested
//! depth the builder asks for `breadth` attackers and `breadth` supporters,
//! elicits a base score for each, and attaches attackers before supporters.
//! Gateway calls for one level run concurrently (bounded by the gateway's
//! cap) while the tree itself is assembled in a fixed order, so ids are
//! `a0, a1, ...` in breadth-first creation order regardless of timing.

use argllm_core::{
    ArgumentId, NewArgument, Polarity, Provenance, Qbaf, QbafError, ScoreOrigin, Semantics, MAX_DEPTH,
};
use futures::future::{join_all, try_join_all};
use serde::{Deserialize, Serialize};

use crate::gateway::{BackendConfig, ElicitedScore, Gateway, GatewayError};
use crate::ingest::{truncate_for_prompt, Document};

/// Default budget, in characters, for document text inserted into prompts.
pub const DEFAULT_CONTEXT_CHARS: usize = 24_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationConfig {
    pub semantics: Semantics,
    pub depth: u8,
    pub breadth: u8,
    pub backend: BackendConfig,
    #[serde(default)]
    pub document_ids: Vec<String>,
    #[serde(default = "default_context_chars")]
    pub context_chars: usize,
}

fn default_context_chars() -> usize {
    DEFAULT_CONTEXT_CHARS
}

impl GenerationConfig {
    pub fn new(semantics: Semantics, depth: u8, breadth: u8, backend: BackendConfig) -> Self {
        GenerationConfig { semantics, depth, breadth, backend, document_ids: Vec::new(), context_chars: DEFAULT_CONTEXT_CHARS }
    }

    pub fn validate(&self) -> Result<(), BuildError> {
        check_shape(self.depth, self.breadth)
    }
}

/// Depth must be 1 or 2 and breadth 1 to 4.
pub fn check_shape(depth: u8, breadth: u8) -> Result<(), BuildError> {
    if !(1..=MAX_DEPTH as u8).contains(&depth) {
        return Err(BuildError::InvalidConfig { field: "depth", message: format!("depth must be 1 or 2, got {depth}") });
    }
    if !(1..=4).contains(&breadth) {
        return Err(BuildError::InvalidConfig {
            field: "breadth",
            message: format!("breadth must be between 1 and 4, got {breadth}"),
        });
    }
    Ok(())
}

/// Arguments a fresh build produces: `1 + 2b` at depth 1, `1 + 2b + 4b²`
/// at depth 2.
pub fn expected_size(depth: u8, breadth: u8) -> usize {
    let b = breadth as usize;
    (0..=depth as u32).map(|level| (2 * b).pow(level)).sum()
}

/// What had been built when a gateway call failed.
#[derive(Debug, Clone, PartialEq)]
pub struct PartialBuild {
    /// The argument being expanded or scored when the call failed; `None`
    /// when the claim's own score could not be elicited.
    pub failed_node: Option<ArgumentId>,
    /// The tree completed before the failing level, if any.
    pub completed: Option<Qbaf>,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum BuildError {
    #[error("invalid {field}: {message}")]
    InvalidConfig { field: &'static str, message: String },
    #[error("the claim must not be empty")]
    EmptyClaim,
    #[error("unknown document {0}")]
    UnknownDocument(String),
    #[error("gateway call failed while building {}: {source}", node_label(.partial))]
    Gateway { source: GatewayError, partial: Box<PartialBuild> },
    #[error(transparent)]
    Qbaf(#[from] QbafError),
}

fn node_label(partial: &PartialBuild) -> String {
    partial.failed_node.as_ref().map_or_else(|| "the claim".to_owned(), |id| format!("argument {id}"))
}

impl BuildError {
    pub fn code(&self) -> &'static str {
        match self {
            BuildError::InvalidConfig { .. } => "invalid-config",
            BuildError::EmptyClaim => "empty-claim",
            BuildError::UnknownDocument(_) => "unknown-document",
            BuildError::Gateway { .. } => "backend-error",
            BuildError::Qbaf(e) => e.code(),
        }
    }
}

/// Document text for prompts: most recent upload first, each under its
/// file name, cut to `budget` characters. `None` when nothing applies.
pub fn documents_context(documents: &[&Document], budget: usize) -> Option<String> {
    let mut docs: Vec<&&Document> = documents.iter().filter(|d| !d.markdown.trim().is_empty()).collect();
    if docs.is_empty() {
        return None;
    }
    docs.sort_by(|a, b| b.uploaded_at.cmp(&a.uploaded_at).then_with(|| a.id.cmp(&b.id)));
    let joined =
        docs.iter().map(|d| format!("## Document: {}\n\n{}", d.filename, d.markdown)).collect::<Vec<_>>().join("\n\n");
    Some(truncate_for_prompt(&joined, budget))
}

fn resolve_context(config: &GenerationConfig, documents: &[Document]) -> Result<Option<String>, BuildError> {
    let selected: Vec<&Document> = if config.document_ids.is_empty() {
        documents.iter().collect()
    } else {
        config
            .document_ids
            .iter()
            .map(|id| documents.iter().find(|d| &d.id == id).ok_or_else(|| BuildError::UnknownDocument(id.clone())))
            .collect::<Result<_, _>>()?
    };
    Ok(documents_context(&selected, config.context_chars))
}

fn origin(score: &ElicitedScore) -> ScoreOrigin {
    if score.defaulted {
        ScoreOrigin::Defaulted
    } else {
        ScoreOrigin::Elicited
    }
}

/// Generated children of one argument, attackers first.
struct Expansion {
    parent: ArgumentId,
    children: Vec<(Polarity, String, ElicitedScore)>,
}

async fn expand(
    gateway: &Gateway,
    parent: &ArgumentId,
    parent_text: &str,
    counts: [(Polarity, usize); 2],
    context: Option<&str>,
) -> Result<Expansion, GatewayError> {
    let generated = try_join_all(
        counts.iter().filter(|(_, n)| *n > 0).map(|(pol, n)| async move {
            Ok::<_, GatewayError>((*pol, gateway.generate_arguments(parent_text, *pol, *n, context).await?))
        }),
    )
    .await?;
    let texts: Vec<(Polarity, String)> =
        generated.into_iter().flat_map(|(pol, items)| items.into_iter().map(move |t| (pol, t))).collect();
    let scores =
        try_join_all(texts.iter().map(|(_, text)| gateway.elicit_base_score(text, Some(parent_text), context))).await?;
    Ok(Expansion {
        parent: parent.clone(),
        children: texts.into_iter().zip(scores).map(|((pol, text), score)| (pol, text, score)).collect(),
    })
}

fn attach(mut qbaf: Qbaf, expansion: Expansion, provenance: Provenance) -> Result<(Qbaf, Vec<ArgumentId>), QbafError> {
    let mut ids = Vec::with_capacity(expansion.children.len());
    for (polarity, text, score) in &expansion.children {
        let new = NewArgument::new(text, score.value, provenance).score_origin(origin(score));
        let (next, id) = qbaf.add_argument(&expansion.parent, *polarity, new)?;
        qbaf = next;
        ids.push(id);
    }
    Ok((qbaf, ids))
}

/// Builds a tree for `claim` with the configured depth and breadth.
///
/// The gateway is used as given; `config.backend` is not consulted. A
/// failing gateway call aborts the whole build and the error carries the
/// levels completed so far.
pub async fn build_qbaf(
    gateway: &Gateway,
    claim: &str,
    config: &GenerationConfig,
    documents: &[Document],
) -> Result<Qbaf, BuildError> {
    config.validate()?;
    let claim = claim.trim();
    if claim.is_empty() {
        return Err(BuildError::EmptyClaim);
    }
    let context = resolve_context(config, documents)?;
    let context = context.as_deref();
    let breadth = config.breadth as usize;

    let root_score = gateway.elicit_base_score(claim, None, context).await.map_err(|source| BuildError::Gateway {
        source,
        partial: Box::new(PartialBuild { failed_node: None, completed: None }),
    })?;
    let root = argllm_core::Argument::new(ArgumentId::numbered(0), claim, root_score.value, Provenance::Claim)?
        .with_score_origin(origin(&root_score));
    let mut qbaf = Qbaf::new(root);
    let mut frontier = vec![ArgumentId::numbered(0)];

    for _ in 0..config.depth {
        let counts = [(Polarity::Attack, breadth), (Polarity::Support, breadth)];
        let results = join_all(frontier.iter().map(|id| {
            let text = qbaf.get(id).map(|a| a.text().to_owned()).unwrap_or_default();
            async move { expand(gateway, id, &text, counts, context).await.map_err(|e| (id.clone(), e)) }
        }))
        .await;

        let mut next_frontier = Vec::new();
        let mut level = qbaf.clone();
        for result in results {
            match result {
                Ok(expansion) => {
                    let (next, ids) = attach(level, expansion, Provenance::LlmGenerated)?;
                    level = next;
                    next_frontier.extend(ids);
                }
                Err((node, source)) => {
                    return Err(BuildError::Gateway {
                        source,
                        partial: Box::new(PartialBuild { failed_node: Some(node), completed: Some(qbaf) }),
                    })
                }
            }
        }
        qbaf = level;
        frontier = next_frontier;
    }
    Ok(qbaf)
}

/// Adds one generated attacker or supporter to `target`.
pub async fn expand_argument(
    gateway: &Gateway,
    qbaf: &Qbaf,
    target: &ArgumentId,
    polarity: Polarity,
    config: &GenerationConfig,
    documents: &[Document],
) -> Result<Qbaf, BuildError> {
    let parent = qbaf.get(target).ok_or_else(|| QbafError::UnknownParent(target.clone()))?;
    let depth = qbaf.depth_of(target)?;
    if depth >= MAX_DEPTH {
        return Err(QbafError::DepthLimitExceeded { parent: target.clone(), depth }.into());
    }
    let context = resolve_context(config, documents)?;
    let counts = match polarity {
        Polarity::Attack => [(Polarity::Attack, 1), (Polarity::Support, 0)],
        Polarity::Support => [(Polarity::Attack, 0), (Polarity::Support, 1)],
    };
    let expansion = expand(gateway, target, parent.text(), counts, context.as_deref()).await.map_err(|source| {
        BuildError::Gateway {
            source,
            partial: Box::new(PartialBuild { failed_node: Some(target.clone()), completed: Some(qbaf.clone()) }),
        }
    })?;
    Ok(attach(qbaf.clone(), expansion, Provenance::LlmGenerated)?.0)
}
