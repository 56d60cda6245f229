use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use crate::error::QbafError;
use crate::id::ArgumentId;
use crate::validate::{self, ValidationReport};

/// Deepest level (root = 0) an argument may sit at.
pub const MAX_DEPTH: usize = 2;

/// Longest argument text, in characters.
pub const MAX_TEXT_CHARS: usize = 2000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Polarity {
    Attack,
    Support,
}

impl Polarity {
    pub const BOTH: [Polarity; 2] = [Polarity::Attack, Polarity::Support];

    pub fn as_str(self) -> &'static str {
        match self {
            Polarity::Attack => "attack",
            Polarity::Support => "support",
        }
    }
}

impl fmt::Display for Polarity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Polarity {
    type Err = ();

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "attack" => Ok(Polarity::Attack),
            "support" => Ok(Polarity::Support),
            _ => Err(()),
        }
    }
}

/// Where an argument came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Provenance {
    Claim,
    LlmGenerated,
    UserAdded,
    ChatDerived,
}

impl Provenance {
    pub fn as_str(self) -> &'static str {
        match self {
            Provenance::Claim => "claim",
            Provenance::LlmGenerated => "llm-generated",
            Provenance::UserAdded => "user-added",
            Provenance::ChatDerived => "chat-derived",
        }
    }
}

impl FromStr for Provenance {
    type Err = ();

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "claim" => Ok(Provenance::Claim),
            "llm-generated" => Ok(Provenance::LlmGenerated),
            "user-added" => Ok(Provenance::UserAdded),
            "chat-derived" => Ok(Provenance::ChatDerived),
            _ => Err(()),
        }
    }
}

/// Where an argument's base score came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum ScoreOrigin {
    /// Supplied directly by a person or an input file.
    #[default]
    Given,
    /// Elicited from the language model.
    Elicited,
    /// The model's reply could not be parsed; the fallback score was used.
    Defaulted,
}

impl ScoreOrigin {
    pub fn as_str(self) -> &'static str {
        match self {
            ScoreOrigin::Given => "given",
            ScoreOrigin::Elicited => "elicited",
            ScoreOrigin::Defaulted => "defaulted",
        }
    }
}

impl FromStr for ScoreOrigin {
    type Err = ();

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "given" => Ok(ScoreOrigin::Given),
            "elicited" => Ok(ScoreOrigin::Elicited),
            "defaulted" => Ok(ScoreOrigin::Defaulted),
            _ => Err(()),
        }
    }
}

pub(crate) fn check_score(value: f64) -> Result<f64, QbafError> {
    if (0.0..=1.0).contains(&value) {
        Ok(value)
    } else {
        Err(QbafError::InvalidScore(value))
    }
}

fn check_text(text: &str) -> Result<(), QbafError> {
    if text.trim().is_empty() {
        return Err(QbafError::EmptyText);
    }
    let chars = text.chars().count();
    if chars > MAX_TEXT_CHARS {
        return Err(QbafError::TextTooLong(chars));
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct Argument {
    id: ArgumentId,
    text: String,
    base_score: f64,
    provenance: Provenance,
    score_origin: ScoreOrigin,
}

impl Argument {
    pub fn new(
        id: ArgumentId,
        text: impl Into<String>,
        base_score: f64,
        provenance: Provenance,
    ) -> Result<Self, QbafError> {
        let text = text.into();
        check_text(&text)?;
        Ok(Argument {
            id,
            text,
            base_score: check_score(base_score)?,
            provenance,
            score_origin: ScoreOrigin::Given,
        })
    }

    pub fn with_score_origin(mut self, origin: ScoreOrigin) -> Self {
        self.score_origin = origin;
        self
    }

    pub fn id(&self) -> &ArgumentId {
        &self.id
    }

    pub fn text(&self) -> &str {
        &self.text
    }

    pub fn base_score(&self) -> f64 {
        self.base_score
    }

    pub fn provenance(&self) -> Provenance {
        self.provenance
    }

    pub fn score_origin(&self) -> ScoreOrigin {
        self.score_origin
    }
}

/// `source` attacks or supports `target`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Edge {
    source: ArgumentId,
    target: ArgumentId,
    polarity: Polarity,
}

impl Edge {
    pub fn new(source: ArgumentId, target: ArgumentId, polarity: Polarity) -> Result<Self, QbafError> {
        if source == target {
            return Err(QbafError::SelfLoop(source));
        }
        Ok(Edge { source, target, polarity })
    }

    pub fn source(&self) -> &ArgumentId {
        &self.source
    }

    pub fn target(&self) -> &ArgumentId {
        &self.target
    }

    pub fn polarity(&self) -> Polarity {
        self.polarity
    }
}

/// Input for [`Qbaf::add_argument`]; the id is assigned by the QBAF.
#[derive(Debug, Clone, Copy)]
pub struct NewArgument<'a> {
    pub text: &'a str,
    pub base_score: f64,
    pub provenance: Provenance,
    pub score_origin: ScoreOrigin,
}

impl<'a> NewArgument<'a> {
    pub fn new(text: &'a str, base_score: f64, provenance: Provenance) -> Self {
        NewArgument { text, base_score, provenance, score_origin: ScoreOrigin::Given }
    }

    pub fn score_origin(mut self, origin: ScoreOrigin) -> Self {
        self.score_origin = origin;
        self
    }
}

/// A quantitative bipolar argumentation framework: arguments with base
/// scores plus attack and support edges.
///
/// A `Qbaf` may be assembled from arbitrary parts with [`Qbaf::from_parts`]
/// and checked with [`Qbaf::validate`]; the mutation methods only ever turn
/// a valid tree into another valid tree. Values are immutable: mutations
/// return a new `Qbaf`.
///
/// Arguments and edges are kept in canonical order (natural id order, then
/// edges by source, target and polarity), so two equal frameworks are equal
/// field by field.
#[derive(Debug, Clone, PartialEq)]
pub struct Qbaf {
    root: ArgumentId,
    arguments: BTreeMap<ArgumentId, Argument>,
    edges: BTreeSet<Edge>,
}

impl Qbaf {
    /// A framework holding only the claim.
    pub fn new(claim: Argument) -> Self {
        let root = claim.id.clone();
        let mut arguments = BTreeMap::new();
        arguments.insert(root.clone(), claim);
        Qbaf { root, arguments, edges: BTreeSet::new() }
    }

    /// Assembles a framework without checking tree invariants.
    ///
    /// Only duplicate argument ids are rejected. Call [`Qbaf::validate`] before
    /// handing the result to anything that expects a tree.
    pub fn from_parts(
        root: ArgumentId,
        arguments: impl IntoIterator<Item = Argument>,
        edges: impl IntoIterator<Item = Edge>,
    ) -> Result<Self, QbafError> {
        let mut map = BTreeMap::new();
        for arg in arguments {
            if map.contains_key(&arg.id) {
                return Err(QbafError::DuplicateArgument(arg.id));
            }
            map.insert(arg.id.clone(), arg);
        }
        Ok(Qbaf { root, arguments: map, edges: edges.into_iter().collect() })
    }

    pub fn root(&self) -> &ArgumentId {
        &self.root
    }

    pub fn root_argument(&self) -> Option<&Argument> {
        self.arguments.get(&self.root)
    }

    pub fn len(&self) -> usize {
        self.arguments.len()
    }

    pub fn is_empty(&self) -> bool {
        self.arguments.is_empty()
    }

    pub fn get(&self, id: &ArgumentId) -> Option<&Argument> {
        self.arguments.get(id)
    }

    pub fn contains(&self, id: &ArgumentId) -> bool {
        self.arguments.contains_key(id)
    }

    /// Arguments in canonical id order.
    pub fn arguments(&self) -> impl Iterator<Item = &Argument> + '_ {
        self.arguments.values()
    }

    /// Edges in canonical order.
    pub fn edges(&self) -> impl Iterator<Item = &Edge> + '_ {
        self.edges.iter()
    }

    pub fn count_edges(&self, polarity: Polarity) -> usize {
        self.edges.iter().filter(|e| e.polarity == polarity).count()
    }

    pub fn validate(&self) -> ValidationReport {
        validate::validate(self)
    }

    /// The argument `id` attacks or supports, with the edge polarity.
    pub fn parent_of(&self, id: &ArgumentId) -> Option<(&ArgumentId, Polarity)> {
        self.edges.iter().find(|e| &e.source == id).map(|e| (&e.target, e.polarity))
    }

    /// Number of edges between `id` and the root. The root has depth 0.
    pub fn depth_of(&self, id: &ArgumentId) -> Result<usize, QbafError> {
        if !self.contains(id) {
            return Err(QbafError::UnknownArgument(id.clone()));
        }
        let mut depth = 0;
        let mut current = id;
        while current != &self.root {
            match self.parent_of(current) {
                Some((parent, _)) if depth < self.arguments.len() => {
                    current = parent;
                    depth += 1;
                }
                _ => return Err(QbafError::NotATree(id.clone())),
            }
        }
        Ok(depth)
    }

    /// Direct attackers and supporters of `id`, in canonical (creation) order.
    pub fn children_of(&self, id: &ArgumentId) -> Result<Vec<(ArgumentId, Polarity)>, QbafError> {
        if !self.contains(id) {
            return Err(QbafError::UnknownArgument(id.clone()));
        }
        Ok(self
            .edges
            .iter()
            .filter(|e| &e.target == id)
            .map(|e| (e.source.clone(), e.polarity))
            .collect())
    }

    /// Height of the tree: the largest depth of any argument.
    pub fn height(&self) -> Result<usize, QbafError> {
        self.arguments.keys().try_fold(0, |acc, id| Ok(acc.max(self.depth_of(id)?)))
    }

    /// The smallest unused `a{n}` id with `n` at least the argument count.
    pub fn next_id(&self) -> ArgumentId {
        let mut n = self.arguments.len();
        loop {
            let id = ArgumentId::numbered(n);
            if !self.arguments.contains_key(&id) {
                return id;
            }
            n += 1;
        }
    }

    /// Attaches a fresh argument to `parent`, returning the new framework and
    /// the id given to the argument.
    pub fn add_argument(
        &self,
        parent: &ArgumentId,
        polarity: Polarity,
        new: NewArgument<'_>,
    ) -> Result<(Qbaf, ArgumentId), QbafError> {
        if !self.contains(parent) {
            return Err(QbafError::UnknownParent(parent.clone()));
        }
        let depth = self.depth_of(parent)?;
        if depth >= MAX_DEPTH {
            return Err(QbafError::DepthLimitExceeded { parent: parent.clone(), depth });
        }
        let id = self.next_id();
        let argument = Argument::new(id.clone(), new.text, new.base_score, new.provenance)?
            .with_score_origin(new.score_origin);
        let mut next = self.clone();
        next.arguments.insert(id.clone(), argument);
        next.edges.insert(Edge::new(id.clone(), parent.clone(), polarity)?);
        Ok((next, id))
    }

    /// Replaces one argument's base score; nothing else changes.
    pub fn set_base_score(&self, id: &ArgumentId, value: f64) -> Result<Qbaf, QbafError> {
        if !self.contains(id) {
            return Err(QbafError::UnknownArgument(id.clone()));
        }
        let value = check_score(value)?;
        let mut next = self.clone();
        if let Some(arg) = next.arguments.get_mut(id) {
            arg.base_score = value;
        }
        Ok(next)
    }
}
