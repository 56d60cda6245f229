use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::String;
use alloc::vec::Vec;
use alloc::{format, vec};
use core::fmt;

use crate::id::ArgumentId;
use crate::qbaf::{Polarity, Qbaf, MAX_DEPTH};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ViolationKind {
    /// The root id names no argument.
    MissingRoot,
    /// An edge endpoint names no argument.
    DanglingEdge,
    /// The same (source, target) pair is both an attack and a support.
    PolarityDisjointness,
    /// The graph is not a tree rooted at the claim.
    NotATree,
    /// An argument sits deeper than [`MAX_DEPTH`].
    DepthExceeded,
}

impl ViolationKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ViolationKind::MissingRoot => "missing-root",
            ViolationKind::DanglingEdge => "dangling-edge",
            ViolationKind::PolarityDisjointness => "polarity-disjointness",
            ViolationKind::NotATree => "not-a-tree",
            ViolationKind::DepthExceeded => "depth-exceeded",
        }
    }
}

impl fmt::Display for ViolationKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation {
    pub kind: ViolationKind,
    pub ids: Vec<ArgumentId>,
    pub message: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.kind, self.message)
    }
}

/// Result of [`Qbaf::validate`]. Empty means the framework is a valid tree.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_ok(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn has(&self, kind: ViolationKind) -> bool {
        self.violations.iter().any(|v| v.kind == kind)
    }

    fn push(&mut self, kind: ViolationKind, ids: Vec<ArgumentId>, message: String) {
        self.violations.push(Violation { kind, ids, message });
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_ok() {
            return f.write_str("ok");
        }
        for (i, v) in self.violations.iter().enumerate() {
            if i > 0 {
                f.write_str("\n")?;
            }
            write!(f, "{v}")?;
        }
        Ok(())
    }
}

pub(crate) fn validate(qbaf: &Qbaf) -> ValidationReport {
    let mut report = ValidationReport::default();
    let root = qbaf.root();

    if !qbaf.contains(root) {
        report.push(ViolationKind::MissingRoot, vec![root.clone()], format!("root {root} is not an argument"));
    }

    let mut polarities: BTreeMap<(&ArgumentId, &ArgumentId), BTreeSet<Polarity>> = BTreeMap::new();
    for edge in qbaf.edges() {
        let missing: Vec<ArgumentId> =
            [edge.source(), edge.target()].into_iter().filter(|id| !qbaf.contains(id)).cloned().collect();
        if !missing.is_empty() {
            report.push(
                ViolationKind::DanglingEdge,
                missing,
                format!("edge {} -> {} references an unknown argument", edge.source(), edge.target()),
            );
        }
        polarities.entry((edge.source(), edge.target())).or_default().insert(edge.polarity());
    }
    for ((source, target), set) in &polarities {
        if set.len() > 1 {
            report.push(
                ViolationKind::PolarityDisjointness,
                vec![(*source).clone(), (*target).clone()],
                format!("{source} both attacks and supports {target}"),
            );
        }
    }

    // parent candidates per argument, counted over distinct targets
    let mut parents: BTreeMap<&ArgumentId, BTreeSet<&ArgumentId>> = BTreeMap::new();
    for (source, target) in polarities.keys() {
        parents.entry(source).or_default().insert(target);
    }

    if let Some(targets) = parents.get(root) {
        let mut ids = vec![root.clone()];
        ids.extend(targets.iter().map(|t| (*t).clone()));
        report.push(ViolationKind::NotATree, ids, format!("the root {root} has an outgoing edge"));
    }

    for arg in qbaf.arguments() {
        let id = arg.id();
        if id == root {
            continue;
        }
        match parents.get(id).map(BTreeSet::len).unwrap_or(0) {
            0 => report.push(
                ViolationKind::NotATree,
                vec![id.clone()],
                format!("{id} neither attacks nor supports any argument"),
            ),
            1 => {}
            n => report.push(ViolationKind::NotATree, vec![id.clone()], format!("{id} has {n} parents")),
        }
    }

    // Walk every argument up its parent chain; reaching the root within
    // |A| steps fixes its depth, otherwise it sits on or below a cycle.
    if report.is_ok() {
        let limit = qbaf.len();
        for arg in qbaf.arguments() {
            let mut current = arg.id();
            let mut depth = 0;
            while current != root && depth <= limit {
                current = parents[current].iter().next().copied().unwrap_or(root);
                depth += 1;
            }
            if current != root {
                report.push(
                    ViolationKind::NotATree,
                    vec![arg.id().clone()],
                    format!("{} lies on a cycle that does not reach the root", arg.id()),
                );
            } else if depth > MAX_DEPTH {
                report.push(
                    ViolationKind::DepthExceeded,
                    vec![arg.id().clone()],
                    format!("{} is at depth {depth}, the limit is {MAX_DEPTH}", arg.id()),
                );
            }
        }
    }

    report
}
