//! Canonical JSON for QBAFs and strength maps.
//!
//! `to_json` output is canonical: arguments sorted by id (natural order),
//! edges sorted by source, target and polarity, and a fixed field order.
//! Equal frameworks therefore serialise to identical bytes.

use argllm_core::{
    Argument, ArgumentId, Edge, Polarity, Provenance, Qbaf, QbafError, ScoreOrigin, Semantics, StrengthMap,
    ValidationReport, Violation, ViolationKind,
};
use serde::ser::SerializeMap;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

pub const QBAF_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, thiserror::Error)]
pub enum FormatError {
    #[error("malformed JSON: {0}")]
    Malformed(#[source] serde_json::Error),
    #[error("schema violation: {0}")]
    Schema(String),
    #[error("invariant violation:\n{0}")]
    Invariant(ValidationReport),
}

impl FormatError {
    pub fn code(&self) -> &'static str {
        match self {
            FormatError::Malformed(_) => "malformed-json",
            FormatError::Schema(_) => "schema-violation",
            FormatError::Invariant(_) => "invariant-violation",
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct QbafDoc {
    pub version: u32,
    pub root: String,
    pub arguments: Vec<ArgumentDoc>,
    pub edges: Vec<EdgeDoc>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ArgumentDoc {
    pub id: String,
    pub text: String,
    pub base_score: f64,
    pub provenance: String,
    /// Omitted when the score was given directly.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub score_origin: Option<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EdgeDoc {
    pub source: String,
    pub target: String,
    pub polarity: String,
}

impl From<&Qbaf> for QbafDoc {
    fn from(q: &Qbaf) -> Self {
        QbafDoc {
            version: QBAF_SCHEMA_VERSION,
            root: q.root().to_string(),
            arguments: q
                .arguments()
                .map(|a| ArgumentDoc {
                    id: a.id().to_string(),
                    text: a.text().to_owned(),
                    base_score: a.base_score(),
                    provenance: a.provenance().as_str().to_owned(),
                    score_origin: match a.score_origin() {
                        ScoreOrigin::Given => None,
                        other => Some(other.as_str().to_owned()),
                    },
                })
                .collect(),
            edges: q
                .edges()
                .map(|e| EdgeDoc {
                    source: e.source().to_string(),
                    target: e.target().to_string(),
                    polarity: e.polarity().as_str().to_owned(),
                })
                .collect(),
        }
    }
}

fn schema(context: &str, err: impl std::fmt::Display) -> FormatError {
    FormatError::Schema(format!("{context}: {err}"))
}

fn parse_id(value: &str, context: &str) -> Result<ArgumentId, FormatError> {
    ArgumentId::new(value).map_err(|e| schema(context, e))
}

impl QbafDoc {
    /// Converts to a [`Qbaf`], checking the schema and then the tree
    /// invariants.
    pub fn into_qbaf(self) -> Result<Qbaf, FormatError> {
        if self.version != QBAF_SCHEMA_VERSION {
            return Err(FormatError::Schema(format!(
                "unsupported version {} (expected {QBAF_SCHEMA_VERSION})",
                self.version
            )));
        }
        let root = parse_id(&self.root, "root")?;
        let mut arguments = Vec::with_capacity(self.arguments.len());
        for (i, doc) in self.arguments.into_iter().enumerate() {
            let ctx = format!("arguments[{i}]");
            let id = parse_id(&doc.id, &ctx)?;
            let provenance: Provenance = doc
                .provenance
                .parse()
                .map_err(|_| schema(&ctx, format_args!("unknown provenance {:?}", doc.provenance)))?;
            let origin: ScoreOrigin = match doc.score_origin.as_deref() {
                None => ScoreOrigin::Given,
                Some(s) => s.parse().map_err(|_| schema(&ctx, format_args!("unknown score_origin {s:?}")))?,
            };
            let arg = Argument::new(id, doc.text, doc.base_score, provenance).map_err(|e| schema(&ctx, e))?;
            arguments.push(arg.with_score_origin(origin));
        }
        let mut edges = Vec::with_capacity(self.edges.len());
        for (i, doc) in self.edges.into_iter().enumerate() {
            let ctx = format!("edges[{i}]");
            let source = parse_id(&doc.source, &ctx)?;
            let target = parse_id(&doc.target, &ctx)?;
            let polarity: Polarity = doc
                .polarity
                .parse()
                .map_err(|_| schema(&ctx, format_args!("unknown polarity {:?}", doc.polarity)))?;
            match Edge::new(source, target, polarity) {
                Ok(edge) => edges.push(edge),
                Err(QbafError::SelfLoop(id)) => {
                    return Err(FormatError::Invariant(ValidationReport {
                        violations: vec![Violation {
                            kind: ViolationKind::NotATree,
                            ids: vec![id.clone()],
                            message: format!("{id} attacks or supports itself"),
                        }],
                    }))
                }
                Err(e) => return Err(schema(&ctx, e)),
            }
        }
        let qbaf = Qbaf::from_parts(root, arguments, edges).map_err(|e| schema("arguments", e))?;
        let report = qbaf.validate();
        if report.is_ok() {
            Ok(qbaf)
        } else {
            Err(FormatError::Invariant(report))
        }
    }
}

/// Canonical compact JSON for a QBAF.
pub fn to_json(qbaf: &Qbaf) -> Vec<u8> {
    serde_json::to_vec(&QbafDoc::from(qbaf)).expect("QBAF documents always serialise")
}

pub fn from_json(bytes: &[u8]) -> Result<Qbaf, FormatError> {
    let value: serde_json::Value = serde_json::from_slice(bytes).map_err(FormatError::Malformed)?;
    let doc: QbafDoc = serde_json::from_value(value).map_err(|e| FormatError::Schema(e.to_string()))?;
    doc.into_qbaf()
}

/// Serialises a [`StrengthMap`] as `{"semantics": ..., "strengths": {...}}`
/// with ids in canonical order.
pub struct StrengthsJson<'a>(pub &'a StrengthMap);

struct OrderedStrengths<'a>(&'a StrengthMap);

impl Serialize for OrderedStrengths<'_> {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        let mut map = serializer.serialize_map(Some(self.0.len()))?;
        for (id, v) in self.0.iter() {
            map.serialize_entry(id.as_str(), &v)?;
        }
        map.end()
    }
}

impl Serialize for StrengthsJson<'_> {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        let mut map = serializer.serialize_map(Some(2))?;
        map.serialize_entry("semantics", self.0.semantics().as_str())?;
        map.serialize_entry("strengths", &OrderedStrengths(self.0))?;
        map.end()
    }
}

#[derive(Deserialize)]
struct StrengthsDoc {
    semantics: String,
    strengths: std::collections::BTreeMap<String, f64>,
}

pub fn strengths_to_json(strengths: &StrengthMap) -> Vec<u8> {
    serde_json::to_vec(&StrengthsJson(strengths)).expect("strength maps always serialise")
}

pub fn strengths_from_json(bytes: &[u8]) -> Result<StrengthMap, FormatError> {
    let value: serde_json::Value = serde_json::from_slice(bytes).map_err(FormatError::Malformed)?;
    let doc: StrengthsDoc = serde_json::from_value(value).map_err(|e| FormatError::Schema(e.to_string()))?;
    strengths_from_doc(doc)
}

fn strengths_from_doc(doc: StrengthsDoc) -> Result<StrengthMap, FormatError> {
    let semantics: Semantics = doc.semantics.parse().map_err(|e| schema("semantics", e))?;
    let values = doc
        .strengths
        .into_iter()
        .map(|(k, v)| Ok((parse_id(&k, "strengths")?, v)))
        .collect::<Result<Vec<_>, FormatError>>()?;
    StrengthMap::from_values(semantics, values).map_err(|e| schema("strengths", e))
}

/// JSON form of a validation report: a list of `{code, ids, message}`.
pub fn report_json(report: &ValidationReport) -> serde_json::Value {
    serde_json::Value::Array(
        report
            .violations
            .iter()
            .map(|v| {
                serde_json::json!({
                    "code": v.kind.as_str(),
                    "ids": v.ids.iter().map(|i| i.as_str()).collect::<Vec<_>>(),
                    "message": v.message,
                })
            })
            .collect(),
    )
}

/// `#[serde(with = ...)]` adapters for embedding in larger documents.
pub mod serde_qbaf {
    use super::*;

    pub fn serialize<S: Serializer>(q: &Option<Qbaf>, s: S) -> Result<S::Ok, S::Error> {
        q.as_ref().map(QbafDoc::from).serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<Qbaf>, D::Error> {
        Option::<QbafDoc>::deserialize(d)?
            .map(|doc| doc.into_qbaf().map_err(serde::de::Error::custom))
            .transpose()
    }
}

pub mod serde_strengths {
    use super::*;

    pub fn serialize<S: Serializer>(m: &Option<StrengthMap>, s: S) -> Result<S::Ok, S::Error> {
        m.as_ref().map(StrengthsJson).serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<StrengthMap>, D::Error> {
        Option::<StrengthsDoc>::deserialize(d)?
            .map(|doc| strengths_from_doc(doc).map_err(serde::de::Error::custom))
            .transpose()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use argllm_core::{semantics::evaluate, NewArgument};

    fn id(s: &str) -> ArgumentId {
        ArgumentId::new(s).unwrap()
    }

    fn seven() -> Qbaf {
        let mut q = Qbaf::new(Argument::new(id("a0"), "Ukraine joins", 0.5, Provenance::Claim).unwrap());
        for (parent, pol, s) in [
            ("a0", Polarity::Attack, 0.6),
            ("a0", Polarity::Support, 0.7),
            ("a1", Polarity::Attack, 0.2),
            ("a1", Polarity::Support, 0.3),
            ("a2", Polarity::Attack, 0.4),
            ("a2", Polarity::Support, 0.9),
        ] {
            let new = NewArgument::new("evidence \"quoted\" ✓", s, Provenance::LlmGenerated)
                .score_origin(ScoreOrigin::Elicited);
            q = q.add_argument(&id(parent), pol, new).unwrap().0;
        }
        q
    }

    #[test]
    fn round_trip_seven_nodes() {
        let q = seven();
        let bytes = to_json(&q);
        let back = from_json(&bytes).unwrap();
        assert_eq!(back, q);
        assert_eq!(to_json(&back), bytes);
    }

    #[test]
    fn layout_is_canonical() {
        let q = Qbaf::new(Argument::new(id("a0"), "c", 0.5, Provenance::Claim).unwrap());
        let q = q.add_argument(&id("a0"), Polarity::Attack, NewArgument::new("x", 0.25, Provenance::UserAdded)).unwrap().0;
        assert_eq!(
            String::from_utf8(to_json(&q)).unwrap(),
            r#"{"version":1,"root":"a0","arguments":[{"id":"a0","text":"c","base_score":0.5,"provenance":"claim"},{"id":"a1","text":"x","base_score":0.25,"provenance":"user-added"}],"edges":[{"source":"a1","target":"a0","polarity":"attack"}]}"#
        );
    }

    #[test]
    fn field_order_in_input_does_not_matter() {
        let a = br#"{"edges":[],"arguments":[{"provenance":"claim","base_score":0.5,"text":"c","id":"a0"}],"root":"a0","version":1}"#;
        let q = from_json(a).unwrap();
        assert_eq!(q.len(), 1);
    }

    #[test]
    fn string_score_is_a_schema_violation() {
        let bad = br#"{"version":1,"root":"a0","arguments":[{"id":"a0","text":"c","base_score":"high","provenance":"claim"}],"edges":[]}"#;
        assert!(matches!(from_json(bad), Err(FormatError::Schema(_))));
    }

    #[test]
    fn out_of_range_and_missing_fields_are_schema_violations() {
        let bad = br#"{"version":1,"root":"a0","arguments":[{"id":"a0","text":"c","base_score":1.5,"provenance":"claim"}],"edges":[]}"#;
        assert_eq!(from_json(bad).unwrap_err().code(), "schema-violation");
        let missing = br#"{"version":1,"root":"a0","arguments":[],"edges":[]}"#;
        assert_eq!(from_json(missing).unwrap_err().code(), "invariant-violation");
        let no_version = br#"{"root":"a0","arguments":[],"edges":[]}"#;
        assert_eq!(from_json(no_version).unwrap_err().code(), "schema-violation");
        let v2 = br#"{"version":2,"root":"a0","arguments":[],"edges":[]}"#;
        assert_eq!(from_json(v2).unwrap_err().code(), "schema-violation");
        let bad_pol = br#"{"version":1,"root":"a0","arguments":[{"id":"a0","text":"c","base_score":0.5,"provenance":"claim"},{"id":"a1","text":"x","base_score":0.5,"provenance":"user-added"}],"edges":[{"source":"a1","target":"a0","polarity":"undercut"}]}"#;
        assert_eq!(from_json(bad_pol).unwrap_err().code(), "schema-violation");
    }

    #[test]
    fn malformed_json() {
        assert_eq!(from_json(b"{not json").unwrap_err().code(), "malformed-json");
    }

    #[test]
    fn two_cycle_is_an_invariant_violation() {
        let cyc = br#"{"version":1,"root":"a0","arguments":[{"id":"a0","text":"c","base_score":0.5,"provenance":"claim"},{"id":"a1","text":"x","base_score":0.5,"provenance":"user-added"}],"edges":[{"source":"a1","target":"a0","polarity":"attack"},{"source":"a0","target":"a1","polarity":"attack"}]}"#;
        match from_json(cyc) {
            Err(FormatError::Invariant(report)) => assert!(report.has(ViolationKind::NotATree)),
            other => panic!("expected invariant violation, got {other:?}"),
        }
        let self_loop = br#"{"version":1,"root":"a0","arguments":[{"id":"a0","text":"c","base_score":0.5,"provenance":"claim"}],"edges":[{"source":"a0","target":"a0","polarity":"attack"}]}"#;
        assert_eq!(from_json(self_loop).unwrap_err().code(), "invariant-violation");
    }

    #[test]
    fn strength_map_round_trip_and_layout() {
        let q = seven();
        let s = evaluate(&q, Semantics::DfQuad).unwrap();
        let bytes = strengths_to_json(&s);
        let text = String::from_utf8(bytes.clone()).unwrap();
        assert!(text.starts_with(r#"{"semantics":"df-quad","strengths":{"a0":"#));
        let back = strengths_from_json(&bytes).unwrap();
        assert_eq!(back, s);
    }

    #[test]
    fn report_json_lists_codes() {
        let cyc = br#"{"version":1,"root":"a0","arguments":[{"id":"a0","text":"c","base_score":0.5,"provenance":"claim"},{"id":"a1","text":"x","base_score":0.5,"provenance":"user-added"}],"edges":[]}"#;
        let Err(FormatError::Invariant(r)) = from_json(cyc) else { panic!() };
        assert_eq!(report_json(&r)[0]["code"], "not-a-tree");
    }
}
