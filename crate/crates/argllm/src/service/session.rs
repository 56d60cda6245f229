use argllm_core::semantics::evaluate;
use argllm_core::{Qbaf, Semantics, StrengthMap};
use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use crate::builder::{check_shape, GenerationConfig, DEFAULT_CONTEXT_CHARS};
use crate::format::{self, QbafDoc, StrengthsJson};
use crate::gateway::BackendConfig;
use crate::ingest::Document;

/// Root strengths above this read as "accept", below as "reject".
pub const VERDICT_THRESHOLD: f64 = 0.5;

/// Documents one session may hold.
pub const MAX_DOCUMENTS: usize = 5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Settings {
    pub semantics: Semantics,
    pub depth: u8,
    pub breadth: u8,
    pub backend: BackendConfig,
}

impl Settings {
    /// DF-QuAD, depth 2, breadth 1.
    pub fn with_backend(backend: BackendConfig) -> Self {
        Settings { semantics: Semantics::DfQuad, depth: 2, breadth: 1, backend }
    }

    pub fn generation(&self) -> GenerationConfig {
        GenerationConfig {
            semantics: self.semantics,
            depth: self.depth,
            breadth: self.breadth,
            backend: self.backend.clone(),
            document_ids: Vec::new(),
            context_chars: DEFAULT_CONTEXT_CHARS,
        }
    }

    pub fn validate(&self) -> Result<(), crate::builder::BuildError> {
        check_shape(self.depth, self.breadth)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ChatRole {
    User,
    Assistant,
    System,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatEntry {
    pub role: ChatRole,
    pub text: String,
    pub at: DateTime<Utc>,
    /// Set on the marker added when a document is attached.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub document_id: Option<String>,
}

impl ChatEntry {
    pub fn new(role: ChatRole, text: impl Into<String>) -> Self {
        ChatEntry { role, text: text.into(), at: Utc::now(), document_id: None }
    }
}

/// Document metadata as exposed to clients and stored in snapshots. The
/// markdown lives in a separate file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DocumentMeta {
    pub id: String,
    pub filename: String,
    pub page_count: usize,
    pub byte_size: usize,
    pub uploaded_at: DateTime<Utc>,
    pub extraction_empty: bool,
}

impl From<&Document> for DocumentMeta {
    fn from(d: &Document) -> Self {
        DocumentMeta {
            id: d.id.clone(),
            filename: d.filename.clone(),
            page_count: d.page_count,
            byte_size: d.byte_size,
            uploaded_at: d.uploaded_at,
            extraction_empty: d.extraction_empty,
        }
    }
}

impl DocumentMeta {
    pub fn with_markdown(self, markdown: String) -> Document {
        Document {
            id: self.id,
            filename: self.filename,
            markdown,
            page_count: self.page_count,
            byte_size: self.byte_size,
            uploaded_at: self.uploaded_at,
            extraction_empty: self.extraction_empty,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Accept,
    Reject,
    Undecided,
}

impl Verdict {
    pub fn of(strength: f64) -> Self {
        if strength > VERDICT_THRESHOLD {
            Verdict::Accept
        } else if strength < VERDICT_THRESHOLD {
            Verdict::Reject
        } else {
            Verdict::Undecided
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerdictInfo {
    pub root: String,
    pub strength: f64,
    pub threshold: f64,
    pub verdict: Verdict,
}

/// One debate: settings, the current tree with its strengths, grounding
/// documents and the chat transcript.
#[derive(Debug, Clone, PartialEq)]
pub struct Session {
    pub id: String,
    pub created_at: DateTime<Utc>,
    pub revision: u64,
    pub settings: Settings,
    qbaf: Option<Qbaf>,
    strengths: Option<StrengthMap>,
    pub documents: Vec<Document>,
    pub chat: Vec<ChatEntry>,
}

impl Session {
    pub fn new(id: String, settings: Settings) -> Self {
        Session {
            id,
            created_at: Utc::now(),
            revision: 0,
            settings,
            qbaf: None,
            strengths: None,
            documents: Vec::new(),
            chat: Vec::new(),
        }
    }

    pub fn qbaf(&self) -> Option<&Qbaf> {
        self.qbaf.as_ref()
    }

    pub fn strengths(&self) -> Option<&StrengthMap> {
        self.strengths.as_ref()
    }

    pub fn root_strength(&self) -> Option<f64> {
        let qbaf = self.qbaf.as_ref()?;
        self.strengths.as_ref()?.get(qbaf.root())
    }

    /// Replaces the tree and recomputes strengths under the current
    /// semantics.
    pub fn set_qbaf(&mut self, qbaf: Option<Qbaf>) -> Result<(), argllm_core::SemanticsError> {
        self.strengths = qbaf.as_ref().map(|q| evaluate(q, self.settings.semantics)).transpose()?;
        self.qbaf = qbaf;
        Ok(())
    }

    pub fn recompute(&mut self) -> Result<(), argllm_core::SemanticsError> {
        let qbaf = self.qbaf.take();
        self.set_qbaf(qbaf)
    }

    pub fn verdict(&self) -> Option<VerdictInfo> {
        let qbaf = self.qbaf.as_ref()?;
        let strength = self.root_strength()?;
        Some(VerdictInfo {
            root: qbaf.root().to_string(),
            strength,
            threshold: VERDICT_THRESHOLD,
            verdict: Verdict::of(strength),
        })
    }

    /// Wire form. `redact` hides the API key.
    pub fn doc(&self, redact: bool) -> SessionDoc {
        let mut settings = self.settings.clone();
        if redact {
            settings.backend = settings.backend.redacted();
        }
        SessionDoc {
            id: self.id.clone(),
            created_at: self.created_at,
            revision: self.revision,
            settings,
            qbaf: self.qbaf.as_ref().map(QbafDoc::from),
            strengths: self.strengths.as_ref().map(|s| serde_json::to_value(StrengthsJson(s)).expect("serialisable")),
            verdict: self.verdict(),
            documents: self.documents.iter().map(DocumentMeta::from).collect(),
            chat: self.chat.clone(),
        }
    }

    pub fn view(&self) -> serde_json::Value {
        serde_json::to_value(self.doc(true)).expect("sessions always serialise")
    }

    /// Canonical snapshot bytes, key included.
    pub fn snapshot(&self) -> Vec<u8> {
        serde_json::to_vec(&self.doc(false)).expect("sessions always serialise")
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SessionDoc {
    pub id: String,
    pub created_at: DateTime<Utc>,
    pub revision: u64,
    pub settings: Settings,
    pub qbaf: Option<QbafDoc>,
    pub strengths: Option<serde_json::Value>,
    pub verdict: Option<VerdictInfo>,
    pub documents: Vec<DocumentMeta>,
    pub chat: Vec<ChatEntry>,
}

#[derive(Debug, thiserror::Error)]
pub enum SnapshotError {
    #[error("malformed snapshot: {0}")]
    Malformed(#[from] serde_json::Error),
    #[error("invalid QBAF in snapshot: {0}")]
    Qbaf(#[from] format::FormatError),
    #[error("cannot evaluate snapshot: {0}")]
    Semantics(#[from] argllm_core::SemanticsError),
    #[error("stored strengths differ from a fresh evaluation")]
    StaleStrengths,
}

impl SessionDoc {
    /// Rebuilds a session. Strengths are recomputed and must match the
    /// stored ones; `markdown` supplies each document's text by id.
    pub fn into_session(self, mut markdown: impl FnMut(&str) -> String) -> Result<Session, SnapshotError> {
        let qbaf = self.qbaf.map(QbafDoc::into_qbaf).transpose()?;
        let mut session = Session {
            id: self.id,
            created_at: self.created_at,
            revision: self.revision,
            settings: self.settings,
            qbaf: None,
            strengths: None,
            documents: self
                .documents
                .into_iter()
                .map(|m| {
                    let text = markdown(&m.id);
                    m.with_markdown(text)
                })
                .collect(),
            chat: self.chat,
        };
        session.set_qbaf(qbaf)?;
        let fresh = session.strengths.as_ref().map(|s| serde_json::to_value(StrengthsJson(s)).expect("serialisable"));
        if fresh != self.strengths {
            return Err(SnapshotError::StaleStrengths);
        }
        Ok(session)
    }
}
