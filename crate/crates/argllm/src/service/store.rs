use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use super::session::{Session, SessionDoc};

const SNAPSHOT_FILE: &str = "session.json";
const DOCUMENTS_DIR: &str = "documents";

/// File-backed session store.
///
/// Layout: `<dir>/<session id>/session.json` plus
/// `<dir>/<session id>/documents/<document id>.{pdf,md}`. Every write goes
/// to a temporary file in the target directory that is then renamed over
/// the destination. Without a directory the store keeps nothing.
#[derive(Debug, Clone, Default)]
pub struct Store {
    dir: Option<PathBuf>,
}

fn write_atomic(path: &Path, bytes: &[u8]) -> io::Result<()> {
    let parent = path.parent().expect("store paths have a parent");
    fs::create_dir_all(parent)?;
    let mut tmp = tempfile::NamedTempFile::new_in(parent)?;
    tmp.write_all(bytes)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| e.error)?;
    Ok(())
}

impl Store {
    pub fn in_memory() -> Self {
        Store { dir: None }
    }

    pub fn at(dir: impl Into<PathBuf>) -> io::Result<Self> {
        let dir = dir.into();
        fs::create_dir_all(&dir)?;
        Ok(Store { dir: Some(dir) })
    }

    pub fn dir(&self) -> Option<&Path> {
        self.dir.as_deref()
    }

    fn session_dir(&self, id: &str) -> Option<PathBuf> {
        self.dir.as_ref().map(|d| d.join(id))
    }

    pub fn snapshot_path(&self, id: &str) -> Option<PathBuf> {
        self.session_dir(id).map(|d| d.join(SNAPSHOT_FILE))
    }

    pub fn save(&self, session: &Session) -> io::Result<()> {
        match self.snapshot_path(&session.id) {
            Some(path) => write_atomic(&path, &session.snapshot()),
            None => Ok(()),
        }
    }

    pub fn save_document(&self, session_id: &str, document_id: &str, pdf: &[u8], markdown: &str) -> io::Result<()> {
        let Some(dir) = self.session_dir(session_id) else { return Ok(()) };
        let docs = dir.join(DOCUMENTS_DIR);
        write_atomic(&docs.join(format!("{document_id}.pdf")), pdf)?;
        write_atomic(&docs.join(format!("{document_id}.md")), markdown.as_bytes())
    }

    pub fn delete(&self, id: &str) -> io::Result<()> {
        match self.session_dir(id) {
            Some(dir) if dir.exists() => fs::remove_dir_all(dir),
            _ => Ok(()),
        }
    }

    /// Reads every stored session. Unreadable snapshots are skipped with a
    /// warning rather than failing startup.
    pub fn load_all(&self) -> io::Result<Vec<Session>> {
        let Some(dir) = &self.dir else { return Ok(Vec::new()) };
        let mut sessions = Vec::new();
        let mut entries: Vec<_> = fs::read_dir(dir)?.filter_map(Result::ok).map(|e| e.path()).collect();
        entries.sort();
        for path in entries {
            let snapshot = path.join(SNAPSHOT_FILE);
            if !snapshot.is_file() {
                continue;
            }
            match Self::load_one(&path, &snapshot) {
                Ok(s) => sessions.push(s),
                Err(e) => tracing::warn!(path = %snapshot.display(), error = %e, "skipping unreadable session"),
            }
        }
        Ok(sessions)
    }

    fn load_one(dir: &Path, snapshot: &Path) -> Result<Session, Box<dyn std::error::Error>> {
        let doc: SessionDoc = serde_json::from_slice(&fs::read(snapshot)?)?;
        let docs = dir.join(DOCUMENTS_DIR);
        let session =
            doc.into_session(|id| fs::read_to_string(docs.join(format!("{id}.md"))).unwrap_or_default())?;
        Ok(session)
    }
}
