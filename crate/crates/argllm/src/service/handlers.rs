use axum::body::Bytes;
use axum::extract::{FromRequest, Multipart, Path, Query, Request, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::Json;
use futures::future::try_join_all;
use serde::de::DeserializeOwned;
use serde::Deserialize;
use serde_json::{json, Value};

use argllm_core::{ArgumentId, NewArgument, Polarity, Provenance, Qbaf, QbafError, ScoreOrigin, Semantics, MAX_DEPTH};

use super::error::ApiError;
use super::session::{ChatEntry, ChatRole, DocumentMeta, Session, Settings, Verdict, MAX_DOCUMENTS};
use super::{AppState, SessionHandle};
use crate::builder::{build_qbaf, documents_context, expand_argument, DEFAULT_CONTEXT_CHARS};
use crate::gateway::{BackendConfig, ElicitedScore, Gateway, SkippedContribution};
use crate::ingest::{Document, IngestError};

type ApiResult<T> = Result<T, ApiError>;

fn parse_body<T: DeserializeOwned>(body: &Bytes) -> ApiResult<T> {
    serde_json::from_slice(body).map_err(|e| ApiError::invalid_payload(format!("invalid request body: {e}")))
}

fn gateway_for(settings: &Settings) -> ApiResult<Gateway> {
    Ok(Gateway::from_config(&settings.backend)?)
}

fn context_of(session: &Session) -> Option<String> {
    let docs: Vec<&Document> = session.documents.iter().collect();
    documents_context(&docs, DEFAULT_CONTEXT_CHARS)
}

fn semantics_error(err: argllm_core::SemanticsError) -> ApiError {
    ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "evaluation-failure", err.to_string())
}

fn origin(score: &ElicitedScore) -> ScoreOrigin {
    if score.defaulted {
        ScoreOrigin::Defaulted
    } else {
        ScoreOrigin::Elicited
    }
}

async fn read(handle: &SessionHandle) -> Session {
    handle.lock().await.clone()
}

/// Applies `f` to a copy of the session and commits it as the next
/// revision. With `expected` set, fails with a conflict when another
/// mutation landed first.
async fn mutate<T>(
    state: &AppState,
    handle: &SessionHandle,
    expected: Option<u64>,
    f: impl FnOnce(&mut Session) -> ApiResult<T>,
) -> ApiResult<(Session, T)> {
    let mut guard = handle.lock().await;
    if expected.is_some_and(|rev| rev != guard.revision) {
        return Err(ApiError::conflict());
    }
    let mut next = guard.clone();
    let out = f(&mut next)?;
    next.revision = guard.revision + 1;
    state.store().save(&next).map_err(ApiError::storage)?;
    *guard = next.clone();
    Ok((next, out))
}

pub async fn health() -> &'static str {
    "ok"
}

pub async fn create_session(State(state): State<AppState>) -> ApiResult<Response> {
    let session = Session::new(uuid::Uuid::new_v4().simple().to_string(), Settings::with_backend(state.default_backend().clone()));
    state.store().save(&session).map_err(ApiError::storage)?;
    let view = session.view();
    state.insert(session);
    Ok((StatusCode::CREATED, Json(view)).into_response())
}

pub async fn get_session(State(state): State<AppState>, Path(id): Path<String>) -> ApiResult<Json<Value>> {
    let handle = state.handle(&id)?;
    let view = handle.lock().await.view();
    Ok(Json(view))
}

pub async fn delete_session(State(state): State<AppState>, Path(id): Path<String>) -> ApiResult<StatusCode> {
    let handle = state.remove(&id).ok_or_else(|| ApiError::unknown_session(&id))?;
    // wait for any in-flight mutation before removing its files
    let _guard = handle.lock().await;
    state.store().delete(&id).map_err(ApiError::storage)?;
    Ok(StatusCode::NO_CONTENT)
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct SettingsUpdate {
    semantics: Option<String>,
    depth: Option<i64>,
    breadth: Option<i64>,
    backend: Option<Value>,
}

fn merge_backend(current: &BackendConfig, patch: Value) -> ApiResult<BackendConfig> {
    let Value::Object(fields) = patch else {
        return Err(ApiError::invalid_settings("backend", "backend must be an object"));
    };
    let mut merged = serde_json::to_value(current).expect("backend configs serialise");
    for (k, v) in fields {
        merged[k] = v;
    }
    let mut backend: BackendConfig =
        serde_json::from_value(merged).map_err(|e| ApiError::invalid_settings("backend", e.to_string()))?;
    // clients echo the redacted key back; keep the real one
    if backend.api_key == current.redacted().api_key && !current.api_key.is_empty() {
        backend.api_key = current.api_key.clone();
    }
    if !(backend.temperature >= 0.0) {
        return Err(ApiError::invalid_settings("backend.temperature", "temperature must be non-negative"));
    }
    if backend.max_concurrency == 0 {
        return Err(ApiError::invalid_settings("backend.max_concurrency", "max_concurrency must be at least 1"));
    }
    if backend.timeout_ms == 0 {
        return Err(ApiError::invalid_settings("backend.timeout_ms", "timeout_ms must be positive"));
    }
    Ok(backend)
}

fn small_int(field: &str, value: i64, range: std::ops::RangeInclusive<i64>) -> ApiResult<u8> {
    if range.contains(&value) {
        Ok(value as u8)
    } else {
        Err(ApiError::invalid_settings(
            field,
            format!("{field} must be between {} and {}, got {value}", range.start(), range.end()),
        ))
    }
}

pub async fn update_settings(
    State(state): State<AppState>,
    Path(id): Path<String>,
    body: Bytes,
) -> ApiResult<Json<Value>> {
    let update: SettingsUpdate = parse_body(&body)?;
    let handle = state.handle(&id)?;
    let (session, ()) = mutate(&state, &handle, None, |s| {
        let mut settings = s.settings.clone();
        if let Some(name) = update.semantics {
            settings.semantics =
                name.parse::<Semantics>().map_err(|e| ApiError::invalid_settings("semantics", e.to_string()))?;
        }
        if let Some(depth) = update.depth {
            settings.depth = small_int("depth", depth, 1..=MAX_DEPTH as i64)?;
        }
        if let Some(breadth) = update.breadth {
            settings.breadth = small_int("breadth", breadth, 1..=4)?;
        }
        if let Some(patch) = update.backend {
            settings.backend = merge_backend(&settings.backend, patch)?;
        }
        let changed = settings.semantics != s.settings.semantics;
        s.settings = settings;
        if changed {
            s.recompute().map_err(semantics_error)?;
        }
        Ok(())
    })
    .await?;
    Ok(Json(session.view()))
}

fn summary(qbaf: &Qbaf, session: &Session) -> String {
    let verdict = session.verdict().map_or_else(String::new, |v| {
        let word = match v.verdict {
            Verdict::Accept => "accept",
            Verdict::Reject => "reject",
            Verdict::Undecided => "undecided",
        };
        format!(" Final confidence in the claim: {:.2} ({word}).", v.strength)
    });
    format!(
        "Built an argument tree with {} arguments ({} attacks, {} supports).{verdict}",
        qbaf.len(),
        qbaf.count_edges(Polarity::Attack),
        qbaf.count_edges(Polarity::Support)
    )
}

async fn run_claim(state: &AppState, handle: &SessionHandle, text: &str) -> ApiResult<Session> {
    if text.trim().is_empty() {
        return Err(crate::builder::BuildError::EmptyClaim.into());
    }
    let snapshot = read(handle).await;
    let settings = snapshot.settings.clone();
    settings.validate()?;
    let gateway = gateway_for(&settings)?;
    let qbaf = build_qbaf(&gateway, text, &settings.generation(), &snapshot.documents).await?;
    let (session, ()) = mutate(state, handle, Some(snapshot.revision), |s| {
        s.set_qbaf(Some(qbaf.clone())).map_err(semantics_error)?;
        s.chat.push(ChatEntry::new(ChatRole::User, text.trim()));
        let note = summary(&qbaf, s);
        s.chat.push(ChatEntry::new(ChatRole::Assistant, note));
        Ok(())
    })
    .await?;
    Ok(session)
}

#[derive(Deserialize)]
struct ClaimBody {
    text: String,
}

pub async fn submit_claim(State(state): State<AppState>, Path(id): Path<String>, body: Bytes) -> ApiResult<Json<Value>> {
    let ClaimBody { text } = parse_body(&body)?;
    let handle = state.handle(&id)?;
    Ok(Json(run_claim(&state, &handle, &text).await?.view()))
}

#[derive(Deserialize)]
struct ScoreBody {
    base_score: f64,
}

fn argument_id(raw: &str, qbaf: &Qbaf) -> ApiResult<ArgumentId> {
    ArgumentId::new(raw).ok().filter(|id| qbaf.contains(id)).ok_or_else(|| {
        ApiError::new(StatusCode::NOT_FOUND, "unknown-argument", format!("no argument {raw}")).field("argument")
    })
}

pub async fn patch_base_score(
    State(state): State<AppState>,
    Path((id, aid)): Path<(String, String)>,
    body: Bytes,
) -> ApiResult<Json<Value>> {
    let ScoreBody { base_score } = parse_body(&body)?;
    let handle = state.handle(&id)?;
    let (session, (old, aid)) = mutate(&state, &handle, None, |s| {
        let qbaf = s.qbaf().ok_or_else(ApiError::no_qbaf)?;
        let aid = argument_id(&aid, qbaf)?;
        let next = qbaf.set_base_score(&aid, base_score)?;
        let old = s.root_strength();
        s.set_qbaf(Some(next)).map_err(semantics_error)?;
        Ok((old, aid))
    })
    .await?;
    let new = session.root_strength();
    Ok(Json(json!({
        "session": session.view(),
        "argument": aid.as_str(),
        "root_shift": {
            "old": old,
            "new": new,
            "verdict_before": old.map(Verdict::of),
            "verdict": new.map(Verdict::of),
        },
    })))
}

#[derive(Deserialize)]
#[serde(rename_all = "lowercase")]
enum AddMode {
    Manual,
    Generate,
}

#[derive(Deserialize)]
struct AddBody {
    parent: String,
    polarity: String,
    mode: AddMode,
    text: Option<String>,
    base_score: Option<f64>,
}

fn added_id(before: &Qbaf, after: &Qbaf) -> Option<ArgumentId> {
    after.arguments().map(|a| a.id()).find(|id| !before.contains(id)).cloned()
}

pub async fn add_argument(State(state): State<AppState>, Path(id): Path<String>, body: Bytes) -> ApiResult<Json<Value>> {
    let req: AddBody = parse_body(&body)?;
    let handle = state.handle(&id)?;
    let snapshot = read(&handle).await;
    let qbaf = snapshot.qbaf().ok_or_else(ApiError::no_qbaf)?.clone();
    let polarity: Polarity = req
        .polarity
        .parse()
        .map_err(|_| ApiError::invalid_payload("polarity must be attack or support").field("polarity"))?;
    let parent = ArgumentId::new(req.parent.as_str()).ok().filter(|p| qbaf.contains(p)).ok_or_else(|| {
        ApiError::new(StatusCode::NOT_FOUND, "unknown-parent", format!("no argument {}", req.parent)).field("parent")
    })?;
    let depth = qbaf.depth_of(&parent)?;
    if depth >= MAX_DEPTH {
        return Err(QbafError::DepthLimitExceeded { parent, depth }.into());
    }

    let (session, added) = match req.mode {
        AddMode::Manual => {
            let text = req.text.as_deref().map(str::trim).unwrap_or("");
            // validates text and score before any model call
            argllm_core::Argument::new(ArgumentId::numbered(0), text, req.base_score.unwrap_or(0.5), Provenance::UserAdded)?;
            let (new, expected) = match req.base_score {
                Some(score) => (NewArgument::new(text, score, Provenance::UserAdded), None),
                None => {
                    let gateway = gateway_for(&snapshot.settings)?;
                    let parent_text = qbaf.get(&parent).map(|a| a.text().to_owned());
                    let score = gateway
                        .elicit_base_score(text, parent_text.as_deref(), context_of(&snapshot).as_deref())
                        .await?;
                    let new = NewArgument::new(text, score.value, Provenance::UserAdded).score_origin(origin(&score));
                    (new, Some(snapshot.revision))
                }
            };
            mutate(&state, &handle, expected, |s| {
                let current = s.qbaf().ok_or_else(ApiError::no_qbaf)?;
                let (next, added) = current.add_argument(&parent, polarity, new)?;
                s.set_qbaf(Some(next)).map_err(semantics_error)?;
                Ok(Some(added))
            })
            .await?
        }
        AddMode::Generate => {
            let gateway = gateway_for(&snapshot.settings)?;
            let generation = snapshot.settings.generation();
            let next = expand_argument(&gateway, &qbaf, &parent, polarity, &generation, &snapshot.documents).await?;
            let added = added_id(&qbaf, &next);
            mutate(&state, &handle, Some(snapshot.revision), |s| {
                s.set_qbaf(Some(next)).map_err(semantics_error)?;
                Ok(added)
            })
            .await?
        }
    };
    Ok(Json(json!({
        "session": session.view(),
        "added": added.as_ref().map(|a| a.as_str()),
    })))
}

#[derive(Deserialize)]
pub struct UploadQuery {
    pub filename: Option<String>,
}

async fn upload_payload(req: Request, query: &UploadQuery) -> ApiResult<(String, Vec<u8>)> {
    let content_type = req
        .headers()
        .get(header::CONTENT_TYPE)
        .and_then(|v| v.to_str().ok())
        .unwrap_or("")
        .to_ascii_lowercase();
    if content_type.starts_with("multipart/form-data") {
        let mut multipart =
            Multipart::from_request(req, &()).await.map_err(|e| ApiError::invalid_payload(e.body_text()))?;
        while let Some(field) =
            multipart.next_field().await.map_err(|e| ApiError::invalid_payload(e.body_text()))?
        {
            if field.name() != Some("file") && field.file_name().is_none() {
                continue;
            }
            let name = field.file_name().unwrap_or("document.pdf").to_owned();
            let bytes = field.bytes().await.map_err(|e| ApiError::invalid_payload(e.body_text()))?;
            return Ok((name, bytes.to_vec()));
        }
        Err(ApiError::invalid_payload("multipart body has no file field").field("file"))
    } else if content_type.starts_with("application/pdf") || content_type.starts_with("application/octet-stream") {
        let bytes = Bytes::from_request(req, &()).await.map_err(|e| ApiError::invalid_payload(e.body_text()))?;
        Ok((query.filename.clone().unwrap_or_else(|| "document.pdf".into()), bytes.to_vec()))
    } else {
        Err(IngestError::NotAPdf.into())
    }
}

fn document_limit() -> ApiError {
    ApiError::new(
        StatusCode::CONFLICT,
        "document-limit",
        format!("a session holds at most {MAX_DOCUMENTS} documents"),
    )
}

pub async fn upload_document(
    State(state): State<AppState>,
    Path(id): Path<String>,
    Query(query): Query<UploadQuery>,
    req: Request,
) -> ApiResult<Response> {
    let handle = state.handle(&id)?;
    if handle.lock().await.documents.len() >= MAX_DOCUMENTS {
        return Err(document_limit());
    }
    let (filename, bytes) = upload_payload(req, &query).await?;
    let (document, bytes) = tokio::task::spawn_blocking(move || Document::ingest(&filename, &bytes).map(|d| (d, bytes)))
        .await
        .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "ingest-failure", e.to_string()))??;
    let meta = DocumentMeta::from(&document);
    let store = state.store().clone();
    let (session, ()) = mutate(&state, &handle, None, |s| {
        if s.documents.len() >= MAX_DOCUMENTS {
            return Err(document_limit());
        }
        store.save_document(&s.id, &document.id, &bytes, &document.markdown).map_err(ApiError::storage)?;
        let mut marker = ChatEntry::new(
            ChatRole::System,
            format!(
                "Document attached: {} ({} page{}){}",
                document.filename,
                document.page_count,
                if document.page_count == 1 { "" } else { "s" },
                if document.extraction_empty { ", no extractable text" } else { "" }
            ),
        );
        marker.document_id = Some(document.id.clone());
        s.chat.push(marker);
        s.documents.push(document);
        Ok(())
    })
    .await?;
    Ok((StatusCode::CREATED, Json(json!({ "session": session.view(), "document": meta }))).into_response())
}

#[derive(Deserialize)]
struct ChatBody {
    message: String,
}

pub async fn post_chat(State(state): State<AppState>, Path(id): Path<String>, body: Bytes) -> ApiResult<Json<Value>> {
    let ChatBody { message } = parse_body(&body)?;
    let message = message.trim();
    if message.is_empty() {
        return Err(ApiError::invalid_payload("the message must not be empty").field("message"));
    }
    let handle = state.handle(&id)?;
    let snapshot = read(&handle).await;
    let (Some(qbaf), Some(strengths)) = (snapshot.qbaf(), snapshot.strengths()) else {
        let session = run_claim(&state, &handle, message).await?;
        let reply = session.chat.last().map(|e| e.text.clone()).unwrap_or_default();
        return Ok(Json(json!({
            "session": session.view(),
            "reply": reply,
            "applied": [],
            "skipped": [],
        })));
    };

    let gateway = gateway_for(&snapshot.settings)?;
    let outcome = gateway.classify_chat_contribution(qbaf, strengths, message).await?;
    let context = context_of(&snapshot);
    let scores = try_join_all(outcome.contributions.iter().map(|c| {
        let parent_text = qbaf.get(&c.target).map(|a| a.text().to_owned());
        let gateway = gateway.clone();
        let context = context.clone();
        async move { gateway.elicit_base_score(&c.text, parent_text.as_deref(), context.as_deref()).await }
    }))
    .await?;

    let mut tree = qbaf.clone();
    let mut applied = Vec::new();
    let mut skipped: Vec<SkippedContribution> = outcome.skipped.clone();
    for (c, score) in outcome.contributions.iter().zip(&scores) {
        let new = NewArgument::new(&c.text, score.value, Provenance::ChatDerived).score_origin(origin(score));
        match tree.add_argument(&c.target, c.polarity, new) {
            Ok((next, new_id)) => {
                tree = next;
                applied.push(json!({
                    "id": new_id.as_str(),
                    "target": c.target.as_str(),
                    "polarity": c.polarity.as_str(),
                    "text": c.text,
                    "base_score": score.value,
                }));
            }
            Err(e) => skipped.push(SkippedContribution { target: c.target.to_string(), reason: e.code() }),
        }
    }

    let reply = outcome.reply.clone();
    let (session, ()) = mutate(&state, &handle, Some(snapshot.revision), |s| {
        if !applied.is_empty() {
            s.set_qbaf(Some(tree)).map_err(semantics_error)?;
        }
        s.chat.push(ChatEntry::new(ChatRole::User, message));
        s.chat.push(ChatEntry::new(ChatRole::Assistant, reply.clone()));
        Ok(())
    })
    .await?;
    Ok(Json(json!({
        "session": session.view(),
        "reply": reply,
        "applied": applied,
        "skipped": skipped,
    })))
}
