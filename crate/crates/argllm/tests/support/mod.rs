#![allow(dead_code)]

use std::collections::BTreeMap;

use argllm::core::semantics::evaluate;
use argllm::core::Semantics;
use argllm::format;
use argllm::gateway::{BackendConfig, ScriptRule};
use argllm::service::{self, AppState, ServiceConfig, Store};
use serde_json::{json, Value};

pub struct TestServer {
    pub base: String,
    pub state: AppState,
    pub client: reqwest::Client,
    task: tokio::task::JoinHandle<()>,
}

impl Drop for TestServer {
    fn drop(&mut self) {
        self.task.abort();
    }
}

pub async fn spawn(config: ServiceConfig) -> TestServer {
    let (state, app) = service::app(&config).expect("store loads");
    let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await.unwrap();
    let addr = listener.local_addr().unwrap();
    let task = tokio::spawn(async move {
        axum::serve(listener, app).await.unwrap();
    });
    TestServer { base: format!("http://{addr}"), state, client: reqwest::Client::new(), task }
}

pub fn mock_config(store: Store, seed: u64) -> ServiceConfig {
    ServiceConfig { store, default_backend: BackendConfig::mock(seed), ..Default::default() }
}

pub async fn mock_server(seed: u64) -> TestServer {
    spawn(mock_config(Store::in_memory(), seed)).await
}

impl TestServer {
    pub fn url(&self, path: &str) -> String {
        format!("{}{path}", self.base)
    }

    pub async fn send(&self, method: reqwest::Method, path: &str, body: Option<Value>) -> (u16, Value) {
        let mut req = self.client.request(method, self.url(path));
        if let Some(b) = body {
            req = req.json(&b);
        }
        let resp = req.send().await.unwrap();
        let status = resp.status().as_u16();
        let text = resp.text().await.unwrap();
        (status, serde_json::from_str(&text).unwrap_or(Value::String(text)))
    }

    pub async fn get(&self, path: &str) -> (u16, Value) {
        self.send(reqwest::Method::GET, path, None).await
    }

    pub async fn post(&self, path: &str, body: Value) -> (u16, Value) {
        self.send(reqwest::Method::POST, path, Some(body)).await
    }

    pub async fn put(&self, path: &str, body: Value) -> (u16, Value) {
        self.send(reqwest::Method::PUT, path, Some(body)).await
    }

    pub async fn patch(&self, path: &str, body: Value) -> (u16, Value) {
        self.send(reqwest::Method::PATCH, path, Some(body)).await
    }

    pub async fn delete(&self, path: &str) -> (u16, Value) {
        self.send(reqwest::Method::DELETE, path, None).await
    }

    pub async fn create(&self) -> String {
        let (status, body) = self.send(reqwest::Method::POST, "/sessions", None).await;
        assert_eq!(status, 201, "{body}");
        body["id"].as_str().unwrap().to_owned()
    }

    pub async fn upload(&self, sid: &str, filename: &str, content_type: &str, bytes: &[u8]) -> (u16, Value) {
        let (ct, body) = multipart("file", filename, content_type, bytes);
        let resp = self
            .client
            .post(self.url(&format!("/sessions/{sid}/documents")))
            .header("content-type", ct)
            .body(body)
            .send()
            .await
            .unwrap();
        let status = resp.status().as_u16();
        (status, resp.json().await.unwrap_or(Value::Null))
    }

    /// Sets the session's mock backend, optionally with script rules.
    pub async fn script(&self, sid: &str, seed: u64, rules: &[(&str, &str)]) {
        let rules: Vec<ScriptRule> =
            rules.iter().map(|(c, r)| ScriptRule { contains: (*c).into(), reply: (*r).into() }).collect();
        let (status, body) = self
            .put(
                &format!("/sessions/{sid}/settings"),
                json!({ "backend": { "kind": "mock", "mock_seed": seed, "mock_script": rules } }),
            )
            .await;
        assert_eq!(status, 200, "{body}");
    }
}

/// Single-file multipart/form-data body.
pub fn multipart(field: &str, filename: &str, content_type: &str, bytes: &[u8]) -> (String, Vec<u8>) {
    let boundary = "----argllm-test-boundary-7d1f";
    let mut body = Vec::new();
    body.extend_from_slice(
        format!(
            "--{boundary}\r\nContent-Disposition: form-data; name=\"{field}\"; filename=\"{filename}\"\r\nContent-Type: {content_type}\r\n\r\n"
        )
        .as_bytes(),
    );
    body.extend_from_slice(bytes);
    body.extend_from_slice(format!("\r\n--{boundary}--\r\n").as_bytes());
    (format!("multipart/form-data; boundary={boundary}"), body)
}

/// Strengths as listed in a session view.
pub fn strengths(view: &Value) -> BTreeMap<String, f64> {
    view["strengths"]["strengths"]
        .as_object()
        .map(|m| m.iter().map(|(k, v)| (k.clone(), v.as_f64().unwrap())).collect())
        .unwrap_or_default()
}

pub fn root_strength(view: &Value) -> f64 {
    let root = view["qbaf"]["root"].as_str().unwrap();
    strengths(view)[root]
}

/// DF-QuAD evaluated directly on the wire JSON, independent of the crate's
/// evaluator.
pub fn oracle_dfquad(qbaf: &Value) -> BTreeMap<String, f64> {
    let mut tau = BTreeMap::new();
    for a in qbaf["arguments"].as_array().unwrap() {
        tau.insert(a["id"].as_str().unwrap().to_owned(), a["base_score"].as_f64().unwrap());
    }
    let edges: Vec<(String, String, String)> = qbaf["edges"]
        .as_array()
        .unwrap()
        .iter()
        .map(|e| {
            (
                e["source"].as_str().unwrap().to_owned(),
                e["target"].as_str().unwrap().to_owned(),
                e["polarity"].as_str().unwrap().to_owned(),
            )
        })
        .collect();
    fn strength(
        id: &str,
        tau: &BTreeMap<String, f64>,
        edges: &[(String, String, String)],
        out: &mut BTreeMap<String, f64>,
    ) -> f64 {
        let mut keep_att = 1.0;
        let mut keep_sup = 1.0;
        let mut any = false;
        for (s, t, p) in edges {
            if t == id {
                any = true;
                let v = strength(s, tau, edges, out);
                if p == "attack" {
                    keep_att *= 1.0 - v;
                } else {
                    keep_sup *= 1.0 - v;
                }
            }
        }
        let t = tau[id];
        let v = if !any {
            t
        } else {
            let (va, vs) = (1.0 - keep_att, 1.0 - keep_sup);
            if va >= vs {
                t - t * (va - vs)
            } else {
                t + (1.0 - t) * (vs - va)
            }
        };
        out.insert(id.to_owned(), v);
        v
    }
    let mut out = BTreeMap::new();
    strength(qbaf["root"].as_str().unwrap(), &tau, &edges, &mut out);
    out
}

/// Asserts that a session view's strengths equal a fresh evaluation of
/// its tree, bit for bit.
pub fn assert_consistent(view: &Value) {
    let qbaf = format::from_json(view["qbaf"].to_string().as_bytes()).unwrap();
    let semantics: Semantics = view["settings"]["semantics"].as_str().unwrap().parse().unwrap();
    let fresh = evaluate(&qbaf, semantics).unwrap();
    let shown = strengths(view);
    assert_eq!(shown.len(), fresh.len());
    for (id, v) in fresh.iter() {
        assert_eq!(shown[id.as_str()].to_bits(), v.to_bits(), "{id}");
    }
}

/// Sets every base score of a populated session, one PATCH each.
pub async fn set_scores(server: &TestServer, sid: &str, scores: &[(&str, f64)]) -> Value {
    let mut last = Value::Null;
    for (id, v) in scores {
        let (status, body) = server.patch(&format!("/sessions/{sid}/arguments/{id}"), json!({ "base_score": v })).await;
        assert_eq!(status, 200, "{body}");
        last = body;
    }
    last
}
