use async_trait::async_trait;
use reqwest::header::{HeaderMap, HeaderValue, AUTHORIZATION, RETRY_AFTER};
use reqwest::StatusCode;
use serde::Serialize;
use serde_json::Value;

use super::{BackendConfig, ChatBackend, ChatMessage, GatewayError};

/// OpenAI-compatible `POST {endpoint}/chat/completions` client.
pub struct HttpBackend {
    client: reqwest::Client,
    url: String,
    model: String,
    temperature: f64,
}

#[derive(Serialize)]
struct CompletionRequest<'a> {
    model: &'a str,
    messages: &'a [ChatMessage],
    temperature: f64,
}

impl HttpBackend {
    pub fn new(config: &BackendConfig) -> Result<Self, GatewayError> {
        let key = config.resolved_api_key();
        let mut auth = HeaderValue::from_str(&format!("Bearer {}", key.trim()))
            .map_err(|_| GatewayError::Config("api_key contains characters not allowed in a header".into()))?;
        auth.set_sensitive(true);
        let mut headers = HeaderMap::new();
        headers.insert(AUTHORIZATION, auth);
        let client = reqwest::Client::builder()
            .default_headers(headers)
            .timeout(config.timeout())
            .build()
            .map_err(|e| GatewayError::Config(e.to_string()))?;
        Ok(HttpBackend {
            client,
            url: format!("{}/chat/completions", config.endpoint_url.trim_end_matches('/')),
            model: config.model.clone(),
            temperature: config.temperature,
        })
    }
}

fn transport_error(err: reqwest::Error) -> GatewayError {
    if err.is_timeout() {
        GatewayError::Timeout
    } else {
        // without_url keeps query strings out of error text
        GatewayError::Network(err.without_url().to_string())
    }
}

#[async_trait]
impl ChatBackend for HttpBackend {
    async fn complete(&self, messages: &[ChatMessage]) -> Result<String, GatewayError> {
        tracing::debug!(url = %self.url, model = %self.model, messages = messages.len(), "chat completion request");
        let body = CompletionRequest { model: &self.model, messages, temperature: self.temperature };
        let response = self.client.post(&self.url).json(&body).send().await.map_err(transport_error)?;
        let status = response.status();
        tracing::debug!(status = status.as_u16(), "chat completion response");
        match status {
            StatusCode::UNAUTHORIZED | StatusCode::FORBIDDEN => {
                return Err(GatewayError::Auth { status: status.as_u16() })
            }
            StatusCode::TOO_MANY_REQUESTS => {
                let retry_after_secs = response
                    .headers()
                    .get(RETRY_AFTER)
                    .and_then(|v| v.to_str().ok())
                    .and_then(|v| v.trim().parse().ok());
                return Err(GatewayError::RateLimited { retry_after_secs });
            }
            s if !s.is_success() => return Err(GatewayError::Status { status: s.as_u16() }),
            _ => {}
        }
        let value: Value = response.json().await.map_err(|e| {
            if e.is_timeout() {
                GatewayError::Timeout
            } else {
                GatewayError::MalformedResponse(e.without_url().to_string())
            }
        })?;
        value
            .pointer("/choices/0/message/content")
            .and_then(Value::as_str)
            .map(str::to_owned)
            .ok_or_else(|| GatewayError::MalformedResponse("missing choices[0].message.content".into()))
    }
}
