use serde_json::{json, Value};

use super::{ChatBackend, ChatRequest, EndpointConfig, LlmError};

/// POSTs to `{base_url}/chat/completions` and returns `choices[0].message.content`.
pub struct HttpBackend {
    agent: ureq::Agent,
    url: String,
    api_key: Option<String>,
}

impl HttpBackend {
    pub fn new(cfg: &EndpointConfig) -> Self {
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .timeout_global(Some(cfg.timeout()))
            .http_status_as_error(false)
            .build()
            .into();
        Self {
            agent,
            url: format!("{}/chat/completions", cfg.base_url.trim_end_matches('/')),
            api_key: cfg.api_key.clone(),
        }
    }

    pub fn url(&self) -> &str {
        &self.url
    }
}

pub(crate) fn request_body(model: &str, req: &ChatRequest) -> Value {
    let mut body = json!({
        "model": model,
        "messages": [
            {"role": "system", "content": req.system},
            {"role": "user", "content": req.user},
        ],
        "temperature": req.temperature,
        "max_tokens": req.max_tokens,
    });
    if let Some(seed) = req.seed {
        body["seed"] = json!(seed);
    }
    body
}

fn server_message(body: &str) -> String {
    serde_json::from_str::<Value>(body)
        .ok()
        .and_then(|v| v["error"]["message"].as_str().map(str::to_string))
        .unwrap_or_else(|| body.chars().take(500).collect())
}

pub(crate) fn extract_content(body: &str) -> Result<String, LlmError> {
    let v: Value = serde_json::from_str(body).map_err(|e| LlmError::Protocol(format!("invalid JSON: {e}")))?;
    v["choices"][0]["message"]["content"]
        .as_str()
        .map(str::to_string)
        .ok_or_else(|| LlmError::Protocol("missing choices[0].message.content".into()))
}

impl ChatBackend for HttpBackend {
    fn complete(&self, model: &str, req: &ChatRequest) -> Result<String, LlmError> {
        let body = request_body(model, req).to_string();
        let mut call = self.agent.post(&self.url).header("Content-Type", "application/json");
        if let Some(key) = &self.api_key {
            call = call.header("Authorization", &format!("Bearer {key}"));
        }
        let mut resp = call
            .send(body.as_str())
            .map_err(|e| LlmError::Transport(e.to_string()))?;
        let status = resp.status().as_u16();
        let text = resp
            .body_mut()
            .read_to_string()
            .map_err(|e| LlmError::Transport(e.to_string()))?;
        match status {
            200..=299 => extract_content(&text),
            400..=499 => Err(LlmError::Request {
                status,
                message: server_message(&text),
            }),
            _ => Err(LlmError::Server {
                status,
                message: server_message(&text),
            }),
        }
    }
}
