//! Live backend for OpenAI-compatible chat-completions endpoints.

use std::time::Duration;

use reqwest::blocking::Client;
use reqwest::StatusCode;
use serde_json::{json, Value};

use super::{CompletionRequest, LlmBackend, LlmError};

/// Environment variable holding the bearer token for the live backend.
pub const API_KEY_ENV: &str = "SCRS_API_KEY";

#[derive(Debug, Clone)]
pub struct HttpConfig {
    pub base_url: String,
    pub model: String,
    pub api_key: Option<String>,
    pub timeout: Duration,
    pub max_attempts: u32,
    pub backoff_base: Duration,
}

impl HttpConfig {
    /// Configuration with the API key taken from [`API_KEY_ENV`].
    pub fn from_env(base_url: &str, model: &str) -> Self {
        HttpConfig {
            base_url: base_url.trim_end_matches('/').to_string(),
            model: model.to_string(),
            api_key: std::env::var(API_KEY_ENV).ok().filter(|k| !k.is_empty()),
            timeout: Duration::from_secs(120),
            max_attempts: 3,
            backoff_base: Duration::from_millis(500),
        }
    }
}

pub struct HttpBackend {
    config: HttpConfig,
    client: Client,
}

impl HttpBackend {
    pub fn new(config: HttpConfig) -> Result<Self, LlmError> {
        let client = Client::builder()
            .timeout(config.timeout)
            .build()
            .map_err(|e| LlmError::BackendUnavailable(e.to_string()))?;
        Ok(HttpBackend { config, client })
    }

    fn endpoint(&self) -> String {
        format!("{}/chat/completions", self.config.base_url)
    }

    fn body(&self, request: &CompletionRequest) -> Value {
        json!({
            "model": self.config.model,
            "temperature": request.temperature,
            "max_tokens": request.max_tokens,
            "messages": [
                {"role": "system", "content": request.system_text},
                {"role": "user", "content": request.user_text},
            ]
        })
    }

    /// One attempt. `Ok(None)` marks a transient failure worth retrying.
    fn attempt(&self, request: &CompletionRequest) -> Result<Option<String>, LlmError> {
        let mut req = self.client.post(self.endpoint()).json(&self.body(request));
        if let Some(key) = &self.config.api_key {
            req = req.bearer_auth(key);
        }
        let resp = match req.send() {
            Ok(r) => r,
            Err(e) => {
                log::warn!("chat request failed: {e}");
                return Ok(None);
            }
        };
        let status = resp.status();
        if status == StatusCode::TOO_MANY_REQUESTS {
            let retry_after = resp
                .headers()
                .get(reqwest::header::RETRY_AFTER)
                .and_then(|v| v.to_str().ok())
                .and_then(|v| v.trim().parse::<u64>().ok())
                .map(Duration::from_secs);
            return Err(LlmError::RateLimited { retry_after });
        }
        if status.is_server_error() {
            log::warn!("chat endpoint returned {status}");
            return Ok(None);
        }
        if !status.is_success() {
            let text = resp.text().unwrap_or_default();
            return Err(LlmError::BackendUnavailable(format!("{status}: {}", text.chars().take(300).collect::<String>())));
        }
        let body: Value = resp
            .json()
            .map_err(|e| LlmError::BackendUnavailable(format!("unreadable response body: {e}")))?;
        body.pointer("/choices/0/message/content")
            .and_then(Value::as_str)
            .map(|s| Some(s.to_string()))
            .ok_or_else(|| LlmError::BackendUnavailable("response has no choices[0].message.content".into()))
    }
}

impl LlmBackend for HttpBackend {
    fn complete(&self, request: &CompletionRequest) -> Result<String, LlmError> {
        request.validate()?;
        let attempts = self.config.max_attempts.max(1);
        for i in 0..attempts {
            if let Some(text) = self.attempt(request)? {
                return Ok(text);
            }
            if i + 1 < attempts {
                std::thread::sleep(self.config.backoff_base * 2u32.pow(i));
            }
        }
        Err(LlmError::BackendUnavailable(format!(
            "{} unreachable after {attempts} attempts",
            self.endpoint()
        )))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::{BufRead, BufReader, Read, Write};
    use std::net::TcpListener;
    use std::sync::atomic::{AtomicUsize, Ordering};
    use std::sync::Arc;

    /// Serves canned HTTP responses in order, one per connection.
    fn serve(responses: Vec<String>) -> (String, Arc<AtomicUsize>, std::thread::JoinHandle<Vec<String>>) {
        let listener = TcpListener::bind("127.0.0.1:0").unwrap();
        let addr = listener.local_addr().unwrap();
        let hits = Arc::new(AtomicUsize::new(0));
        let h = hits.clone();
        let handle = std::thread::spawn(move || {
            let mut bodies = Vec::new();
            for resp in responses {
                let (mut stream, _) = listener.accept().unwrap();
                h.fetch_add(1, Ordering::SeqCst);
                let mut reader = BufReader::new(stream.try_clone().unwrap());
                let mut len = 0;
                loop {
                    let mut line = String::new();
                    reader.read_line(&mut line).unwrap();
                    if line == "\r\n" || line.is_empty() {
                        break;
                    }
                    if let Some(v) = line.to_ascii_lowercase().strip_prefix("content-length:") {
                        len = v.trim().parse().unwrap();
                    }
                }
                let mut body = vec![0; len];
                reader.read_exact(&mut body).unwrap();
                bodies.push(String::from_utf8(body).unwrap());
                stream.write_all(resp.as_bytes()).unwrap();
            }
            bodies
        });
        (format!("http://{addr}/v1"), hits, handle)
    }

    fn http(status: &str, extra: &str, body: &str) -> String {
        format!(
            "HTTP/1.1 {status}\r\nContent-Type: application/json\r\n{extra}Content-Length: {}\r\nConnection: close\r\n\r\n{body}",
            body.len()
        )
    }

    fn config(base: &str) -> HttpConfig {
        HttpConfig {
            base_url: base.to_string(),
            model: "m".into(),
            api_key: Some("k".into()),
            timeout: Duration::from_secs(5),
            max_attempts: 3,
            backoff_base: Duration::from_millis(1),
        }
    }

    #[test]
    fn retries_server_errors_then_succeeds() {
        let ok = r#"{"choices":[{"message":{"role":"assistant","content":"hello"}}]}"#;
        let (base, hits, handle) = serve(vec![http("500 Internal Server Error", "", "{}"), http("200 OK", "", ok)]);
        let backend = HttpBackend::new(config(&base)).unwrap();
        let text = backend.complete(&CompletionRequest::new("T1", "sys", "user")).unwrap();
        assert_eq!(text, "hello");
        assert_eq!(hits.load(Ordering::SeqCst), 2);
        let bodies = handle.join().unwrap();
        let sent: Value = serde_json::from_str(&bodies[1]).unwrap();
        assert_eq!(sent["temperature"], 0.0);
        assert_eq!(sent["messages"][1]["content"], "user");
    }

    #[test]
    fn gives_up_after_bounded_attempts() {
        let err = http("503 Service Unavailable", "", "{}");
        let (base, hits, handle) = serve(vec![err.clone(), err.clone(), err]);
        let backend = HttpBackend::new(config(&base)).unwrap();
        let res = backend.complete(&CompletionRequest::new("T1", "sys", "user"));
        assert!(matches!(res, Err(LlmError::BackendUnavailable(_))));
        assert_eq!(hits.load(Ordering::SeqCst), 3);
        handle.join().unwrap();
    }

    #[test]
    fn rate_limit_carries_retry_after() {
        let (base, _, handle) = serve(vec![http("429 Too Many Requests", "Retry-After: 7\r\n", "{}")]);
        let backend = HttpBackend::new(config(&base)).unwrap();
        match backend.complete(&CompletionRequest::new("T1", "sys", "user")) {
            Err(LlmError::RateLimited { retry_after }) => assert_eq!(retry_after, Some(Duration::from_secs(7))),
            other => panic!("unexpected {other:?}"),
        }
        handle.join().unwrap();
    }
}
