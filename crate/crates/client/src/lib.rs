//! Thin HTTP client for `ifm serve`. Responses are returned as raw bytes
//! so callers can relay them unchanged.

use reqwest::{Client, StatusCode};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ClientError {
    #[error("request to {url} failed: {source}")]
    Transport {
        url: String,
        #[source]
        source: reqwest::Error,
    },
    /// A non-2xx response; `body` holds the service's error document.
    #[error("{url} answered {status}")]
    Status {
        url: String,
        status: StatusCode,
        body: Vec<u8>,
    },
}

impl ClientError {
    /// Error message and diagnostics from a service error document.
    pub fn diagnostics(&self) -> Vec<String> {
        let ClientError::Status { body, .. } = self else {
            return Vec::new();
        };
        let Ok(v) = serde_json::from_slice::<serde_json::Value>(body) else {
            return Vec::new();
        };
        let mut out: Vec<String> = v["error"]
            .as_str()
            .map(str::to_string)
            .into_iter()
            .collect();
        if let Some(d) = v["diagnostics"].as_array() {
            out.extend(d.iter().filter_map(|x| x.as_str().map(str::to_string)));
        }
        out
    }
}

#[derive(Clone, Debug)]
pub struct IfmClient {
    base: String,
    http: Client,
}

impl IfmClient {
    /// `base` is the service root, for example `http://127.0.0.1:8080`.
    pub fn new(base: &str) -> Self {
        IfmClient {
            base: base.trim_end_matches('/').to_string(),
            http: Client::new(),
        }
    }

    fn url(&self, path: &str) -> String {
        format!("{}/api/v1/{path}", self.base)
    }

    async fn finish(
        url: String,
        res: Result<reqwest::Response, reqwest::Error>,
    ) -> Result<Vec<u8>, ClientError> {
        let res = res.map_err(|source| ClientError::Transport {
            url: url.clone(),
            source,
        })?;
        let status = res.status();
        let body = res
            .bytes()
            .await
            .map_err(|source| ClientError::Transport {
                url: url.clone(),
                source,
            })?
            .to_vec();
        if status.is_success() {
            Ok(body)
        } else {
            Err(ClientError::Status { url, status, body })
        }
    }

    pub async fn health(&self) -> Result<Vec<u8>, ClientError> {
        let url = self.url("health");
        Self::finish(url.clone(), self.http.get(&url).send().await).await
    }

    pub async fn model(&self) -> Result<Vec<u8>, ClientError> {
        let url = self.url("model");
        Self::finish(url.clone(), self.http.get(&url).send().await).await
    }

    /// `config` selects one configuration by name.
    pub async fn assessments(&self, config: Option<&str>) -> Result<Vec<u8>, ClientError> {
        let url = self.url("assessments");
        let mut req = self.http.get(&url);
        if let Some(c) = config {
            req = req.query(&[("config", c)]);
        }
        Self::finish(url, req.send().await).await
    }

    pub async fn whatif(&self, edits: &[String]) -> Result<Vec<u8>, ClientError> {
        let url = self.url("whatif");
        let body = serde_json::json!({ "edits": edits });
        Self::finish(url.clone(), self.http.post(&url).json(&body).send().await).await
    }
}
