use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::{EmbeddingBackend, ProviderConfig, TextUnit};
use crate::error::{Error, Result};

const BODY_EXCERPT: usize = 200;

#[derive(Serialize)]
struct EmbedRequest<'a> {
    model: &'a str,
    texts: Vec<&'a str>,
}

#[derive(Deserialize)]
struct EmbedResponse {
    vectors: Vec<Vec<f32>>,
}

/// Client for a service answering `POST {endpoint}/embed` with
/// `{"model": .., "texts": [..]}` and replying `{"vectors": [[..], ..]}`.
pub struct RemoteBackend {
    agent: ureq::Agent,
    url: String,
    model: String,
    token: Option<String>,
}

impl RemoteBackend {
    pub fn from_config(config: &ProviderConfig) -> Result<Self> {
        let endpoint = config
            .endpoint
            .as_deref()
            .ok_or_else(|| Error::InvalidArgument("remote mode requires an endpoint".into()))?;
        let token = match &config.auth_token_env {
            Some(var) => Some(std::env::var(var).map_err(|_| {
                Error::InvalidArgument(format!("environment variable `{var}` is not set"))
            })?),
            None => None,
        };
        let agent = ureq::Agent::config_builder()
            .http_status_as_error(false)
            .timeout_global(Some(Duration::from_secs(config.timeout_secs)))
            .build()
            .new_agent();
        Ok(RemoteBackend {
            agent,
            url: format!("{}/embed", endpoint.trim_end_matches('/')),
            model: config.model_name.clone(),
            token,
        })
    }
}

impl EmbeddingBackend for RemoteBackend {
    fn embed_batch(&self, batch: &[TextUnit]) -> Result<Vec<Vec<f32>>> {
        let body = EmbedRequest {
            model: &self.model,
            texts: batch.iter().map(|u| u.text.as_str()).collect(),
        };
        let mut req = self.agent.post(&self.url);
        if let Some(token) = &self.token {
            req = req.header("Authorization", format!("Bearer {token}"));
        }
        let mut resp = req
            .send_json(&body)
            .map_err(|e| Error::Transport(e.to_string()))?;
        let status = resp.status().as_u16();
        if !(200..300).contains(&status) {
            let text = resp.body_mut().read_to_string().unwrap_or_default();
            let body: String = text.chars().take(BODY_EXCERPT).collect();
            return Err(Error::Provider { status, body });
        }
        let parsed: EmbedResponse = resp
            .body_mut()
            .read_json()
            .map_err(|e| Error::Transport(format!("malformed response: {e}")))?;
        Ok(parsed.vectors)
    }
}
