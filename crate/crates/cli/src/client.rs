//! Minimal blocking client for the gateway API, used by the one-shot
//! subcommands.

use serde_json::{json, Value};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ClientError {
    #[error("cannot reach {url}: {message}")]
    Transport { url: String, message: String },
    #[error("{status} {code}: {message}")]
    Api { status: u16, code: String, message: String },
    #[error("unexpected response: {0}")]
    Malformed(String),
}

pub struct Client {
    base: String,
    agent: ureq::Agent,
    token: Option<String>,
}

pub struct Reply {
    pub status: u16,
    pub text: String,
}

impl Reply {
    pub fn json(&self) -> Result<Value, ClientError> {
        serde_json::from_str(&self.text).map_err(|_| ClientError::Malformed(self.text.clone()))
    }

    /// The JSON body of a 2xx reply, or the API error.
    pub fn ok_json(&self) -> Result<Value, ClientError> {
        let v = self.json()?;
        if (200..300).contains(&self.status) {
            return Ok(v);
        }
        Err(ClientError::Api {
            status: self.status,
            code: v.get("error").and_then(Value::as_str).unwrap_or("error").to_string(),
            message: v.get("message").and_then(Value::as_str).unwrap_or_default().to_string(),
        })
    }
}

impl Client {
    pub fn new(base: &str) -> Self {
        let agent = ureq::Agent::config_builder().http_status_as_error(false).build().into();
        Client { base: base.trim_end_matches('/').to_string(), agent, token: None }
    }

    pub fn call(&self, method: &str, path: &str, body: Option<&Value>) -> Result<Reply, ClientError> {
        let url = format!("{}{}", self.base, path);
        let transport = |e: ureq::Error| ClientError::Transport { url: url.clone(), message: e.to_string() };
        let auth = self.token.as_ref().map(|t| format!("Bearer {t}"));
        let mut resp = match method {
            "GET" => {
                let mut r = self.agent.get(&url);
                if let Some(a) = &auth {
                    r = r.header("Authorization", a);
                }
                r.call().map_err(transport)?
            }
            _ => {
                let mut r = self.agent.post(&url);
                if let Some(a) = &auth {
                    r = r.header("Authorization", a);
                }
                match body {
                    Some(b) => r.send_json(b).map_err(transport)?,
                    None => r.send_empty().map_err(transport)?,
                }
            }
        };
        let status = resp.status().as_u16();
        let text = resp.body_mut().read_to_string().map_err(transport)?;
        Ok(Reply { status, text })
    }

    pub fn login(&mut self, principal: &str, secret: &str) -> Result<(), ClientError> {
        let v = self.call("POST", "/auth", Some(&json!({ "principal": principal, "secret": secret })))?.ok_json()?;
        let token = v.get("token").and_then(Value::as_str).ok_or_else(|| ClientError::Malformed(v.to_string()))?;
        self.token = Some(token.to_string());
        Ok(())
    }
}
