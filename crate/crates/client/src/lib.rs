//! Thin async client for the identification service.

use reqwest::{Method, StatusCode};
use serde::de::DeserializeOwned;
use serde::Serialize;
use wiener_api::*;
use wiener_core::harness::{RunReport, Summary};
use wiener_core::truth::DataRecord;

#[derive(Debug, thiserror::Error)]
pub enum ClientError {
    #[error("request failed: {0}")]
    Transport(#[from] reqwest::Error),

    #[error("{} error from service ({status}): {}", kind_name(.body.kind), .body.message)]
    Api { status: u16, body: ErrorBody },

    #[error("unexpected response ({status}): {text}")]
    Unexpected { status: u16, text: String },
}

fn kind_name(kind: ErrorKind) -> &'static str {
    match kind {
        ErrorKind::Config => "config",
        ErrorKind::Input => "input",
        ErrorKind::Divergence => "divergence",
        ErrorKind::NotFound => "not found",
        ErrorKind::Internal => "internal",
    }
}

impl ClientError {
    /// The service's error category, when the service produced the error.
    pub fn kind(&self) -> Option<ErrorKind> {
        match self {
            ClientError::Api { body, .. } => Some(body.kind),
            _ => None,
        }
    }
}

pub type Result<T> = std::result::Result<T, ClientError>;

#[derive(Clone, Debug)]
pub struct Client {
    base: String,
    http: reqwest::Client,
}

impl Client {
    /// `base` is the service root, e.g. `http://127.0.0.1:8787`.
    pub fn new(base: impl Into<String>) -> Self {
        Self { base: base.into().trim_end_matches('/').to_string(), http: reqwest::Client::new() }
    }

    pub fn base_url(&self) -> &str {
        &self.base
    }

    async fn send<B: Serialize + ?Sized, T: DeserializeOwned>(
        &self,
        method: Method,
        path: &str,
        body: Option<&B>,
    ) -> Result<T> {
        let mut req = self.http.request(method, format!("{}{}", self.base, path));
        if let Some(b) = body {
            req = req.json(b);
        }
        let resp = req.send().await?;
        let status = resp.status();
        if status.is_success() {
            return Ok(resp.json().await?);
        }
        let text = resp.text().await?;
        match serde_json::from_str::<ErrorBody>(&text) {
            Ok(body) => Err(ClientError::Api { status: status.as_u16(), body }),
            Err(_) => Err(ClientError::Unexpected { status: status.as_u16(), text }),
        }
    }

    pub async fn health(&self) -> Result<serde_json::Value> {
        self.send::<(), _>(Method::GET, HEALTH, None).await
    }

    pub async fn run(&self, req: &RunRequest) -> Result<RunResponse> {
        self.send(Method::POST, EXPERIMENTS, Some(req)).await
    }

    pub async fn summarize(&self, reports: Vec<RunReport>) -> Result<Summary> {
        self.send(Method::POST, SUMMARIZE, Some(&SummarizeRequest { reports })).await
    }

    pub async fn oracle_cost(&self, req: &CostRequest) -> Result<CostResponse> {
        self.send(Method::POST, ORACLE_COST, Some(req)).await
    }

    pub async fn dataset(&self, req: &DatasetRequest) -> Result<Vec<DataRecord>> {
        let resp: DatasetResponse = self.send(Method::POST, DATASETS, Some(req)).await?;
        Ok(resp.records)
    }

    pub async fn create_session(&self, req: &CreateSession) -> Result<SessionInfo> {
        self.send(Method::POST, SESSIONS, Some(req)).await
    }

    pub async fn session(&self, id: &str) -> Result<SessionInfo> {
        self.send::<(), _>(Method::GET, &format!("{SESSIONS}/{id}"), None).await
    }

    pub async fn push_samples(&self, id: &str, samples: Vec<Sample>) -> Result<PushResponse> {
        self.send(Method::POST, &format!("{SESSIONS}/{id}/samples"), Some(&PushSamples { samples })).await
    }

    pub async fn delete_session(&self, id: &str) -> Result<()> {
        let resp = self.http.delete(format!("{}{SESSIONS}/{id}", self.base)).send().await?;
        match resp.status() {
            StatusCode::NO_CONTENT => Ok(()),
            status => {
                let text = resp.text().await?;
                match serde_json::from_str::<ErrorBody>(&text) {
                    Ok(body) => Err(ClientError::Api { status: status.as_u16(), body }),
                    Err(_) => Err(ClientError::Unexpected { status: status.as_u16(), text }),
                }
            }
        }
    }
}
