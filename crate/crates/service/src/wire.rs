//! Request bodies shared by the CLI input files and the HTTP API.

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use engagement_core::allocate::Basis;
use engagement_core::score::PromptEvent;
use engagement_core::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EventInput {
    pub event_id: String,
    pub prompt: String,
    #[serde(default)]
    pub response: Option<String>,
    #[serde(default)]
    pub weight: Option<f64>,
    #[serde(default)]
    pub timestamp: Option<DateTime<Utc>>,
    /// When present, must equal the serving model's fingerprint.
    #[serde(default)]
    pub fingerprint: Option<String>,
}

impl EventInput {
    /// `default_time` fills a missing timestamp.
    pub fn into_event(self, default_time: DateTime<Utc>) -> Result<PromptEvent> {
        let mut e = PromptEvent::new(self.event_id, self.prompt, self.timestamp.unwrap_or(default_time));
        if let Some(r) = self.response {
            e = e.with_response(r);
        }
        if let Some(w) = self.weight {
            e = e.with_weight(w);
        }
        e.validate()?;
        Ok(e)
    }
}

/// `basis` defaults to `prob`; `alpha` is required for `blend`.
pub fn parse_basis(basis: Option<&str>, alpha: Option<f64>) -> Result<Basis> {
    Basis::parse(basis.unwrap_or("prob"), alpha)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WaitlistProvider {
    pub provider_id: String,
    pub texts: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WaitlistRequest {
    pub providers: Vec<WaitlistProvider>,
    #[serde(default)]
    pub total: Option<u64>,
    #[serde(default)]
    pub basis: Option<String>,
    #[serde(default)]
    pub alpha: Option<f64>,
}

/// A single item for item scoring: text, a vector in the model's dense
/// space, or both.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ItemInput {
    pub item_id: String,
    #[serde(default)]
    pub text: Option<String>,
    #[serde(default)]
    pub vector: Option<Vec<f64>>,
}

/// Single-line machine-parseable error body.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorBody {
    pub kind: String,
    pub message: String,
}

impl From<&Error> for ErrorBody {
    fn from(e: &Error) -> Self {
        Self {
            kind: e.kind().to_string(),
            message: e.to_string(),
        }
    }
}
