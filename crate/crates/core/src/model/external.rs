//! Client side of the external model protocol.
//!
//! A request is one JSON object followed by a newline, POSTed to `/predict`:
//! `{"columns":[..],"kinds":[..],"rows":[[..],..]}`. The reply is
//! `{"kind":"..","predictions":[..]}`, with `"levels"` for class outputs.

use std::sync::Arc;
use std::time::Duration;

use gate::Semaphore;
use serde::{Deserialize, Serialize};
use serde_json::Value as Json;

use crate::error::{Error, Result};
use crate::frame::{Column, ColumnKind, DataFrame, Value};

use super::{InputField, ModelHandle, ModelSource, PredictionKind, Predictions, Predictor};

/// Largest response body accepted.
const BODY_LIMIT: u64 = 512 * 1024 * 1024;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictRequest {
    pub columns: Vec<String>,
    pub kinds: Vec<ColumnKind>,
    pub rows: Vec<Vec<Value>>,
}

impl PredictRequest {
    pub fn from_frame(df: &DataFrame) -> PredictRequest {
        let columns = df.names().map(str::to_string).collect();
        let kinds = df.columns().iter().map(Column::kind).collect();
        let rows = (0..df.nrows())
            .map(|r| df.columns().iter().map(|c| c.value(r)).collect())
            .collect();
        PredictRequest { columns, kinds, rows }
    }

    pub fn to_frame(&self) -> Result<DataFrame> {
        if self.columns.len() != self.kinds.len() {
            return Err(Error::InvalidArgument(format!(
                "{} columns but {} kinds",
                self.columns.len(),
                self.kinds.len()
            )));
        }
        if let Some((i, row)) = self.rows.iter().enumerate().find(|(_, r)| r.len() != self.columns.len()) {
            return Err(Error::InvalidArgument(format!("row {i} has {} cells, expected {}", row.len(), self.columns.len())));
        }
        let columns = self
            .columns
            .iter()
            .zip(&self.kinds)
            .enumerate()
            .map(|(j, (name, kind))| match kind {
                ColumnKind::Numeric => self
                    .rows
                    .iter()
                    .map(|r| {
                        r[j].as_num().ok_or_else(|| Error::InvalidValue {
                            var: name.clone(),
                            reason: format!("expected a number, got {}", r[j]),
                        })
                    })
                    .collect::<Result<Vec<f64>>>()
                    .map(|v| Column::numeric(name, v)),
                ColumnKind::Categorical => {
                    let labels: Vec<String> = self.rows.iter().map(|r| r[j].to_string()).collect();
                    Ok(Column::from_labels(name, &labels))
                }
            })
            .collect::<Result<Vec<_>>>()?;
        if self.rows.is_empty() {
            return Err(Error::EmptyInput);
        }
        DataFrame::new(columns)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictResponse {
    pub kind: PredictionKind,
    pub predictions: Vec<Json>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub levels: Option<Vec<String>>,
}

impl PredictResponse {
    pub fn from_predictions(p: &Predictions) -> PredictResponse {
        let (predictions, levels) = match p {
            Predictions::Numeric { values } | Predictions::Density { values } => {
                (values.iter().map(|v| Json::from(*v)).collect(), None)
            }
            Predictions::Class { levels, codes } => {
                (codes.iter().map(|&c| Json::from(levels[c as usize].clone())).collect(), Some(levels.clone()))
            }
            Predictions::ProbMatrix { levels, probs } => {
                (probs.iter().map(|row| Json::from(row.clone())).collect(), Some(levels.clone()))
            }
            Predictions::ClusterId { ids } => (ids.iter().map(|&i| Json::from(i)).collect(), None),
        };
        PredictResponse { kind: p.kind(), predictions, levels }
    }

    /// Validates the reply against the row count and converts it.
    pub fn into_predictions(self, rows: usize) -> Result<Predictions> {
        let bad = |msg: String| Error::MalformedResponse(msg);
        if self.predictions.len() != rows {
            return Err(bad(format!("{} predictions for {rows} rows", self.predictions.len())));
        }
        let number = |v: &Json| v.as_f64().ok_or_else(|| bad(format!("expected a number, got {v}")));
        match self.kind {
            PredictionKind::Numeric | PredictionKind::Density => {
                let values = self.predictions.iter().map(number).collect::<Result<Vec<f64>>>()?;
                if self.kind == PredictionKind::Density && values.iter().any(|v| *v < 0.0) {
                    return Err(bad("negative density".into()));
                }
                Ok(if self.kind == PredictionKind::Numeric {
                    Predictions::Numeric { values }
                } else {
                    Predictions::Density { values }
                })
            }
            PredictionKind::ClusterId => {
                let ids = self
                    .predictions
                    .iter()
                    .map(|v| {
                        v.as_u64()
                            .and_then(|i| u32::try_from(i).ok())
                            .ok_or_else(|| bad(format!("expected a cluster id, got {v}")))
                    })
                    .collect::<Result<Vec<u32>>>()?;
                Ok(Predictions::ClusterId { ids })
            }
            PredictionKind::Class => {
                let labels = self
                    .predictions
                    .iter()
                    .map(|v| v.as_str().map(str::to_string).ok_or_else(|| bad(format!("expected a label, got {v}"))))
                    .collect::<Result<Vec<String>>>()?;
                let levels = match self.levels {
                    Some(l) => l,
                    None => {
                        let mut l = labels.clone();
                        l.sort();
                        l.dedup();
                        l
                    }
                };
                let codes = labels
                    .iter()
                    .map(|s| {
                        levels
                            .iter()
                            .position(|l| l == s)
                            .map(|i| i as u32)
                            .ok_or_else(|| bad(format!("label `{s}` is not among the levels")))
                    })
                    .collect::<Result<Vec<u32>>>()?;
                Ok(Predictions::Class { levels, codes })
            }
            PredictionKind::ProbMatrix => {
                let levels = self.levels.ok_or_else(|| bad("probMatrix reply without levels".into()))?;
                let probs = self
                    .predictions
                    .iter()
                    .enumerate()
                    .map(|(i, row)| {
                        let row = row.as_array().ok_or_else(|| bad(format!("row {i} is not an array")))?;
                        if row.len() != levels.len() {
                            return Err(bad(format!("row {i} has {} probabilities for {} levels", row.len(), levels.len())));
                        }
                        let p = row.iter().map(number).collect::<Result<Vec<f64>>>()?;
                        let sum: f64 = p.iter().sum();
                        if p.iter().any(|x| *x < 0.0) || (sum - 1.0).abs() > 1e-9 {
                            return Err(bad(format!("row {i} is not a probability vector (sum {sum})")));
                        }
                        Ok(p)
                    })
                    .collect::<Result<Vec<Vec<f64>>>>()?;
                Ok(Predictions::ProbMatrix { levels, probs })
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExternalOptions {
    pub timeout: Duration,
    /// Concurrent requests allowed per endpoint.
    pub max_in_flight: usize,
}

impl Default for ExternalOptions {
    fn default() -> Self {
        ExternalOptions { timeout: Duration::from_secs(10), max_in_flight: 4 }
    }
}

mod gate {
    use std::sync::{Condvar, Mutex};

    /// Counting semaphore over std primitives.
    #[derive(Debug)]
    pub struct Semaphore {
        free: Mutex<usize>,
        cv: Condvar,
    }

    pub struct Permit<'a>(&'a Semaphore);

    impl Semaphore {
        pub fn new(n: usize) -> Self {
            Semaphore { free: Mutex::new(n.max(1)), cv: Condvar::new() }
        }

        pub fn acquire(&self) -> Permit<'_> {
            let mut free = self.free.lock().unwrap_or_else(|e| e.into_inner());
            while *free == 0 {
                free = self.cv.wait(free).unwrap_or_else(|e| e.into_inner());
            }
            *free -= 1;
            Permit(self)
        }
    }

    impl Drop for Permit<'_> {
        fn drop(&mut self) {
            *self.0.free.lock().unwrap_or_else(|e| e.into_inner()) += 1;
            self.0.cv.notify_one();
        }
    }
}

#[derive(Debug)]
struct ExternalModel {
    url: String,
    agent: ureq::Agent,
    timeout: Duration,
    gate: Semaphore,
}

fn map_transport(e: ureq::Error, timeout: Duration) -> Error {
    match e {
        ureq::Error::Timeout(_) => Error::Timeout(timeout),
        ureq::Error::Io(io) if io.kind() == std::io::ErrorKind::TimedOut => Error::Timeout(timeout),
        ureq::Error::BodyExceedsLimit(n) => Error::MalformedResponse(format!("reply larger than {n} bytes")),
        other => Error::Unreachable(other.to_string()),
    }
}

impl Predictor for ExternalModel {
    fn predict(&self, rows: &DataFrame) -> Result<Predictions> {
        let mut body = serde_json::to_vec(&PredictRequest::from_frame(rows))
            .map_err(|e| Error::InvalidArgument(format!("cannot encode request: {e}")))?;
        body.push(b'\n');
        let _permit = self.gate.acquire();
        let mut resp = self
            .agent
            .post(&self.url)
            .header("content-type", "application/json")
            .send(&body[..])
            .map_err(|e| map_transport(e, self.timeout))?;
        let status = resp.status();
        let text = resp
            .body_mut()
            .with_config()
            .limit(BODY_LIMIT)
            .read_to_string()
            .map_err(|e| map_transport(e, self.timeout))?;
        if !status.is_success() {
            return Err(Error::MalformedResponse(format!("status {}: {}", status.as_u16(), text.trim())));
        }
        let reply: PredictResponse =
            serde_json::from_str(text.trim_end()).map_err(|e| Error::MalformedResponse(e.to_string()))?;
        reply.into_predictions(rows.nrows())
    }
}

/// Normalizes an endpoint so that it ends in `/predict`.
pub fn predict_url(endpoint: &str) -> String {
    let base = endpoint.trim_end_matches('/');
    if base.ends_with("/predict") {
        base.to_string()
    } else {
        format!("{base}/predict")
    }
}

/// Registers a model served over HTTP. No request is made until the first
/// prediction.
pub fn connect_external(
    id: impl Into<String>,
    endpoint: &str,
    kind: PredictionKind,
    schema: Vec<InputField>,
    opts: ExternalOptions,
) -> Result<ModelHandle> {
    if !(endpoint.starts_with("http://") || endpoint.starts_with("https://")) {
        return Err(Error::InvalidModel(format!("endpoint `{endpoint}` is not an http(s) URL")));
    }
    if schema.is_empty() {
        return Err(Error::InvalidModel("an external model needs an input schema".into()));
    }
    let agent: ureq::Agent = ureq::Agent::config_builder()
        .timeout_global(Some(opts.timeout))
        .http_status_as_error(false)
        .build()
        .into();
    let url = predict_url(endpoint);
    let inner = ExternalModel { url: url.clone(), agent, timeout: opts.timeout, gate: Semaphore::new(opts.max_in_flight) };
    Ok(ModelHandle::new(id, kind, schema, ModelSource::External { endpoint: url }, Arc::new(inner)))
}
