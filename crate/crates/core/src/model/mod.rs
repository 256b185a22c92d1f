//! Uniform prediction interface over built-in learners, density and cluster
//! fits, and models served by an external process.

mod density;
pub mod external;
mod knn;
mod linear;
mod partition;
mod tree;

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::frame::{ColumnData, ColumnKind, DataFrame};

pub use external::{connect_external, ExternalOptions, PredictRequest, PredictResponse};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum PredictionKind {
    Numeric,
    Class,
    ProbMatrix,
    Density,
    ClusterId,
}

impl PredictionKind {
    /// Whether the section plot treats this output as a probability over levels.
    pub fn is_probability(self) -> bool {
        self == PredictionKind::ProbMatrix
    }
}

impl FromStr for PredictionKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        serde_json::from_value(serde_json::Value::String(s.to_string()))
            .map_err(|_| Error::InvalidArgument(format!("unknown prediction kind `{s}`")))
    }
}

/// Model outputs, one entry per input row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "camelCase")]
pub enum Predictions {
    Numeric { values: Vec<f64> },
    Class { levels: Vec<String>, codes: Vec<u32> },
    ProbMatrix { levels: Vec<String>, probs: Vec<Vec<f64>> },
    Density { values: Vec<f64> },
    ClusterId { ids: Vec<u32> },
}

impl Predictions {
    pub fn kind(&self) -> PredictionKind {
        match self {
            Predictions::Numeric { .. } => PredictionKind::Numeric,
            Predictions::Class { .. } => PredictionKind::Class,
            Predictions::ProbMatrix { .. } => PredictionKind::ProbMatrix,
            Predictions::Density { .. } => PredictionKind::Density,
            Predictions::ClusterId { .. } => PredictionKind::ClusterId,
        }
    }

    pub fn len(&self) -> usize {
        match self {
            Predictions::Numeric { values } | Predictions::Density { values } => values.len(),
            Predictions::Class { codes, .. } => codes.len(),
            Predictions::ProbMatrix { probs, .. } => probs.len(),
            Predictions::ClusterId { ids } => ids.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Numeric view for numeric and density outputs.
    pub fn values(&self) -> Option<&[f64]> {
        match self {
            Predictions::Numeric { values } | Predictions::Density { values } => Some(values),
            _ => None,
        }
    }

    pub fn levels(&self) -> Option<&[String]> {
        match self {
            Predictions::Class { levels, .. } | Predictions::ProbMatrix { levels, .. } => Some(levels),
            _ => None,
        }
    }

    /// Predicted class per row; probability rows resolve to their argmax,
    /// ties going to the first level.
    pub fn class_codes(&self) -> Option<Vec<u32>> {
        match self {
            Predictions::Class { codes, .. } => Some(codes.clone()),
            Predictions::ProbMatrix { probs, .. } => Some(probs.iter().map(|row| argmax_first(row) as u32).collect()),
            _ => None,
        }
    }

    /// Converts to the requested kind where that is lossless or a pure reduction.
    pub fn into_kind(self, kind: PredictionKind) -> Result<Predictions> {
        if self.kind() == kind {
            return Ok(self);
        }
        match (self, kind) {
            (p @ Predictions::ProbMatrix { .. }, PredictionKind::Class) => {
                let codes = p.class_codes().expect("prob matrix");
                let Predictions::ProbMatrix { levels, .. } = p else { unreachable!() };
                Ok(Predictions::Class { levels, codes })
            }
            (p, kind) => Err(Error::SchemaMismatch(format!(
                "model produces {:?} predictions, {kind:?} requested",
                p.kind()
            ))),
        }
    }
}

pub(crate) fn argmax_first(row: &[f64]) -> usize {
    let mut best = 0;
    for (i, &p) in row.iter().enumerate().skip(1) {
        if p > row[best] {
            best = i;
        }
    }
    best
}

/// One input column a model reads, with its training levels when categorical.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct InputField {
    pub name: String,
    pub kind: ColumnKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub levels: Option<Vec<String>>,
}

impl InputField {
    pub fn schema_of(df: &DataFrame, inputs: &[String]) -> Result<Vec<InputField>> {
        inputs
            .iter()
            .map(|name| {
                let col = df.column(name)?;
                Ok(InputField {
                    name: name.clone(),
                    kind: col.kind(),
                    levels: col.levels().map(<[String]>::to_vec),
                })
            })
            .collect()
    }
}

/// Row values of one input field, categorical codes remapped onto the
/// model's training levels.
#[derive(Debug)]
pub(crate) enum FieldValues<'a> {
    Num(&'a [f64]),
    Cat(Vec<u32>),
}

pub(crate) fn encode_inputs<'a>(schema: &[InputField], rows: &'a DataFrame) -> Result<Vec<FieldValues<'a>>> {
    schema
        .iter()
        .map(|field| {
            let col = rows
                .column(&field.name)
                .map_err(|_| Error::SchemaMismatch(format!("missing input column `{}`", field.name)))?;
            match (col.data(), field.kind) {
                (ColumnData::Numeric(v), ColumnKind::Numeric) => Ok(FieldValues::Num(v)),
                (ColumnData::Categorical { codes, levels }, ColumnKind::Categorical) => {
                    let known = field.levels.as_deref().unwrap_or(&[]);
                    let map: Vec<Option<u32>> = levels
                        .iter()
                        .map(|l| known.iter().position(|k| k == l).map(|i| i as u32))
                        .collect();
                    codes
                        .iter()
                        .map(|&c| {
                            map[c as usize].ok_or_else(|| {
                                Error::SchemaMismatch(format!(
                                    "level `{}` of `{}` was not seen in training",
                                    levels[c as usize], field.name
                                ))
                            })
                        })
                        .collect::<Result<Vec<u32>>>()
                        .map(FieldValues::Cat)
                }
                (_, kind) => Err(Error::SchemaMismatch(format!(
                    "input `{}` should be {kind}, got {}",
                    field.name,
                    col.kind()
                ))),
            }
        })
        .collect()
}

/// Training response.
#[derive(Debug, Clone)]
pub(crate) enum Target {
    Numeric(Vec<f64>),
    Class { codes: Vec<u32>, levels: Vec<String> },
}

impl Target {
    fn from_frame(df: &DataFrame, response: &str) -> Result<Target> {
        match df.column(response)?.data() {
            ColumnData::Numeric(v) => Ok(Target::Numeric(v.clone())),
            ColumnData::Categorical { codes, levels } => {
                Ok(Target::Class { codes: codes.clone(), levels: levels.clone() })
            }
        }
    }

    fn native_kind(&self) -> PredictionKind {
        match self {
            Target::Numeric(_) => PredictionKind::Numeric,
            Target::Class { .. } => PredictionKind::ProbMatrix,
        }
    }
}

pub trait Predictor: Send + Sync + fmt::Debug {
    /// Predictions for rows that carry every schema column.
    fn predict(&self, rows: &DataFrame) -> Result<Predictions>;
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", tag = "type")]
pub enum ModelSource {
    Builtin { spec: BuiltinSpec },
    External { endpoint: String },
}

/// A fitted or registered model; immutable and cheap to clone.
#[derive(Debug, Clone)]
pub struct ModelHandle {
    id: String,
    kind: PredictionKind,
    native: PredictionKind,
    schema: Vec<InputField>,
    source: ModelSource,
    levels: Option<Vec<String>>,
    inner: Arc<dyn Predictor>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct ModelInfo {
    pub id: String,
    pub kind: PredictionKind,
    pub input_schema: Vec<InputField>,
    pub source: ModelSource,
}

impl ModelHandle {
    pub fn new(
        id: impl Into<String>,
        kind: PredictionKind,
        schema: Vec<InputField>,
        source: ModelSource,
        inner: Arc<dyn Predictor>,
    ) -> Self {
        ModelHandle { id: id.into(), kind, native: kind, schema, source, levels: None, inner }
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn kind(&self) -> PredictionKind {
        self.kind
    }

    pub fn schema(&self) -> &[InputField] {
        &self.schema
    }

    pub fn source(&self) -> &ModelSource {
        &self.source
    }

    pub fn info(&self) -> ModelInfo {
        ModelInfo {
            id: self.id.clone(),
            kind: self.kind,
            input_schema: self.schema.clone(),
            source: self.source.clone(),
        }
    }

    /// Class levels of class and probability outputs, when known before predicting.
    pub fn output_levels(&self) -> Option<&[String]> {
        self.levels.as_deref()
    }

    pub fn with_levels(mut self, levels: Vec<String>) -> Self {
        self.levels = Some(levels);
        self
    }

    pub fn with_id(mut self, id: impl Into<String>) -> Self {
        self.id = id.into();
        self
    }

    /// Re-targets the output kind; only probability models may report classes.
    pub fn with_kind(mut self, kind: PredictionKind) -> Result<Self> {
        let ok = kind == self.native
            || (self.native == PredictionKind::ProbMatrix && kind == PredictionKind::Class);
        if !ok {
            return Err(Error::InvalidModel(format!(
                "model `{}` cannot produce {kind:?} predictions",
                self.id
            )));
        }
        self.kind = kind;
        Ok(self)
    }

    /// Output in the model's native kind (probabilities for classifiers).
    pub fn predict_native(&self, rows: &DataFrame) -> Result<Predictions> {
        let names: Vec<String> = self.schema.iter().map(|f| f.name.clone()).collect();
        let mut cols = Vec::with_capacity(names.len());
        for name in &names {
            let col = rows
                .column(name)
                .map_err(|_| Error::SchemaMismatch(format!("missing input column `{name}`")))?;
            cols.push(col.clone());
        }
        let exact = DataFrame::new(cols)?;
        let out = self.inner.predict(&exact)?;
        if out.len() != rows.nrows() {
            return Err(Error::MalformedResponse(format!(
                "expected {} predictions, got {}",
                rows.nrows(),
                out.len()
            )));
        }
        Ok(out)
    }

    pub fn predict(&self, rows: &DataFrame) -> Result<Predictions> {
        self.predict_native(rows)?.into_kind(self.kind)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "camelCase")]
pub enum BuiltinSpec {
    /// Least squares; categorical inputs one-hot encoded, first level dropped.
    Linear,
    /// Standardized-Euclidean k nearest neighbours.
    Knn { k: usize },
    /// Greedy binary splits on variance (numeric) or Gini (class).
    #[serde(rename_all = "camelCase")]
    Tree { max_depth: usize, min_leaf: usize },
    /// Product Gaussian kernel density; `bandwidth` scales the per-column
    /// standard deviation (Scott's rule when absent).
    Kde {
        #[serde(default)]
        bandwidth: Option<f64>,
    },
    /// Cluster assignment to the nearest of `k` k-means centroids.
    Kmeans { k: usize, seed: u64 },
}

impl BuiltinSpec {
    pub fn name(&self) -> &'static str {
        match self {
            BuiltinSpec::Linear => "linear",
            BuiltinSpec::Knn { .. } => "knn",
            BuiltinSpec::Tree { .. } => "tree",
            BuiltinSpec::Kde { .. } => "kde",
            BuiltinSpec::Kmeans { .. } => "kmeans",
        }
    }

    fn needs_response(&self) -> bool {
        matches!(self, BuiltinSpec::Linear | BuiltinSpec::Knn { .. } | BuiltinSpec::Tree { .. })
    }
}

impl FromStr for BuiltinSpec {
    type Err = Error;

    /// `linear`, `knn:K`, `tree[:DEPTH[:MINLEAF]]`, `kde[:BW]`, `kmeans:K[:SEED]`.
    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.split(':').collect();
        let num = |i: usize, default: Option<usize>| -> Result<usize> {
            match parts.get(i) {
                Some(p) => p.parse().map_err(|_| Error::InvalidModel(format!("bad number `{p}` in `{s}`"))),
                None => default.ok_or_else(|| Error::InvalidModel(format!("`{s}` is missing a parameter"))),
            }
        };
        match parts[0] {
            "linear" => Ok(BuiltinSpec::Linear),
            "knn" => Ok(BuiltinSpec::Knn { k: num(1, Some(5))? }),
            "tree" => Ok(BuiltinSpec::Tree { max_depth: num(1, Some(4))?, min_leaf: num(2, Some(5))? }),
            "kde" => {
                let bandwidth = match parts.get(1) {
                    Some(p) => Some(p.parse().map_err(|_| Error::InvalidModel(format!("bad bandwidth `{p}`")))?),
                    None => None,
                };
                Ok(BuiltinSpec::Kde { bandwidth })
            }
            "kmeans" => Ok(BuiltinSpec::Kmeans { k: num(1, None)?, seed: num(2, Some(0))? as u64 }),
            other => Err(Error::InvalidModel(format!("unknown builtin model `{other}`"))),
        }
    }
}

/// Fits a built-in model on `inputs` (and `response` for supervised learners).
pub fn fit_builtin(
    spec: &BuiltinSpec,
    df: &DataFrame,
    response: Option<&str>,
    inputs: &[String],
) -> Result<ModelHandle> {
    if inputs.is_empty() {
        return Err(Error::InvalidModel("a model needs at least one input".into()));
    }
    if let Some(r) = response.filter(|r| inputs.iter().any(|i| i == r)) {
        return Err(Error::InvalidModel(format!("response `{r}` cannot also be an input")));
    }
    let schema = InputField::schema_of(df, inputs)?;
    let target = match (spec.needs_response(), response) {
        (true, Some(r)) => Some(Target::from_frame(df, r)?),
        (true, None) => return Err(Error::NoResponse),
        (false, _) => None,
    };
    let encoded = encode_inputs(&schema, df)?;
    let levels = match &target {
        Some(Target::Class { levels, .. }) => Some(levels.clone()),
        _ => None,
    };
    let (kind, inner): (PredictionKind, Arc<dyn Predictor>) = match spec {
        BuiltinSpec::Linear => {
            let target = target.expect("supervised");
            let Target::Numeric(y) = target else {
                return Err(Error::InvalidModel("linear model needs a numeric response".into()));
            };
            (PredictionKind::Numeric, Arc::new(linear::LinearModel::fit(&schema, &encoded, &y)?))
        }
        BuiltinSpec::Knn { k } => {
            let target = target.expect("supervised");
            let kind = target.native_kind();
            (kind, Arc::new(knn::KnnModel::fit(&schema, &encoded, target, *k)?))
        }
        BuiltinSpec::Tree { max_depth, min_leaf } => {
            let target = target.expect("supervised");
            let kind = target.native_kind();
            (kind, Arc::new(tree::TreeModel::fit(&schema, &encoded, target, *max_depth, *min_leaf)?))
        }
        BuiltinSpec::Kde { bandwidth } => {
            (PredictionKind::Density, Arc::new(density::KdeModel::fit(&schema, &encoded, *bandwidth)?))
        }
        BuiltinSpec::Kmeans { k, seed } => (
            PredictionKind::ClusterId,
            Arc::new(partition::ClusterModel::fit(&schema, &encoded, *k, *seed)?),
        ),
    };
    let handle = ModelHandle::new(spec.name(), kind, schema, ModelSource::Builtin { spec: spec.clone() }, inner);
    Ok(match levels {
        Some(l) => handle.with_levels(l),
        None => handle,
    })
}

/// Rescales grid density values so that `sum(weights) * cell_measure == 1`.
pub fn renormalize_density(values: &[f64], cell_measure: f64) -> Result<Vec<f64>> {
    if values.iter().any(|v| !(*v >= 0.0) || !v.is_finite()) {
        return Err(Error::InvalidArgument("density values must be finite and >= 0".into()));
    }
    if !(cell_measure > 0.0) {
        return Err(Error::InvalidArgument("cell measure must be positive".into()));
    }
    let total: f64 = values.iter().sum();
    if total <= 0.0 {
        return Err(Error::ZeroDensity);
    }
    let scale = total * cell_measure;
    Ok(values.iter().map(|v| v / scale).collect())
}
