//! Conditional visualization of fitted models: slices of predictor space,
//! similarity-faded observations and tours through occupied or interesting
//! sections.

// `!(x > 0.0)` is used on purpose: it rejects NaN too
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cluster;
pub mod error;
pub mod frame;
pub mod metric;
pub mod model;
pub mod section;
pub mod session;
pub mod simulate;
pub mod tour;

pub use error::{Error, ErrorClass, Result};
pub use frame::{Column, ColumnKind, DataFrame, Roles, Value};
pub use metric::{ConditioningSpace, DistanceKind, SimilarityConfig};
pub use model::{fit_builtin, BuiltinSpec, ModelHandle, PredictionKind, Predictions};
pub use section::{SectionPayload, SectionPoint};
