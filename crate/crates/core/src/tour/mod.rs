//! Tours: ordered sequences of section points chosen to visit occupied,
//! poorly fit or fit-divergent regions of the conditioning space.

mod occupancy;
mod pam;
mod rank;
mod select;
mod seriate;

use std::collections::BTreeMap;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::frame::{DataFrame, Value};
use crate::metric::{ConditioningSpace, EncodedRows, SimilarityConfig};
use crate::model::ModelHandle;
use crate::section::SectionPoint;

pub use occupancy::{occupancy, Occupancy};
pub use pam::{pam, PamFit, PamOptions};
pub use rank::{diffits_ranking, diffits_tour, extreme_response_tour, lof_ranking, lof_tour, Direction};
pub use select::{along_var_tour, kmeans_tour, kmed_tour, random_tour};
pub use seriate::{path_length, seriate};

/// Largest row count PAM works on; larger data is subsampled.
pub const KMED_CAP: usize = 4000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum TourKind {
    Random,
    Kmeans,
    Kmed,
    Lof,
    Diffits,
    HiResponse,
    LoResponse,
    AlongVar,
}

impl std::str::FromStr for TourKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        serde_json::from_value(serde_json::Value::String(s.to_string()))
            .map_err(|_| Error::InvalidArgument(format!("unknown tour kind `{s}`")))
    }
}

impl std::fmt::Display for TourKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = serde_json::to_value(self).ok().and_then(|v| v.as_str().map(str::to_string)).unwrap_or_default();
        f.write_str(&s)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Tour {
    pub kind: TourKind,
    /// Section points in visiting order.
    pub points: Vec<SectionPoint>,
    /// Observation behind each point, where there is one.
    pub rows: Vec<Option<usize>>,
    /// Candidate rows in ranking order, before seriation (ranking tours only).
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub ranked: Vec<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub interpolated: Option<Vec<SectionPoint>>,
    pub length_requested: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub diagnostics: Option<Occupancy>,
}

impl Tour {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Adds `steps - 1` interpolated points between consecutive points.
    pub fn with_interpolation(mut self, steps: usize) -> Result<Tour> {
        self.interpolated = Some(interpolate(&self.points, steps)?);
        Ok(self)
    }

    pub fn with_diagnostics(mut self, df: &DataFrame, space: &ConditioningSpace, cfg: &crate::SimilarityConfig) -> Result<Tour> {
        self.diagnostics = Some(occupancy(df, space, &self.points, cfg)?);
        Ok(self)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct TourRequest {
    pub kind: TourKind,
    pub length: usize,
    /// Drawn from the session seed when absent; the resolved seed is logged.
    #[serde(default)]
    pub seed: Option<u64>,
    /// Variable to move along, for `alongVar` tours.
    #[serde(default)]
    pub var: Option<String>,
    /// Steps per segment for a dense interpolated path.
    #[serde(default)]
    pub interpolate: Option<usize>,
}

/// What a tour may draw on besides the data.
#[derive(Debug, Clone, Copy)]
pub struct TourInputs<'a> {
    pub response: Option<&'a str>,
    pub models: &'a [ModelHandle],
    /// Where `alongVar` tours start.
    pub start: Option<&'a SectionPoint>,
    /// Used for the occupancy diagnostics.
    pub similarity: &'a SimilarityConfig,
}

/// Builds the tour `req` asks for with the resolved `seed`, attaching
/// occupancy diagnostics and the interpolated path when requested.
pub fn build_tour(
    ts: &TourSpace<'_>,
    req: &TourRequest,
    seed: u64,
    inputs: &TourInputs<'_>,
    cancel: &CancelToken,
    progress: Option<Progress<'_>>,
) -> Result<Tour> {
    let l = req.length;
    let response = || inputs.response.ok_or(Error::NoResponse);
    let tour = match req.kind {
        TourKind::Random => random_tour(ts, l, seed)?,
        TourKind::Kmeans => kmeans_tour(ts, l, seed)?,
        TourKind::Kmed => kmed_tour(ts, l, seed, cancel, progress)?,
        TourKind::Lof => lof_tour(ts, response()?, inputs.models, l)?,
        TourKind::Diffits => diffits_tour(ts, inputs.models, l)?,
        TourKind::HiResponse => extreme_response_tour(ts, response()?, l, Direction::High)?,
        TourKind::LoResponse => extreme_response_tour(ts, response()?, l, Direction::Low)?,
        TourKind::AlongVar => {
            let var = req.var.as_deref().ok_or_else(|| Error::InvalidArgument("alongVar tours need `var`".into()))?;
            let start = inputs.start.ok_or_else(|| Error::InvalidArgument("alongVar tours need a start point".into()))?;
            along_var_tour(ts, start, var, l)?
        }
    };
    let tour = if ts.space.is_empty() { tour } else { tour.with_diagnostics(ts.df, &ts.space, inputs.similarity)? };
    match req.interpolate {
        Some(steps) => tour.with_interpolation(steps),
        None => Ok(tour),
    }
}

/// Shared cancellation flag for long tour computations.
#[derive(Debug, Clone, Default)]
pub struct CancelToken(Arc<AtomicBool>);

impl CancelToken {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn cancel(&self) {
        self.0.store(true, Ordering::Relaxed);
    }

    pub fn is_cancelled(&self) -> bool {
        self.0.load(Ordering::Relaxed)
    }

    pub(crate) fn check(&self) -> Result<()> {
        if self.is_cancelled() {
            Err(Error::Cancelled)
        } else {
            Ok(())
        }
    }
}

/// Fraction of work done, in [0, 1].
pub type Progress<'a> = &'a (dyn Fn(f64) + Sync);

/// What tours range over: the conditioning variables `C \ F` of a frame,
/// with the hidden coordinates `uF` carried along unchanged.
#[derive(Debug, Clone)]
pub struct TourSpace<'a> {
    pub df: &'a DataFrame,
    pub vars: Vec<String>,
    pub space: ConditioningSpace,
    pub frozen: BTreeMap<String, Value>,
}

impl<'a> TourSpace<'a> {
    pub fn new(df: &'a DataFrame, vars: &[String], frozen: BTreeMap<String, Value>) -> Result<Self> {
        Ok(TourSpace { df, vars: vars.to_vec(), space: ConditioningSpace::new(df, vars)?, frozen })
    }

    pub fn point_of_row(&self, row: usize) -> SectionPoint {
        SectionPoint { u_c: self.df.row_values(row, &self.vars).expect("vars belong to the frame"), u_f: self.frozen.clone() }
    }

    fn encode(&self, points: &[SectionPoint]) -> Result<EncodedRows> {
        let coords = points.iter().map(|p| self.space.encode_point(&p.u_c)).collect::<Result<Vec<_>>>()?;
        Ok(EncodedRows::from_coords(&self.space, &coords))
    }

    /// Seriates `points`, drops consecutive repeats and packages the tour.
    pub(crate) fn finish(
        &self,
        kind: TourKind,
        points: Vec<SectionPoint>,
        rows: Vec<Option<usize>>,
        length_requested: usize,
        seed: Option<u64>,
        reorder: bool,
    ) -> Result<Tour> {
        let order: Vec<usize> = if reorder && points.len() > 1 && !self.space.is_empty() {
            seriate(&self.encode(&points)?)
        } else {
            (0..points.len()).collect()
        };
        let mut out_points: Vec<SectionPoint> = Vec::with_capacity(points.len());
        let mut out_rows = Vec::with_capacity(points.len());
        for i in order {
            if out_points.last() == Some(&points[i]) {
                continue;
            }
            out_points.push(points[i].clone());
            out_rows.push(rows[i]);
        }
        Ok(Tour {
            kind,
            points: out_points,
            rows: out_rows,
            ranked: Vec::new(),
            interpolated: None,
            length_requested,
            seed,
            diagnostics: None,
        })
    }
}

/// Dense path through `points`: `steps - 1` points between each consecutive
/// pair, numeric coordinates linear in `t = j / steps`, categorical ones
/// switching to the later level at `t >= 0.5`.
pub fn interpolate(points: &[SectionPoint], steps: usize) -> Result<Vec<SectionPoint>> {
    if steps == 0 {
        return Err(Error::InvalidArgument("steps per segment must be at least 1".into()));
    }
    if points.len() < 2 {
        return Ok(points.to_vec());
    }
    let mut out = Vec::with_capacity((points.len() - 1) * steps + 1);
    for pair in points.windows(2) {
        let (a, b) = (&pair[0], &pair[1]);
        out.push(a.clone());
        for j in 1..steps {
            let t = j as f64 / steps as f64;
            let mix = |from: &BTreeMap<String, Value>, to: &BTreeMap<String, Value>| -> Result<BTreeMap<String, Value>> {
                from.iter()
                    .map(|(k, va)| {
                        let vb = to.get(k).ok_or_else(|| Error::InvalidArgument(format!("`{k}` missing from a tour point")))?;
                        let v = match (va, vb) {
                            (Value::Num(x), Value::Num(y)) => Value::Num(x + (y - x) * t),
                            _ if t < 0.5 => va.clone(),
                            _ => vb.clone(),
                        };
                        Ok((k.clone(), v))
                    })
                    .collect()
            };
            out.push(SectionPoint { u_c: mix(&a.u_c, &b.u_c)?, u_f: mix(&a.u_f, &b.u_f)? });
        }
    }
    out.push(points[points.len() - 1].clone());
    Ok(out)
}
