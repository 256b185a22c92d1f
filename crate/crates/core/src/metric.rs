//! Distances from a section point to observations, similarity scores and fading.
//!
//! Numeric coordinates are standardized to unit standard deviation for the
//! Euclidean and maxnorm distances; Gower divides by the column range instead.
//! Any categorical mismatch puts an observation at infinite Euclidean or maxnorm
//! distance. Constant numeric columns carry no information and are left out.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::frame::{ColumnData, DataFrame, NumericStats, Value};

/// Rows processed per rayon task in batch distance evaluation.
const PAR_CHUNK: usize = 4096;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum DistanceKind {
    Euclidean,
    #[default]
    Maxnorm,
    Gower,
}

impl std::str::FromStr for DistanceKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "euclidean" => Ok(DistanceKind::Euclidean),
            "maxnorm" => Ok(DistanceKind::Maxnorm),
            "gower" => Ok(DistanceKind::Gower),
            other => Err(Error::InvalidArgument(format!("unknown distance `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct SimilarityConfig {
    pub distance: DistanceKind,
    /// Threshold; `f64::INFINITY` means "show every observation".
    #[serde(with = "sigma_serde")]
    pub sigma: f64,
    pub fade_bins: u32,
}

impl Default for SimilarityConfig {
    fn default() -> Self {
        SimilarityConfig { distance: DistanceKind::Maxnorm, sigma: 1.0, fade_bins: 10 }
    }
}

impl SimilarityConfig {
    pub fn new(distance: DistanceKind, sigma: f64) -> Self {
        SimilarityConfig { distance, sigma, ..Default::default() }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.sigma >= 0.0) {
            return Err(Error::InvalidArgument(format!("sigma must be >= 0, got {}", self.sigma)));
        }
        if self.fade_bins == 0 {
            return Err(Error::InvalidArgument("fadeBins must be >= 1".into()));
        }
        Ok(())
    }
}

/// Serializes an infinite sigma as the string `"max"`.
pub mod sigma_serde {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(sigma: &f64, s: S) -> Result<S::Ok, S::Error> {
        if sigma.is_infinite() {
            s.serialize_str("max")
        } else {
            s.serialize_f64(*sigma)
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(f64),
            Text(String),
        }
        match Raw::deserialize(d)? {
            Raw::Num(x) => Ok(x),
            Raw::Text(t) if matches!(t.as_str(), "max" | "inf" | "all") => Ok(f64::INFINITY),
            Raw::Text(t) => Err(serde::de::Error::custom(format!("bad sigma `{t}`"))),
        }
    }
}

/// A resolved coordinate: a raw numeric value or a level code.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Coord {
    Num(f64),
    Cat(u32),
}

#[derive(Debug, Clone, PartialEq)]
pub enum SpaceVarKind {
    Numeric(NumericStats),
    Categorical { levels: Vec<String> },
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpaceVar {
    pub name: String,
    pub kind: SpaceVarKind,
}

/// The variables distances are computed over, with their scaling.
#[derive(Debug, Clone, PartialEq)]
pub struct ConditioningSpace {
    vars: Vec<SpaceVar>,
    excluded: Vec<String>,
}

impl ConditioningSpace {
    /// Builds the space over `vars`, leaving out constant numeric columns.
    pub fn new(df: &DataFrame, vars: &[String]) -> Result<Self> {
        let mut out = Vec::with_capacity(vars.len());
        let mut excluded = Vec::new();
        for name in vars {
            let col = df.column(name)?;
            match col.data() {
                ColumnData::Numeric(values) => {
                    let stats = NumericStats::of(values);
                    if stats.is_constant() {
                        excluded.push(name.clone());
                    } else {
                        out.push(SpaceVar { name: name.clone(), kind: SpaceVarKind::Numeric(stats) });
                    }
                }
                ColumnData::Categorical { levels, .. } => out.push(SpaceVar {
                    name: name.clone(),
                    kind: SpaceVarKind::Categorical { levels: levels.clone() },
                }),
            }
        }
        Ok(ConditioningSpace { vars: out, excluded })
    }

    pub fn vars(&self) -> &[SpaceVar] {
        &self.vars
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.vars.iter().map(|v| v.name.as_str())
    }

    pub fn len(&self) -> usize {
        self.vars.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vars.is_empty()
    }

    /// Constant numeric columns left out of every distance.
    pub fn excluded(&self) -> &[String] {
        &self.excluded
    }

    pub fn warnings(&self) -> Vec<String> {
        self.excluded
            .iter()
            .map(|v| format!("constant column `{v}` excluded from distances"))
            .collect()
    }

    pub fn is_all_numeric(&self) -> bool {
        self.vars.iter().all(|v| matches!(v.kind, SpaceVarKind::Numeric(_)))
    }

    pub fn encode_value(&self, var: usize, value: &Value) -> Result<Coord> {
        let v = &self.vars[var];
        match (&v.kind, value) {
            (SpaceVarKind::Numeric(_), Value::Num(x)) if x.is_finite() => Ok(Coord::Num(*x)),
            (SpaceVarKind::Categorical { levels }, Value::Level(l)) => levels
                .iter()
                .position(|x| x == l)
                .map(|i| Coord::Cat(i as u32))
                .ok_or_else(|| Error::InvalidValue {
                    var: v.name.clone(),
                    reason: format!("unknown level `{l}`"),
                }),
            _ => Err(Error::InvalidValue {
                var: v.name.clone(),
                reason: format!("`{value}` does not match the column kind"),
            }),
        }
    }

    pub fn decode(&self, var: usize, coord: Coord) -> Value {
        match (&self.vars[var].kind, coord) {
            (SpaceVarKind::Categorical { levels }, Coord::Cat(c)) => Value::Level(levels[c as usize].clone()),
            (_, Coord::Num(x)) => Value::Num(x),
            (SpaceVarKind::Numeric(_), Coord::Cat(c)) => Value::Num(c as f64),
        }
    }

    /// Resolves the coordinates of `point` for every space variable.
    pub fn encode_point(&self, point: &BTreeMap<String, Value>) -> Result<Vec<Coord>> {
        self.vars
            .iter()
            .enumerate()
            .map(|(i, v)| {
                let value = point.get(&v.name).ok_or_else(|| Error::InvalidValue {
                    var: v.name.clone(),
                    reason: "missing from section point".into(),
                })?;
                self.encode_value(i, value)
            })
            .collect()
    }

    pub fn row(&self, df: &DataFrame, row: usize) -> Vec<Coord> {
        self.columns(df).iter().map(|c| c.coord(row)).collect()
    }

    fn columns<'a>(&self, df: &'a DataFrame) -> Vec<SpaceColumn<'a>> {
        self.vars
            .iter()
            .map(|v| {
                let col = df.column(&v.name).expect("space built from this frame");
                match (col.data(), &v.kind) {
                    (ColumnData::Numeric(x), SpaceVarKind::Numeric(_)) => SpaceColumn::Num(x),
                    (ColumnData::Categorical { codes, .. }, SpaceVarKind::Categorical { .. }) => {
                        SpaceColumn::Cat(codes)
                    }
                    _ => panic!("column `{}` changed kind", v.name),
                }
            })
            .collect()
    }
}

enum SpaceColumn<'a> {
    Num(&'a [f64]),
    Cat(&'a [u32]),
}

impl SpaceColumn<'_> {
    fn coord(&self, row: usize) -> Coord {
        match self {
            SpaceColumn::Num(x) => Coord::Num(x[row]),
            SpaceColumn::Cat(c) => Coord::Cat(c[row]),
        }
    }
}

/// Distance between a section point `u` and an observation `x` over the space.
pub fn distance(u: &[Coord], x: &[Coord], space: &ConditioningSpace, kind: DistanceKind) -> f64 {
    let mut acc = 0.0f64;
    for ((a, b), var) in u.iter().zip(x).zip(&space.vars) {
        match (a, b, &var.kind) {
            (Coord::Num(a), Coord::Num(b), SpaceVarKind::Numeric(stats)) => {
                let diff = (a - b).abs();
                match kind {
                    DistanceKind::Euclidean => acc += (diff / stats.sd).powi(2),
                    DistanceKind::Maxnorm => acc = acc.max(diff / stats.sd),
                    DistanceKind::Gower => acc += diff / stats.range,
                }
            }
            (Coord::Cat(a), Coord::Cat(b), _) => {
                if a != b {
                    match kind {
                        DistanceKind::Gower => acc += 1.0,
                        _ => return f64::INFINITY,
                    }
                }
            }
            _ => panic!("coordinate kind mismatch for `{}`", var.name),
        }
    }
    match kind {
        DistanceKind::Euclidean => acc.sqrt(),
        _ => acc,
    }
}

/// Distances from `u` to every row of `df`.
pub fn distances(df: &DataFrame, space: &ConditioningSpace, u: &[Coord], kind: DistanceKind) -> Vec<f64> {
    let cols = space.columns(df);
    let n = df.nrows();
    let one = |row: usize| {
        let x: Vec<Coord> = cols.iter().map(|c| c.coord(row)).collect();
        distance(u, &x, space, kind)
    };
    if n < PAR_CHUNK {
        (0..n).map(one).collect()
    } else {
        (0..n).into_par_iter().with_min_len(PAR_CHUNK).map(one).collect()
    }
}

/// `max(0, 1 - d / sigma)`, with sigma = 0 matching only exact hits and an
/// infinite sigma giving every observation full similarity.
pub fn similarity_score(d: f64, sigma: f64) -> f64 {
    if sigma.is_infinite() {
        return 1.0;
    }
    if sigma == 0.0 {
        return if d == 0.0 { 1.0 } else { 0.0 };
    }
    if d == 0.0 {
        return 1.0;
    }
    if d >= sigma {
        return 0.0;
    }
    // keep s = 1 iff d = 0 and s = 0 iff d >= sigma exact under rounding
    (1.0 - d / sigma).clamp(f64::MIN_POSITIVE, 1.0 - f64::EPSILON / 2.0)
}

pub fn similarity(distances: &[f64], sigma: f64) -> Vec<f64> {
    distances.iter().map(|&d| similarity_score(d, sigma)).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Fade {
    pub index: usize,
    /// Bin in `1..=fade_bins`; the top bin is drawn unfaded.
    pub level: u32,
    pub alpha: f64,
}

/// Bins positive scores into `bins` equal-width intervals over (0, 1].
pub fn fade_level(score: f64, bins: u32) -> u32 {
    ((score * bins as f64).ceil() as u32).clamp(1, bins)
}

pub fn fade(scores: &[f64], bins: u32) -> Vec<Fade> {
    let bins = bins.max(1);
    scores
        .iter()
        .enumerate()
        .filter(|(_, &s)| s > 0.0)
        .map(|(index, &s)| {
            let level = fade_level(s, bins);
            Fade { index, level, alpha: level as f64 / bins as f64 }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct SimilarityResult {
    pub scores: Vec<f64>,
    pub visible: Vec<usize>,
    pub fade_level: Vec<u32>,
}

pub fn similarity_result(
    df: &DataFrame,
    space: &ConditioningSpace,
    u: &[Coord],
    cfg: &SimilarityConfig,
) -> SimilarityResult {
    let d = distances(df, space, u, cfg.distance);
    let scores = similarity(&d, cfg.sigma);
    let faded = fade(&scores, cfg.fade_bins);
    SimilarityResult {
        visible: faded.iter().map(|f| f.index).collect(),
        fade_level: faded.iter().map(|f| f.level).collect(),
        scores,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PairMetric {
    /// Euclidean distance on sd-standardized numeric values.
    StdEuclidean,
    /// Mean of per-variable range-normalized differences and mismatches.
    Gower,
}

/// Rows pre-scaled for repeated pairwise dissimilarity evaluation
/// (medoids, k-medoids, seriation).
#[derive(Debug, Clone)]
pub struct EncodedRows {
    n: usize,
    num_dim: usize,
    cat_dim: usize,
    num: Vec<f64>,
    cat: Vec<u32>,
    metric: PairMetric,
}

impl EncodedRows {
    pub fn from_frame(df: &DataFrame, space: &ConditioningSpace, rows: &[usize]) -> Self {
        let coords: Vec<Vec<Coord>> = rows.iter().map(|&r| space.row(df, r)).collect();
        Self::from_coords(space, &coords)
    }

    pub fn from_coords(space: &ConditioningSpace, coords: &[Vec<Coord>]) -> Self {
        let metric = if space.is_all_numeric() { PairMetric::StdEuclidean } else { PairMetric::Gower };
        let num_dim = space.vars.iter().filter(|v| matches!(v.kind, SpaceVarKind::Numeric(_))).count();
        let cat_dim = space.len() - num_dim;
        let mut num = Vec::with_capacity(coords.len() * num_dim);
        let mut cat = Vec::with_capacity(coords.len() * cat_dim);
        for row in coords {
            for (c, var) in row.iter().zip(&space.vars) {
                match (c, &var.kind) {
                    (Coord::Num(x), SpaceVarKind::Numeric(s)) => num.push(match metric {
                        PairMetric::StdEuclidean => x / s.sd,
                        PairMetric::Gower => x / s.range,
                    }),
                    (Coord::Cat(k), _) => cat.push(*k),
                    _ => panic!("coordinate kind mismatch for `{}`", var.name),
                }
            }
        }
        EncodedRows { n: coords.len(), num_dim, cat_dim, num, cat, metric }
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn metric(&self) -> PairMetric {
        self.metric
    }

    pub fn dissimilarity(&self, i: usize, j: usize) -> f64 {
        let a = &self.num[i * self.num_dim..(i + 1) * self.num_dim];
        let b = &self.num[j * self.num_dim..(j + 1) * self.num_dim];
        match self.metric {
            PairMetric::StdEuclidean => a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt(),
            PairMetric::Gower => {
                let p = self.num_dim + self.cat_dim;
                if p == 0 {
                    return 0.0;
                }
                let ca = &self.cat[i * self.cat_dim..(i + 1) * self.cat_dim];
                let cb = &self.cat[j * self.cat_dim..(j + 1) * self.cat_dim];
                let numeric: f64 = a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum();
                let mismatches = ca.iter().zip(cb).filter(|(x, y)| x != y).count() as f64;
                (numeric + mismatches) / p as f64
            }
        }
    }

    /// Full row-major dissimilarity matrix.
    pub fn matrix(&self) -> Vec<f64> {
        let n = self.n;
        let mut m = vec![0.0; n * n];
        m.par_chunks_mut(n.max(1)).enumerate().for_each(|(i, row)| {
            for (j, cell) in row.iter_mut().enumerate() {
                *cell = self.dissimilarity(i, j);
            }
        });
        m
    }
}
