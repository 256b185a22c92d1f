use std::cmp::Ordering;
use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::frame::{ColumnData, DataFrame};
use crate::model::{ModelHandle, Predictions};

use super::{Tour, TourKind, TourSpace};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum Direction {
    High,
    Low,
}

/// Rows sorted by descending key, ascending index on ties.
fn by_key_desc(keys: &[(usize, f64, f64)]) -> Vec<usize> {
    let mut v = keys.to_vec();
    v.sort_by(|a, b| {
        b.1.partial_cmp(&a.1)
            .unwrap_or(Ordering::Equal)
            .then(b.2.partial_cmp(&a.2).unwrap_or(Ordering::Equal))
            .then(a.0.cmp(&b.0))
    });
    v.into_iter().map(|k| k.0).collect()
}

fn predict_all(df: &DataFrame, models: &[ModelHandle]) -> Result<Vec<Predictions>> {
    models.iter().map(|m| m.predict_native(df)).collect()
}

/// Probability rows keyed by level name.
fn prob_rows(p: &Predictions) -> Option<(&[String], &[Vec<f64>])> {
    match p {
        Predictions::ProbMatrix { levels, probs } => Some((levels, probs)),
        _ => None,
    }
}

fn predicted_labels(p: &Predictions) -> Result<Vec<&str>> {
    let levels = p.levels().ok_or_else(|| {
        Error::SchemaMismatch(format!("{:?} predictions carry no class labels", p.kind()))
    })?;
    let codes = p.class_codes().expect("class-like predictions");
    Ok(codes.iter().map(|&c| levels[c as usize].as_str()).collect())
}

/// Rows that fit worst, in ranking order.
///
/// For a numeric response the key is the largest absolute residual over the
/// models; rows every model fits (to rounding) are left out. For a
/// categorical response only rows some model misclassifies qualify, ranked by
/// the largest `1 - p(observed class)` over probability models, else in row
/// order.
pub fn lof_ranking(df: &DataFrame, response: &str, models: &[ModelHandle]) -> Result<Vec<usize>> {
    if models.is_empty() {
        return Err(Error::InvalidArgument("lack-of-fit ranking needs a model".into()));
    }
    let preds = predict_all(df, models)?;
    match df.column(response)?.data() {
        ColumnData::Numeric(y) => {
            let fits = preds
                .iter()
                .map(|p| {
                    p.values().filter(|_| p.kind() == crate::PredictionKind::Numeric).ok_or_else(|| {
                        Error::SchemaMismatch(format!("numeric response needs numeric fits, got {:?}", p.kind()))
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            let scale = y.iter().fold(1.0f64, |m, v| m.max(v.abs()));
            let keys: Vec<(usize, f64, f64)> = (0..y.len())
                .map(|i| (i, fits.iter().map(|f| (y[i] - f[i]).abs()).fold(0.0, f64::max), 0.0))
                .filter(|k| k.1 > 1e-12 * scale)
                .collect();
            Ok(by_key_desc(&keys))
        }
        ColumnData::Categorical { codes, levels } => {
            let labels = preds.iter().map(predicted_labels).collect::<Result<Vec<_>>>()?;
            let keys: Vec<(usize, f64, f64)> = (0..codes.len())
                .filter_map(|i| {
                    let observed = levels[codes[i] as usize].as_str();
                    if labels.iter().all(|l| l[i] == observed) {
                        return None;
                    }
                    let miss = preds
                        .iter()
                        .filter_map(prob_rows)
                        .map(|(lv, probs)| {
                            1.0 - lv.iter().position(|l| l == observed).map_or(0.0, |c| probs[i][c])
                        })
                        .fold(0.0, f64::max);
                    Some((i, miss, 0.0))
                })
                .collect();
            Ok(by_key_desc(&keys))
        }
    }
}

/// Rows where the models disagree most, in ranking order; every row is ranked.
///
/// Numeric fits are keyed by the largest pairwise absolute difference. Class
/// fits are keyed by the number of distinct predicted labels, then by the
/// largest pairwise total-variation distance between probability rows.
pub fn diffits_ranking(df: &DataFrame, models: &[ModelHandle]) -> Result<Vec<usize>> {
    if models.len() < 2 {
        return Err(Error::NeedTwoModels("diffits tour"));
    }
    let preds = predict_all(df, models)?;
    let n = df.nrows();
    if preds.iter().all(|p| p.kind() == crate::PredictionKind::Numeric) {
        let fits: Vec<&[f64]> = preds.iter().map(|p| p.values().expect("numeric")).collect();
        let keys: Vec<(usize, f64, f64)> = (0..n)
            .map(|i| {
                let (lo, hi) = fits.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), f| (lo.min(f[i]), hi.max(f[i])));
                (i, hi - lo, 0.0)
            })
            .collect();
        return Ok(by_key_desc(&keys));
    }
    if preds.iter().any(|p| p.levels().is_none()) {
        return Err(Error::SchemaMismatch(
            "diffits needs all numeric or all class-valued fits".into(),
        ));
    }
    let labels = preds.iter().map(predicted_labels).collect::<Result<Vec<_>>>()?;
    let probs: Vec<(&[String], &[Vec<f64>])> = preds.iter().filter_map(prob_rows).collect();
    let keys: Vec<(usize, f64, f64)> = (0..n)
        .map(|i| {
            let mut distinct: Vec<&str> = labels.iter().map(|l| l[i]).collect();
            distinct.sort_unstable();
            distinct.dedup();
            let mut tv = 0.0f64;
            for a in 0..probs.len() {
                for b in a + 1..probs.len() {
                    tv = tv.max(total_variation(probs[a].0, &probs[a].1[i], probs[b].0, &probs[b].1[i]));
                }
            }
            (i, distinct.len() as f64, tv)
        })
        .collect();
    Ok(by_key_desc(&keys))
}

/// Half the L1 distance between two distributions over named levels.
fn total_variation(la: &[String], pa: &[f64], lb: &[String], pb: &[f64]) -> f64 {
    let mut mass: BTreeMap<&str, f64> = BTreeMap::new();
    for (l, p) in la.iter().zip(pa) {
        *mass.entry(l).or_default() += p;
    }
    for (l, p) in lb.iter().zip(pb) {
        *mass.entry(l).or_default() -= p;
    }
    0.5 * mass.values().map(|d| d.abs()).sum::<f64>()
}

fn ranked_tour(ts: &TourSpace<'_>, kind: TourKind, ranking: Vec<usize>, l: usize) -> Result<Tour> {
    let top: Vec<usize> = ranking.into_iter().take(l).collect();
    let points = top.iter().map(|&r| ts.point_of_row(r)).collect();
    let rows = top.iter().map(|&r| Some(r)).collect();
    let mut tour = ts.finish(kind, points, rows, l, None, true)?;
    tour.ranked = top;
    Ok(tour)
}

pub fn lof_tour(ts: &TourSpace<'_>, response: &str, models: &[ModelHandle], l: usize) -> Result<Tour> {
    ranked_tour(ts, TourKind::Lof, lof_ranking(ts.df, response, models)?, l)
}

pub fn diffits_tour(ts: &TourSpace<'_>, models: &[ModelHandle], l: usize) -> Result<Tour> {
    ranked_tour(ts, TourKind::Diffits, diffits_ranking(ts.df, models)?, l)
}

/// Rows with the largest (or smallest) response; ties go to the lower row.
pub fn extreme_response_tour(ts: &TourSpace<'_>, response: &str, l: usize, direction: Direction) -> Result<Tour> {
    let ColumnData::Numeric(y) = ts.df.column(response)?.data() else {
        return Err(Error::NeedNumericResponse("response-extreme tour"));
    };
    let sign = match direction {
        Direction::High => 1.0,
        Direction::Low => -1.0,
    };
    let keys: Vec<(usize, f64, f64)> = y.iter().enumerate().map(|(i, &v)| (i, sign * v, 0.0)).collect();
    let kind = match direction {
        Direction::High => TourKind::HiResponse,
        Direction::Low => TourKind::LoResponse,
    };
    ranked_tour(ts, kind, by_key_desc(&keys), l)
}
