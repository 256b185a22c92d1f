use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::frame::DataFrame;
use crate::metric::{distances, similarity, ConditioningSpace, SimilarityConfig};
use crate::section::SectionPoint;

/// How well a set of section points is populated by observations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Occupancy {
    /// Observations with positive similarity, per point.
    pub visible: Vec<usize>,
    /// Sum of similarities, per point.
    pub total_similarity: Vec<f64>,
    pub mean_visible: f64,
    pub mean_total_similarity: f64,
    /// Largest similarity each observation reaches over all points.
    #[serde(skip)]
    pub max_similarity: Vec<f64>,
    /// Share of observations visible from at least one point.
    pub visited_fraction: f64,
}

pub fn occupancy(df: &DataFrame, space: &ConditioningSpace, points: &[SectionPoint], cfg: &SimilarityConfig) -> Result<Occupancy> {
    cfg.validate()?;
    let coords = points.iter().map(|p| space.encode_point(&p.u_c)).collect::<Result<Vec<_>>>()?;
    let scores: Vec<Vec<f64>> = coords
        .par_iter()
        .map(|u| similarity(&distances(df, space, u, cfg.distance), cfg.sigma))
        .collect();
    let visible: Vec<usize> = scores.iter().map(|s| s.iter().filter(|&&x| x > 0.0).count()).collect();
    let total_similarity: Vec<f64> = scores.iter().map(|s| s.iter().sum()).collect();
    let mut max_similarity = vec![0.0f64; df.nrows()];
    for s in &scores {
        for (m, &x) in max_similarity.iter_mut().zip(s) {
            *m = m.max(x);
        }
    }
    let mean = |v: &[f64]| if v.is_empty() { 0.0 } else { v.iter().sum::<f64>() / v.len() as f64 };
    let visited = max_similarity.iter().filter(|&&x| x > 0.0).count();
    Ok(Occupancy {
        mean_visible: mean(&visible.iter().map(|&c| c as f64).collect::<Vec<_>>()),
        mean_total_similarity: mean(&total_similarity),
        visited_fraction: if df.nrows() == 0 { 0.0 } else { visited as f64 / df.nrows() as f64 },
        visible,
        total_similarity,
        max_similarity,
    })
}
