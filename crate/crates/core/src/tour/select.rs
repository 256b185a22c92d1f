use crate::cluster::{kmeans, Encoder, Feature, KmeansOptions};
use crate::error::{Error, Result};
use crate::frame::{subsample_rows, ColumnData, Value};
use crate::metric::{EncodedRows, SpaceVarKind};
use crate::section::SectionPoint;

use super::{pam, CancelToken, PamOptions, Progress, Tour, TourKind, TourSpace, KMED_CAP};

fn check_length(l: usize) -> Result<()> {
    if l == 0 {
        return Err(Error::InvalidArgument("tour length must be at least 1".into()));
    }
    Ok(())
}

/// `l` distinct random observations (all of them when `l >= n`), seriated.
pub fn random_tour(ts: &TourSpace<'_>, l: usize, seed: u64) -> Result<Tour> {
    check_length(l)?;
    let rows = subsample_rows(ts.df.nrows(), l, seed);
    let points = rows.iter().map(|&r| ts.point_of_row(r)).collect();
    ts.finish(TourKind::Random, points, rows.into_iter().map(Some).collect(), l, Some(seed), true)
}

/// Centroids of a k-means clustering with `k = l` on standardized numeric and
/// one-hot categorical coordinates. Numeric centroid coordinates are mapped
/// back to the data scale; categorical ones take the cluster's modal level.
pub fn kmeans_tour(ts: &TourSpace<'_>, l: usize, seed: u64) -> Result<Tour> {
    check_length(l)?;
    if ts.space.is_empty() {
        return Err(Error::AllConstant);
    }
    let df = ts.df;
    let n = df.nrows();
    let cols = ts
        .space
        .vars()
        .iter()
        .map(|v| df.column(&v.name).map(|c| c.data()))
        .collect::<Result<Vec<_>>>()?;
    let features: Vec<Feature<'_>> = cols
        .iter()
        .map(|c| match c {
            ColumnData::Numeric(x) => Feature::Num(x),
            ColumnData::Categorical { codes, levels } => Feature::Cat { codes, levels: levels.len() },
        })
        .collect();
    let encoder = Encoder::fit(&features);
    let fit = kmeans(&encoder.encode(&features, n), encoder.dim(), l, seed, KmeansOptions::default())?;

    let mut points = Vec::with_capacity(fit.k());
    for c in 0..fit.k() {
        let center = fit.center(c);
        let mut point = SectionPoint { u_c: Default::default(), u_f: ts.frozen.clone() };
        for (f, var) in ts.space.vars().iter().enumerate() {
            let value = match (&var.kind, cols[f]) {
                (SpaceVarKind::Numeric(stats), _) => {
                    Value::Num(encoder.destandardize(f, center[encoder.offset(f)]).unwrap_or(stats.mean))
                }
                (SpaceVarKind::Categorical { levels }, ColumnData::Categorical { codes, .. }) => {
                    let mut counts = vec![0usize; levels.len()];
                    for (code, _) in codes.iter().zip(&fit.assignment).filter(|(_, &a)| a == c) {
                        counts[*code as usize] += 1;
                    }
                    let code = if counts.iter().all(|&k| k == 0) {
                        // empty cluster: fall back to the heaviest one-hot coordinate
                        let off = encoder.offset(f);
                        crate::model::argmax_first(&center[off..off + levels.len()])
                    } else {
                        first_max(&counts)
                    };
                    Value::Level(levels[code].clone())
                }
                _ => unreachable!("space kinds follow the columns"),
            };
            point.u_c.insert(var.name.clone(), value);
        }
        for name in ts.space.excluded() {
            point.u_c.insert(name.clone(), df.column(name)?.value(0));
        }
        points.push(point);
    }
    let rows = vec![None; points.len()];
    ts.finish(TourKind::Kmeans, points, rows, l, Some(seed), true)
}

/// Lowest index among the largest counts.
fn first_max(counts: &[usize]) -> usize {
    let mut best = 0;
    for (i, &c) in counts.iter().enumerate() {
        if c > counts[best] {
            best = i;
        }
    }
    best
}

/// Medoids of a PAM clustering with `k = l`, on at most [`KMED_CAP`] rows.
/// Each point is an observation, so every slice through one holds at least
/// that observation.
pub fn kmed_tour(
    ts: &TourSpace<'_>,
    l: usize,
    seed: u64,
    cancel: &CancelToken,
    progress: Option<Progress<'_>>,
) -> Result<Tour> {
    check_length(l)?;
    if ts.space.is_empty() {
        return Err(Error::AllConstant);
    }
    let rows = subsample_rows(ts.df.nrows(), KMED_CAP, seed);
    let encoded = EncodedRows::from_frame(ts.df, &ts.space, &rows);
    let fit = pam(&encoded, l.min(rows.len()), PamOptions::default(), cancel, progress)?;
    let medoids: Vec<usize> = fit.medoids.iter().map(|&m| rows[m]).collect();
    let points = medoids.iter().map(|&r| ts.point_of_row(r)).collect();
    ts.finish(TourKind::Kmed, points, medoids.into_iter().map(Some).collect(), l, Some(seed), true)
}

/// Moves along `var` from `start` with every other coordinate held: `l`
/// equally spaced values over the observed range of a numeric variable, or
/// each level of a categorical one.
pub fn along_var_tour(ts: &TourSpace<'_>, start: &SectionPoint, var: &str, l: usize) -> Result<Tour> {
    if !ts.vars.iter().any(|v| v == var) {
        return Err(Error::InvalidArgument(format!("`{var}` is not a tour variable")));
    }
    let values: Vec<Value> = match ts.df.column(var)?.data() {
        ColumnData::Numeric(x) => {
            if l < 2 {
                return Err(Error::InvalidArgument("a numeric path needs at least 2 steps".into()));
            }
            let stats = crate::frame::NumericStats::of(x);
            if stats.is_constant() {
                return Err(Error::ZeroRange(var.to_string()));
            }
            (0..l)
                .map(|i| {
                    let v = if i == l - 1 {
                        stats.max
                    } else {
                        stats.min + stats.range * i as f64 / (l - 1) as f64
                    };
                    Value::Num(v)
                })
                .collect()
        }
        ColumnData::Categorical { levels, .. } => levels.iter().cloned().map(Value::Level).collect(),
    };
    let points: Vec<SectionPoint> = values
        .into_iter()
        .map(|v| {
            let mut p = start.clone();
            p.u_c.insert(var.to_string(), v);
            p
        })
        .collect();
    let rows = vec![None; points.len()];
    ts.finish(TourKind::AlongVar, points, rows, l, None, false)
}
