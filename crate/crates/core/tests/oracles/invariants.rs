//! Similarity and distance invariants, checked case by case so the same
//! checks can run under any number of generated cases.

use proptest::prelude::*;
use rand::Rng;
use slicevis_core::metric::{distance, similarity_score, Coord, ConditioningSpace};
use slicevis_core::{ColumnKind, DataFrame, DistanceKind};

use super::{mixed_frame, range, rng, sd};

/// One generated case: a frame, a section point and two thresholds.
#[derive(Debug, Clone)]
pub struct MetricCase {
    pub seed: u64,
    pub n: usize,
    pub num: usize,
    pub cat: usize,
    pub sigma_a: f64,
    pub sigma_b: f64,
    /// Put the point exactly on an observation.
    pub on_row: bool,
}

/// Frames of up to 29 rows with at least one column, arbitrary points and
/// thresholds.
pub fn metric_cases() -> impl Strategy<Value = MetricCase> {
    (any::<u64>(), 1usize..30, 0usize..4, 0usize..3, 0.0f64..3.0, 0.0f64..3.0, any::<bool>()).prop_map(
        |(seed, n, num, cat, sigma_a, sigma_b, on_row)| MetricCase {
            seed,
            n,
            num: num.max(usize::from(cat == 0)),
            cat,
            sigma_a,
            sigma_b,
            on_row,
        },
    )
}

fn ensure(ok: bool, what: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(what())
    }
}

/// Distance from the definitions: sd-scaled Euclidean or Chebyshev with
/// infinite categorical mismatches, or range-scaled Gower with a unit per
/// mismatch. Constant numeric columns do not count.
fn reference_distance(df: &DataFrame, u: &[f64], ucat: &[u32], row: usize, kind: DistanceKind) -> f64 {
    let mut acc = 0.0f64;
    let (mut ni, mut ci) = (0, 0);
    for c in df.columns() {
        match c.kind() {
            ColumnKind::Numeric => {
                let x = c.as_numeric().unwrap();
                let (s, r) = (sd(x), range(x));
                let a = u[ni];
                ni += 1;
                if r <= 0.0 {
                    continue;
                }
                let diff = (a - x[row]).abs();
                match kind {
                    DistanceKind::Euclidean => acc += (diff / s).powi(2),
                    DistanceKind::Maxnorm => acc = acc.max(diff / s),
                    DistanceKind::Gower => acc += diff / r,
                }
            }
            ColumnKind::Categorical => {
                let mismatch = ucat[ci] != c.codes().unwrap()[row];
                ci += 1;
                if mismatch {
                    match kind {
                        DistanceKind::Gower => acc += 1.0,
                        _ => return f64::INFINITY,
                    }
                }
            }
        }
    }
    if kind == DistanceKind::Euclidean {
        acc.sqrt()
    } else {
        acc
    }
}

fn close(a: f64, b: f64) -> bool {
    a == b || (a - b).abs() <= 1e-12 * a.abs().max(b.abs()).max(1.0)
}

pub fn check_metric_case(c: &MetricCase) -> Result<(), String> {
    let mut r = rng(c.seed);
    let df = mixed_frame(&mut r, c.n, c.num, c.cat, 3, c.seed.is_multiple_of(2));
    let names: Vec<String> = df.names().map(str::to_string).collect();
    let space = ConditioningSpace::new(&df, &names).map_err(|e| e.to_string())?;
    let anchor = r.random_range(0..c.n);

    // section point in raw units, one entry per numeric / categorical column
    let mut u = Vec::new();
    let mut ucat = Vec::new();
    for col in df.columns() {
        match col.kind() {
            ColumnKind::Numeric => u.push(if c.on_row {
                col.as_numeric().unwrap()[anchor]
            } else if r.random_bool(0.3) {
                col.as_numeric().unwrap()[r.random_range(0..c.n)]
            } else {
                r.random_range(-4.0..4.0)
            }),
            ColumnKind::Categorical => {
                let k = col.levels().unwrap().len() as u32;
                ucat.push(if c.on_row { col.codes().unwrap()[anchor] } else { r.random_range(0..k) });
            }
        }
    }
    let coords: Vec<Coord> = {
        let (mut ni, mut ci) = (0, 0);
        let mut all = Vec::new();
        for col in df.columns() {
            match col.kind() {
                ColumnKind::Numeric => {
                    if space.names().any(|s| s == col.name()) {
                        all.push(Coord::Num(u[ni]));
                    }
                    ni += 1;
                }
                ColumnKind::Categorical => {
                    all.push(Coord::Cat(ucat[ci]));
                    ci += 1;
                }
            }
        }
        all
    };
    let (lo, hi) = if c.sigma_a <= c.sigma_b { (c.sigma_a, c.sigma_b) } else { (c.sigma_b, c.sigma_a) };

    for row in 0..c.n {
        let x = space.row(&df, row);
        let de = distance(&coords, &x, &space, DistanceKind::Euclidean);
        let dm = distance(&coords, &x, &space, DistanceKind::Maxnorm);
        let dg = distance(&coords, &x, &space, DistanceKind::Gower);
        for (kind, d) in [(DistanceKind::Euclidean, de), (DistanceKind::Maxnorm, dm), (DistanceKind::Gower, dg)] {
            let want = reference_distance(&df, &u, &ucat, row, kind);
            ensure(close(d, want), || format!("{kind:?} distance {d} != reference {want} (row {row})"))?;
            ensure(d >= 0.0, || format!("negative {kind:?} distance"))?;
        }
        ensure(dm <= de * (1.0 + 1e-12), || format!("maxnorm {dm} > euclidean {de}"))?;

        let mismatch = x.iter().zip(&coords).any(|(a, b)| matches!((a, b), (Coord::Cat(p), Coord::Cat(q)) if p != q));
        ensure(!mismatch || (de.is_infinite() && dm.is_infinite() && dg.is_finite()), || {
            format!("categorical mismatch gave euclidean {de}, maxnorm {dm}, gower {dg}")
        })?;
        let identical = x == coords;
        ensure((dg == 0.0) == identical, || format!("gower {dg} but identical = {identical}"))?;
        if c.on_row && row == anchor {
            ensure(de == 0.0 && dm == 0.0 && dg == 0.0, || "an observation is not at distance 0 from itself".into())?;
        }

        for d in [de, dm, dg] {
            for sigma in [0.0, lo, hi, f64::INFINITY] {
                let s = similarity_score(d, sigma);
                ensure((0.0..=1.0).contains(&s), || format!("score {s} outside [0, 1]"))?;
                if sigma.is_infinite() {
                    ensure(s == 1.0, || "infinite sigma must show everything".into())?;
                    continue;
                }
                ensure((s == 1.0) == (d == 0.0), || format!("score {s} at distance {d}, sigma {sigma}"))?;
                if sigma > 0.0 {
                    ensure((s == 0.0) == (d >= sigma), || format!("score {s} at distance {d}, sigma {sigma}"))?;
                    ensure(s == 0.0 || close(s, 1.0 - d / sigma) || d == 0.0, || format!("score {s} != 1 - d/sigma"))?;
                }
            }
            // visibility only grows with sigma
            ensure(similarity_score(d, lo) <= similarity_score(d, hi), || format!("score falls as sigma grows ({d})"))?;
        }
        for sigma in [lo, hi] {
            let visible_e = similarity_score(de, sigma) > 0.0;
            let visible_m = similarity_score(dm, sigma) > 0.0;
            ensure(!visible_e || visible_m, || format!("row {row} visible under euclidean but not maxnorm"))?;
        }
    }
    Ok(())
}
