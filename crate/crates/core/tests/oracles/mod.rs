//! Brute-force reference implementations. Each one is written from the
//! definitions, shares no code with the library, and trades speed for
//! obviousness.
#![allow(dead_code)]

pub mod checks;
pub mod invariants;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use slicevis_core::{Column, ColumnKind, DataFrame, Predictions, Value};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// `num` numeric columns `x1..` and `cat` categorical columns `g1..` with
/// up to `levels` levels each. Numeric values are drawn from a small grid
/// when `coarse`, which makes ties common.
pub fn mixed_frame(r: &mut impl Rng, n: usize, num: usize, cat: usize, levels: usize, coarse: bool) -> DataFrame {
    let mut cols = Vec::new();
    for j in 0..num {
        let v: Vec<f64> = (0..n)
            .map(|_| if coarse { r.random_range(0..6) as f64 } else { r.random_range(-3.0..3.0) })
            .collect();
        cols.push(Column::numeric(format!("x{}", j + 1), v));
    }
    for j in 0..cat {
        let labels: Vec<String> = (0..n).map(|_| format!("l{}", r.random_range(0..levels.max(1)))).collect();
        cols.push(Column::from_labels(format!("g{}", j + 1), &labels));
    }
    DataFrame::new(cols).unwrap()
}

/// Sample standard deviation.
pub fn sd(x: &[f64]) -> f64 {
    let m = x.iter().sum::<f64>() / x.len() as f64;
    (x.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (x.len() as f64 - 1.0)).sqrt()
}

pub fn range(x: &[f64]) -> f64 {
    x.iter().cloned().fold(f64::NEG_INFINITY, f64::max) - x.iter().cloned().fold(f64::INFINITY, f64::min)
}

/// Pairwise dissimilarity matrix over `vars`: Euclidean on sd-scaled values
/// when all are numeric, else Gower (range-scaled differences plus
/// mismatches). Constant numeric columns are ignored.
pub fn dissimilarity_matrix(df: &DataFrame, vars: &[String]) -> Vec<Vec<f64>> {
    let n = df.nrows();
    let cols: Vec<&Column> = vars.iter().map(|v| df.column(v).unwrap()).collect();
    let all_numeric = cols.iter().all(|c| c.kind() == ColumnKind::Numeric);
    let mut d = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in 0..n {
            let mut acc = 0.0;
            for c in &cols {
                match c.kind() {
                    ColumnKind::Numeric => {
                        let x = c.as_numeric().unwrap();
                        let (s, r) = (sd(x), range(x));
                        if r == 0.0 {
                            continue;
                        }
                        if all_numeric {
                            acc += ((x[i] - x[j]) / s).powi(2);
                        } else {
                            acc += (x[i] - x[j]).abs() / r;
                        }
                    }
                    ColumnKind::Categorical => {
                        let g = c.codes().unwrap();
                        acc += (g[i] != g[j]) as u8 as f64;
                    }
                }
            }
            d[i][j] = if all_numeric { acc.sqrt() } else { acc };
        }
    }
    d
}

/// Row minimizing the total dissimilarity to all rows; lowest index on ties.
pub fn medoid(df: &DataFrame, vars: &[String]) -> usize {
    let d = dissimilarity_matrix(df, vars);
    let totals: Vec<f64> = d.iter().map(|r| r.iter().sum()).collect();
    let mut best = 0;
    for i in 1..totals.len() {
        if totals[i] < totals[best] * (1.0 - 1e-12) {
            best = i;
        }
    }
    best
}

/// Sum over rows of the distance to the nearest medoid.
pub fn clustering_cost(d: &[Vec<f64>], medoids: &[usize]) -> f64 {
    d.iter().map(|row| medoids.iter().map(|&m| row[m]).fold(f64::INFINITY, f64::min)).sum()
}

/// Minimum clustering cost over every `k`-subset of rows.
pub fn optimal_medoid_cost(d: &[Vec<f64>], k: usize) -> f64 {
    fn rec(d: &[Vec<f64>], k: usize, start: usize, chosen: &mut Vec<usize>, best: &mut f64) {
        if chosen.len() == k {
            *best = best.min(clustering_cost(d, chosen));
            return;
        }
        for i in start..d.len() {
            chosen.push(i);
            rec(d, k, i + 1, chosen, best);
            chosen.pop();
        }
    }
    let mut best = f64::INFINITY;
    rec(d, k, 0, &mut Vec::new(), &mut best);
    best
}

/// Length of the open path visiting `order` in sequence.
pub fn path_length(d: &[Vec<f64>], order: &[usize]) -> f64 {
    order.windows(2).map(|w| d[w[0]][w[1]]).sum()
}

/// Shortest open Hamiltonian path, by enumerating every permutation.
pub fn optimal_path_length(d: &[Vec<f64>]) -> f64 {
    fn rec(d: &[Vec<f64>], path: &mut Vec<usize>, used: &mut [bool], len: f64, best: &mut f64) {
        if len >= *best {
            return;
        }
        if path.len() == d.len() {
            *best = len;
            return;
        }
        for i in 0..d.len() {
            if used[i] {
                continue;
            }
            let step = path.last().map_or(0.0, |&p| d[p][i]);
            used[i] = true;
            path.push(i);
            rec(d, path, used, len + step, best);
            path.pop();
            used[i] = false;
        }
    }
    let mut best = f64::INFINITY;
    rec(d, &mut Vec::new(), &mut vec![false; d.len()], 0.0, &mut best);
    best
}

/// The `l` rows with the largest keys, found by repeated linear scans; the
/// lowest row index wins ties. Rows with `None` keys never qualify.
pub fn top_by_scan(keys: &[Option<(f64, f64)>], l: usize) -> Vec<usize> {
    let mut taken = vec![false; keys.len()];
    let mut out = Vec::new();
    while out.len() < l {
        let mut best: Option<usize> = None;
        for (i, k) in keys.iter().enumerate() {
            let Some(k) = k else { continue };
            if taken[i] {
                continue;
            }
            let better = match best {
                None => true,
                Some(b) => {
                    let kb = keys[b].unwrap();
                    k.0 > kb.0 || (k.0 == kb.0 && k.1 > kb.1)
                }
            };
            if better {
                best = Some(i);
            }
        }
        let Some(b) = best else { break };
        taken[b] = true;
        out.push(b);
    }
    out
}

fn label_of(p: &Predictions, i: usize) -> String {
    match p {
        Predictions::Class { levels, codes } => levels[codes[i] as usize].clone(),
        Predictions::ProbMatrix { levels, probs } => {
            let row = &probs[i];
            let mut b = 0;
            for c in 0..row.len() {
                if row[c] > row[b] {
                    b = c;
                }
            }
            levels[b].clone()
        }
        other => panic!("no labels in {other:?}"),
    }
}

/// Lack-of-fit keys. Numeric response: the largest absolute residual over
/// models, rows fit exactly (to 1e-12 relative) excluded. Categorical: rows
/// some model gets wrong, keyed by the largest `1 - p(observed)` over
/// probability models.
pub fn lof_keys(response: &Column, fits: &[Predictions]) -> Vec<Option<(f64, f64)>> {
    let n = response.len();
    match response.kind() {
        ColumnKind::Numeric => {
            let y = response.as_numeric().unwrap();
            let scale = y.iter().fold(1.0f64, |m, v| m.max(v.abs()));
            (0..n)
                .map(|i| {
                    let r = fits
                        .iter()
                        .map(|f| match f {
                            Predictions::Numeric { values } => (y[i] - values[i]).abs(),
                            other => panic!("{other:?}"),
                        })
                        .fold(0.0, f64::max);
                    (r > 1e-12 * scale).then_some((r, 0.0))
                })
                .collect()
        }
        ColumnKind::Categorical => (0..n)
            .map(|i| {
                let Value::Level(obs) = response.value(i) else { unreachable!() };
                if fits.iter().all(|f| label_of(f, i) == obs) {
                    return None;
                }
                let mut miss = 0.0f64;
                for f in fits {
                    if let Predictions::ProbMatrix { levels, probs } = f {
                        let p = levels.iter().position(|l| *l == obs).map_or(0.0, |c| probs[i][c]);
                        miss = miss.max(1.0 - p);
                    }
                }
                Some((miss, 0.0))
            })
            .collect(),
    }
}

/// Fit-divergence keys: max - min for numeric fits; for class fits the
/// number of distinct labels, then the largest pairwise total-variation
/// distance between probability rows.
pub fn diffits_keys(fits: &[Predictions]) -> Vec<Option<(f64, f64)>> {
    let n = match &fits[0] {
        Predictions::Numeric { values } => values.len(),
        Predictions::Class { codes, .. } => codes.len(),
        Predictions::ProbMatrix { probs, .. } => probs.len(),
        other => panic!("{other:?}"),
    };
    (0..n)
        .map(|i| {
            if let Predictions::Numeric { .. } = fits[0] {
                let v: Vec<f64> = fits.iter().map(|f| f.values().unwrap()[i]).collect();
                let hi = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                let lo = v.iter().cloned().fold(f64::INFINITY, f64::min);
                return Some((hi - lo, 0.0));
            }
            let mut labels: Vec<String> = fits.iter().map(|f| label_of(f, i)).collect();
            labels.sort();
            labels.dedup();
            let dists: Vec<std::collections::BTreeMap<String, f64>> = fits
                .iter()
                .filter_map(|f| match f {
                    Predictions::ProbMatrix { levels, probs } => {
                        Some(levels.iter().cloned().zip(probs[i].iter().cloned()).collect())
                    }
                    _ => None,
                })
                .collect();
            let mut tv = 0.0f64;
            for a in 0..dists.len() {
                for b in 0..dists.len() {
                    let mut keys: Vec<&String> = dists[a].keys().chain(dists[b].keys()).collect();
                    keys.sort();
                    keys.dedup();
                    let l1: f64 = keys
                        .iter()
                        .map(|k| (dists[a].get(*k).unwrap_or(&0.0) - dists[b].get(*k).unwrap_or(&0.0)).abs())
                        .sum();
                    tv = tv.max(0.5 * l1);
                }
            }
            Some((labels.len() as f64, tv))
        })
        .collect()
}

/// Least-squares design for `inputs`: intercept, numeric columns as is,
/// categorical columns as indicators of every level but the first.
pub fn design_row(df: &DataFrame, inputs: &[String], row: usize) -> Vec<f64> {
    let mut x = vec![1.0];
    for name in inputs {
        let c = df.column(name).unwrap();
        match c.kind() {
            ColumnKind::Numeric => x.push(c.as_numeric().unwrap()[row]),
            ColumnKind::Categorical => {
                let code = c.codes().unwrap()[row];
                for l in 1..c.levels().unwrap().len() as u32 {
                    x.push((code == l) as u8 as f64);
                }
            }
        }
    }
    x
}

/// Coefficients from the normal equations `X'X b = X'y`.
pub fn normal_equations(df: &DataFrame, inputs: &[String], response: &str) -> Vec<f64> {
    let rows: Vec<Vec<f64>> = (0..df.nrows()).map(|i| design_row(df, inputs, i)).collect();
    let p = rows[0].len();
    let x = DMatrix::from_fn(rows.len(), p, |i, j| rows[i][j]);
    let y = DVector::from_column_slice(df.column(response).unwrap().as_numeric().unwrap());
    let xtx = x.transpose() * &x;
    let xty = x.transpose() * y;
    xtx.cholesky().expect("full-rank design").solve(&xty).iter().cloned().collect()
}

/// The closed-form plane at named values; categorical values are matched
/// against the training levels of `df`.
pub fn plane_at(beta: &[f64], df: &DataFrame, inputs: &[String], values: &std::collections::BTreeMap<String, Value>) -> f64 {
    let mut x = vec![1.0];
    for name in inputs {
        let c = df.column(name).unwrap();
        match (&values[name], c.levels()) {
            (Value::Num(v), None) => x.push(*v),
            (Value::Level(l), Some(levels)) => {
                for level in &levels[1..] {
                    x.push((level == l) as u8 as f64);
                }
            }
            (v, _) => panic!("value {v:?} does not fit `{name}`"),
        }
    }
    x.iter().zip(beta).map(|(a, b)| a * b).sum()
}
