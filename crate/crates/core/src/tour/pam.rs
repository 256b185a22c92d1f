use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::metric::EncodedRows;

use super::{CancelToken, Progress};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PamOptions {
    pub max_swaps: usize,
}

impl Default for PamOptions {
    fn default() -> Self {
        PamOptions { max_swaps: 50 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PamFit {
    /// Medoid positions within the encoded rows, in selection order.
    pub medoids: Vec<usize>,
    /// Sum of dissimilarities to the nearest medoid.
    pub cost: f64,
    pub swaps: usize,
}

/// Nearest and second-nearest medoid per point.
struct Assignment {
    near: Vec<usize>,
    d1: Vec<f64>,
    d2: Vec<f64>,
}

fn assign(d: &[f64], n: usize, medoids: &[usize]) -> Assignment {
    let mut near = vec![0; n];
    let mut d1 = vec![f64::INFINITY; n];
    let mut d2 = vec![f64::INFINITY; n];
    for o in 0..n {
        for (slot, &m) in medoids.iter().enumerate() {
            let x = d[o * n + m];
            if x < d1[o] {
                d2[o] = d1[o];
                d1[o] = x;
                near[o] = slot;
            } else if x < d2[o] {
                d2[o] = x;
            }
        }
    }
    Assignment { near, d1, d2 }
}

/// Partitioning around medoids: greedy BUILD, then the best improving swap
/// per pass (all swaps for a candidate evaluated together in O(n)) until
/// none improves or `max_swaps` is reached. Ties go to lower indices.
pub fn pam(rows: &EncodedRows, k: usize, opts: PamOptions, cancel: &CancelToken, progress: Option<Progress<'_>>) -> Result<PamFit> {
    let n = rows.len();
    if k == 0 || k > n {
        return Err(Error::InvalidArgument(format!("k-medoids needs 1 <= k <= {n}, got {k}")));
    }
    let d = rows.matrix();
    let report = |f: f64| {
        if let Some(p) = progress {
            p(f.clamp(0.0, 1.0));
        }
    };
    let total_steps = (k + opts.max_swaps) as f64;

    // BUILD
    let mut medoids = Vec::with_capacity(k);
    let mut is_medoid = vec![false; n];
    let mut nearest = vec![f64::INFINITY; n];
    for step in 0..k {
        cancel.check()?;
        let gains: Vec<f64> = (0..n)
            .into_par_iter()
            .map(|h| {
                if is_medoid[h] {
                    return f64::NEG_INFINITY;
                }
                let row = &d[h * n..(h + 1) * n];
                if step == 0 {
                    -row.iter().sum::<f64>()
                } else {
                    row.iter().zip(&nearest).map(|(x, near)| (near - x).max(0.0)).sum()
                }
            })
            .collect();
        let h = argmax_first(&gains);
        medoids.push(h);
        is_medoid[h] = true;
        for (o, near) in nearest.iter_mut().enumerate() {
            *near = near.min(d[h * n + o]);
        }
        report((step + 1) as f64 / total_steps);
    }

    // SWAP
    let mut a = assign(&d, n, &medoids);
    let mut cost: f64 = a.d1.iter().sum();
    let mut swaps = 0;
    while swaps < opts.max_swaps && k < n {
        cancel.check()?;
        let candidates: Vec<(f64, usize)> = (0..n)
            .into_par_iter()
            .map(|h| {
                if is_medoid[h] {
                    return (f64::INFINITY, 0);
                }
                let mut shared = 0.0;
                let mut delta = vec![0.0; k];
                for o in 0..n {
                    let doh = d[o * n + h];
                    let gain = (doh - a.d1[o]).min(0.0);
                    shared += gain;
                    delta[a.near[o]] += doh.min(a.d2[o]) - a.d1[o] - gain;
                }
                let slot = argmin_first(&delta);
                (shared + delta[slot], slot)
            })
            .collect();
        let h = argmin_first(&candidates.iter().map(|c| c.0).collect::<Vec<_>>());
        let (change, slot) = candidates[h];
        if !(change < -1e-12 * cost.max(1.0)) {
            break;
        }
        is_medoid[medoids[slot]] = false;
        is_medoid[h] = true;
        medoids[slot] = h;
        a = assign(&d, n, &medoids);
        cost = a.d1.iter().sum();
        swaps += 1;
        report((k + swaps) as f64 / total_steps);
    }
    report(1.0);
    Ok(PamFit { medoids, cost, swaps })
}

fn argmax_first(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate().skip(1) {
        if x > v[best] {
            best = i;
        }
    }
    best
}

fn argmin_first(v: &[f64]) -> usize {
    crate::frame::argmin_first(v)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frame::{Column, DataFrame};
    use crate::metric::ConditioningSpace;

    fn line(xs: &[f64]) -> EncodedRows {
        let df = DataFrame::new(vec![Column::numeric("x", xs.to_vec())]).unwrap();
        let space = ConditioningSpace::new(&df, &["x".into()]).unwrap();
        EncodedRows::from_frame(&df, &space, &(0..xs.len()).collect::<Vec<_>>())
    }

    #[test]
    fn two_groups_on_a_line() {
        let rows = line(&[0.0, 1.0, 10.0, 11.0]);
        let fit = pam(&rows, 2, PamOptions::default(), &CancelToken::new(), None).unwrap();
        let mut m = fit.medoids.clone();
        m.sort();
        assert!(m[0] <= 1 && m[1] >= 2);
    }

    #[test]
    fn saturated_k_takes_every_row() {
        let rows = line(&[0.0, 4.0, 1.0, 9.0]);
        let fit = pam(&rows, 4, PamOptions::default(), &CancelToken::new(), None).unwrap();
        let mut m = fit.medoids.clone();
        m.sort();
        assert_eq!(m, vec![0, 1, 2, 3]);
        assert_eq!(fit.cost, 0.0);
    }

    #[test]
    fn cancellation_and_progress() {
        let rows = line(&(0..50).map(f64::from).collect::<Vec<_>>());
        let token = CancelToken::new();
        token.cancel();
        assert!(matches!(pam(&rows, 3, PamOptions::default(), &token, None), Err(Error::Cancelled)));
        let seen = std::sync::Mutex::new(Vec::new());
        let cb = |f: f64| seen.lock().unwrap().push(f);
        pam(&rows, 3, PamOptions::default(), &CancelToken::new(), Some(&cb)).unwrap();
        let seen = seen.into_inner().unwrap();
        assert_eq!(seen.last(), Some(&1.0));
        assert!(seen.windows(2).all(|w| w[0] <= w[1]));
    }
}
