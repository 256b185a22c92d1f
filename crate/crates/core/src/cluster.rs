//! k-means on dense row-major points.

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KmeansOptions {
    pub restarts: usize,
    pub max_iter: usize,
}

impl Default for KmeansOptions {
    fn default() -> Self {
        KmeansOptions { restarts: 5, max_iter: 100 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct KmeansFit {
    pub dim: usize,
    /// `k * dim` centroid coordinates, row-major.
    pub centers: Vec<f64>,
    pub assignment: Vec<usize>,
    /// Within-cluster sum of squares.
    pub inertia: f64,
    pub iterations: usize,
}

impl KmeansFit {
    pub fn k(&self) -> usize {
        self.centers.len() / self.dim.max(1)
    }

    pub fn center(&self, c: usize) -> &[f64] {
        &self.centers[c * self.dim..(c + 1) * self.dim]
    }

    pub fn nearest(&self, point: &[f64]) -> usize {
        nearest(&self.centers, self.dim, point).0
    }
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Nearest centre and its squared distance; the lowest index wins ties.
fn nearest(centers: &[f64], dim: usize, point: &[f64]) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (c, center) in centers.chunks_exact(dim.max(1)).enumerate() {
        let d = sq_dist(center, point);
        if d < best.1 {
            best = (c, d);
        }
    }
    best
}

/// Number of distinct rows, compared bitwise.
pub fn distinct_rows(points: &[f64], dim: usize) -> usize {
    if dim == 0 {
        return 0;
    }
    let mut rows: Vec<Vec<u64>> = points
        .chunks_exact(dim)
        .map(|r| r.iter().map(|x| (x + 0.0).to_bits()).collect())
        .collect();
    rows.sort_unstable();
    rows.dedup();
    rows.len()
}

fn plus_plus(points: &[f64], dim: usize, k: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let n = points.len() / dim;
    let row = |i: usize| &points[i * dim..(i + 1) * dim];
    let mut centers = Vec::with_capacity(k * dim);
    centers.extend_from_slice(row(rng.random_range(0..n)));
    let mut d2: Vec<f64> = (0..n).map(|i| sq_dist(row(i), &centers[..dim])).collect();
    while centers.len() < k * dim {
        let next = match WeightedIndex::new(&d2) {
            Ok(w) => w.sample(rng),
            // every point coincides with a centre already
            Err(_) => rng.random_range(0..n),
        };
        let start = centers.len();
        centers.extend_from_slice(row(next));
        let c = &centers[start..];
        for (i, d) in d2.iter_mut().enumerate() {
            *d = d.min(sq_dist(row(i), c));
        }
    }
    centers
}

fn lloyd(points: &[f64], dim: usize, mut centers: Vec<f64>, max_iter: usize) -> KmeansFit {
    let n = points.len() / dim;
    let k = centers.len() / dim;
    let mut assignment = vec![usize::MAX; n];
    let mut iterations = 0;
    loop {
        let next: Vec<(usize, f64)> = points.par_chunks_exact(dim).map(|p| nearest(&centers, dim, p)).collect();
        let changed = next.iter().zip(&assignment).any(|(a, b)| a.0 != *b);
        for (a, (c, _)) in assignment.iter_mut().zip(&next) {
            *a = *c;
        }
        if !changed || iterations >= max_iter {
            let inertia = next.iter().map(|(_, d)| d).sum();
            return KmeansFit { dim, centers, assignment, inertia, iterations };
        }
        iterations += 1;

        let mut sums = vec![0.0; k * dim];
        let mut counts = vec![0usize; k];
        for (i, &c) in assignment.iter().enumerate() {
            counts[c] += 1;
            sums[c * dim..(c + 1) * dim].iter_mut().zip(&points[i * dim..(i + 1) * dim]).for_each(|(s, x)| *s += x);
        }
        // an empty cluster takes over the point farthest from its centre
        let mut dists: Vec<f64> = next.iter().map(|(_, d)| *d).collect();
        for c in 0..k {
            if counts[c] > 0 {
                for v in &mut sums[c * dim..(c + 1) * dim] {
                    *v /= counts[c] as f64;
                }
                continue;
            }
            let far = dists
                .iter()
                .enumerate()
                .fold(0, |best, (i, &d)| if d > dists[best] { i } else { best });
            sums[c * dim..(c + 1) * dim].copy_from_slice(&points[far * dim..(far + 1) * dim]);
            dists[far] = 0.0;
        }
        centers = sums;
    }
}

/// One input column for [`Encoder`].
#[derive(Debug, Clone, Copy)]
pub(crate) enum Feature<'a> {
    Num(&'a [f64]),
    Cat { codes: &'a [u32], levels: usize },
}

#[derive(Debug, Clone, PartialEq)]
enum Slot {
    /// Standardized numeric column.
    Num { mean: f64, sd: f64 },
    /// Constant numeric column, dropped.
    Skip,
    OneHot(usize),
}

/// Standardizes varying numeric columns and one-hot encodes categorical ones.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct Encoder {
    slots: Vec<Slot>,
    dim: usize,
}

impl Encoder {
    pub(crate) fn fit(features: &[Feature<'_>]) -> Encoder {
        let slots: Vec<Slot> = features
            .iter()
            .map(|f| match f {
                Feature::Num(v) => {
                    let s = crate::frame::NumericStats::of(v);
                    if s.is_constant() {
                        Slot::Skip
                    } else {
                        Slot::Num { mean: s.mean, sd: s.sd }
                    }
                }
                Feature::Cat { levels, .. } => Slot::OneHot(*levels),
            })
            .collect();
        let dim = slots
            .iter()
            .map(|s| match s {
                Slot::Num { .. } => 1,
                Slot::Skip => 0,
                Slot::OneHot(l) => *l,
            })
            .sum();
        Encoder { slots, dim }
    }

    pub(crate) fn dim(&self) -> usize {
        self.dim
    }

    /// Row-major encoding of `n` rows.
    pub(crate) fn encode(&self, features: &[Feature<'_>], n: usize) -> Vec<f64> {
        let mut out = Vec::with_capacity(n * self.dim);
        for i in 0..n {
            for (slot, f) in self.slots.iter().zip(features) {
                match (slot, f) {
                    (Slot::Num { mean, sd }, Feature::Num(v)) => out.push((v[i] - mean) / sd),
                    (Slot::OneHot(l), Feature::Cat { codes, .. }) => {
                        out.extend((0..*l).map(|j| if codes[i] as usize == j { 1.0 } else { 0.0 }))
                    }
                    _ => {}
                }
            }
        }
        out
    }

    /// Original-scale value of numeric field `field` at standardized `z`;
    /// constant fields have no coordinate and return `None`.
    pub(crate) fn destandardize(&self, field: usize, z: f64) -> Option<f64> {
        match self.slots[field] {
            Slot::Num { mean, sd } => Some(mean + sd * z),
            _ => None,
        }
    }

    /// Offset of field `field` within an encoded row.
    pub(crate) fn offset(&self, field: usize) -> usize {
        self.slots[..field]
            .iter()
            .map(|s| match s {
                Slot::Num { .. } => 1,
                Slot::Skip => 0,
                Slot::OneHot(l) => *l,
            })
            .sum()
    }
}

/// Best of `opts.restarts` k-means++ seeded Lloyd runs; ties keep the earlier run.
pub fn kmeans(points: &[f64], dim: usize, k: usize, seed: u64, opts: KmeansOptions) -> Result<KmeansFit> {
    if dim == 0 || points.is_empty() || !points.len().is_multiple_of(dim) {
        return Err(Error::EmptyInput);
    }
    if k == 0 {
        return Err(Error::InvalidArgument("k must be at least 1".into()));
    }
    let distinct = distinct_rows(points, dim);
    if k > distinct {
        return Err(Error::TooFewDistinct { k, distinct });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut best: Option<KmeansFit> = None;
    for _ in 0..opts.restarts.max(1) {
        let init = plus_plus(points, dim, k, &mut rng);
        let fit = lloyd(points, dim, init, opts.max_iter);
        if best.as_ref().is_none_or(|b| fit.inertia < b.inertia) {
            best = Some(fit);
        }
    }
    Ok(best.expect("at least one restart"))
}
