//! Synthetic numeric datasets for occupancy diagnostics.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::frame::{Column, DataFrame};

/// Mixture components and the sd of their centres per dimension.
pub const MIXTURE_COMPONENTS: usize = 5;
pub const MIXTURE_CENTER_SD: f64 = 2.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum SimKind {
    /// iid standard normal.
    Normal,
    /// iid uniform on [0, 1].
    Uniform,
    /// Equal-weight mixture of unit-sd spherical Gaussians with centres drawn
    /// from N(0, 2^2) per dimension.
    Mixture,
}

impl std::str::FromStr for SimKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        serde_json::from_value(serde_json::Value::String(s.to_string()))
            .map_err(|_| Error::InvalidArgument(format!("unknown simulation kind `{s}`")))
    }
}

/// `n` rows of `p` numeric columns named `x1..xp`.
pub fn simulate(kind: SimKind, n: usize, p: usize, seed: u64) -> Result<DataFrame> {
    if n == 0 || p == 0 {
        return Err(Error::InvalidArgument("simulation needs n >= 1 and p >= 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut cols = vec![Vec::with_capacity(n); p];
    match kind {
        SimKind::Normal => {
            for _ in 0..n {
                for c in cols.iter_mut() {
                    c.push(rng.sample(StandardNormal));
                }
            }
        }
        SimKind::Uniform => {
            for _ in 0..n {
                for c in cols.iter_mut() {
                    c.push(rng.random::<f64>());
                }
            }
        }
        SimKind::Mixture => {
            let centre = Normal::new(0.0, MIXTURE_CENTER_SD).expect("positive sd");
            let centres: Vec<Vec<f64>> =
                (0..MIXTURE_COMPONENTS).map(|_| (0..p).map(|_| centre.sample(&mut rng)).collect()).collect();
            for i in 0..n {
                let m = &centres[i % MIXTURE_COMPONENTS];
                for (c, mu) in cols.iter_mut().zip(m) {
                    c.push(mu + rng.sample::<f64, _>(StandardNormal));
                }
            }
        }
    }
    DataFrame::new(cols.into_iter().enumerate().map(|(j, v)| Column::numeric(format!("x{}", j + 1), v)).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frame::NumericStats;

    #[test]
    fn shapes_and_determinism() {
        for kind in [SimKind::Normal, SimKind::Uniform, SimKind::Mixture] {
            let a = simulate(kind, 50, 3, 9).unwrap();
            assert_eq!((a.nrows(), a.ncols()), (50, 3));
            assert_eq!(a.names().collect::<Vec<_>>(), vec!["x1", "x2", "x3"]);
            assert_eq!(a.to_csv().unwrap(), simulate(kind, 50, 3, 9).unwrap().to_csv().unwrap());
        }
        assert!(simulate(SimKind::Normal, 0, 3, 0).is_err());
    }

    #[test]
    fn marginal_moments() {
        let df = simulate(SimKind::Uniform, 20_000, 1, 1).unwrap();
        let s = NumericStats::of(df.columns()[0].as_numeric().unwrap());
        assert!(s.min >= 0.0 && s.max < 1.0);
        assert!((s.mean - 0.5).abs() < 0.01);
        let df = simulate(SimKind::Normal, 20_000, 1, 1).unwrap();
        let s = NumericStats::of(df.columns()[0].as_numeric().unwrap());
        assert!(s.mean.abs() < 0.03 && (s.sd - 1.0).abs() < 0.03);
    }

    #[test]
    fn kind_names() {
        assert_eq!("mixture".parse::<SimKind>().unwrap(), SimKind::Mixture);
        assert!("poisson".parse::<SimKind>().is_err());
    }
}
