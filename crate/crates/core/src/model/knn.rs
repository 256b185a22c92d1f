use std::cmp::Ordering;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::frame::{DataFrame, NumericStats};

use super::{encode_inputs, FieldValues, InputField, Predictions, Predictor, Target};

/// k nearest neighbours on sd-standardized numeric inputs; a categorical
/// mismatch adds 1 to the squared distance. Constant numeric inputs are ignored.
#[derive(Debug)]
pub(crate) struct KnnModel {
    schema: Vec<InputField>,
    k: usize,
    /// (field, scale) for numeric fields that vary.
    numeric: Vec<(usize, f64)>,
    categorical: Vec<usize>,
    train_num: Vec<f64>,
    train_cat: Vec<u32>,
    n_train: usize,
    target: Target,
}

impl KnnModel {
    pub(crate) fn fit(schema: &[InputField], inputs: &[FieldValues<'_>], target: Target, k: usize) -> Result<Self> {
        let n = match &target {
            Target::Numeric(y) => y.len(),
            Target::Class { codes, .. } => codes.len(),
        };
        if k == 0 || k > n {
            return Err(Error::InvalidModel(format!("knn needs 1 <= k <= n ({n}), got {k}")));
        }
        let mut numeric = Vec::new();
        let mut categorical = Vec::new();
        for (f, values) in inputs.iter().enumerate() {
            match values {
                FieldValues::Num(v) => {
                    let stats = NumericStats::of(v);
                    if !stats.is_constant() {
                        numeric.push((f, stats.sd));
                    }
                }
                FieldValues::Cat(_) => categorical.push(f),
            }
        }
        let (train_num, train_cat) = pack(inputs, &numeric, &categorical, n);
        Ok(KnnModel { schema: schema.to_vec(), k, numeric, categorical, train_num, train_cat, n_train: n, target })
    }

    fn neighbours(&self, q_num: &[f64], q_cat: &[u32]) -> Vec<usize> {
        let dn = self.numeric.len();
        let dc = self.categorical.len();
        let n = self.n_train;
        let mut d: Vec<(f64, usize)> = (0..n)
            .map(|i| {
                let num: f64 = self.train_num[i * dn..(i + 1) * dn]
                    .iter()
                    .zip(q_num)
                    .map(|(a, b)| (a - b).powi(2))
                    .sum();
                let cat = self.train_cat[i * dc..(i + 1) * dc].iter().zip(q_cat).filter(|(a, b)| a != b).count();
                (num + cat as f64, i)
            })
            .collect();
        let by = |a: &(f64, usize), b: &(f64, usize)| a.0.partial_cmp(&b.0).unwrap_or(Ordering::Equal).then(a.1.cmp(&b.1));
        if self.k < n {
            d.select_nth_unstable_by(self.k - 1, by);
            d.truncate(self.k);
        }
        d.into_iter().map(|(_, i)| i).collect()
    }

}

fn pack(inputs: &[FieldValues<'_>], numeric: &[(usize, f64)], categorical: &[usize], n: usize) -> (Vec<f64>, Vec<u32>) {
    let mut num = Vec::with_capacity(n * numeric.len());
    let mut cat = Vec::with_capacity(n * categorical.len());
    for i in 0..n {
        for &(f, sd) in numeric {
            let FieldValues::Num(v) = &inputs[f] else { unreachable!() };
            num.push(v[i] / sd);
        }
        for &f in categorical {
            let FieldValues::Cat(c) = &inputs[f] else { unreachable!() };
            cat.push(c[i]);
        }
    }
    (num, cat)
}

impl Predictor for KnnModel {
    fn predict(&self, rows: &DataFrame) -> Result<Predictions> {
        let inputs = encode_inputs(&self.schema, rows)?;
        let n = rows.nrows();
        let (q_num, q_cat) = pack(&inputs, &self.numeric, &self.categorical, n);
        let dn = self.numeric.len();
        let dc = self.categorical.len();
        let neighbours: Vec<Vec<usize>> = (0..n)
            .into_par_iter()
            .map(|i| self.neighbours(&q_num[i * dn..(i + 1) * dn], &q_cat[i * dc..(i + 1) * dc]))
            .collect();
        Ok(match &self.target {
            Target::Numeric(y) => Predictions::Numeric {
                values: neighbours.iter().map(|nb| nb.iter().map(|&i| y[i]).sum::<f64>() / nb.len() as f64).collect(),
            },
            Target::Class { codes, levels } => Predictions::ProbMatrix {
                levels: levels.clone(),
                probs: neighbours
                    .iter()
                    .map(|nb| {
                        let mut counts = vec![0.0; levels.len()];
                        nb.iter().for_each(|&i| counts[codes[i] as usize] += 1.0);
                        counts.iter().map(|c| c / nb.len() as f64).collect()
                    })
                    .collect(),
            },
        })
    }
}
