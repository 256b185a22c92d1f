use std::f64::consts::PI;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::frame::{DataFrame, NumericStats};

use super::{encode_inputs, FieldValues, InputField, Predictions, Predictor};

/// Product Gaussian kernel density over numeric inputs, with an exact-match
/// kernel on categorical inputs. Values are densities with respect to
/// Lebesgue measure on the numeric part and counting measure on the rest.
#[derive(Debug)]
pub(crate) struct KdeModel {
    schema: Vec<InputField>,
    /// Per field: bandwidth for numeric fields, `None` for categorical ones.
    bandwidths: Vec<Option<f64>>,
    train_num: Vec<f64>,
    train_cat: Vec<u32>,
    n_train: usize,
}

impl KdeModel {
    pub(crate) fn fit(schema: &[InputField], inputs: &[FieldValues<'_>], bandwidth: Option<f64>) -> Result<Self> {
        if let Some(b) = bandwidth.filter(|b| !(*b > 0.0 && b.is_finite())) {
            return Err(Error::InvalidModel(format!("kde bandwidth must be positive, got {b}")));
        }
        let n = match inputs.first() {
            Some(FieldValues::Num(x)) => x.len(),
            Some(FieldValues::Cat(c)) => c.len(),
            None => return Err(Error::EmptyInput),
        };
        let dnum = inputs.iter().filter(|v| matches!(v, FieldValues::Num(_))).count();
        // Scott's rule
        let factor = bandwidth.unwrap_or_else(|| (n as f64).powf(-1.0 / (dnum as f64 + 4.0)));
        let mut bandwidths = Vec::with_capacity(inputs.len());
        for (field, values) in schema.iter().zip(inputs) {
            bandwidths.push(match values {
                FieldValues::Num(x) => {
                    let stats = NumericStats::of(x);
                    if stats.is_constant() {
                        return Err(Error::ZeroRange(field.name.clone()));
                    }
                    Some(factor * stats.sd)
                }
                FieldValues::Cat(_) => None,
            });
        }
        let (train_num, train_cat) = pack(inputs, n);
        Ok(KdeModel { schema: schema.to_vec(), bandwidths, train_num, train_cat, n_train: n })
    }

    fn density(&self, q_num: &[f64], q_cat: &[u32]) -> f64 {
        let h: Vec<f64> = self.bandwidths.iter().flatten().copied().collect();
        let norm: f64 = h.iter().map(|h| h * (2.0 * PI).sqrt()).product();
        let (dn, dc) = (q_num.len(), q_cat.len());
        let mut total = 0.0;
        for i in 0..self.n_train {
            if self.train_cat[i * dc..(i + 1) * dc] != *q_cat {
                continue;
            }
            let z2: f64 = self.train_num[i * dn..(i + 1) * dn]
                .iter()
                .zip(q_num)
                .zip(&h)
                .map(|((x, q), h)| ((q - x) / h).powi(2))
                .sum();
            total += (-0.5 * z2).exp();
        }
        total / (self.n_train as f64 * norm)
    }
}

fn pack(inputs: &[FieldValues<'_>], n: usize) -> (Vec<f64>, Vec<u32>) {
    let mut num = Vec::new();
    let mut cat = Vec::new();
    for i in 0..n {
        for v in inputs {
            match v {
                FieldValues::Num(x) => num.push(x[i]),
                FieldValues::Cat(c) => cat.push(c[i]),
            }
        }
    }
    (num, cat)
}

impl Predictor for KdeModel {
    fn predict(&self, rows: &DataFrame) -> Result<Predictions> {
        let inputs = encode_inputs(&self.schema, rows)?;
        let (num, cat) = pack(&inputs, rows.nrows());
        let dn = self.bandwidths.iter().filter(|b| b.is_some()).count();
        let dc = self.bandwidths.len() - dn;
        let values = (0..rows.nrows())
            .into_par_iter()
            .map(|i| self.density(&num[i * dn..(i + 1) * dn], &cat[i * dc..(i + 1) * dc]))
            .collect();
        Ok(Predictions::Density { values })
    }
}
