use crate::error::{Error, Result};
use crate::frame::DataFrame;

use super::{encode_inputs, FieldValues, InputField, Predictions, Predictor};

/// Relative residual norm below which a design column counts as dependent.
const COLLINEAR_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
enum Term {
    Intercept,
    Numeric(usize),
    /// Indicator of `level` in categorical field `field`.
    Dummy { field: usize, level: u32 },
}

#[derive(Debug)]
pub(crate) struct LinearModel {
    schema: Vec<InputField>,
    terms: Vec<Term>,
    coef: Vec<f64>,
}

fn term_name(schema: &[InputField], term: &Term) -> String {
    match term {
        Term::Intercept => "(intercept)".into(),
        Term::Numeric(f) => schema[*f].name.clone(),
        Term::Dummy { field, level } => {
            let f = &schema[*field];
            let label = f.levels.as_ref().map(|l| l[*level as usize].as_str()).unwrap_or("?");
            format!("{}={}", f.name, label)
        }
    }
}

fn design_column(term: &Term, inputs: &[FieldValues<'_>], n: usize) -> Vec<f64> {
    match term {
        Term::Intercept => vec![1.0; n],
        Term::Numeric(f) => match &inputs[*f] {
            FieldValues::Num(v) => v.to_vec(),
            FieldValues::Cat(_) => unreachable!("numeric term on categorical field"),
        },
        Term::Dummy { field, level } => match &inputs[*field] {
            FieldValues::Cat(c) => c.iter().map(|&x| if x == *level { 1.0 } else { 0.0 }).collect(),
            FieldValues::Num(_) => unreachable!("dummy term on numeric field"),
        },
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Solves the upper-triangular system `r[..k][..k] x = b`.
fn back_substitute(r: &[Vec<f64>], b: &[f64]) -> Vec<f64> {
    let k = b.len();
    let mut x = vec![0.0; k];
    for i in (0..k).rev() {
        let s: f64 = (i + 1..k).map(|j| r[i][j] * x[j]).sum();
        x[i] = (b[i] - s) / r[i][i];
    }
    x
}

impl LinearModel {
    pub(crate) fn fit(schema: &[InputField], inputs: &[FieldValues<'_>], y: &[f64]) -> Result<Self> {
        let n = y.len();
        if n < 2 {
            return Err(Error::InvalidModel("linear model needs at least 2 rows".into()));
        }
        let mut terms = vec![Term::Intercept];
        for (f, field) in schema.iter().enumerate() {
            match &inputs[f] {
                FieldValues::Num(_) => terms.push(Term::Numeric(f)),
                FieldValues::Cat(_) => {
                    let nlevels = field.levels.as_ref().map_or(0, Vec::len) as u32;
                    terms.extend((1..nlevels).map(|level| Term::Dummy { field: f, level }));
                }
            }
        }

        // modified Gram-Schmidt with one reorthogonalization pass
        let p = terms.len();
        let mut q: Vec<Vec<f64>> = Vec::with_capacity(p);
        let mut r = vec![vec![0.0; p]; p];
        for (j, term) in terms.iter().enumerate() {
            let original = design_column(term, inputs, n);
            let scale = norm(&original);
            let mut v = original;
            for _ in 0..2 {
                for (i, qi) in q.iter().enumerate() {
                    let c = dot(qi, &v);
                    r[i][j] += c;
                    v.iter_mut().zip(qi).for_each(|(x, qv)| *x -= c * qv);
                }
            }
            let rest = norm(&v);
            if scale == 0.0 || rest <= COLLINEAR_TOL * scale {
                let coeffs = back_substitute(&r, &r.iter().take(j).map(|row| row[j]).collect::<Vec<_>>());
                let with = coeffs
                    .iter()
                    .enumerate()
                    .filter(|(_, c)| c.abs() > 1e-8)
                    .map(|(i, _)| term_name(schema, &terms[i]))
                    .collect();
                return Err(Error::Singular { column: term_name(schema, term), with });
            }
            r[j][j] = rest;
            v.iter_mut().for_each(|x| *x /= rest);
            q.push(v);
        }

        let mut resid = y.to_vec();
        let mut qty = vec![0.0; p];
        for _ in 0..2 {
            for (i, qi) in q.iter().enumerate() {
                let c = dot(qi, &resid);
                qty[i] += c;
                resid.iter_mut().zip(qi).for_each(|(x, qv)| *x -= c * qv);
            }
        }
        let coef = back_substitute(&r, &qty);
        Ok(LinearModel { schema: schema.to_vec(), terms, coef })
    }

    #[cfg(test)]
    pub(crate) fn coefficients(&self) -> Vec<(String, f64)> {
        self.terms.iter().zip(&self.coef).map(|(t, c)| (term_name(&self.schema, t), *c)).collect()
    }
}

impl Predictor for LinearModel {
    fn predict(&self, rows: &DataFrame) -> Result<Predictions> {
        let inputs = encode_inputs(&self.schema, rows)?;
        let n = rows.nrows();
        let mut values = vec![0.0; n];
        for (term, &c) in self.terms.iter().zip(&self.coef) {
            match term {
                Term::Intercept => values.iter_mut().for_each(|v| *v += c),
                Term::Numeric(f) => {
                    let FieldValues::Num(x) = &inputs[*f] else { unreachable!() };
                    values.iter_mut().zip(x.iter()).for_each(|(v, x)| *v += c * x);
                }
                Term::Dummy { field, level } => {
                    let FieldValues::Cat(codes) = &inputs[*field] else { unreachable!() };
                    values
                        .iter_mut()
                        .zip(codes)
                        .filter(|(_, code)| **code == *level)
                        .for_each(|(v, _)| *v += c);
                }
            }
        }
        Ok(Predictions::Numeric { values })
    }
}
