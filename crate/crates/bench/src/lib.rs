//! Shared workloads for the benchmarks and latency checks.

use slicevis_core::section::{assemble_section, SectionOptions};
use slicevis_core::simulate::{simulate, SimKind};
use slicevis_core::{
    fit_builtin, BuiltinSpec, Column, ConditioningSpace, DataFrame, ModelHandle, Result, Roles, SectionPayload,
    SectionPoint, SimilarityConfig,
};

/// A section-plot workload: data with a response `y`, fitted models and a
/// point at the first row.
pub struct Workload {
    pub df: DataFrame,
    pub roles: Roles,
    pub space: ConditioningSpace,
    pub models: Vec<ModelHandle>,
    pub point: SectionPoint,
}

/// `n` rows of `p` standard normal predictors and `y = sum(x) + x1^2`, with
/// `x1` on the section axis and the models given by `specs`.
pub fn workload(n: usize, p: usize, specs: &[&str], seed: u64) -> Result<Workload> {
    let x = simulate(SimKind::Normal, n, p, seed)?;
    let y: Vec<f64> = (0..n)
        .map(|i| {
            let row: Vec<f64> = x.columns().iter().map(|c| c.as_numeric().expect("numeric")[i]).collect();
            row.iter().sum::<f64>() + row[0] * row[0]
        })
        .collect();
    let mut cols = x.columns().to_vec();
    cols.push(Column::numeric("y", y));
    let df = DataFrame::new(cols)?;
    let inputs: Vec<String> = (1..=p).map(|j| format!("x{j}")).collect();
    let models = specs
        .iter()
        .map(|s| fit_builtin(&s.parse::<BuiltinSpec>()?, &df, Some("y"), &inputs))
        .collect::<Result<Vec<_>>>()?;
    let roles = Roles::infer(&df, Some("y"), &inputs[..1], &[]);
    let space = ConditioningSpace::new(&df, &roles.conditioning)?;
    let point = SectionPoint::from_row(&df, &roles, 0)?;
    Ok(Workload { df, roles, space, models, point })
}

impl Workload {
    /// The section payload at the workload's point on the default 101-point grid.
    pub fn section(&self, cfg: &SimilarityConfig) -> Result<SectionPayload> {
        assemble_section(&self.df, &self.roles, &self.space, &self.models, &self.point, cfg, &SectionOptions::default())
    }
}
