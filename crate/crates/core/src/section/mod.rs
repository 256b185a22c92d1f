//! Section grids, fit evaluation on a slice, and the payloads behind the
//! section plot and the condition selector panels.

mod condition;
mod snap;

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::frame::{ColumnKind, DataFrame, Roles, Value};
use crate::metric::{fade_level, similarity_result, ConditioningSpace, SimilarityConfig};
use crate::model::{renormalize_density, ModelHandle, PredictionKind, Predictions};

pub use condition::{condition_payload, Association, ConditionPanel, ConditionPayload, PanelData, PanelKind, ParallelCoords};
pub use snap::{snap_point, Click};

pub const PAYLOAD_SCHEMA: &str = "v1";
pub const DEFAULT_BINS: usize = 10;

/// Grid points per numeric axis: 101 for one section variable, 51 per axis for two.
pub fn default_resolution(nvars: usize) -> usize {
    if nvars == 1 {
        101
    } else {
        51
    }
}

/// Values of the conditioning (`uC`) and hidden (`uF`) predictors that fix a slice.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SectionPoint {
    #[serde(rename = "uC")]
    pub u_c: BTreeMap<String, Value>,
    #[serde(rename = "uF", default)]
    pub u_f: BTreeMap<String, Value>,
}

impl SectionPoint {
    /// The conditioning and hidden coordinates of observation `row`.
    pub fn from_row(df: &DataFrame, roles: &Roles, row: usize) -> Result<SectionPoint> {
        Ok(SectionPoint {
            u_c: df.row_values(row, &roles.conditioning)?,
            u_f: df.row_values(row, &roles.hidden)?,
        })
    }

    pub fn validate(&self, df: &DataFrame, roles: &Roles) -> Result<()> {
        for (map, vars, label) in [(&self.u_c, &roles.conditioning, "uC"), (&self.u_f, &roles.hidden, "uF")] {
            if map.len() != vars.len() || vars.iter().any(|v| !map.contains_key(v)) {
                let keys: Vec<&String> = map.keys().collect();
                return Err(Error::InvalidArgument(format!("{label} keys {keys:?} do not match {vars:?}")));
            }
            for (k, v) in map {
                df.column(k)?.check_value(v)?;
            }
        }
        Ok(())
    }

    pub fn values(&self) -> impl Iterator<Item = (&String, &Value)> {
        self.u_c.iter().chain(&self.u_f)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct GridAxis {
    pub name: String,
    pub kind: ColumnKind,
    pub values: Vec<Value>,
    /// Bin boundaries when numeric values are bin midpoints.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bin_edges: Option<Vec<f64>>,
}

impl GridAxis {
    /// Spacing of a numeric axis; 1 for categorical axes.
    fn measure(&self) -> f64 {
        match (&self.bin_edges, self.kind) {
            (Some(e), _) => e[1] - e[0],
            (None, ColumnKind::Numeric) => match (&self.values[0], &self.values[1]) {
                (Value::Num(a), Value::Num(b)) => b - a,
                _ => 1.0,
            },
            (None, ColumnKind::Categorical) => 1.0,
        }
    }
}

/// Grid over the section variables. Rows enumerate the Cartesian product with
/// the first axis varying slowest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SectionGrid {
    pub axes: Vec<GridAxis>,
}

impl SectionGrid {
    pub fn len(&self) -> usize {
        self.axes.iter().map(|a| a.values.len()).product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn vars(&self) -> Vec<String> {
        self.axes.iter().map(|a| a.name.clone()).collect()
    }

    /// Product of numeric axis spacings, the area each grid cell stands for.
    pub fn cell_measure(&self) -> f64 {
        self.axes.iter().map(GridAxis::measure).product()
    }

    /// Column of grid values for axis `a`, one per grid row.
    fn expand(&self, a: usize) -> Vec<Value> {
        let inner: usize = self.axes[a + 1..].iter().map(|x| x.values.len()).product();
        let n = self.len();
        (0..n).map(|r| self.axes[a].values[(r / inner) % self.axes[a].values.len()].clone()).collect()
    }
}

fn check_section_vars(vars: &[String]) -> Result<()> {
    if vars.is_empty() || vars.len() > 2 {
        return Err(Error::InvalidRoles(format!("need 1 or 2 section variables, got {}", vars.len())));
    }
    Ok(())
}

/// Equally spaced points over each numeric variable's observed range
/// (inclusive); every level for categorical variables.
pub fn build_grid(df: &DataFrame, vars: &[String], resolution: &[usize]) -> Result<SectionGrid> {
    check_section_vars(vars)?;
    if resolution.len() != vars.len() {
        return Err(Error::InvalidArgument(format!("{} resolutions for {} section variables", resolution.len(), vars.len())));
    }
    let axes = vars
        .iter()
        .zip(resolution)
        .map(|(name, &res)| {
            let col = df.column(name)?;
            let values = match col.levels() {
                Some(levels) => levels.iter().map(|l| Value::Level(l.clone())).collect(),
                None => {
                    if res < 2 {
                        return Err(Error::InvalidArgument(format!("resolution for `{name}` must be at least 2")));
                    }
                    let (lo, hi) = numeric_range(df, name)?;
                    let step = (hi - lo) / (res - 1) as f64;
                    (0..res)
                        .map(|i| Value::Num(if i == res - 1 { hi } else { lo + step * i as f64 }))
                        .collect()
                }
            };
            Ok(GridAxis { name: name.clone(), kind: col.kind(), values, bin_edges: None })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SectionGrid { axes })
}

/// Like [`build_grid`], but numeric axes hold the midpoints of `bins`
/// equal-width bins; used for bar arrays.
pub fn build_binned_grid(df: &DataFrame, vars: &[String], bins: usize) -> Result<SectionGrid> {
    check_section_vars(vars)?;
    if bins == 0 {
        return Err(Error::InvalidArgument("bin count must be at least 1".into()));
    }
    let axes = vars
        .iter()
        .map(|name| {
            let col = df.column(name)?;
            Ok(match col.levels() {
                Some(levels) => GridAxis {
                    name: name.clone(),
                    kind: ColumnKind::Categorical,
                    values: levels.iter().map(|l| Value::Level(l.clone())).collect(),
                    bin_edges: None,
                },
                None => {
                    let (lo, hi) = numeric_range(df, name)?;
                    let width = (hi - lo) / bins as f64;
                    let edges: Vec<f64> =
                        (0..=bins).map(|i| if i == bins { hi } else { lo + width * i as f64 }).collect();
                    let values = edges.windows(2).map(|w| Value::Num(w[0] + (w[1] - w[0]) / 2.0)).collect();
                    GridAxis { name: name.clone(), kind: ColumnKind::Numeric, values, bin_edges: Some(edges) }
                }
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SectionGrid { axes })
}

fn numeric_range(df: &DataFrame, name: &str) -> Result<(f64, f64)> {
    let x = df.column(name)?.as_numeric().expect("numeric column");
    let lo = x.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = x.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !(hi > lo) {
        return Err(Error::ZeroRange(name.to_string()));
    }
    Ok((lo, hi))
}

/// Grid rows completed with the section point's coordinates.
pub fn grid_frame(df: &DataFrame, grid: &SectionGrid, point: &SectionPoint) -> Result<DataFrame> {
    let n = grid.len();
    let mut columns = Vec::new();
    for (a, axis) in grid.axes.iter().enumerate() {
        columns.push(df.column(&axis.name)?.with_values(&grid.expand(a))?);
    }
    for (name, value) in point.values() {
        if grid.axes.iter().any(|a| &a.name == name) {
            continue;
        }
        columns.push(df.column(name)?.constant(value, n)?);
    }
    DataFrame::new(columns)
}

/// Batch-predicts every model over the grid at `point`, one call per model.
/// Density outputs are rescaled to integrate to 1 over the grid.
pub fn evaluate_section(
    df: &DataFrame,
    models: &[ModelHandle],
    grid: &SectionGrid,
    point: &SectionPoint,
) -> Result<Vec<Predictions>> {
    let rows = grid_frame(df, grid, point)?;
    models
        .par_iter()
        .map(|m| match m.predict(&rows)? {
            Predictions::Density { values } => {
                Ok(Predictions::Density { values: renormalize_density(&values, grid.cell_measure())? })
            }
            p => Ok(p),
        })
        .collect()
}

/// The section plot layouts: curves, probability curves and bar arrays for
/// one section variable, grouped curves or bars when a second section
/// variable is categorical, and images or binned bar arrays for two numeric ones.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum PlotType {
    Curve,
    ProbabilityCurve,
    Bars,
    GroupedCurves,
    GroupedBars,
    Image,
    BinnedBars,
}

impl PlotType {
    pub fn is_bar_array(self) -> bool {
        matches!(self, PlotType::Bars | PlotType::GroupedBars | PlotType::BinnedBars)
    }
}

/// Layout for the section variable kinds and a prediction kind. `levels` is
/// the class count of a probability output: two levels are drawn as the
/// curve (or colour) of the second level, more as bar arrays. With no model
/// the observation-only layout for a numeric fit is used.
pub fn plot_type(section: &[ColumnKind], prediction: Option<PredictionKind>, levels: usize) -> Result<PlotType> {
    let multiclass = prediction.is_some_and(PredictionKind::is_probability) && levels > 2;
    let binary = prediction.is_some_and(PredictionKind::is_probability) && !multiclass;
    Ok(match section {
        [_] if multiclass => PlotType::Bars,
        [_] if binary => PlotType::ProbabilityCurve,
        [_] => PlotType::Curve,
        [ColumnKind::Numeric, ColumnKind::Numeric] if multiclass => PlotType::BinnedBars,
        [ColumnKind::Numeric, ColumnKind::Numeric] => PlotType::Image,
        [_, _] if multiclass => PlotType::GroupedBars,
        [_, _] => PlotType::GroupedCurves,
        _ => return Err(Error::InvalidRoles(format!("need 1 or 2 section variables, got {}", section.len()))),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct SectionFit {
    pub model_id: String,
    pub plot_type: PlotType,
    /// Level whose probability a binary probability fit draws.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub shown_level: Option<String>,
    pub predictions: Predictions,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct SectionObservation {
    pub row: usize,
    /// Section variable values, in section order.
    pub x: Vec<Value>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub y: Option<Value>,
    /// Value of the colour variable, when one is chosen.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub color: Option<Value>,
    pub similarity: f64,
    pub fade_level: u32,
    pub alpha: f64,
    /// Marker size factor; the similarity itself on image plots, 1 elsewhere.
    pub shrink: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct SectionPayload {
    pub schema: String,
    pub plot_type: PlotType,
    pub section_vars: Vec<String>,
    pub grid: SectionGrid,
    pub fits: Vec<SectionFit>,
    pub points: Vec<SectionObservation>,
    /// Observations with positive similarity, including those not drawn on bar arrays.
    pub visible_count: usize,
    pub total_similarity: f64,
    pub n: usize,
    pub point: SectionPoint,
    pub similarity: SimilarityConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub color_var: Option<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SectionOptions {
    /// Per-axis numeric resolution; defaults to [`default_resolution`].
    pub resolution: Option<Vec<usize>>,
    /// Bins per numeric axis on bar arrays.
    pub bins: usize,
    /// Column whose values colour the observations.
    pub color_var: Option<String>,
}

impl Default for SectionOptions {
    fn default() -> Self {
        SectionOptions { resolution: None, bins: DEFAULT_BINS, color_var: None }
    }
}

fn fit_plot_type(kinds: &[ColumnKind], p: &Predictions) -> Result<PlotType> {
    plot_type(kinds, Some(p.kind()), p.levels().map_or(0, <[String]>::len))
}

/// Builds the full section plot payload at `point`.
pub fn assemble_section(
    df: &DataFrame,
    roles: &Roles,
    space: &ConditioningSpace,
    models: &[ModelHandle],
    point: &SectionPoint,
    cfg: &SimilarityConfig,
    opts: &SectionOptions,
) -> Result<SectionPayload> {
    cfg.validate()?;
    check_section_vars(&roles.section)?;
    point.validate(df, roles)?;
    let kinds: Vec<ColumnKind> = roles.section.iter().map(|v| Ok(df.column(v)?.kind())).collect::<Result<_>>()?;

    // a bar-array layout needs binned axes; decide it from the first model
    let bar_layout = match models.first() {
        Some(m) if m.kind().is_probability() => {
            let levels = match m.output_levels() {
                Some(l) => l.len(),
                None => {
                    // levels unknown until the model answers: ask for one grid row
                    let probe = build_grid(df, &roles.section, &vec![2; roles.section.len()])?;
                    let rows = grid_frame(df, &probe, point)?.take(&[0])?;
                    m.predict(&rows)?.levels().map_or(0, <[String]>::len)
                }
            };
            plot_type(&kinds, Some(m.kind()), levels)?.is_bar_array()
        }
        _ => false,
    };
    let grid = if bar_layout {
        build_binned_grid(df, &roles.section, opts.bins)?
    } else {
        let res = opts.resolution.clone().unwrap_or_else(|| vec![default_resolution(roles.section.len()); roles.section.len()]);
        build_grid(df, &roles.section, &res)?
    };

    let predictions = evaluate_section(df, models, &grid, point)?;
    let fits = models
        .iter()
        .zip(predictions)
        .map(|(m, p)| {
            let plot_type = fit_plot_type(&kinds, &p)?;
            let shown_level = match (&p, plot_type) {
                (Predictions::ProbMatrix { levels, .. }, t) if !t.is_bar_array() => levels.last().cloned(),
                _ => None,
            };
            Ok(SectionFit { model_id: m.id().to_string(), plot_type, shown_level, predictions: p })
        })
        .collect::<Result<Vec<_>>>()?;
    let plot_type = match fits.first() {
        Some(f) => f.plot_type,
        None => plot_type(&kinds, None, 0)?,
    };

    let u = space.encode_point(&point.u_c)?;
    let sim = similarity_result(df, space, &u, cfg);
    let total_similarity = sim.scores.iter().sum();
    let points = if plot_type.is_bar_array() {
        Vec::new()
    } else {
        let section_cols: Vec<_> = roles.section.iter().map(|v| df.column(v)).collect::<Result<_>>()?;
        let response = roles.response.as_deref().map(|r| df.column(r)).transpose()?;
        let color = opts.color_var.as_deref().map(|c| df.column(c)).transpose()?;
        sim.visible
            .iter()
            .map(|&row| {
                let s = sim.scores[row];
                let level = fade_level(s, cfg.fade_bins.max(1));
                let (alpha, shrink) = if plot_type == PlotType::Image {
                    (1.0, s)
                } else {
                    (level as f64 / cfg.fade_bins.max(1) as f64, 1.0)
                };
                SectionObservation {
                    row,
                    x: section_cols.iter().map(|c| c.value(row)).collect(),
                    y: response.map(|c| c.value(row)),
                    color: color.map(|c| c.value(row)),
                    similarity: s,
                    fade_level: level,
                    alpha,
                    shrink,
                }
            })
            .collect()
    };

    Ok(SectionPayload {
        schema: PAYLOAD_SCHEMA.into(),
        plot_type,
        section_vars: roles.section.clone(),
        grid,
        fits,
        points,
        visible_count: sim.visible.len(),
        total_similarity,
        n: df.nrows(),
        point: point.clone(),
        similarity: *cfg,
        color_var: opts.color_var.clone(),
        warnings: space.warnings(),
    })
}
