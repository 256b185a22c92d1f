use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::frame::{subsample_rows, Column, ColumnData, DataFrame, NumericStats, Value};

use super::{SectionPoint, PAYLOAD_SCHEMA};

const HISTOGRAM_BINS: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum PanelKind {
    Scatter,
    Boxplot,
    Mosaic,
    Histogram,
    Barplot,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum Association {
    /// Absolute Pearson correlation.
    Pearson,
    CorrelationRatio,
    CramersV,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct BoxStats {
    pub level: String,
    pub n: usize,
    pub min: f64,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub max: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "camelCase")]
pub enum PanelData {
    /// Numeric pair over the capped rows.
    Scatter { x: Vec<f64>, y: Vec<f64> },
    /// `numeric` grouped by the levels of `factor`.
    Boxplot { numeric: String, factor: String, boxes: Vec<BoxStats> },
    /// `counts[i][j]` for level i of the first and j of the second variable.
    Mosaic { rows: Vec<String>, cols: Vec<String>, counts: Vec<Vec<usize>> },
    Histogram { edges: Vec<f64>, counts: Vec<usize> },
    Barplot { levels: Vec<String>, counts: Vec<usize> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ConditionPanel {
    pub vars: Vec<String>,
    pub kind: PanelKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub association: Option<(Association, f64)>,
    pub data: PanelData,
    /// Current section point on this panel's variables.
    pub marker: Vec<Value>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ParallelCoords {
    pub vars: Vec<String>,
    /// Per capped row, each variable scaled to [0, 1] (levels by index).
    pub rows: Vec<Vec<f64>>,
    pub marker: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ConditionPayload {
    pub schema: String,
    pub n: usize,
    /// Rows shown, ascending; all rows when within the cap.
    pub rows: Vec<usize>,
    pub seed: u64,
    pub cap: usize,
    pub panels: Vec<ConditionPanel>,
    pub parallel: ParallelCoords,
}

fn pearson(x: &[f64], y: &[f64]) -> f64 {
    let (sx, sy) = (NumericStats::of(x), NumericStats::of(y));
    if sx.sd == 0.0 || sy.sd == 0.0 {
        return 0.0;
    }
    let cov: f64 = x.iter().zip(y).map(|(a, b)| (a - sx.mean) * (b - sy.mean)).sum::<f64>() / (x.len() as f64 - 1.0);
    (cov / (sx.sd * sy.sd)).abs().min(1.0)
}

fn correlation_ratio(x: &[f64], codes: &[u32], nlevels: usize) -> f64 {
    let mean = x.iter().sum::<f64>() / x.len() as f64;
    let total: f64 = x.iter().map(|v| (v - mean).powi(2)).sum();
    if total == 0.0 {
        return 0.0;
    }
    let mut sums = vec![0.0; nlevels];
    let mut counts = vec![0usize; nlevels];
    for (v, &c) in x.iter().zip(codes) {
        sums[c as usize] += v;
        counts[c as usize] += 1;
    }
    let between: f64 = sums
        .iter()
        .zip(&counts)
        .filter(|(_, &n)| n > 0)
        .map(|(s, &n)| n as f64 * (s / n as f64 - mean).powi(2))
        .sum();
    (between / total).sqrt().min(1.0)
}

fn contingency(a: &[u32], la: usize, b: &[u32], lb: usize) -> Vec<Vec<usize>> {
    let mut t = vec![vec![0usize; lb]; la];
    for (&i, &j) in a.iter().zip(b) {
        t[i as usize][j as usize] += 1;
    }
    t
}

fn cramers_v(t: &[Vec<usize>]) -> f64 {
    let n: usize = t.iter().flatten().sum();
    let rows: Vec<usize> = t.iter().map(|r| r.iter().sum()).collect();
    let cols: Vec<usize> = (0..t.first().map_or(0, Vec::len)).map(|j| t.iter().map(|r| r[j]).sum()).collect();
    let r = rows.iter().filter(|&&c| c > 0).count();
    let c = cols.iter().filter(|&&c| c > 0).count();
    let k = r.min(c);
    if n == 0 || k < 2 {
        return 0.0;
    }
    let mut chi2 = 0.0;
    for (i, row) in t.iter().enumerate() {
        for (j, &obs) in row.iter().enumerate() {
            let e = rows[i] as f64 * cols[j] as f64 / n as f64;
            if e > 0.0 {
                chi2 += (obs as f64 - e).powi(2) / e;
            }
        }
    }
    (chi2 / (n as f64 * (k - 1) as f64)).sqrt().min(1.0)
}

/// Association between two columns, on the scale [0, 1].
fn association(a: &Column, b: &Column) -> (Association, f64) {
    match (a.data(), b.data()) {
        (ColumnData::Numeric(x), ColumnData::Numeric(y)) => (Association::Pearson, pearson(x, y)),
        (ColumnData::Numeric(x), ColumnData::Categorical { codes, levels })
        | (ColumnData::Categorical { codes, levels }, ColumnData::Numeric(x)) => {
            (Association::CorrelationRatio, correlation_ratio(x, codes, levels.len()))
        }
        (ColumnData::Categorical { codes: ca, levels: la }, ColumnData::Categorical { codes: cb, levels: lb }) => {
            (Association::CramersV, cramers_v(&contingency(ca, la.len(), cb, lb.len())))
        }
    }
}

/// Panel variable indices with their association, when paired.
type Pairing = Vec<(Vec<usize>, Option<(Association, f64)>)>;

/// Greedy maximum-weight pairing: strongest unpaired pair first, earlier
/// variables first on ties. An odd variable out is returned alone, last.
fn pair_up(columns: &[&Column]) -> Pairing {
    let p = columns.len();
    let mut pairs = Vec::new();
    for i in 0..p {
        for j in i + 1..p {
            let (kind, a) = association(columns[i], columns[j]);
            pairs.push((i, j, kind, if a.is_finite() { a } else { 0.0 }));
        }
    }
    // stable sort keeps index order among equal strengths
    pairs.sort_by(|x, y| y.3.total_cmp(&x.3));
    let mut used = vec![false; p];
    let mut out = Vec::new();
    for (i, j, kind, a) in pairs {
        if !used[i] && !used[j] {
            used[i] = true;
            used[j] = true;
            out.push((vec![i, j], Some((kind, a))));
        }
    }
    out.extend((0..p).filter(|&i| !used[i]).map(|i| (vec![i], None)));
    out
}

fn quantile(sorted: &[f64], q: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * q;
    let (lo, hi) = (h.floor() as usize, h.ceil() as usize);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

fn panel_data(cols: &[&Column]) -> (PanelKind, PanelData) {
    match cols {
        [a] => match a.data() {
            ColumnData::Numeric(x) => {
                let s = NumericStats::of(x);
                let bins = if s.range > 0.0 { HISTOGRAM_BINS } else { 1 };
                let width = if s.range > 0.0 { s.range / bins as f64 } else { 1.0 };
                let edges: Vec<f64> = (0..=bins).map(|i| s.min + width * i as f64).collect();
                let mut counts = vec![0; bins];
                for v in x {
                    counts[(((v - s.min) / width) as usize).min(bins - 1)] += 1;
                }
                (PanelKind::Histogram, PanelData::Histogram { edges, counts })
            }
            ColumnData::Categorical { codes, levels } => {
                let mut counts = vec![0; levels.len()];
                codes.iter().for_each(|&c| counts[c as usize] += 1);
                (PanelKind::Barplot, PanelData::Barplot { levels: levels.clone(), counts })
            }
        },
        [a, b] => match (a.data(), b.data()) {
            (ColumnData::Numeric(x), ColumnData::Numeric(y)) => {
                (PanelKind::Scatter, PanelData::Scatter { x: x.clone(), y: y.clone() })
            }
            (ColumnData::Categorical { codes: ca, levels: la }, ColumnData::Categorical { codes: cb, levels: lb }) => (
                PanelKind::Mosaic,
                PanelData::Mosaic { rows: la.clone(), cols: lb.clone(), counts: contingency(ca, la.len(), cb, lb.len()) },
            ),
            _ => {
                let (num, fac) = if a.kind() == crate::frame::ColumnKind::Numeric { (a, b) } else { (b, a) };
                let x = num.as_numeric().expect("numeric");
                let codes = fac.codes().expect("categorical");
                let levels = fac.levels().expect("categorical");
                let boxes = levels
                    .iter()
                    .enumerate()
                    .filter_map(|(l, level)| {
                        let mut v: Vec<f64> =
                            x.iter().zip(codes).filter(|(_, &c)| c as usize == l).map(|(v, _)| *v).collect();
                        if v.is_empty() {
                            return None;
                        }
                        v.sort_by(f64::total_cmp);
                        Some(BoxStats {
                            level: level.clone(),
                            n: v.len(),
                            min: v[0],
                            q1: quantile(&v, 0.25),
                            median: quantile(&v, 0.5),
                            q3: quantile(&v, 0.75),
                            max: v[v.len() - 1],
                        })
                    })
                    .collect();
                (
                    PanelKind::Boxplot,
                    PanelData::Boxplot { numeric: num.name().to_string(), factor: fac.name().to_string(), boxes },
                )
            }
        },
        _ => unreachable!("panels hold one or two variables"),
    }
}

fn unit_scale(col: &Column, value: &Value) -> f64 {
    match col.data() {
        ColumnData::Numeric(x) => {
            let s = NumericStats::of(x);
            let v = value.as_num().unwrap_or(s.min);
            if s.range > 0.0 {
                (v - s.min) / s.range
            } else {
                0.5
            }
        }
        ColumnData::Categorical { levels, .. } => {
            let code = value.as_level().and_then(|l| col.level_code(l)).unwrap_or(0);
            if levels.len() > 1 {
                code as f64 / (levels.len() - 1) as f64
            } else {
                0.5
            }
        }
    }
}

/// Condition selector data for the conditioning variables: panels paired by
/// association over all rows, drawn from at most `cap` rows, plus a parallel
/// coordinates view of the same rows. Scaling uses the full data.
pub fn condition_payload(
    df: &DataFrame,
    conditioning: &[String],
    point: &SectionPoint,
    cap: usize,
    seed: u64,
) -> Result<ConditionPayload> {
    let full: Vec<&Column> = conditioning.iter().map(|v| df.column(v)).collect::<Result<_>>()?;
    let rows = subsample_rows(df.nrows(), cap.max(1), seed);
    let shown: Vec<Column> = full.iter().map(|c| c.take(&rows)).collect();
    let marker_of = |name: &String| point.u_c.get(name).cloned().unwrap_or(Value::Num(f64::NAN));

    let mut order = Vec::new();
    let panels = pair_up(&full)
        .into_iter()
        .map(|(idx, association)| {
            order.extend(idx.iter().copied());
            let cols: Vec<&Column> = idx.iter().map(|&i| &shown[i]).collect();
            let (kind, data) = panel_data(&cols);
            ConditionPanel {
                vars: idx.iter().map(|&i| conditioning[i].clone()).collect(),
                kind,
                association,
                data,
                marker: idx.iter().map(|&i| marker_of(&conditioning[i])).collect(),
            }
        })
        .collect();

    let parallel = ParallelCoords {
        vars: order.iter().map(|&i| conditioning[i].clone()).collect(),
        rows: rows
            .iter()
            .map(|&r| order.iter().map(|&i| unit_scale(full[i], &full[i].value(r))).collect())
            .collect(),
        marker: order.iter().map(|&i| unit_scale(full[i], &marker_of(&conditioning[i]))).collect(),
    };
    Ok(ConditionPayload { schema: PAYLOAD_SCHEMA.into(), n: df.nrows(), rows, seed, cap, panels, parallel })
}
