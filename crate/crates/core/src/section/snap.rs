use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::frame::{ColumnData, DataFrame, NumericStats, Roles, Value};
use crate::metric::{ConditioningSpace, EncodedRows};

use super::SectionPoint;

/// Relative slack when collecting the observations nearest to a click.
const TIE_TOL: f64 = 1e-12;

/// A click on a condition selector panel.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Click {
    pub vars: Vec<String>,
    pub values: Vec<Value>,
    /// A double click snaps the whole point to an observation.
    #[serde(default)]
    pub double: bool,
}

/// Applies a click. A single click overwrites only the panel variables; a
/// double click finds the observations nearest the click in the panel's
/// standardized space and moves all of `uC` to their medoid, lowest row
/// first on ties. Returns the new point and the row snapped to.
pub fn snap_point(
    df: &DataFrame,
    roles: &Roles,
    space: &ConditioningSpace,
    point: &SectionPoint,
    click: &Click,
) -> Result<(SectionPoint, Option<usize>)> {
    if click.vars.is_empty() || click.vars.len() > 2 || click.vars.len() != click.values.len() {
        return Err(Error::InvalidArgument("a click gives one value for each of 1 or 2 panel variables".into()));
    }
    for (var, value) in click.vars.iter().zip(&click.values) {
        if !roles.conditioning.contains(var) {
            return Err(Error::InvalidArgument(format!("`{var}` is not a conditioning variable")));
        }
        df.column(var)?.check_value(value)?;
    }
    if !click.double {
        let mut next = point.clone();
        for (var, value) in click.vars.iter().zip(&click.values) {
            next.u_c.insert(var.clone(), value.clone());
        }
        return Ok((next, None));
    }

    let n = df.nrows();
    let mut d2 = vec![0.0; n];
    for (var, value) in click.vars.iter().zip(&click.values) {
        match df.column(var)?.data() {
            ColumnData::Numeric(x) => {
                let sd = NumericStats::of(x).sd;
                let v = value.as_num().expect("checked");
                if sd > 0.0 {
                    d2.iter_mut().zip(x).for_each(|(d, x)| *d += ((x - v) / sd).powi(2));
                }
            }
            ColumnData::Categorical { codes, levels } => {
                let code = levels.iter().position(|l| Some(l.as_str()) == value.as_level()).expect("checked") as u32;
                d2.iter_mut().zip(codes).filter(|(_, c)| **c != code).for_each(|(d, _)| *d = f64::INFINITY);
            }
        }
    }
    let best = d2.iter().copied().fold(f64::INFINITY, f64::min);
    if best.is_infinite() {
        return Err(Error::InvalidArgument("no observation matches the clicked levels".into()));
    }
    let nearest: Vec<usize> = (0..n).filter(|&i| d2[i] <= best + TIE_TOL * best.max(1.0)).collect();
    let row = if nearest.len() == 1 || space.is_empty() {
        nearest[0]
    } else {
        nearest[EncodedRows::from_frame(df, space, &nearest).medoid_position()]
    };
    let next = SectionPoint { u_c: df.row_values(row, &roles.conditioning)?, u_f: point.u_f.clone() };
    Ok((next, Some(row)))
}
