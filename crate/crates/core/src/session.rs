//! Interactive exploration state: the current section point, similarity
//! settings and tour, changed one mutation at a time.

use std::collections::BTreeMap;
use std::sync::Arc;
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::frame::{medoid, Column, DataFrame, Roles, Value};
use crate::metric::{sigma_serde, ConditioningSpace, DistanceKind, SimilarityConfig};
use crate::model::ModelHandle;
use crate::section::{
    assemble_section, condition_payload, snap_point, Click, ConditionPayload, SectionOptions, SectionPayload,
    SectionPoint, PAYLOAD_SCHEMA,
};
pub use crate::tour::TourRequest;
use crate::tour::{build_tour, CancelToken, Progress, Tour, TourInputs, TourSpace, KMED_CAP,
};

/// Observations shown in condition selector panels.
pub const CONDITION_CAP: usize = 1000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct SessionSpec {
    pub roles: Roles,
    #[serde(default)]
    pub color_var: Option<String>,
    /// Starting point; the medoid of all predictors when absent.
    #[serde(default)]
    pub initial_point: Option<SectionPoint>,
    #[serde(default)]
    pub similarity: SimilarityConfig,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_condition_cap")]
    pub condition_cap: usize,
    #[serde(default)]
    pub resolution: Option<Vec<usize>>,
}

fn default_condition_cap() -> usize {
    CONDITION_CAP
}

impl SessionSpec {
    pub fn new(roles: Roles) -> Self {
        SessionSpec {
            roles,
            color_var: None,
            initial_point: None,
            similarity: SimilarityConfig::default(),
            seed: 0,
            condition_cap: CONDITION_CAP,
            resolution: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "camelCase")]
pub enum Mutation {
    /// Overwrites the given conditioning coordinates only.
    SetPoint { values: BTreeMap<String, Value> },
    /// A click on a condition panel; double clicks snap to observations.
    Snap(Click),
    SetSigma {
        #[serde(with = "sigma_serde")]
        sigma: f64,
    },
    SetDistance { distance: DistanceKind },
    SetSectionVars { vars: Vec<String> },
    SetColorVar { var: Option<String> },
    StartTour(TourRequest),
    /// Moves to stop `step` of the active tour (of its dense path when interpolated).
    TourStep { step: usize },
    /// Moves to the conditioning coordinates of an observation.
    SelectObservation { row: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum VisitSource {
    Initial,
    SetPoint,
    Snap,
    SectionVars,
    TourStep,
    SelectObservation,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Visit {
    pub seq: usize,
    pub timestamp_ms: u64,
    pub source: VisitSource,
    pub point: SectionPoint,
}

/// What a mutation produced.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Update {
    pub section: SectionPayload,
    /// Present when the conditioning set or point changed.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub conditions: Option<ConditionPayload>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tour: Option<Tour>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct SessionInfo {
    pub id: String,
    pub dataset_id: String,
    pub models: Vec<String>,
    pub roles: Roles,
    pub color_var: Option<String>,
    pub point: SectionPoint,
    pub similarity: SimilarityConfig,
    pub seed: u64,
    pub tour: Option<Tour>,
    pub step: Option<usize>,
    pub visited: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct VisitedExport {
    pub schema: String,
    pub session_id: String,
    pub seed: u64,
    pub visited: Vec<Visit>,
}

#[derive(Debug, Clone)]
pub struct Session {
    id: String,
    dataset_id: String,
    df: Arc<DataFrame>,
    models: Vec<ModelHandle>,
    roles: Roles,
    space: ConditioningSpace,
    color_var: Option<String>,
    point: SectionPoint,
    cfg: SimilarityConfig,
    seed: u64,
    condition_cap: usize,
    resolution: Option<Vec<usize>>,
    /// Every predictor's value at the starting point; fills coordinates of
    /// variables that move into the conditioning set.
    defaults: BTreeMap<String, Value>,
    tour: Option<Tour>,
    step: Option<usize>,
    tours_started: u64,
    visited: Vec<Visit>,
    log: Vec<Mutation>,
    section: SectionPayload,
}

fn now_ms() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_millis() as u64)
}

impl Session {
    pub fn new(
        id: impl Into<String>,
        dataset_id: impl Into<String>,
        df: Arc<DataFrame>,
        models: Vec<ModelHandle>,
        spec: SessionSpec,
    ) -> Result<Session> {
        spec.similarity.validate()?;
        let roles = spec.roles;
        roles.validate(&df)?;
        if let Some(c) = &spec.color_var {
            df.column(c)?;
        }
        let predictors = roles.predictors();
        let anchor = match medoid(&df, &predictors, KMED_CAP, spec.seed) {
            Ok(row) => row,
            Err(Error::AllConstant) => 0,
            Err(e) => return Err(e),
        };
        let mut defaults = df.row_values(anchor, &predictors)?;
        let point = match spec.initial_point {
            Some(p) => {
                p.validate(&df, &roles)?;
                defaults.extend(p.values().map(|(k, v)| (k.clone(), v.clone())));
                p
            }
            None => SectionPoint::from_row(&df, &roles, anchor)?,
        };
        let space = ConditioningSpace::new(&df, &roles.conditioning)?;
        let mut s = Session {
            id: id.into(),
            dataset_id: dataset_id.into(),
            df,
            models,
            roles,
            space,
            color_var: spec.color_var,
            point,
            cfg: spec.similarity,
            seed: spec.seed,
            condition_cap: spec.condition_cap,
            resolution: spec.resolution,
            defaults,
            tour: None,
            step: None,
            tours_started: 0,
            visited: Vec::new(),
            log: Vec::new(),
            section: SectionPayload::placeholder(),
        };
        s.section = s.compute_section()?;
        s.visit(VisitSource::Initial);
        Ok(s)
    }

    /// A fresh session with `log` applied in order.
    pub fn replay(
        id: impl Into<String>,
        dataset_id: impl Into<String>,
        df: Arc<DataFrame>,
        models: Vec<ModelHandle>,
        spec: SessionSpec,
        log: &[Mutation],
    ) -> Result<Session> {
        let mut s = Session::new(id, dataset_id, df, models, spec)?;
        for m in log {
            s.apply(m.clone())?;
        }
        Ok(s)
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn dataset_id(&self) -> &str {
        &self.dataset_id
    }

    pub fn frame(&self) -> &Arc<DataFrame> {
        &self.df
    }

    pub fn models(&self) -> &[ModelHandle] {
        &self.models
    }

    pub fn roles(&self) -> &Roles {
        &self.roles
    }

    pub fn point(&self) -> &SectionPoint {
        &self.point
    }

    pub fn similarity(&self) -> &SimilarityConfig {
        &self.cfg
    }

    pub fn tour(&self) -> Option<&Tour> {
        self.tour.as_ref()
    }

    pub fn step(&self) -> Option<usize> {
        self.step
    }

    /// Mutations applied so far, with tour seeds resolved.
    pub fn log(&self) -> &[Mutation] {
        &self.log
    }

    pub fn visited(&self) -> &[Visit] {
        &self.visited
    }

    /// The payload for the current state.
    pub fn section(&self) -> &SectionPayload {
        &self.section
    }

    pub fn conditions(&self) -> Result<ConditionPayload> {
        condition_payload(&self.df, &self.roles.conditioning, &self.point, self.condition_cap, self.seed)
    }

    pub fn info(&self) -> SessionInfo {
        SessionInfo {
            id: self.id.clone(),
            dataset_id: self.dataset_id.clone(),
            models: self.models.iter().map(|m| m.id().to_string()).collect(),
            roles: self.roles.clone(),
            color_var: self.color_var.clone(),
            point: self.point.clone(),
            similarity: self.cfg,
            seed: self.seed,
            tour: self.tour.clone(),
            step: self.step,
            visited: self.visited.len(),
        }
    }

    fn compute_section(&self) -> Result<SectionPayload> {
        let opts = SectionOptions {
            resolution: self.resolution.clone(),
            color_var: self.color_var.clone(),
            ..Default::default()
        };
        assemble_section(&self.df, &self.roles, &self.space, &self.models, &self.point, &self.cfg, &opts)
    }

    fn visit(&mut self, source: VisitSource) {
        self.visited.push(Visit {
            seq: self.visited.len(),
            timestamp_ms: now_ms(),
            source,
            point: self.point.clone(),
        });
    }

    /// Applies `m` to a copy of the state and commits only if every step
    /// succeeds, so a failed mutation leaves the session untouched.
    pub fn apply(&mut self, m: Mutation) -> Result<Update> {
        self.apply_with(m, &CancelToken::new(), None)
    }

    pub fn apply_with(&mut self, m: Mutation, cancel: &CancelToken, progress: Option<Progress<'_>>) -> Result<Update> {
        let mut next = self.clone();
        let (logged, update) = next.transition(m, cancel, progress)?;
        next.log.push(logged);
        *self = next;
        Ok(update)
    }

    fn transition(
        &mut self,
        m: Mutation,
        cancel: &CancelToken,
        progress: Option<Progress<'_>>,
    ) -> Result<(Mutation, Update)> {
        let mut conditions = false;
        let mut tour_out = None;
        let logged = match m {
            Mutation::SetPoint { values } => {
                for (k, v) in &values {
                    if !self.point.u_c.contains_key(k) {
                        return Err(Error::InvalidArgument(format!("`{k}` is not a conditioning variable")));
                    }
                    self.df.column(k)?.check_value(v)?;
                }
                self.point.u_c.extend(values.clone());
                self.visit(VisitSource::SetPoint);
                conditions = true;
                Mutation::SetPoint { values }
            }
            Mutation::Snap(click) => {
                let (p, _) = snap_point(&self.df, &self.roles, &self.space, &self.point, &click)?;
                self.point = p;
                self.visit(if click.double { VisitSource::Snap } else { VisitSource::SetPoint });
                conditions = true;
                Mutation::Snap(click)
            }
            Mutation::SetSigma { sigma } => {
                let cfg = SimilarityConfig { sigma, ..self.cfg };
                cfg.validate()?;
                self.cfg = cfg;
                Mutation::SetSigma { sigma }
            }
            Mutation::SetDistance { distance } => {
                self.cfg.distance = distance;
                Mutation::SetDistance { distance }
            }
            Mutation::SetSectionVars { vars } => {
                self.set_section_vars(&vars)?;
                self.visit(VisitSource::SectionVars);
                conditions = true;
                Mutation::SetSectionVars { vars }
            }
            Mutation::SetColorVar { var } => {
                if let Some(v) = &var {
                    self.df.column(v)?;
                }
                self.color_var = var.clone();
                Mutation::SetColorVar { var }
            }
            Mutation::StartTour(mut req) => {
                let seed = req.seed.unwrap_or_else(|| self.seed.wrapping_add(self.tours_started));
                req.seed = Some(seed);
                let tour = self.build_tour(&req, seed, cancel, progress)?;
                self.tours_started += 1;
                self.tour = Some(tour.clone());
                self.step = None;
                tour_out = Some(tour);
                Mutation::StartTour(req)
            }
            Mutation::TourStep { step } => {
                let tour = self.tour.as_ref().ok_or(Error::NoTour)?;
                let path = tour.interpolated.as_ref().unwrap_or(&tour.points);
                let p = path.get(step).ok_or(Error::StepOutOfRange { step, len: path.len() })?.clone();
                p.validate(&self.df, &self.roles)?;
                self.point = p;
                self.step = Some(step);
                self.visit(VisitSource::TourStep);
                conditions = true;
                Mutation::TourStep { step }
            }
            Mutation::SelectObservation { row } => {
                if row >= self.df.nrows() {
                    return Err(Error::InvalidArgument(format!("row {row} out of range")));
                }
                self.point.u_c = self.df.row_values(row, &self.roles.conditioning)?;
                self.visit(VisitSource::SelectObservation);
                conditions = true;
                Mutation::SelectObservation { row }
            }
        };
        self.section = self.compute_section()?;
        let conditions = if conditions { Some(self.conditions()?) } else { None };
        Ok((logged, Update { section: self.section.clone(), conditions, tour: tour_out }))
    }

    /// Old section variables join the conditioning set at their default
    /// values; new ones leave it. An active tour no longer fits and is dropped.
    fn set_section_vars(&mut self, vars: &[String]) -> Result<()> {
        let mut roles = self.roles.clone();
        for v in vars {
            if !roles.section.contains(v) && !roles.conditioning.contains(v) {
                return Err(Error::InvalidRoles(format!("`{v}` is not a section or conditioning variable")));
            }
        }
        let old = std::mem::replace(&mut roles.section, vars.to_vec());
        roles.conditioning.retain(|c| !vars.contains(c));
        for v in old.into_iter().filter(|v| !vars.contains(v)) {
            roles.conditioning.push(v);
        }
        roles.validate(&self.df)?;
        let mut point = self.point.clone();
        point.u_c.retain(|k, _| roles.conditioning.contains(k));
        for c in &roles.conditioning {
            if !point.u_c.contains_key(c) {
                let v = self.defaults.get(c).cloned().ok_or_else(|| Error::UnknownColumn(c.clone()))?;
                point.u_c.insert(c.clone(), v);
            }
        }
        self.space = ConditioningSpace::new(&self.df, &roles.conditioning)?;
        self.roles = roles;
        self.point = point;
        self.tour = None;
        self.step = None;
        Ok(())
    }

    fn build_tour(
        &self,
        req: &TourRequest,
        seed: u64,
        cancel: &CancelToken,
        progress: Option<Progress<'_>>,
    ) -> Result<Tour> {
        let ts = TourSpace::new(&self.df, &self.roles.conditioning, self.point.u_f.clone())?;
        let inputs = TourInputs {
            response: self.roles.response.as_deref(),
            models: &self.models,
            start: Some(&self.point),
            similarity: &self.cfg,
        };
        build_tour(&ts, req, seed, &inputs, cancel, progress)
    }

    pub fn export_visited(&self) -> VisitedExport {
        VisitedExport {
            schema: PAYLOAD_SCHEMA.into(),
            session_id: self.id.clone(),
            seed: self.seed,
            visited: self.visited.clone(),
        }
    }

    /// Visited points as CSV: `seq`, `timestampMs`, `source`, then one column
    /// per variable ever in the point. Variables absent at some visit take
    /// their default value so every row is complete.
    pub fn visited_csv(&self) -> Result<String> {
        let mut names: Vec<String> = Vec::new();
        for v in &self.visited {
            for (k, _) in v.point.values() {
                if !names.contains(k) {
                    names.push(k.clone());
                }
            }
        }
        let n = self.visited.len();
        let mut cols = vec![
            Column::numeric("seq", self.visited.iter().map(|v| v.seq as f64).collect()),
            Column::numeric("timestampMs", self.visited.iter().map(|v| v.timestamp_ms as f64).collect()),
        ];
        let sources: Vec<String> = self
            .visited
            .iter()
            .map(|v| serde_json::to_value(v.source).ok().and_then(|s| s.as_str().map(str::to_string)).unwrap_or_default())
            .collect();
        cols.push(Column::from_labels("source", &sources));
        for name in &names {
            let template = self.df.column(name)?;
            let values: Vec<Value> = self
                .visited
                .iter()
                .map(|v| {
                    v.point.u_c.get(name).or_else(|| v.point.u_f.get(name)).or_else(|| self.defaults.get(name)).cloned()
                })
                .collect::<Option<Vec<_>>>()
                .ok_or_else(|| Error::UnknownColumn(name.clone()))?;
            debug_assert_eq!(values.len(), n);
            cols.push(template.with_values(&values)?);
        }
        DataFrame::new(cols)?.to_csv()
    }
}

impl SectionPayload {
    fn placeholder() -> SectionPayload {
        SectionPayload {
            schema: PAYLOAD_SCHEMA.into(),
            plot_type: crate::section::PlotType::Curve,
            section_vars: Vec::new(),
            grid: crate::section::SectionGrid { axes: Vec::new() },
            fits: Vec::new(),
            points: Vec::new(),
            visible_count: 0,
            total_similarity: 0.0,
            n: 0,
            point: SectionPoint::default(),
            similarity: SimilarityConfig::default(),
            color_var: None,
            warnings: Vec::new(),
        }
    }
}
