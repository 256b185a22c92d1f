use std::collections::HashMap;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use parking_lot::{Mutex, RwLock};
use slicevis_core::frame::DatasetSummary;
use slicevis_core::session::Session;
use slicevis_core::tour::CancelToken;
use slicevis_core::{DataFrame, Error, ModelHandle};
use tokio::sync::broadcast;
use tokio::task::AbortHandle;

use crate::error::{ApiError, ApiResult};

#[derive(Debug)]
pub struct Dataset {
    pub id: String,
    pub df: Arc<DataFrame>,
    pub summary: DatasetSummary,
}

/// Pushed to event-stream subscribers of a session.
#[derive(Debug, Clone)]
pub enum Event {
    /// JSON of a mutation's [`slicevis_core::session::Update`].
    Update(Arc<String>),
    Progress(f64),
    PlayStopped { step: Option<usize> },
}

/// One session: readers take the lock briefly and always see a committed
/// state; writers queue on `writer` and compute on a copy.
#[derive(Debug)]
pub struct SessionSlot {
    pub state: RwLock<Session>,
    pub writer: tokio::sync::Mutex<()>,
    pub events: broadcast::Sender<Event>,
    pub cancel: Mutex<CancelToken>,
    pub player: Mutex<Option<AbortHandle>>,
}

impl SessionSlot {
    fn new(session: Session) -> Self {
        SessionSlot {
            state: RwLock::new(session),
            writer: tokio::sync::Mutex::new(()),
            events: broadcast::channel(256).0,
            cancel: Mutex::new(CancelToken::new()),
            player: Mutex::new(None),
        }
    }

    pub fn stop_player(&self) {
        if let Some(h) = self.player.lock().take() {
            h.abort();
        }
    }
}

/// In-memory registry of datasets, models and sessions.
#[derive(Debug, Default)]
pub struct Store {
    datasets: RwLock<HashMap<String, Arc<Dataset>>>,
    models: RwLock<HashMap<String, ModelHandle>>,
    sessions: RwLock<HashMap<String, Arc<SessionSlot>>>,
    next: AtomicU64,
}

impl Store {
    pub fn new() -> Self {
        Self::default()
    }

    fn fresh_id(&self, prefix: &str) -> String {
        format!("{prefix}{}", self.next.fetch_add(1, Ordering::Relaxed) + 1)
    }

    pub fn add_dataset(&self, df: DataFrame, rows_dropped: usize) -> Arc<Dataset> {
        let id = self.fresh_id("d");
        let mut summary = DatasetSummary::of(&df, rows_dropped);
        summary.id = Some(id.clone());
        let ds = Arc::new(Dataset { id: id.clone(), df: Arc::new(df), summary });
        self.datasets.write().insert(id, ds.clone());
        ds
    }

    pub fn dataset(&self, id: &str) -> ApiResult<Arc<Dataset>> {
        self.datasets.read().get(id).cloned().ok_or_else(|| ApiError::NotFound(format!("unknown dataset `{id}`")))
    }

    /// Registers `model`, replacing its id with a fresh one unless `keep_id`.
    pub fn add_model(&self, model: ModelHandle, keep_id: bool) -> ApiResult<ModelHandle> {
        let mut models = self.models.write();
        let model = if keep_id {
            if models.contains_key(model.id()) {
                return Err(ApiError::BadRequest(format!("model id `{}` is taken", model.id())));
            }
            model
        } else {
            let id = self.fresh_id("m");
            model.with_id(id)
        };
        models.insert(model.id().to_string(), model.clone());
        Ok(model)
    }

    pub fn model(&self, id: &str) -> ApiResult<ModelHandle> {
        self.models.read().get(id).cloned().ok_or_else(|| Error::UnknownModel(id.to_string()).into())
    }

    pub fn new_session_id(&self) -> String {
        self.fresh_id("s")
    }

    pub fn add_session(&self, session: Session) -> Arc<SessionSlot> {
        let slot = Arc::new(SessionSlot::new(session));
        let id = slot.state.read().id().to_string();
        self.sessions.write().insert(id, slot.clone());
        slot
    }

    pub fn session(&self, id: &str) -> ApiResult<Arc<SessionSlot>> {
        self.sessions.read().get(id).cloned().ok_or_else(|| Error::UnknownSession(id.to_string()).into())
    }

    pub fn remove_session(&self, id: &str) -> ApiResult<Arc<SessionSlot>> {
        let slot = self.sessions.write().remove(id).ok_or_else(|| ApiError::from(Error::UnknownSession(id.to_string())))?;
        slot.stop_player();
        slot.cancel.lock().cancel();
        Ok(slot)
    }
}
