//! Reference implementation of the external model protocol: serves any
//! model handle at `POST /predict`.

use axum::body::Bytes;
use axum::extract::State;
use axum::http::StatusCode;
use axum::routing::{get, post};
use axum::{Json, Router};
use slicevis_core::model::{ModelInfo, PredictRequest, PredictResponse};
use slicevis_core::ModelHandle;

use crate::error::{ApiError, ApiResult};

pub fn router(model: ModelHandle) -> Router {
    Router::new()
        .route("/predict", post(predict))
        .route("/info", get(info))
        .with_state(model)
}

async fn predict(State(model): State<ModelHandle>, body: Bytes) -> ApiResult<Json<PredictResponse>> {
    let req: PredictRequest =
        serde_json::from_slice(&body).map_err(|e| ApiError::BadRequest(format!("invalid predict request: {e}")))?;
    let out = tokio::task::spawn_blocking(move || -> ApiResult<PredictResponse> {
        let rows = req.to_frame()?;
        Ok(PredictResponse::from_predictions(&model.predict(&rows)?))
    })
    .await
    .map_err(|e| ApiError::Internal(e.to_string()))??;
    Ok(Json(out))
}

async fn info(State(model): State<ModelHandle>) -> (StatusCode, Json<ModelInfo>) {
    (StatusCode::OK, Json(model.info()))
}
