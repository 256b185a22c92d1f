//! HTTP service for interactive sessions.
//!
//! Mutations arrive as `PATCH /sessions/{id}` requests; recomputed payloads
//! are also pushed over a server-sent event stream at
//! `/sessions/{id}/events` so auto-played tours animate without polling.

pub mod api;
pub mod error;
pub mod model_server;
pub mod store;

use std::net::SocketAddr;
use std::sync::Arc;

use tokio::net::TcpListener;

pub use api::{apply_mutation, router, AppState};
pub use error::{ApiError, ApiResult};
pub use store::{Event, SessionSlot, Store};

/// Serves `app` until the process ends, reporting the bound address first.
pub async fn serve_router(app: axum::Router, addr: SocketAddr, on_bound: impl FnOnce(SocketAddr)) -> std::io::Result<()> {
    let listener = TcpListener::bind(addr).await?;
    on_bound(listener.local_addr()?);
    axum::serve(listener, app).await
}

pub async fn serve(addr: SocketAddr, on_bound: impl FnOnce(SocketAddr)) -> std::io::Result<()> {
    serve_router(router(Arc::new(Store::new())), addr, on_bound).await
}
