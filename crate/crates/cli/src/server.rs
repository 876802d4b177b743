//! Serves [`crate::api::handle`] over HTTP.

use std::net::SocketAddr;
use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::State;
use axum::http::{Method, StatusCode, Uri};
use axum::response::{IntoResponse, Response};
use axum::{Json, Router};
use tokio::net::TcpListener;

use crate::api;
use crate::store::SessionStore;

pub fn router(store: Arc<SessionStore>) -> Router {
    Router::new().fallback(dispatch).with_state(store)
}

async fn dispatch(State(store): State<Arc<SessionStore>>, method: Method, uri: Uri, body: Bytes) -> Response {
    let path = uri.path().to_string();
    let query = uri.query().map(str::to_string);
    // zooms re-run the abstraction; keep them off the reactor
    let res = tokio::task::spawn_blocking(move || api::handle(&store, method.as_str(), &path, query.as_deref(), &body)).await;
    match res {
        Ok(r) => (StatusCode::from_u16(r.status).unwrap_or(StatusCode::INTERNAL_SERVER_ERROR), Json(r.body)).into_response(),
        Err(e) => (StatusCode::INTERNAL_SERVER_ERROR, Json(serde_json::json!({ "error": e.to_string() }))).into_response(),
    }
}

pub async fn serve_on(listener: TcpListener, store: Arc<SessionStore>) -> std::io::Result<()> {
    axum::serve(listener, router(store)).await
}

pub fn serve(addr: SocketAddr, store: Arc<SessionStore>) -> std::io::Result<()> {
    let rt = tokio::runtime::Builder::new_multi_thread().enable_all().build()?;
    rt.block_on(async {
        let listener = TcpListener::bind(addr).await?;
        eprintln!("serving {} snapshot(s) on http://{}", store.len(), listener.local_addr()?);
        serve_on(listener, store).await
    })
}
