//! HTTP front end for key point analysis jobs.
//!
//! Jobs are persisted under a store directory, analysed on a bounded worker
//! pool, and can be revised by analysts. Every re-match writes a new
//! immutable version of the result.

mod api;
mod error;
mod jobs;
mod store;

use std::net::SocketAddr;
use std::path::PathBuf;

pub use api::{
    router, AddBody, CommentPage, CommentRow, CreateJob, JobCreated, JobView, KeyPointList, KeyPointRow, ReviseBody,
    RevisionAccepted, VersionCreated,
};
pub use error::{ApiError, ErrorBody};
pub use jobs::AppState;
pub use store::{JobRecord, JobStatus, JobStore, Revision, StoreError};

/// Opens the store, re-queues pending jobs and serves until the listener fails.
pub async fn serve(addr: SocketAddr, store_dir: PathBuf, workers: usize) -> std::io::Result<()> {
    let store = JobStore::open(store_dir).map_err(std::io::Error::other)?;
    let state = AppState::open(store, workers).map_err(std::io::Error::other)?;
    state.resume().map_err(std::io::Error::other)?;
    let listener = tokio::net::TcpListener::bind(addr).await?;
    axum::serve(listener, router(state)).await
}
