//! HTTP JSON API over the scenario engine, backed by a file profile store.
//!
//! The API is unauthenticated; bind it to a trusted interface.

pub mod api;
pub mod error;
pub mod store;

use std::net::SocketAddr;

pub use api::{router, AppState, ServiceConfig, DEFAULT_ASYNC_THRESHOLD};
pub use error::ApiError;
pub use store::{FileStore, ProfileRepository, StoreError};

/// Serves until Ctrl-C.
pub async fn serve(config: ServiceConfig, addr: SocketAddr) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    tracing::info!("listening on {}", listener.local_addr()?);
    axum::serve(listener, router(&config))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
}
