//! Network front end of the annotation engine: HTTP ingest and state
//! endpoints, a WebSocket notification stream, log persistence and replay.

pub mod config;
pub mod engine;
pub mod error;
pub mod http;
pub mod persist;
pub mod wire;

use std::future::Future;
use std::sync::Arc;

use tokio::net::TcpListener;

pub use config::ServiceConfig;
pub use engine::{Engine, Health, Ingested, ReplayRequest, ReplaySpeed, ReplaySummary, Subscription};
pub use error::{Result, ServiceError};
pub use http::router;
pub use wire::{ClientFrame, ConversationCueState, Cue, FrameFold, LastMessageCue, NotificationPayload, ServerFrame};

/// Builds the engine a configuration describes, recovering from its log.
pub fn engine_from_config(config: &ServiceConfig) -> Result<Engine> {
    let annotator = config.build_annotator()?;
    match &config.log_path {
        Some(path) => Engine::open(annotator, path),
        None => Ok(Engine::in_memory(annotator)),
    }
}

/// Serves `engine` on `listener` until `shutdown` resolves.
pub async fn serve(
    engine: Arc<Engine>,
    listener: TcpListener,
    token: Option<String>,
    shutdown: impl Future<Output = ()> + Send + 'static,
) -> Result<()> {
    let app = router(engine, token);
    axum::serve(listener, app).with_graceful_shutdown(shutdown).await?;
    Ok(())
}

/// Loads everything from `config`, binds the listen address and serves
/// until Ctrl-C.
pub async fn run(config: ServiceConfig) -> Result<()> {
    let engine = Arc::new(engine_from_config(&config)?);
    let listener = TcpListener::bind(&config.listen)
        .await
        .map_err(|e| ServiceError::Config(format!("cannot listen on {}: {e}", config.listen)))?;
    tracing::info!(address = %listener.local_addr()?, "listening");
    serve(engine, listener, config.auth_token.clone(), async {
        let _ = tokio::signal::ctrl_c().await;
    })
    .await
}
