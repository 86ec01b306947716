//! HTTP backend for single-stimulus rating sessions.
//!
//! A session is a per-subject playlist drawn from the catalog with at most
//! one variant per source group. Items are shown in order; each item's
//! media URL is a one-time token whose bytes are delivered at most once,
//! and a rating is accepted only after the media was opened. Everything
//! is recorded in an append-only event log under the data directory and
//! replayed on startup. Completed sessions are exported in the ratings CSV
//! schema that `mdvqa mos` reads.
//!
//! | method | path | |
//! |---|---|---|
//! | POST | `/sessions` | `{subject_id, study_id?, playlist?, size?, seed?}` |
//! | GET | `/sessions/{id}` | progress |
//! | GET | `/sessions/{id}/next` | current item and its media URL |
//! | POST | `/sessions/{id}/ratings` | `{video_id, rating}` |
//! | GET | `/media/{token}` | media bytes, single `Range` supported |
//! | GET | `/studies/{id}/export.csv` | ratings of completed sessions |

pub mod api;
pub mod catalog;
pub mod media;
pub mod state;
pub mod store;

use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::Arc;

use parking_lot::Mutex;

pub use api::{router, Shared};
pub use catalog::{Catalog, CatalogItem};
pub use state::{ApiError, NextItem, RatingAck, Registry, SessionInfo, SessionState, Settings};

#[derive(Debug, thiserror::Error)]
pub enum ServerError {
    #[error("configuration: {0}")]
    Config(String),
    #[error("event log: {0}")]
    Log(String),
    #[error(transparent)]
    Manifest(#[from] mdvqa_core::features::FeatureError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone)]
pub struct ServerConfig {
    pub manifest: PathBuf,
    pub media_dir: PathBuf,
    /// Event log and CSV snapshots.
    pub data_dir: PathBuf,
    pub addr: SocketAddr,
    pub seed: u64,
    pub playlist_size: usize,
}

impl ServerConfig {
    pub fn new(manifest: impl Into<PathBuf>, media_dir: impl Into<PathBuf>, data_dir: impl Into<PathBuf>) -> Self {
        Self {
            manifest: manifest.into(),
            media_dir: media_dir.into(),
            data_dir: data_dir.into(),
            addr: ([127, 0, 0, 1], 8080).into(),
            seed: 0,
            playlist_size: state::DEFAULT_PLAYLIST,
        }
    }
}

/// Load the catalog and replay the data directory.
pub fn open(cfg: &ServerConfig) -> Result<Shared, ServerError> {
    let manifest = mdvqa_core::Manifest::load(&cfg.manifest)?;
    let catalog = Catalog::from_manifest(&manifest, &cfg.media_dir)?;
    if catalog.is_empty() {
        return Err(ServerError::Config(format!(
            "no manifest video has a media file in {}",
            cfg.media_dir.display()
        )));
    }
    open_with_catalog(catalog, cfg)
}

pub fn open_with_catalog(catalog: Catalog, cfg: &ServerConfig) -> Result<Shared, ServerError> {
    let (log, events) = store::EventLog::open(&cfg.data_dir)?;
    let settings = Settings {
        seed: cfg.seed,
        playlist_size: cfg.playlist_size,
        snapshot_dir: Some(cfg.data_dir.join("snapshots")),
    };
    let n = events.len();
    let reg = Registry::restore(catalog, settings, log, events)?;
    tracing::info!(events = n, videos = reg.catalog().len(), "state restored");
    Ok(Arc::new(Mutex::new(reg)))
}

/// Serve until ctrl-c.
pub async fn serve(cfg: ServerConfig) -> Result<(), ServerError> {
    let shared = open(&cfg)?;
    let listener = tokio::net::TcpListener::bind(cfg.addr).await?;
    tracing::info!(addr = %listener.local_addr()?, "listening");
    axum::serve(listener, router(shared))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await?;
    Ok(())
}
