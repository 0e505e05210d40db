//! HTTP/JSON service over the compliance engine.
//!
//! Sessions are event-sourced: every state change is appended to the
//! session's journal before the response is sent, and all journals are
//! replayed at startup.

mod error;
mod routes;
mod state;

use std::net::{IpAddr, Ipv4Addr, SocketAddr};
use std::path::PathBuf;
use std::sync::Arc;

use ckb_core::journal::{JournalError, JournalStore};
use ckb_core::KnowledgeBase;

pub use error::ApiError;
pub use routes::router;
pub use state::AppState;

pub const ENV_LISTEN: &str = "CKB_LISTEN";
pub const ENV_PORT: &str = "CKB_PORT";
pub const ENV_KB: &str = "CKB_KB";
pub const ENV_JOURNAL_DIR: &str = "CKB_JOURNAL_DIR";

pub const DEFAULT_PORT: u16 = 8080;

#[derive(Debug, Clone)]
pub struct Config {
    pub listen: IpAddr,
    pub port: u16,
    /// Knowledge base source; the built-in seed KB when absent.
    pub kb_path: Option<PathBuf>,
    pub journal_dir: PathBuf,
}

impl Default for Config {
    fn default() -> Self {
        Config {
            listen: IpAddr::V4(Ipv4Addr::LOCALHOST),
            port: DEFAULT_PORT,
            kb_path: None,
            journal_dir: PathBuf::from("journal"),
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ServeError {
    #[error("cannot read {path}: {source}")]
    ReadKb { path: PathBuf, source: std::io::Error },
    #[error("knowledge base {path} is invalid:\n{errors}")]
    InvalidKb { path: String, errors: ckb_core::dsl::ParseErrors },
    #[error(transparent)]
    Journal(#[from] JournalError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub fn load_kb(path: Option<&std::path::Path>) -> Result<KnowledgeBase, ServeError> {
    let Some(path) = path else {
        return ckb_core::seed::seed_kb().map_err(|errors| ServeError::InvalidKb { path: "<seed>".into(), errors });
    };
    let text = std::fs::read_to_string(path).map_err(|source| ServeError::ReadKb { path: path.into(), source })?;
    let name = path.display().to_string();
    ckb_core::dsl::parse_kb_named(&text, &name).map_err(|errors| ServeError::InvalidKb { path: name, errors })
}

/// Load the KB, replay the journal directory and serve until Ctrl-C.
pub async fn serve(config: Config) -> Result<(), ServeError> {
    let kb = load_kb(config.kb_path.as_deref())?;
    let store = JournalStore::open(&config.journal_dir)?;
    let state = Arc::new(AppState::open(kb, store)?);
    let addr = SocketAddr::new(config.listen, config.port);
    let listener = tokio::net::TcpListener::bind(addr).await?;
    tracing::info!(%addr, kb_hash = %state.kb_hash, journal = %config.journal_dir.display(), "listening");
    axum::serve(listener, router(state))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await?;
    Ok(())
}
