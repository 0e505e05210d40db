use std::collections::HashMap;
use std::sync::{Arc, RwLock};

use ckb_core::engine::Session;
use ckb_core::journal::{replay_journal, JournalError, JournalStore};
use ckb_core::KnowledgeBase;
use tokio::sync::Mutex;

use crate::error::ApiError;

/// A live session and the last sequence number known to be on disk.
#[derive(Debug)]
pub struct Entry {
    pub session: Session,
    persisted: u64,
}

/// Shared service state. Each session sits behind its own async mutex, so
/// requests for one session are serialized while different sessions proceed
/// independently.
pub struct AppState {
    pub kb: Arc<KnowledgeBase>,
    pub kb_hash: String,
    store: Arc<JournalStore>,
    sessions: RwLock<HashMap<String, Arc<Mutex<Entry>>>>,
    /// Journals that could not be replayed against the loaded KB, with the reason.
    unavailable: RwLock<HashMap<String, String>>,
}

impl AppState {
    /// Load every journaled session. Sessions that fail to replay stay on
    /// disk untouched and answer 409 until migrated.
    pub fn open(kb: KnowledgeBase, store: JournalStore) -> Result<Self, JournalError> {
        let kb_hash = kb.fingerprint();
        let mut sessions = HashMap::new();
        let mut unavailable = HashMap::new();
        for id in store.sessions()? {
            match replay_journal(&store, &kb, &id) {
                Ok(session) => {
                    let persisted = session.events.last().map_or(0, |e| e.seq);
                    sessions.insert(id, Arc::new(Mutex::new(Entry { session, persisted })));
                }
                Err(JournalError::Io(e)) => return Err(JournalError::Io(e)),
                Err(e) => {
                    tracing::warn!(session = %id, error = %e, "session not loaded");
                    unavailable.insert(id, e.to_string());
                }
            }
        }
        tracing::info!(loaded = sessions.len(), skipped = unavailable.len(), "journal replayed");
        Ok(AppState {
            kb: Arc::new(kb),
            kb_hash,
            store: Arc::new(store),
            sessions: RwLock::new(sessions),
            unavailable: RwLock::new(unavailable),
        })
    }

    pub fn session(&self, id: &str) -> Result<Arc<Mutex<Entry>>, ApiError> {
        if let Some(reason) = self.unavailable.read().unwrap().get(id) {
            return Err(ApiError::conflict(reason.clone()));
        }
        self.sessions
            .read()
            .unwrap()
            .get(id)
            .cloned()
            .ok_or_else(|| ApiError::not_found(format!("unknown session {id}")))
    }

    fn exists(&self, id: &str) -> bool {
        self.sessions.read().unwrap().contains_key(id) || self.unavailable.read().unwrap().contains_key(id)
    }

    /// Persist a freshly started session and register it.
    pub async fn insert(&self, session: Session) -> Result<(), ApiError> {
        let id = session.session_id.clone();
        if self.exists(&id) {
            return Err(ApiError::conflict(format!("session {id} already exists")));
        }
        let persisted = self.persist(&session, 0).await?;
        let mut sessions = self.sessions.write().unwrap();
        if sessions.contains_key(&id) {
            return Err(ApiError::conflict(format!("session {id} already exists")));
        }
        sessions.insert(id, Arc::new(Mutex::new(Entry { session, persisted })));
        Ok(())
    }

    /// Replace the entry's session with `next` once its new events are on disk.
    /// On a storage failure the in-memory session is left unchanged.
    pub async fn commit(&self, entry: &mut Entry, next: Session) -> Result<(), ApiError> {
        entry.persisted = self.persist(&next, entry.persisted).await?;
        entry.session = next;
        Ok(())
    }

    async fn persist(&self, session: &Session, after: u64) -> Result<u64, ApiError> {
        let events = session.events_after(after).to_vec();
        let Some(last) = events.last().map(|e| e.seq) else { return Ok(after) };
        let store = Arc::clone(&self.store);
        tokio::task::spawn_blocking(move || events.iter().try_for_each(|e| store.append_event(e)))
            .await
            .map_err(|e| ApiError::internal(e.to_string()))??;
        Ok(last)
    }
}
