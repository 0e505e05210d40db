//! Append-only session journal.
//!
//! Each session is stored as `<dir>/<session_id>.jsonl`, one JSON event per
//! line. Events are fsynced before `append_event` returns. A session is
//! rebuilt by replaying its events against the same knowledge base; the
//! journal records the KB fingerprint so an edited KB is rejected rather than
//! silently reinterpreting old answers.

use std::collections::HashMap;
use std::fs::{self, File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use crate::engine::{self, ChallengeOutcome, NextStep, Session, VerdictValue};
use crate::model::{KnowledgeBase, Value};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventKind {
    SessionStarted,
    AnswerSubmitted,
    SessionConcluded,
    ExceptionApplied,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "payload", rename_all = "snake_case")]
pub enum EventBody {
    SessionStarted { goal: String, kb_hash: String },
    AnswerSubmitted { question_id: String, value: Value },
    SessionConcluded { verdict: VerdictValue },
    ExceptionApplied { pattern_id: String, exception_id: String, outcome: ChallengeOutcome },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JournalEvent {
    pub seq: u64,
    pub ts: DateTime<Utc>,
    pub session_id: String,
    #[serde(flatten)]
    pub body: EventBody,
}

impl JournalEvent {
    pub fn kind(&self) -> EventKind {
        match self.body {
            EventBody::SessionStarted { .. } => EventKind::SessionStarted,
            EventBody::AnswerSubmitted { .. } => EventKind::AnswerSubmitted,
            EventBody::SessionConcluded { .. } => EventKind::SessionConcluded,
            EventBody::ExceptionApplied { .. } => EventKind::ExceptionApplied,
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum JournalError {
    #[error("session {session}: expected seq {expected}, got {got}")]
    SequenceConflict { session: String, expected: u64, got: u64 },
    #[error("session {0} is concluded; no further events are accepted")]
    AfterConclusion(String),
    #[error("session {session}: {reason}")]
    InvalidEvent { session: String, reason: String },
    #[error("no journal for session {0}")]
    MissingSession(String),
    #[error("journal for session {session} is corrupt at seq {seq}: {reason}")]
    Corrupt { session: String, seq: u64, reason: String },
    #[error("session {session} was recorded against knowledge base {recorded}, but {loaded} is loaded; migrate the session explicitly")]
    KbMismatch { session: String, recorded: String, loaded: String },
    #[error("invalid session id {0:?}")]
    InvalidSessionId(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy)]
struct Tail {
    last_seq: u64,
    concluded: bool,
}

pub struct JournalStore {
    dir: PathBuf,
    tails: Mutex<HashMap<String, Tail>>,
}

pub fn valid_session_id(id: &str) -> bool {
    !id.is_empty() && id.len() <= 128 && id.chars().all(|c| c.is_ascii_alphanumeric() || c == '-' || c == '_')
}

impl JournalStore {
    pub fn open(dir: impl Into<PathBuf>) -> Result<Self, JournalError> {
        let dir = dir.into();
        fs::create_dir_all(&dir)?;
        Ok(JournalStore { dir, tails: Mutex::new(HashMap::new()) })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    fn path(&self, session_id: &str) -> Result<PathBuf, JournalError> {
        if !valid_session_id(session_id) {
            return Err(JournalError::InvalidSessionId(session_id.to_string()));
        }
        Ok(self.dir.join(format!("{session_id}.jsonl")))
    }

    /// Append one event; it is on disk when this returns `Ok`.
    pub fn append_event(&self, event: &JournalEvent) -> Result<(), JournalError> {
        let path = self.path(&event.session_id)?;
        let mut tails = self.tails.lock().expect("journal lock poisoned");
        let tail = match tails.get(&event.session_id) {
            Some(t) => *t,
            None => {
                let events = match self.read_events(&event.session_id) {
                    Ok(evs) => evs,
                    Err(JournalError::MissingSession(_)) => Vec::new(),
                    Err(e) => return Err(e),
                };
                Tail {
                    last_seq: events.last().map(|e| e.seq).unwrap_or(0),
                    concluded: events.iter().any(|e| e.kind() == EventKind::SessionConcluded),
                }
            }
        };
        let session = event.session_id.clone();
        if tail.concluded {
            return Err(JournalError::AfterConclusion(session));
        }
        if event.seq != tail.last_seq + 1 {
            return Err(JournalError::SequenceConflict { session, expected: tail.last_seq + 1, got: event.seq });
        }
        let starts = event.kind() == EventKind::SessionStarted;
        if starts != (event.seq == 1) {
            return Err(JournalError::InvalidEvent {
                session,
                reason: "session_started must be the first event and only the first".into(),
            });
        }

        let mut line = serde_json::to_string(event).expect("journal events serialize");
        line.push('\n');
        let mut file = OpenOptions::new().create(true).append(true).open(&path)?;
        file.write_all(line.as_bytes())?;
        file.flush()?;
        file.sync_data()?;

        tails.insert(
            event.session_id.clone(),
            Tail { last_seq: event.seq, concluded: event.kind() == EventKind::SessionConcluded },
        );
        Ok(())
    }

    /// Append every event of `session` after sequence number `after`.
    pub fn append_session_events(&self, session: &Session, after: u64) -> Result<(), JournalError> {
        for e in session.events_after(after) {
            self.append_event(e)?;
        }
        Ok(())
    }

    /// All events of a session, in file order. Lines that do not parse are reported as corruption.
    pub fn read_events(&self, session_id: &str) -> Result<Vec<JournalEvent>, JournalError> {
        let path = self.path(session_id)?;
        let file = match File::open(&path) {
            Ok(f) => f,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => {
                return Err(JournalError::MissingSession(session_id.to_string()))
            }
            Err(e) => return Err(e.into()),
        };
        let mut events = Vec::new();
        for (i, line) in BufReader::new(file).lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let event: JournalEvent = serde_json::from_str(&line).map_err(|e| JournalError::Corrupt {
                session: session_id.to_string(),
                seq: i as u64 + 1,
                reason: format!("unreadable record: {e}"),
            })?;
            events.push(event);
        }
        Ok(events)
    }

    /// Ids of all sessions with a journal file, sorted.
    pub fn sessions(&self) -> Result<Vec<String>, JournalError> {
        let mut out = Vec::new();
        for entry in fs::read_dir(&self.dir)? {
            let path = entry?.path();
            if path.extension().is_some_and(|e| e == "jsonl") {
                if let Some(stem) = path.file_stem().and_then(|s| s.to_str()) {
                    if valid_session_id(stem) {
                        out.push(stem.to_string());
                    }
                }
            }
        }
        out.sort();
        Ok(out)
    }
}

/// Rebuild a session from its journal.
pub fn replay_journal(store: &JournalStore, kb: &KnowledgeBase, session_id: &str) -> Result<Session, JournalError> {
    let events = store.read_events(session_id)?;
    replay_events(kb, session_id, &events)
}

pub fn replay_events(kb: &KnowledgeBase, session_id: &str, events: &[JournalEvent]) -> Result<Session, JournalError> {
    let corrupt = |seq: u64, reason: String| JournalError::Corrupt { session: session_id.to_string(), seq, reason };
    if events.is_empty() {
        return Err(JournalError::MissingSession(session_id.to_string()));
    }
    for (i, e) in events.iter().enumerate() {
        let expected = i as u64 + 1;
        if e.seq != expected {
            return Err(corrupt(expected, format!("sequence gap (found seq {})", e.seq)));
        }
        if e.session_id != session_id {
            return Err(corrupt(expected, format!("event belongs to session {}", e.session_id)));
        }
    }

    let first = &events[0];
    let EventBody::SessionStarted { goal, kb_hash } = &first.body else {
        return Err(corrupt(1, "first event is not session_started".into()));
    };
    let loaded = kb.fingerprint();
    if *kb_hash != loaded {
        return Err(JournalError::KbMismatch { session: session_id.to_string(), recorded: kb_hash.clone(), loaded });
    }
    let mut session = engine::start_session(kb, goal, session_id, first.ts).map_err(|e| corrupt(1, e.to_string()))?;

    for e in &events[1..] {
        match &e.body {
            EventBody::SessionStarted { .. } => return Err(corrupt(e.seq, "session started twice".into())),
            EventBody::AnswerSubmitted { question_id, value } => {
                engine::submit_answer(kb, &mut session, question_id, value.clone(), e.ts)
                    .map_err(|err| corrupt(e.seq, err.to_string()))?;
            }
            EventBody::ExceptionApplied { pattern_id, exception_id, outcome } => {
                let result = engine::apply_exception(kb, &session, pattern_id, exception_id)
                    .map_err(|err| corrupt(e.seq, err.to_string()))?;
                if result.outcome != *outcome {
                    return Err(corrupt(e.seq, "exception outcome differs on replay".into()));
                }
                if !session.record_exception(&result, e.ts) {
                    return Err(corrupt(e.seq, "exception applied after conclusion".into()));
                }
            }
            EventBody::SessionConcluded { verdict } => match engine::next_question(kb, &mut session, e.ts) {
                NextStep::Concluded { verdict: v } if v.value == *verdict => {}
                _ => return Err(corrupt(e.seq, "recorded conclusion does not follow from the answers".into())),
            },
        }
        if session.events.last() != Some(e) {
            return Err(corrupt(e.seq, "replayed event differs from the record".into()));
        }
    }
    Ok(session)
}
