//! Per-session model state.

use std::collections::HashMap;
use std::sync::{Arc, Mutex};

use serde::{Deserialize, Serialize};

use crate::schemas::{timestamp_now, ChatArtifact, ModelRef, Operation};

pub const DEFAULT_SESSION: &str = "default";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct SessionState {
    pub session_id: String,
    pub current_model: Option<ModelRef>,
    pub history: Vec<ChatArtifact>,
    pub created_at: String,
}

impl SessionState {
    pub fn new(session_id: impl Into<String>) -> Self {
        Self { session_id: session_id.into(), current_model: None, history: Vec::new(), created_at: timestamp_now() }
    }

    /// Store key that new versions of this session's model go to.
    pub fn model_key(&self) -> String {
        session_key(&self.session_id)
    }

    /// Appends a result; an ok create/modify moves the current model.
    pub fn record(&mut self, chat: ChatArtifact) {
        if chat.is_ok() && matches!(chat.operation, Operation::Create | Operation::Modify) {
            self.current_model = chat.file_ref.clone();
        }
        self.history.push(chat);
    }

    /// The model reference implied by the history alone.
    pub fn expected_model(&self) -> Option<&ModelRef> {
        self.history
            .iter()
            .rev()
            .find(|c| c.is_ok() && matches!(c.operation, Operation::Create | Operation::Modify))
            .and_then(|c| c.file_ref.as_ref())
    }

    pub fn invariant_holds(&self) -> bool {
        self.current_model.as_ref() == self.expected_model()
    }
}

pub fn session_key(session_id: &str) -> String {
    format!("sessions/{session_id}/model.ifc")
}

pub fn valid_session_id(id: &str) -> bool {
    (1..=64).contains(&id.len()) && id.bytes().all(|b| b.is_ascii_alphanumeric() || b == b'-' || b == b'_')
}

/// Sessions keyed by id, each behind its own async lock so calls in one
/// session run one at a time in arrival order.
#[derive(Debug, Default)]
pub struct Sessions {
    map: Mutex<HashMap<String, Arc<tokio::sync::Mutex<SessionState>>>>,
}

impl Sessions {
    pub fn get_or_create(&self, id: &str) -> Arc<tokio::sync::Mutex<SessionState>> {
        self.map
            .lock()
            .unwrap()
            .entry(id.to_string())
            .or_insert_with(|| Arc::new(tokio::sync::Mutex::new(SessionState::new(id))))
            .clone()
    }

    pub fn ids(&self) -> Vec<String> {
        let mut ids: Vec<String> = self.map.lock().unwrap().keys().cloned().collect();
        ids.sort();
        ids
    }

    /// Snapshot of one session, waiting for any call in progress.
    pub async fn snapshot(&self, id: &str) -> Option<SessionState> {
        let s = self.map.lock().unwrap().get(id).cloned()?;
        let guard = s.lock().await;
        Some(guard.clone())
    }
}
