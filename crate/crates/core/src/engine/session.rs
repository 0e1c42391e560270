use std::collections::BTreeSet;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use thiserror::Error;
use uuid::Uuid;

use crate::catalog::Catalog;

pub const SESSION_SCHEMA: u32 = 1;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SessionMeta {
    pub name: String,
    #[serde(default)]
    pub description: String,
    pub created: DateTime<Utc>,
}

impl SessionMeta {
    pub fn new(name: impl Into<String>, created: DateTime<Utc>) -> Self {
        SessionMeta { name: name.into(), description: String::new(), created }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OverrideFlag {
    ProceedDespiteNotSuitable,
}

impl OverrideFlag {
    pub fn as_str(self) -> &'static str {
        match self {
            OverrideFlag::ProceedDespiteNotSuitable => "proceed_despite_not_suitable",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LogAction {
    Answer,
    Retract,
    /// Emitted by the engine when an answer loses its prerequisites.
    Invalidated,
    Override,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LogEntry {
    pub seq: u64,
    pub at: DateTime<Utc>,
    pub action: LogAction,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub question_id: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub option_id: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub flag: Option<OverrideFlag>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

/// An append-only answer log bound to one catalog.
///
/// `version` always equals `log.len()`; every derived value is recomputed by
/// replaying the log against the catalog.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Session {
    pub schema: u32,
    pub id: String,
    pub catalog_hash: String,
    pub meta: SessionMeta,
    pub version: u64,
    #[serde(default)]
    pub overrides: BTreeSet<OverrideFlag>,
    #[serde(default)]
    pub log: Vec<LogEntry>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SessionFormatError {
    #[error("malformed session document: {0}")]
    Json(String),
    #[error("unsupported session schema {0}")]
    Schema(u32),
    #[error("session version {version} does not match {entries} log entries")]
    VersionMismatch { version: u64, entries: usize },
    #[error("log entry {index} has seq {seq}, expected {expected}")]
    Sequence { index: usize, seq: u64, expected: u64 },
    #[error("log entry {seq} is malformed: {reason}")]
    Entry { seq: u64, reason: String },
    #[error("override flags do not match the override entries in the log")]
    Overrides,
}

impl Session {
    /// Fresh session with a random identifier.
    pub fn new(catalog: &Catalog, meta: SessionMeta) -> Self {
        Self::with_id(Uuid::new_v4().to_string(), catalog, meta)
    }

    pub fn with_id(id: impl Into<String>, catalog: &Catalog, meta: SessionMeta) -> Self {
        Session {
            schema: SESSION_SCHEMA,
            id: id.into(),
            catalog_hash: catalog.hash().to_string(),
            meta,
            version: 0,
            overrides: BTreeSet::new(),
            log: Vec::new(),
        }
    }

    pub fn has_override(&self, flag: OverrideFlag) -> bool {
        self.overrides.contains(&flag)
    }

    /// Copy of this session under a new identity; the log and overrides are
    /// carried over unchanged.
    pub fn fork(&self, id: impl Into<String>, name: impl Into<String>, created: DateTime<Utc>) -> Self {
        Session {
            id: id.into(),
            meta: SessionMeta { name: name.into(), description: self.meta.description.clone(), created },
            ..self.clone()
        }
    }

    /// Canonical pretty JSON. Two calls on equal sessions give equal bytes.
    pub fn to_json(&self) -> String {
        let mut out = serde_json::to_string_pretty(self).expect("session serializes");
        out.push('\n');
        out
    }

    /// Parses and checks the structural invariants of a session document.
    /// Catalog-level checks happen in [`Session::check_against`].
    pub fn from_json(text: &str) -> Result<Self, SessionFormatError> {
        let session: Session = serde_json::from_str(text).map_err(|e| SessionFormatError::Json(e.to_string()))?;
        session.check_structure()?;
        Ok(session)
    }

    pub fn check_structure(&self) -> Result<(), SessionFormatError> {
        if self.schema != SESSION_SCHEMA {
            return Err(SessionFormatError::Schema(self.schema));
        }
        if self.version != self.log.len() as u64 {
            return Err(SessionFormatError::VersionMismatch { version: self.version, entries: self.log.len() });
        }
        let mut flags = BTreeSet::new();
        for (i, entry) in self.log.iter().enumerate() {
            let expected = i as u64 + 1;
            if entry.seq != expected {
                return Err(SessionFormatError::Sequence { index: i, seq: entry.seq, expected });
            }
            let bad = |reason: &str| Err(SessionFormatError::Entry { seq: entry.seq, reason: reason.to_string() });
            match entry.action {
                LogAction::Answer => {
                    if entry.question_id.is_none() || entry.option_id.is_none() {
                        return bad("answer entries need question_id and option_id");
                    }
                }
                LogAction::Retract | LogAction::Invalidated => {
                    if entry.question_id.is_none() || entry.option_id.is_some() {
                        return bad("retract and invalidated entries carry only question_id");
                    }
                }
                LogAction::Override => match entry.flag {
                    Some(flag) => {
                        flags.insert(flag);
                    }
                    None => return bad("override entries need a flag"),
                },
            }
        }
        if flags != self.overrides {
            return Err(SessionFormatError::Overrides);
        }
        Ok(())
    }

    /// Verifies that every logged question and option exists in `catalog`.
    pub fn check_against(&self, catalog: &Catalog) -> Result<(), SessionFormatError> {
        for entry in &self.log {
            if let Some(qid) = &entry.question_id {
                let Some(q) = catalog.question(qid) else {
                    return Err(SessionFormatError::Entry { seq: entry.seq, reason: format!("unknown question `{qid}`") });
                };
                if let Some(oid) = &entry.option_id {
                    if q.option(oid).is_none() {
                        return Err(SessionFormatError::Entry {
                            seq: entry.seq,
                            reason: format!("unknown option `{oid}` for question `{qid}`"),
                        });
                    }
                }
            }
        }
        Ok(())
    }

    pub(crate) fn append(&mut self, at: DateTime<Utc>, action: LogAction, question_id: Option<&str>, option_id: Option<&str>, note: Option<String>) {
        let seq = self.log.len() as u64 + 1;
        self.log.push(LogEntry {
            seq,
            at,
            action,
            question_id: question_id.map(str::to_string),
            option_id: option_id.map(str::to_string),
            flag: None,
            note,
        });
        self.version = seq;
    }

    pub(crate) fn append_override(&mut self, at: DateTime<Utc>, flag: OverrideFlag, note: Option<String>) {
        let seq = self.log.len() as u64 + 1;
        self.log.push(LogEntry {
            seq,
            at,
            action: LogAction::Override,
            question_id: None,
            option_id: None,
            flag: Some(flag),
            note,
        });
        self.overrides.insert(flag);
        self.version = seq;
    }
}
