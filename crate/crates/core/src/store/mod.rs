//! File-per-session persistence.
//!
//! Layout under the store root:
//!
//! ```text
//! sessions/<id>.json
//! catalogs/<hash>.json
//! ```
//!
//! Every write goes to a hidden temporary file in the same directory, is
//! synced, then renamed over the target, so readers observe either the
//! previous or the new revision.

use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use chrono::{DateTime, Utc};
use serde::Serialize;
use sha2::{Digest, Sha256};
use thiserror::Error;
use uuid::Uuid;

use crate::catalog::{self, Catalog};
use crate::engine::{Session, SessionFormatError};
use crate::outcomes;

/// Environment variable naming the store root.
pub const STORE_ENV: &str = "LEDGERFIT_STORE";

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("session not found: `{0}`")]
    NotFound(String),
    #[error("invalid session id `{0}`")]
    InvalidId(String),
    #[error("session `{id}` is unreadable: {source}")]
    Parse {
        id: String,
        #[source]
        source: SessionFormatError,
    },
    #[error("catalog mismatch: session `{id}` is pinned to catalog {session_hash}, registered: {}", registered_list(.registered))]
    CatalogMismatch {
        id: String,
        session_hash: String,
        registered: Vec<String>,
    },
    #[error("catalog file {path} is invalid: {message}")]
    Catalog { path: PathBuf, message: String },
}

fn registered_list(hashes: &[String]) -> String {
    if hashes.is_empty() {
        "none".to_string()
    } else {
        hashes.join(", ")
    }
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> StoreError + '_ {
    move |source| StoreError::Io { path: path.to_path_buf(), source }
}

/// Marker of one saved session revision.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Revision {
    pub version: u64,
    pub sha256: String,
}

impl Revision {
    fn of(version: u64, bytes: &[u8]) -> Self {
        Revision { version, sha256: hex::encode(Sha256::digest(bytes)) }
    }
}

/// Catalogs available to sessions, keyed by content hash.
#[derive(Debug, Clone, Default)]
pub struct CatalogRegistry {
    by_hash: BTreeMap<String, Arc<Catalog>>,
}

impl CatalogRegistry {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with(catalog: Arc<Catalog>) -> Self {
        let mut registry = Self::new();
        registry.register(catalog);
        registry
    }

    pub fn register(&mut self, catalog: Arc<Catalog>) {
        self.by_hash.insert(catalog.hash().to_string(), catalog);
    }

    pub fn get(&self, hash: &str) -> Option<&Arc<Catalog>> {
        self.by_hash.get(hash)
    }

    pub fn hashes(&self) -> Vec<String> {
        self.by_hash.keys().cloned().collect()
    }

    pub fn len(&self) -> usize {
        self.by_hash.len()
    }

    pub fn is_empty(&self) -> bool {
        self.by_hash.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ListingStatus {
    Ok,
    Unreadable,
    CatalogMismatch,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SessionListing {
    pub id: String,
    pub status: ListingStatus,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub created: Option<DateTime<Utc>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub version: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub verdict: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

/// Where an injected fault interrupts [`Store::save_session_with_fault`].
#[doc(hidden)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SaveFault {
    /// The process dies after this many bytes reached the temporary file.
    AfterBytes(usize),
    /// The temporary file is complete but never renamed.
    BeforeRename,
}

/// Session ids become file names, so only a conservative alphabet is allowed.
pub fn valid_session_id(id: &str) -> bool {
    !id.is_empty() && id.len() <= 128 && id.bytes().all(|b| b.is_ascii_alphanumeric() || b == b'-' || b == b'_')
}

#[derive(Debug, Clone)]
pub struct Store {
    root: PathBuf,
}

impl Store {
    /// Opens (and creates if needed) a store rooted at `root`.
    pub fn open(root: impl Into<PathBuf>) -> Result<Self, StoreError> {
        let store = Store { root: root.into() };
        for dir in [store.sessions_dir(), store.catalogs_dir()] {
            fs::create_dir_all(&dir).map_err(io_err(&dir))?;
        }
        Ok(store)
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    fn sessions_dir(&self) -> PathBuf {
        self.root.join("sessions")
    }

    fn catalogs_dir(&self) -> PathBuf {
        self.root.join("catalogs")
    }

    pub fn session_path(&self, id: &str) -> Result<PathBuf, StoreError> {
        if !valid_session_id(id) {
            return Err(StoreError::InvalidId(id.to_string()));
        }
        Ok(self.sessions_dir().join(format!("{id}.json")))
    }

    pub fn exists(&self, id: &str) -> bool {
        self.session_path(id).is_ok_and(|p| p.is_file())
    }

    pub fn save_session(&self, session: &Session) -> Result<Revision, StoreError> {
        self.write_session(session, None)
    }

    /// Test hook: performs a save that is cut short at `fault`.
    #[doc(hidden)]
    pub fn save_session_with_fault(&self, session: &Session, fault: SaveFault) -> Result<Revision, StoreError> {
        self.write_session(session, Some(fault))
    }

    fn write_session(&self, session: &Session, fault: Option<SaveFault>) -> Result<Revision, StoreError> {
        let path = self.session_path(&session.id)?;
        let bytes = session.to_json().into_bytes();
        atomic_write(&path, &bytes, fault)?;
        Ok(Revision::of(session.version, &bytes))
    }

    /// Revision marker of the file currently on disk.
    pub fn revision(&self, id: &str) -> Result<Revision, StoreError> {
        let path = self.session_path(id)?;
        let bytes = read_existing(&path, id)?;
        let text = String::from_utf8_lossy(&bytes);
        let session = Session::from_json(&text).map_err(|source| StoreError::Parse { id: id.to_string(), source })?;
        Ok(Revision::of(session.version, &bytes))
    }

    /// Reads a session without checking it against any catalog.
    pub fn read_session(&self, id: &str) -> Result<Session, StoreError> {
        let path = self.session_path(id)?;
        let bytes = read_existing(&path, id)?;
        let text = std::str::from_utf8(&bytes).map_err(|e| StoreError::Parse {
            id: id.to_string(),
            source: SessionFormatError::Json(e.to_string()),
        })?;
        let session = Session::from_json(text).map_err(|source| StoreError::Parse { id: id.to_string(), source })?;
        if session.id != id {
            return Err(StoreError::Parse {
                id: id.to_string(),
                source: SessionFormatError::Json(format!("file holds session `{}`", session.id)),
            });
        }
        Ok(session)
    }

    /// Loads a session and the registered catalog it is pinned to.
    pub fn load_session(&self, id: &str, registry: &CatalogRegistry) -> Result<(Session, Arc<Catalog>), StoreError> {
        let session = self.read_session(id)?;
        let Some(catalog) = registry.get(&session.catalog_hash) else {
            return Err(StoreError::CatalogMismatch {
                id: id.to_string(),
                session_hash: session.catalog_hash.clone(),
                registered: registry.hashes(),
            });
        };
        session
            .check_against(catalog)
            .map_err(|source| StoreError::Parse { id: id.to_string(), source })?;
        Ok((session, Arc::clone(catalog)))
    }

    /// Copies a stored session under a fresh id and saves the copy.
    pub fn clone_session(
        &self,
        id: &str,
        name: &str,
        registry: &CatalogRegistry,
        created: DateTime<Utc>,
    ) -> Result<Session, StoreError> {
        let (source, _) = self.load_session(id, registry)?;
        let clone = source.fork(Uuid::new_v4().to_string(), name, created);
        self.save_session(&clone)?;
        Ok(clone)
    }

    /// Every session file, sorted by creation time; files that fail to parse
    /// are listed as unreadable instead of failing the scan.
    pub fn list_sessions(&self, registry: &CatalogRegistry) -> Result<Vec<SessionListing>, StoreError> {
        let dir = self.sessions_dir();
        let mut listings = Vec::new();
        for entry in fs::read_dir(&dir).map_err(io_err(&dir))? {
            let entry = entry.map_err(io_err(&dir))?;
            let file_name = entry.file_name();
            let Some(name) = file_name.to_str() else { continue };
            let Some(id) = name.strip_suffix(".json") else { continue };
            if name.starts_with('.') || !valid_session_id(id) {
                continue;
            }
            listings.push(match self.load_session(id, registry) {
                Ok((session, catalog)) => SessionListing {
                    id: id.to_string(),
                    status: ListingStatus::Ok,
                    name: Some(session.meta.name.clone()),
                    created: Some(session.meta.created),
                    version: Some(session.version),
                    verdict: Some(outcomes::evaluate_suitability(&catalog, &session).label().to_string()),
                    error: None,
                },
                Err(StoreError::CatalogMismatch { .. }) => {
                    let session = self.read_session(id)?;
                    SessionListing {
                        id: id.to_string(),
                        status: ListingStatus::CatalogMismatch,
                        name: Some(session.meta.name.clone()),
                        created: Some(session.meta.created),
                        version: Some(session.version),
                        verdict: None,
                        error: Some(format!("catalog {} is not registered", session.catalog_hash)),
                    }
                }
                Err(e) => SessionListing {
                    id: id.to_string(),
                    status: ListingStatus::Unreadable,
                    name: None,
                    created: None,
                    version: None,
                    verdict: None,
                    error: Some(e.to_string()),
                },
            });
        }
        listings.sort_by(|a, b| {
            (a.created.is_none(), a.created, &a.id).cmp(&(b.created.is_none(), b.created, &b.id))
        });
        Ok(listings)
    }

    /// Keeps a copy of `catalog` so sessions pinned to it stay loadable.
    pub fn save_catalog(&self, catalog: &Catalog) -> Result<PathBuf, StoreError> {
        let path = self.catalogs_dir().join(format!("{}.json", catalog.hash()));
        if !path.is_file() {
            atomic_write(&path, catalog::serialize_catalog(catalog).as_bytes(), None)?;
        }
        Ok(path)
    }

    /// Registry holding every catalog saved in this store plus `extra`.
    pub fn registry(&self, extra: impl IntoIterator<Item = Arc<Catalog>>) -> Result<CatalogRegistry, StoreError> {
        let mut registry = CatalogRegistry::new();
        let dir = self.catalogs_dir();
        let mut paths: Vec<PathBuf> = fs::read_dir(&dir)
            .map_err(io_err(&dir))?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| {
                p.extension().is_some_and(|x| x == "json")
                    && !p.file_name().and_then(|n| n.to_str()).is_some_and(|n| n.starts_with('.'))
            })
            .collect();
        paths.sort();
        for path in paths {
            let text = fs::read_to_string(&path).map_err(io_err(&path))?;
            let catalog = catalog::parse_catalog(&text).map_err(|e| StoreError::Catalog { path: path.clone(), message: e.to_string() })?;
            registry.register(Arc::new(catalog));
        }
        for catalog in extra {
            registry.register(catalog);
        }
        Ok(registry)
    }
}

fn read_existing(path: &Path, id: &str) -> Result<Vec<u8>, StoreError> {
    match fs::read(path) {
        Ok(bytes) => Ok(bytes),
        Err(e) if e.kind() == io::ErrorKind::NotFound => Err(StoreError::NotFound(id.to_string())),
        Err(e) => Err(StoreError::Io { path: path.to_path_buf(), source: e }),
    }
}

/// Write-temp, fsync, rename, fsync directory.
fn atomic_write(path: &Path, bytes: &[u8], fault: Option<SaveFault>) -> Result<(), StoreError> {
    let dir = path.parent().expect("store paths have a parent");
    let file_name = path.file_name().and_then(|n| n.to_str()).expect("store file names are UTF-8");
    let tmp = dir.join(format!(".{file_name}.{}.tmp", Uuid::new_v4().simple()));

    let interrupted = || StoreError::Io {
        path: tmp.clone(),
        source: io::Error::new(io::ErrorKind::Interrupted, "injected fault"),
    };

    let mut file = File::create(&tmp).map_err(io_err(&tmp))?;
    if let Some(SaveFault::AfterBytes(n)) = fault {
        let n = n.min(bytes.len());
        file.write_all(&bytes[..n]).map_err(io_err(&tmp))?;
        return Err(interrupted());
    }
    file.write_all(bytes).map_err(io_err(&tmp))?;
    file.sync_all().map_err(io_err(&tmp))?;
    drop(file);
    if fault == Some(SaveFault::BeforeRename) {
        return Err(interrupted());
    }
    if let Err(e) = fs::rename(&tmp, path) {
        let _ = fs::remove_file(&tmp);
        return Err(StoreError::Io { path: path.to_path_buf(), source: e });
    }
    if let Ok(d) = File::open(dir) {
        let _ = d.sync_all();
    }
    Ok(())
}
