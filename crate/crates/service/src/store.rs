//! File-backed profile store.
//!
//! One pretty-printed JSON document per profile, `<root>/<id>.json`. Writes go
//! to a temporary file in the same directory, are fsynced, then renamed over
//! the target, so readers see either the old or the new document. Writers
//! serialize per profile inside the process and through an exclusive lock on
//! `<root>/.lock` across processes.

use std::collections::{BTreeMap, HashMap};
use std::fs::{self, File, OpenOptions};
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex};

use crossing_core::document::serialize_profile;
use crossing_core::presets::builtin_profiles;
use crossing_core::Profile;

#[derive(Debug, thiserror::Error)]
pub enum StoreError {
    #[error("profile {0:?} not found")]
    NotFound(String),
    #[error("profile {0:?} already exists")]
    AlreadyExists(String),
    #[error("version conflict: expected {expected}, current is {current}")]
    VersionConflict { expected: u64, current: u64 },
    #[error("invalid profile id {0:?}")]
    InvalidId(String),
    #[error("corrupt document {path}: {message}")]
    Corrupt { path: PathBuf, message: String },
    #[error(transparent)]
    Io(#[from] io::Error),
}

pub type StoreResult<T> = Result<T, StoreError>;

/// Profile persistence.
pub trait ProfileRepository: Send + Sync {
    fn list(&self) -> StoreResult<Vec<Profile>>;
    fn get(&self, id: &str) -> StoreResult<Profile>;
    /// Stores a new profile at version 1.
    fn create(&self, profile: Profile) -> StoreResult<Profile>;
    /// Replaces a profile if `profile.version` is the stored version; the
    /// stored copy gets the next version.
    fn update(&self, profile: Profile) -> StoreResult<Profile>;
    /// Removes a profile, optionally checking its version first.
    fn delete(&self, id: &str, expected_version: Option<u64>) -> StoreResult<()>;

    fn index(&self) -> StoreResult<BTreeMap<String, u64>> {
        Ok(self.list()?.into_iter().map(|p| (p.profile_id, p.version)).collect())
    }
}

pub fn valid_id(id: &str) -> bool {
    !id.is_empty()
        && id.len() <= 64
        && id
            .bytes()
            .all(|b| b.is_ascii_lowercase() || b.is_ascii_digit() || b == b'-' || b == b'_')
}

pub struct FileStore {
    root: PathBuf,
    locks: Mutex<HashMap<String, Arc<Mutex<()>>>>,
}

impl FileStore {
    pub fn open(root: impl Into<PathBuf>) -> StoreResult<Self> {
        let root = root.into();
        fs::create_dir_all(&root)?;
        Ok(FileStore {
            root,
            locks: Mutex::new(HashMap::new()),
        })
    }

    /// Opens `root` and adds any builtin profile that is not there yet.
    pub fn open_seeded(root: impl Into<PathBuf>) -> StoreResult<Self> {
        let store = Self::open(root)?;
        for p in builtin_profiles() {
            match store.create(p) {
                Ok(_) | Err(StoreError::AlreadyExists(_)) => {}
                Err(e) => return Err(e),
            }
        }
        Ok(store)
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn path_of(&self, id: &str) -> PathBuf {
        self.root.join(format!("{id}.json"))
    }

    fn check_id(id: &str) -> StoreResult<()> {
        if valid_id(id) {
            Ok(())
        } else {
            Err(StoreError::InvalidId(id.to_string()))
        }
    }

    fn profile_lock(&self, id: &str) -> Arc<Mutex<()>> {
        let mut locks = self.locks.lock().unwrap_or_else(|e| e.into_inner());
        locks.entry(id.to_string()).or_default().clone()
    }

    /// Runs `f` holding the per-profile mutex and the cross-process file lock.
    fn exclusive<T>(&self, id: &str, f: impl FnOnce() -> StoreResult<T>) -> StoreResult<T> {
        let lock = self.profile_lock(id);
        let _guard = lock.lock().unwrap_or_else(|e| e.into_inner());
        let lockfile = OpenOptions::new()
            .create(true)
            .truncate(false)
            .write(true)
            .open(self.root.join(".lock"))?;
        lockfile.lock()?;
        let out = f();
        lockfile.unlock()?;
        out
    }

    fn read(&self, path: &Path) -> StoreResult<Profile> {
        let text = fs::read_to_string(path)?;
        serde_json::from_str(&text).map_err(|e| StoreError::Corrupt {
            path: path.to_path_buf(),
            message: e.to_string(),
        })
    }

    fn read_opt(&self, id: &str) -> StoreResult<Option<Profile>> {
        match self.read(&self.path_of(id)) {
            Ok(p) => Ok(Some(p)),
            Err(StoreError::Io(e)) if e.kind() == io::ErrorKind::NotFound => Ok(None),
            Err(e) => Err(e),
        }
    }

    fn write_atomic(&self, profile: &Profile) -> StoreResult<()> {
        let mut tmp = tempfile::Builder::new()
            .prefix(".tmp-")
            .suffix(".json")
            .tempfile_in(&self.root)?;
        tmp.write_all(serialize_profile(profile).as_bytes())?;
        tmp.as_file().sync_all()?;
        tmp.persist(self.path_of(&profile.profile_id)).map_err(|e| e.error)?;
        // make the rename itself durable
        if let Ok(dir) = File::open(&self.root) {
            let _ = dir.sync_all();
        }
        Ok(())
    }
}

impl ProfileRepository for FileStore {
    fn list(&self) -> StoreResult<Vec<Profile>> {
        let mut out = Vec::new();
        for entry in fs::read_dir(&self.root)? {
            let path = entry?.path();
            let Some(name) = path.file_name().and_then(|n| n.to_str()) else {
                continue;
            };
            let Some(id) = name.strip_suffix(".json") else {
                continue;
            };
            if !valid_id(id) {
                continue;
            }
            out.push(self.read(&path)?);
        }
        out.sort_by(|a, b| a.profile_id.cmp(&b.profile_id));
        Ok(out)
    }

    fn get(&self, id: &str) -> StoreResult<Profile> {
        Self::check_id(id)?;
        self.read_opt(id)?.ok_or_else(|| StoreError::NotFound(id.to_string()))
    }

    fn create(&self, mut profile: Profile) -> StoreResult<Profile> {
        Self::check_id(&profile.profile_id)?;
        let id = profile.profile_id.clone();
        self.exclusive(&id, || {
            if self.path_of(&id).exists() {
                return Err(StoreError::AlreadyExists(id.clone()));
            }
            profile.version = 1;
            self.write_atomic(&profile)?;
            Ok(profile)
        })
    }

    fn update(&self, mut profile: Profile) -> StoreResult<Profile> {
        Self::check_id(&profile.profile_id)?;
        let id = profile.profile_id.clone();
        self.exclusive(&id, || {
            let current = self.read_opt(&id)?.ok_or_else(|| StoreError::NotFound(id.clone()))?;
            if current.version != profile.version {
                return Err(StoreError::VersionConflict {
                    expected: profile.version,
                    current: current.version,
                });
            }
            profile.version = current.version + 1;
            self.write_atomic(&profile)?;
            Ok(profile)
        })
    }

    fn delete(&self, id: &str, expected_version: Option<u64>) -> StoreResult<()> {
        Self::check_id(id)?;
        self.exclusive(id, || {
            let current = self.read_opt(id)?.ok_or_else(|| StoreError::NotFound(id.to_string()))?;
            if let Some(expected) = expected_version {
                if expected != current.version {
                    return Err(StoreError::VersionConflict {
                        expected,
                        current: current.version,
                    });
                }
            }
            fs::remove_file(self.path_of(id))?;
            Ok(())
        })
    }
}
