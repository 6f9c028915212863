//! Content-addressed result cache.
//!
//! Entries live in `<dir>/<key>.json`, where the key is the SHA-256 of the
//! canonical JSON of the run inputs and the tool version. Stores go through a
//! temporary file and a rename, so readers never see partial entries.

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::thread;
use std::time::{Duration, SystemTime, UNIX_EPOCH};

use log::warn;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

const LOCK_NAME: &str = ".lock";
const LOCK_WAIT: Duration = Duration::from_secs(10);

/// Serializes with sorted keys and shortest round-trip numerals.
///
/// `serde_json::Map` is ordered by key unless `preserve_order` is enabled,
/// which this crate never does.
pub fn canonical_json(value: &Value) -> String {
    serde_json::to_string(value).expect("JSON values serialize")
}

/// Cache key for a run: SHA-256 over the canonical inputs and tool version.
pub fn cache_key(inputs: &Value, version: &str) -> String {
    let mut h = Sha256::new();
    h.update(canonical_json(inputs).as_bytes());
    h.update(b"\0");
    h.update(version.as_bytes());
    hex::encode(h.finalize())
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct CacheEntry {
    pub key: String,
    pub version: String,
    pub timestamp: u64,
    pub inputs: Value,
    pub payload: Value,
}

pub struct Cache {
    dir: PathBuf,
    version: String,
}

impl Cache {
    pub fn open(dir: impl Into<PathBuf>) -> io::Result<Self> {
        Self::with_version(dir, TOOL_VERSION)
    }

    pub fn with_version(dir: impl Into<PathBuf>, version: &str) -> io::Result<Self> {
        let dir = dir.into();
        fs::create_dir_all(&dir)?;
        Ok(Self {
            dir,
            version: version.to_string(),
        })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn key(&self, inputs: &Value) -> String {
        cache_key(inputs, &self.version)
    }

    fn path(&self, key: &str) -> PathBuf {
        self.dir.join(format!("{key}.json"))
    }

    /// The cached payload for these inputs, if a sound entry exists.
    ///
    /// Unreadable or inconsistent entries are misses with a warning.
    pub fn lookup(&self, inputs: &Value) -> Option<Value> {
        let key = self.key(inputs);
        let path = self.path(&key);
        let text = match fs::read_to_string(&path) {
            Ok(t) => t,
            Err(e) if e.kind() == io::ErrorKind::NotFound => return None,
            Err(e) => {
                warn!("cache entry {} unreadable: {e}", path.display());
                return None;
            }
        };
        let entry: CacheEntry = match serde_json::from_str(&text) {
            Ok(e) => e,
            Err(e) => {
                warn!("corrupt cache entry {}: {e}", path.display());
                return None;
            }
        };
        // the key must recompute from the entry's own inputs
        if entry.key != key
            || entry.version != self.version
            || cache_key(&entry.inputs, &entry.version) != key
            || canonical_json(&entry.inputs) != canonical_json(inputs)
        {
            warn!("inconsistent cache entry {}; ignoring", path.display());
            return None;
        }
        Some(entry.payload)
    }

    pub fn store(&self, inputs: &Value, payload: &Value) -> io::Result<()> {
        let key = self.key(inputs);
        let entry = CacheEntry {
            key: key.clone(),
            version: self.version.clone(),
            timestamp: SystemTime::now()
                .duration_since(UNIX_EPOCH)
                .map_or(0, |d| d.as_secs()),
            inputs: inputs.clone(),
            payload: payload.clone(),
        };
        let text = serde_json::to_string(&entry).expect("cache entries serialize");
        let tmp = self
            .dir
            .join(format!(".{key}.{}.tmp", std::process::id()));
        {
            let mut f = fs::File::create(&tmp)?;
            f.write_all(text.as_bytes())?;
            f.sync_all()?;
        }
        fs::rename(&tmp, self.path(&key))
    }

    /// Takes the advisory lock on the directory, waiting a bounded time for
    /// another run to release it.
    pub fn lock(&self) -> io::Result<CacheLock> {
        let path = self.dir.join(LOCK_NAME);
        let start = std::time::Instant::now();
        loop {
            match fs::OpenOptions::new().write(true).create_new(true).open(&path) {
                Ok(mut f) => {
                    let _ = writeln!(f, "{}", std::process::id());
                    return Ok(CacheLock { path });
                }
                Err(e) if e.kind() == io::ErrorKind::AlreadyExists => {
                    if start.elapsed() > LOCK_WAIT {
                        return Err(io::Error::new(
                            io::ErrorKind::WouldBlock,
                            format!("cache directory locked by {}", path.display()),
                        ));
                    }
                    thread::sleep(Duration::from_millis(50));
                }
                Err(e) => return Err(e),
            }
        }
    }
}

/// Removes the lock file when dropped.
pub struct CacheLock {
    path: PathBuf,
}

impl Drop for CacheLock {
    fn drop(&mut self) {
        let _ = fs::remove_file(&self.path);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn canonical_form_sorts_keys() {
        let a = json!({"b": 1, "a": [0.1, 2.0]});
        assert_eq!(canonical_json(&a), r#"{"a":[0.1,2.0],"b":1}"#);
    }

    #[test]
    fn store_then_lookup() {
        let dir = tempfile::tempdir().unwrap();
        let cache = Cache::open(dir.path()).unwrap();
        let inputs = json!({"command": "torsion", "seed": 1});
        assert!(cache.lookup(&inputs).is_none());
        let payload = json!({"value": 0.25});
        cache.store(&inputs, &payload).unwrap();
        assert_eq!(cache.lookup(&inputs), Some(payload));
        assert!(cache.lookup(&json!({"command": "torsion", "seed": 2})).is_none());
    }

    #[test]
    fn version_change_misses() {
        let dir = tempfile::tempdir().unwrap();
        let inputs = json!({"x": 1});
        Cache::with_version(dir.path(), "1.0.0")
            .unwrap()
            .store(&inputs, &json!(1))
            .unwrap();
        let other = Cache::with_version(dir.path(), "1.0.1").unwrap();
        assert_ne!(other.key(&inputs), cache_key(&inputs, "1.0.0"));
        assert!(other.lookup(&inputs).is_none());
    }

    #[test]
    fn corrupt_entry_is_a_miss() {
        let dir = tempfile::tempdir().unwrap();
        let cache = Cache::open(dir.path()).unwrap();
        let inputs = json!({"x": 1});
        cache.store(&inputs, &json!(1)).unwrap();
        fs::write(dir.path().join(format!("{}.json", cache.key(&inputs))), "{not json").unwrap();
        assert!(cache.lookup(&inputs).is_none());
    }

    #[test]
    fn lock_is_exclusive_and_released() {
        let dir = tempfile::tempdir().unwrap();
        let cache = Cache::open(dir.path()).unwrap();
        {
            let _g = cache.lock().unwrap();
            assert!(dir.path().join(LOCK_NAME).exists());
        }
        assert!(!dir.path().join(LOCK_NAME).exists());
        let _g = cache.lock().unwrap();
    }
}
