//! Content-addressed importance cache.
//!
//! Importance maps depend only on the source pixels and on how importance is
//! generated, never on the target size, so one map serves every retarget of
//! an image. Entries live in memory and, when a directory is configured, on
//! disk as `<key>.png` (8-bit grayscale) with a `<key>.json` sidecar.
//! Concurrent first requests for a key compute the map once.

use std::collections::HashMap;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex, OnceLock};

use image::{ImageBuffer, Pixel};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::config::{ImportanceSource, RetargetConfig};
use super::compute_importance;
use crate::error::{Error, Result};
use crate::importance::ImportanceMap;
use crate::scalar::Scalar;

/// JSON sidecar stored next to a cached map.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImportanceSidecar {
    pub source_hash: String,
    pub generator: String,
    /// Segmentation coverage, for combined maps.
    pub coverage_fraction: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CachedImportance<T> {
    pub key: String,
    pub map: ImportanceMap<T>,
    pub sidecar: ImportanceSidecar,
}

/// SHA-256 of the decoded raster: dimensions, channel count and pixel bytes.
pub fn source_hash<P: Pixel<Subpixel = u8>>(img: &ImageBuffer<P, Vec<u8>>) -> String {
    let mut h = Sha256::new();
    h.update(img.width().to_le_bytes());
    h.update(img.height().to_le_bytes());
    h.update([P::CHANNEL_COUNT]);
    h.update(img.as_raw());
    hex::encode(h.finalize())
}

fn file_digest(path: &Path) -> Result<String> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

/// Cache key for a source under an importance configuration. External
/// inputs are identified by their content, not their path.
pub fn cache_key(source_hash: &str, config: &RetargetConfig) -> Result<String> {
    let descriptor = match &config.importance_source {
        ImportanceSource::Fallback => "fallback".to_string(),
        ImportanceSource::External(p) => format!("external:{}", file_digest(p)?),
        ImportanceSource::Combined { mask, saliency } => format!(
            "combined:{}:{}:{}",
            file_digest(mask)?,
            match saliency {
                Some(p) => file_digest(p)?,
                None => "fallback".to_string(),
            },
            config.coverage_threshold
        ),
    };
    let mut h = Sha256::new();
    h.update(source_hash.as_bytes());
    h.update(b"\0");
    h.update(descriptor.as_bytes());
    Ok(hex::encode(h.finalize()))
}

type Slot<T> = Arc<OnceLock<std::result::Result<Arc<CachedImportance<T>>, String>>>;

pub struct ImportanceCache<T> {
    dir: Option<PathBuf>,
    slots: Mutex<HashMap<String, Slot<T>>>,
}

impl<T: Scalar> Default for ImportanceCache<T> {
    fn default() -> Self {
        Self::in_memory()
    }
}

impl<T: Scalar> ImportanceCache<T> {
    pub fn in_memory() -> Self {
        Self {
            dir: None,
            slots: Mutex::new(HashMap::new()),
        }
    }

    /// Persists entries under `dir`, creating it if needed. If the directory
    /// cannot be created the cache stays memory-only.
    pub fn persistent(dir: impl Into<PathBuf>) -> Self {
        let dir = dir.into();
        let dir = match std::fs::create_dir_all(&dir) {
            Ok(()) => Some(dir),
            Err(e) => {
                log::warn!("cache directory {} unavailable ({e}); caching in memory only", dir.display());
                None
            }
        };
        Self {
            dir,
            slots: Mutex::new(HashMap::new()),
        }
    }

    pub fn len(&self) -> usize {
        self.slots
            .lock()
            .unwrap()
            .values()
            .filter(|s| matches!(s.get(), Some(Ok(_))))
            .count()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Already-computed entry for `key`, without computing anything.
    pub fn get(&self, key: &str) -> Option<Arc<CachedImportance<T>>> {
        let slot = self.slots.lock().unwrap().get(key).cloned()?;
        match slot.get() {
            Some(Ok(v)) => Some(v.clone()),
            _ => None,
        }
    }

    /// Returns the cached map for `key`, computing it with `compute` on a miss.
    /// Concurrent callers for the same key wait for a single computation.
    pub fn get_or_insert_with(
        &self,
        key: &str,
        compute: impl FnOnce() -> Result<CachedImportance<T>>,
    ) -> Result<Arc<CachedImportance<T>>> {
        let slot = self.slots.lock().unwrap().entry(key.to_string()).or_default().clone();
        let mut err = None;
        let out = slot.get_or_init(|| {
            if let Some(found) = self.load(key) {
                return Ok(Arc::new(found));
            }
            match compute() {
                Ok(v) => {
                    self.store(&v);
                    Ok(Arc::new(v))
                }
                Err(e) => {
                    let msg = e.to_string();
                    err = Some(e);
                    Err(msg)
                }
            }
        });
        match out {
            Ok(v) => Ok(v.clone()),
            Err(msg) => {
                // Failures are not cached; the next request retries.
                self.slots.lock().unwrap().remove(key);
                Err(err.unwrap_or_else(|| Error::Internal(msg.clone())))
            }
        }
    }

    /// Computes (or reuses) the importance map of `source` under `config`.
    pub fn get_or_compute<P>(
        &self,
        source: &ImageBuffer<P, Vec<u8>>,
        source_hash: &str,
        config: &RetargetConfig,
    ) -> Result<Arc<CachedImportance<T>>>
    where
        P: Pixel<Subpixel = u8>,
    {
        let key = cache_key(source_hash, config)?;
        self.get_or_insert_with(&key, || {
            let (map, coverage) = compute_importance(source, config)?;
            Ok(CachedImportance {
                key: key.clone(),
                map,
                sidecar: ImportanceSidecar {
                    source_hash: source_hash.to_string(),
                    generator: config.importance_source.generator().to_string(),
                    coverage_fraction: coverage,
                },
            })
        })
    }

    fn paths(&self, key: &str) -> Option<(PathBuf, PathBuf)> {
        let dir = self.dir.as_ref()?;
        Some((dir.join(format!("{key}.png")), dir.join(format!("{key}.json"))))
    }

    fn load(&self, key: &str) -> Option<CachedImportance<T>> {
        let (png, json) = self.paths(key)?;
        let sidecar: ImportanceSidecar = serde_json::from_slice(&std::fs::read(&json).ok()?).ok()?;
        let img = image::open(&png).ok()?.into_luma8();
        let map = ImportanceMap::from_gray(&img).ok()?;
        Some(CachedImportance {
            key: key.to_string(),
            map,
            sidecar,
        })
    }

    fn store(&self, entry: &CachedImportance<T>) {
        let Some((png, json)) = self.paths(&entry.key) else {
            return;
        };
        let written = entry
            .map
            .to_gray()
            .save(&png)
            .map_err(|e| e.to_string())
            .and_then(|_| {
                let body = serde_json::to_vec_pretty(&entry.sidecar).map_err(|e| e.to_string())?;
                std::fs::write(&json, body).map_err(|e| e.to_string())
            });
        if let Err(e) = written {
            log::warn!("could not persist importance map {}: {e}; keeping it in memory", entry.key);
        }
    }
}
