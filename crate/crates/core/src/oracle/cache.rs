use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{solve_exact, OracleResult};
use crate::error::{Error, Result};
use crate::graphs::Graph;
use crate::problems::{build_qp, ProblemClass};

pub const CACHE_FORMAT: &str = "hetqp-oracle-cache";
pub const CACHE_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CachedOptimum {
    pub n: usize,
    pub selected: Vec<usize>,
    pub value_reported: f64,
    pub value_internal: f64,
    pub proven_optimal: bool,
}

impl From<&OracleResult> for CachedOptimum {
    fn from(r: &OracleResult) -> Self {
        Self {
            n: r.x_star.len(),
            selected: r.x_star.selected(),
            value_reported: r.value_reported,
            value_internal: r.value_internal,
            proven_optimal: r.proven_optimal,
        }
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct CacheFile {
    format: String,
    version: u32,
    entries: BTreeMap<String, CachedOptimum>,
}

/// Optima keyed by graph content hash and problem class, optionally
/// persisted as JSON.
#[derive(Debug, Default)]
pub struct OracleCache {
    path: Option<PathBuf>,
    entries: BTreeMap<String, CachedOptimum>,
    dirty: bool,
}

fn key(g: &Graph, cls: ProblemClass) -> String {
    format!("{}:{}", g.content_hash(), cls)
}

impl OracleCache {
    pub fn in_memory() -> Self {
        Self::default()
    }

    /// Loads `path` if it exists; [`OracleCache::save`] writes back to it.
    pub fn open(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref().to_path_buf();
        let mut cache = Self { path: Some(path.clone()), ..Self::default() };
        if path.exists() {
            let file: CacheFile = serde_json::from_str(&std::fs::read_to_string(&path)?)
                .map_err(|e| Error::Config(format!("malformed oracle cache {}: {e}", path.display())))?;
            if file.format != CACHE_FORMAT || file.version != CACHE_VERSION {
                return Err(Error::Config(format!(
                    "oracle cache {} has format {} v{}, expected {CACHE_FORMAT} v{CACHE_VERSION}",
                    path.display(),
                    file.format,
                    file.version
                )));
            }
            cache.entries = file.entries;
        }
        Ok(cache)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, g: &Graph, cls: ProblemClass) -> Option<&CachedOptimum> {
        self.entries.get(&key(g, cls))
    }

    pub fn insert(&mut self, g: &Graph, cls: ProblemClass, value: CachedOptimum) {
        self.entries.insert(key(g, cls), value);
        self.dirty = true;
    }

    /// Cached optimum, solving exactly on a miss.
    pub fn optimum(&mut self, g: &Graph, cls: ProblemClass) -> Result<CachedOptimum> {
        if let Some(v) = self.get(g, cls) {
            return Ok(v.clone());
        }
        let r = solve_exact(&build_qp(g, cls))?;
        let v = CachedOptimum::from(&r);
        self.insert(g, cls, v.clone());
        Ok(v)
    }

    /// Writes the cache when it has a path and unsaved entries.
    pub fn save(&mut self) -> Result<()> {
        let Some(path) = &self.path else { return Ok(()) };
        if !self.dirty {
            return Ok(());
        }
        let file = CacheFile { format: CACHE_FORMAT.into(), version: CACHE_VERSION, entries: self.entries.clone() };
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            std::fs::create_dir_all(dir)?;
        }
        std::fs::write(path, serde_json::to_string_pretty(&file)?)?;
        self.dirty = false;
        Ok(())
    }
}
