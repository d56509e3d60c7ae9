//! Monte-Carlo tabulation of the null distribution.
//!
//! Under conditional independence the transformed coordinates are i.i.d.
//! uniform and mutually independent, so the null law of each statistic
//! depends only on `(n, p, q, r)`. Tables are simulated once per key and
//! persisted as JSON documents:
//!
//! ```text
//! {
//!   "format_version": 1,
//!   "n": 100, "p": 1, "q": 1, "r": 1,
//!   "B": 1000,
//!   "seed": 12345,
//!   "statistic_kind": "rho_normalized",
//!   "stats": [ ...B values, ascending... ]
//! }
//! ```
//!
//! `stats` holds the statistic itself (not `n` times it).

use std::collections::HashMap;
use std::fmt;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};

use log::warn;
use ndarray::Array2;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::stream_rng;
use crate::statistic::{centered_pair_mean, rho0_raw, C0};

pub const FORMAT_VERSION: u32 = 1;

/// Environment variable overriding the on-disk cache location.
pub const CACHE_DIR_ENV: &str = "CINDEP_CACHE_DIR";

/// Default cap on `B · n²` pair evaluations for one table.
pub const DEFAULT_MAX_WORK: f64 = 5e10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StatisticKind {
    /// `C0`-scaled univariate index.
    RhoNormalized,
    /// Unnormalized multivariate form, r >= 1.
    RhoMultiUnnormalized,
    /// Unnormalized form without the conditioning factor, r = 0.
    RhoUnconditional,
    /// `C0`-scaled moment estimator that ignores U, V ⫫ W.
    Rho0Normalized,
}

impl StatisticKind {
    pub fn as_str(self) -> &'static str {
        match self {
            StatisticKind::RhoNormalized => "rho_normalized",
            StatisticKind::RhoMultiUnnormalized => "rho_multi_unnormalized",
            StatisticKind::RhoUnconditional => "rho_unconditional",
            StatisticKind::Rho0Normalized => "rho0_normalized",
        }
    }

    /// The kind a test on `dims` is calibrated against.
    pub fn for_dims(dims: (usize, usize, usize)) -> Self {
        match dims {
            (_, _, 0) => StatisticKind::RhoUnconditional,
            (1, 1, 1) => StatisticKind::RhoNormalized,
            _ => StatisticKind::RhoMultiUnnormalized,
        }
    }

    fn check_dims(self, (p, q, r): (usize, usize, usize)) -> Result<()> {
        let ok = p >= 1
            && q >= 1
            && match self {
                StatisticKind::RhoNormalized | StatisticKind::Rho0Normalized => (p, q, r) == (1, 1, 1),
                StatisticKind::RhoMultiUnnormalized => r >= 1,
                StatisticKind::RhoUnconditional => r == 0,
            };
        if ok {
            Ok(())
        } else {
            Err(Error::DimensionMismatch(format!(
                "{} is not defined for dims ({p}, {q}, {r})",
                self.as_str()
            )))
        }
    }
}

impl fmt::Display for StatisticKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for StatisticKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        [
            StatisticKind::RhoNormalized,
            StatisticKind::RhoMultiUnnormalized,
            StatisticKind::RhoUnconditional,
            StatisticKind::Rho0Normalized,
        ]
        .into_iter()
        .find(|k| k.as_str() == s)
        .ok_or_else(|| Error::InvalidArgument(format!("unknown statistic kind `{s}`")))
    }
}

/// Identity of a null table.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct NullKey {
    pub n: usize,
    pub dims: (usize, usize, usize),
    pub reps: usize,
    pub seed: u64,
    pub kind: StatisticKind,
}

impl NullKey {
    pub fn new(n: usize, dims: (usize, usize, usize), reps: usize, seed: u64, kind: StatisticKind) -> Self {
        Self {
            n,
            dims,
            reps,
            seed,
            kind,
        }
    }

    pub fn file_name(&self) -> String {
        let (p, q, r) = self.dims;
        format!(
            "null-{}-n{}-p{p}q{q}r{r}-B{}-s{:016x}.json",
            self.kind, self.n, self.reps, self.seed
        )
    }

    /// Pair evaluations needed to simulate the table.
    pub fn work(&self) -> f64 {
        self.reps as f64 * (self.n as f64).powi(2)
    }
}

/// Sorted Monte-Carlo sample of a null statistic.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NullTable {
    pub format_version: u32,
    pub n: usize,
    pub p: usize,
    pub q: usize,
    pub r: usize,
    #[serde(rename = "B")]
    pub reps: usize,
    pub seed: u64,
    pub statistic_kind: StatisticKind,
    pub stats: Vec<f64>,
}

impl NullTable {
    pub fn key(&self) -> NullKey {
        NullKey::new(self.n, (self.p, self.q, self.r), self.reps, self.seed, self.statistic_kind)
    }

    fn validate(&self, expect: &NullKey) -> std::result::Result<(), String> {
        if self.format_version != FORMAT_VERSION {
            return Err(format!("format version {}", self.format_version));
        }
        if self.key() != *expect {
            return Err("key fields do not match the file name".into());
        }
        if self.stats.len() != self.reps {
            return Err(format!("{} stats for B = {}", self.stats.len(), self.reps));
        }
        if self.stats.iter().any(|s| !s.is_finite()) {
            return Err("non-finite entry".into());
        }
        if self.stats.windows(2).any(|w| w[0] > w[1]) {
            return Err("stats not sorted".into());
        }
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

/// Evaluates the statistic of `kind` on one draw of exact uniforms.
fn replicate(kind: StatisticKind, n: usize, (p, q, r): (usize, usize, usize), seed: u64, index: u64) -> f64 {
    let mut rng = stream_rng(seed, index);
    let mut block = |d: usize| Array2::from_shape_simple_fn((n, d), || rng.random::<f64>());
    let u = block(p);
    let v = block(q);
    let w = block(r);
    match kind {
        StatisticKind::RhoNormalized => C0 * centered_pair_mean(u.view(), v.view(), w.view()),
        StatisticKind::RhoMultiUnnormalized | StatisticKind::RhoUnconditional => {
            centered_pair_mean(u.view(), v.view(), w.view())
        }
        StatisticKind::Rho0Normalized => rho0_raw(u.view(), v.view(), w.view()),
    }
}

/// Simulates `reps` replicates of the chosen statistic on i.i.d. uniforms.
/// Replicate `b` draws from stream `b` of `seed`.
pub fn simulate_null(key: NullKey, max_work: f64) -> Result<NullTable> {
    if key.n < 2 {
        return Err(Error::InsufficientSample { n: key.n, min: 2 });
    }
    if key.reps == 0 {
        return Err(Error::InvalidArgument("replicate count must be at least 1".into()));
    }
    key.kind.check_dims(key.dims)?;
    let work = key.work();
    if work > max_work {
        return Err(Error::Budget {
            work,
            ceiling: max_work,
        });
    }
    let mut stats: Vec<f64> = (0..key.reps as u64)
        .into_par_iter()
        .map(|b| replicate(key.kind, key.n, key.dims, key.seed, b))
        .collect();
    stats.sort_by(f64::total_cmp);
    let (p, q, r) = key.dims;
    Ok(NullTable {
        format_version: FORMAT_VERSION,
        n: key.n,
        p,
        q,
        r,
        reps: key.reps,
        seed: key.seed,
        statistic_kind: key.kind,
        stats,
    })
}

/// The `ceil(B (1 - alpha))`-th smallest simulated value.
pub fn critical_value(table: &NullTable, alpha: f64) -> Result<f64> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::InvalidAlpha(alpha));
    }
    let b = table.stats.len();
    if b == 0 {
        return Err(Error::EmptyData);
    }
    let x = b as f64 * (1.0 - alpha);
    // absorb representation error such as 1000 * 0.95 = 950.0000000000001
    let k = ((x - 1e-9 * x.max(1.0)).ceil() as usize).clamp(1, b);
    Ok(table.stats[k - 1])
}

/// Add-one Monte-Carlo p-value `(1 + #{stats >= observed}) / (B + 1)`.
pub fn p_value(table: &NullTable, observed: f64) -> f64 {
    let b = table.stats.len();
    let below = table.stats.partition_point(|s| *s < observed);
    (1 + b - below) as f64 / (b + 1) as f64
}

type Slot = Arc<NullTable>;

/// Null tables keyed by [`NullKey`], held in memory and optionally mirrored
/// to a directory (one file per table, replaced atomically).
pub struct NullCache {
    dir: Option<PathBuf>,
    memory: Mutex<HashMap<NullKey, Slot>>,
    builds: AtomicUsize,
    max_work: f64,
}

impl fmt::Debug for NullCache {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("NullCache")
            .field("dir", &self.dir)
            .field("max_work", &self.max_work)
            .finish()
    }
}

impl Default for NullCache {
    fn default() -> Self {
        Self::in_memory()
    }
}

impl NullCache {
    pub fn in_memory() -> Self {
        Self {
            dir: None,
            memory: Mutex::new(HashMap::new()),
            builds: AtomicUsize::new(0),
            max_work: DEFAULT_MAX_WORK,
        }
    }

    /// Cache persisted under `dir`. Falls back to memory only, with a
    /// warning, when the directory cannot be created.
    pub fn at(dir: impl Into<PathBuf>) -> Self {
        let dir = dir.into();
        let mut cache = Self::in_memory();
        match fs::create_dir_all(&dir) {
            Ok(()) => cache.dir = Some(dir),
            Err(e) => warn!(
                "null-table cache directory {} is unusable ({e}); keeping tables in memory",
                dir.display()
            ),
        }
        cache
    }

    /// Directory from `CINDEP_CACHE_DIR`, else `$XDG_CACHE_HOME/cindep` or
    /// `~/.cache/cindep`; memory only when none resolves.
    pub fn from_env() -> Self {
        if let Some(dir) = std::env::var_os(CACHE_DIR_ENV) {
            return Self::at(PathBuf::from(dir));
        }
        let base = std::env::var_os("XDG_CACHE_HOME")
            .map(PathBuf::from)
            .or_else(|| std::env::var_os("HOME").map(|h| PathBuf::from(h).join(".cache")));
        match base {
            Some(b) => Self::at(b.join("cindep")),
            None => Self::in_memory(),
        }
    }

    pub fn with_max_work(mut self, max_work: f64) -> Self {
        self.max_work = max_work;
        self
    }

    pub fn max_work(&self) -> f64 {
        self.max_work
    }

    pub fn dir(&self) -> Option<&Path> {
        self.dir.as_deref()
    }

    /// Number of tables simulated (not loaded) by this cache.
    pub fn builds(&self) -> usize {
        self.builds.load(Ordering::Relaxed)
    }

    /// Path of the file backing `key`, when persisted.
    pub fn path_for(&self, key: &NullKey) -> Option<PathBuf> {
        self.dir.as_ref().map(|d| d.join(key.file_name()))
    }

    fn load(&self, key: &NullKey) -> Option<NullTable> {
        let path = self.path_for(key)?;
        let text = match fs::read_to_string(&path) {
            Ok(t) => t,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => return None,
            Err(e) => {
                warn!("cannot read null table {}: {e}; rebuilding", path.display());
                return None;
            }
        };
        let parsed: std::result::Result<NullTable, String> =
            serde_json::from_str::<NullTable>(&text).map_err(|e| e.to_string());
        match parsed.and_then(|t| t.validate(key).map(|()| t)) {
            Ok(t) => Some(t),
            Err(why) => {
                warn!("null table {} is corrupt ({why}); rebuilding", path.display());
                None
            }
        }
    }

    fn store(&self, table: &NullTable) {
        let Some(path) = self.path_for(&table.key()) else {
            return;
        };
        let write = || -> Result<()> {
            let dir = path.parent().unwrap_or_else(|| Path::new("."));
            let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
            tmp.write_all(table.to_json()?.as_bytes())?;
            tmp.as_file().sync_all()?;
            tmp.persist(&path).map_err(|e| e.error)?;
            Ok(())
        };
        if let Err(e) = write() {
            warn!(
                "cannot persist null table to {} ({e}); keeping it in memory",
                path.display()
            );
        }
    }

    /// Cached table for `key`, loading or simulating (then persisting) it
    /// on a miss.
    pub fn get_or_build(&self, key: NullKey) -> Result<Arc<NullTable>> {
        if let Some(t) = self.memory.lock().expect("cache lock").get(&key) {
            return Ok(Arc::clone(t));
        }
        // Built outside the lock: simulation runs on the rayon pool, and a
        // worker that steals a job needing the same key must not block on a
        // lock it already holds.
        let table = match self.load(&key) {
            Some(t) => t,
            None => {
                let t = simulate_null(key, self.max_work)?;
                self.builds.fetch_add(1, Ordering::Relaxed);
                self.store(&t);
                t
            }
        };
        let mut memory = self.memory.lock().expect("cache lock");
        Ok(Arc::clone(memory.entry(key).or_insert_with(|| Arc::new(table))))
    }
}
