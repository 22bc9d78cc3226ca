//! License gating: keep only documents whose license permits reuse.
//!
//! In-document license statements are trusted first. Documents without one are
//! looked up in an article registry; every registry answer is appended to a
//! JSON-lines cache so reruns need no network.

use std::collections::{BTreeSet, HashMap, VecDeque};
use std::fs::{self, File, OpenOptions};
use std::io::{self, BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::Mutex;
use std::thread;
use std::time::{Duration, SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{Document, LicenseTag};
use crate::http::{HttpClient, HttpError, RetryPolicy};

#[derive(Debug, Error)]
pub enum LicenseError {
    #[error("license registry unavailable for {id}: {message}")]
    ResolverUnavailable { id: String, message: String },
    #[error("allowed license set is empty")]
    EmptyAllowedSet,
    #[error("article id is empty")]
    EmptyId,
    #[error("license cache {path}: {source}")]
    Cache {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
}

/// Outcome of a single registry lookup.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum RegistryAnswer {
    Designator(String),
    NotFound,
}

/// Source of license designators keyed by article id.
pub trait RegistryClient: Sync {
    fn fetch(&self, id: &str) -> Result<RegistryAnswer, HttpError>;
}

/// HTTP registry: `GET {base_url}?{id_param}={id}[&api_key=...]`.
///
/// The body may be JSON carrying a `license` string (top level or in the first
/// element of `records`) or an XML record with a `license="..."` attribute, as
/// returned by the PMC open-access web service. 404 and explicit
/// "does not exist" answers map to [`RegistryAnswer::NotFound`].
pub struct HttpRegistry {
    pub base_url: String,
    pub id_param: String,
    pub api_key: Option<String>,
    client: HttpClient,
}

impl HttpRegistry {
    pub fn new(base_url: impl Into<String>) -> Self {
        Self {
            base_url: base_url.into(),
            id_param: "id".to_string(),
            api_key: None,
            client: HttpClient::new(Duration::from_secs(30)),
        }
    }

    pub fn with_api_key(mut self, key: Option<String>) -> Self {
        self.api_key = key;
        self
    }
}

impl RegistryClient for HttpRegistry {
    fn fetch(&self, id: &str) -> Result<RegistryAnswer, HttpError> {
        let mut query = vec![(self.id_param.as_str(), id)];
        if let Some(key) = &self.api_key {
            query.push(("api_key", key.as_str()));
        }
        match self.client.get(&self.base_url, &query) {
            Ok(body) => Ok(parse_registry_body(&body)),
            Err(e) if e.status() == Some(404) => Ok(RegistryAnswer::NotFound),
            Err(e) => Err(e),
        }
    }
}

/// Extracts a license designator from a registry response body.
pub fn parse_registry_body(body: &str) -> RegistryAnswer {
    let trimmed = body.trim_start();
    if trimmed.starts_with('{') || trimmed.starts_with('[') {
        let Ok(value) = serde_json::from_str::<serde_json::Value>(trimmed) else {
            return RegistryAnswer::NotFound;
        };
        let record = value
            .get("records")
            .and_then(|r| r.get(0))
            .or_else(|| value.get(0))
            .unwrap_or(&value);
        return match record.get("license").and_then(|l| l.as_str()) {
            Some(l) if !l.trim().is_empty() => RegistryAnswer::Designator(l.trim().to_string()),
            _ => RegistryAnswer::NotFound,
        };
    }
    xml_license_attribute(trimmed)
        .map(RegistryAnswer::Designator)
        .unwrap_or(RegistryAnswer::NotFound)
}

fn xml_license_attribute(body: &str) -> Option<String> {
    let doc = roxmltree::Document::parse(body).ok()?;
    doc.descendants()
        .filter(|n| n.has_tag_name("record"))
        .find_map(|n| n.attribute("license"))
        .map(|s| s.trim().to_string())
        .filter(|s| !s.is_empty())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CacheEntry {
    pub id: String,
    pub license: LicenseTag,
    pub fetched_at: u64,
}

/// Append-only JSON-lines cache of resolved licenses. Later lines win.
pub struct LicenseCache {
    path: Option<PathBuf>,
    entries: Mutex<HashMap<String, LicenseTag>>,
    writer: Mutex<Option<File>>,
}

impl LicenseCache {
    pub fn in_memory() -> Self {
        Self {
            path: None,
            entries: Mutex::new(HashMap::new()),
            writer: Mutex::new(None),
        }
    }

    pub fn open(path: &Path) -> Result<Self, LicenseError> {
        let cache_err = |source| LicenseError::Cache {
            path: path.to_path_buf(),
            source,
        };
        let mut entries = HashMap::new();
        if path.exists() {
            let reader = BufReader::new(File::open(path).map_err(cache_err)?);
            for (n, line) in reader.lines().enumerate() {
                let line = line.map_err(cache_err)?;
                if line.trim().is_empty() {
                    continue;
                }
                match serde_json::from_str::<CacheEntry>(&line) {
                    Ok(e) => {
                        entries.insert(e.id, e.license);
                    }
                    Err(e) => log::warn!("{}:{}: ignoring bad cache line: {e}", path.display(), n + 1),
                }
            }
        }
        Ok(Self {
            path: Some(path.to_path_buf()),
            entries: Mutex::new(entries),
            writer: Mutex::new(None),
        })
    }

    pub fn get(&self, id: &str) -> Option<LicenseTag> {
        self.entries.lock().unwrap().get(id).copied()
    }

    pub fn len(&self) -> usize {
        self.entries.lock().unwrap().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn insert(&self, id: &str, license: LicenseTag) -> Result<(), LicenseError> {
        self.entries.lock().unwrap().insert(id.to_string(), license);
        let Some(path) = &self.path else { return Ok(()) };
        let cache_err = |source| LicenseError::Cache {
            path: path.clone(),
            source,
        };
        let entry = CacheEntry {
            id: id.to_string(),
            license,
            fetched_at: SystemTime::now()
                .duration_since(UNIX_EPOCH)
                .map(|d| d.as_secs())
                .unwrap_or_default(),
        };
        let mut writer = self.writer.lock().unwrap();
        if writer.is_none() {
            if let Some(parent) = path.parent() {
                fs::create_dir_all(parent).map_err(cache_err)?;
            }
            let file = OpenOptions::new()
                .create(true)
                .append(true)
                .open(path)
                .map_err(cache_err)?;
            *writer = Some(file);
        }
        let file = writer.as_mut().expect("writer opened above");
        let line = serde_json::to_string(&entry).expect("cache entry serializes");
        writeln!(file, "{line}").map_err(cache_err)
    }
}

/// Cache in front of an optional registry client.
pub struct LicenseResolver<'c> {
    pub cache: LicenseCache,
    client: Option<&'c dyn RegistryClient>,
    pub retry: RetryPolicy,
    /// Parallel request slots.
    pub max_concurrency: usize,
    /// Pause each slot takes after every request.
    pub politeness_delay: Duration,
    enabled: bool,
}

impl<'c> LicenseResolver<'c> {
    pub fn new(cache: LicenseCache, client: Option<&'c dyn RegistryClient>) -> Self {
        Self {
            cache,
            client,
            retry: RetryPolicy::default(),
            max_concurrency: 4,
            politeness_delay: Duration::from_millis(350),
            enabled: true,
        }
    }

    /// No lookups at all: documents without in-document evidence stay `Unknown`.
    pub fn disabled() -> Self {
        Self {
            enabled: false,
            ..Self::new(LicenseCache::in_memory(), None)
        }
    }

    /// Cache-only resolver: misses fail with `ResolverUnavailable`.
    pub fn offline(cache: LicenseCache) -> Self {
        Self::new(cache, None)
    }

    pub fn resolve(&self, id: &str) -> Result<LicenseTag, LicenseError> {
        match self.client {
            Some(client) => resolve_license(id, client, &self.cache, self.retry),
            None => {
                if id.is_empty() {
                    return Err(LicenseError::EmptyId);
                }
                self.cache.get(id).ok_or_else(|| LicenseError::ResolverUnavailable {
                    id: id.to_string(),
                    message: "not cached and no registry configured".to_string(),
                })
            }
        }
    }

    /// Resolves many ids with at most `max_concurrency` requests in flight.
    /// Cached ids never reach the network.
    pub fn resolve_all(&self, ids: &[String]) -> Result<HashMap<String, LicenseTag>, LicenseError> {
        let mut out = HashMap::new();
        if !self.enabled {
            return Ok(out);
        }
        let mut misses = VecDeque::new();
        for id in ids {
            match self.cache.get(id) {
                Some(tag) => {
                    out.insert(id.clone(), tag);
                }
                None => misses.push_back(id.clone()),
            }
        }
        if misses.is_empty() {
            return Ok(out);
        }
        let queue = Mutex::new(misses);
        let results = Mutex::new(Vec::new());
        let first_error = Mutex::new(None);
        thread::scope(|s| {
            for _ in 0..self.max_concurrency.max(1) {
                s.spawn(|| {
                    loop {
                        if first_error.lock().unwrap().is_some() {
                            return;
                        }
                        let Some(id) = queue.lock().unwrap().pop_front() else {
                            return;
                        };
                        match self.resolve(&id) {
                            Ok(tag) => results.lock().unwrap().push((id, tag)),
                            Err(e) => {
                                first_error.lock().unwrap().get_or_insert(e);
                                return;
                            }
                        }
                        if self.client.is_some() && !self.politeness_delay.is_zero() {
                            thread::sleep(self.politeness_delay);
                        }
                    }
                });
            }
        });
        if let Some(e) = first_error.into_inner().unwrap() {
            return Err(e);
        }
        out.extend(results.into_inner().unwrap());
        Ok(out)
    }
}

/// Looks `id` up in `cache`, falling back to `client` with bounded retries.
/// Registry misses resolve to `Unknown`, and every answer is cached.
pub fn resolve_license(
    id: &str,
    client: &dyn RegistryClient,
    cache: &LicenseCache,
    retry: RetryPolicy,
) -> Result<LicenseTag, LicenseError> {
    if id.is_empty() {
        return Err(LicenseError::EmptyId);
    }
    if let Some(tag) = cache.get(id) {
        return Ok(tag);
    }
    let answer = retry
        .run(|| client.fetch(id))
        .map_err(|e| LicenseError::ResolverUnavailable {
            id: id.to_string(),
            message: e.to_string(),
        })?;
    let tag = match answer {
        RegistryAnswer::Designator(d) => LicenseTag::from_designator(&d),
        RegistryAnswer::NotFound => LicenseTag::Unknown,
    };
    cache.insert(id, tag)?;
    Ok(tag)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LicenseFunnel {
    pub input: usize,
    pub kept: usize,
    pub resolved_remotely: usize,
}

/// Keeps documents whose resolved license is in `allowed`. `Unknown` after
/// resolution is always rejected. Registry failures fail the whole stage.
pub fn filter_by_license(
    docs: Vec<Document>,
    allowed: &BTreeSet<LicenseTag>,
    resolver: &LicenseResolver,
) -> Result<(Vec<Document>, LicenseFunnel), LicenseError> {
    if allowed.is_empty() {
        return Err(LicenseError::EmptyAllowedSet);
    }
    let unresolved: Vec<String> = docs
        .iter()
        .filter(|d| d.license == LicenseTag::Unknown)
        .map(|d| d.id.clone())
        .collect();
    let resolved = resolver.resolve_all(&unresolved)?;
    let input = docs.len();
    let kept: Vec<Document> = docs
        .into_iter()
        .map(|mut d| {
            if d.license == LicenseTag::Unknown {
                d.license = resolved.get(&d.id).copied().unwrap_or(LicenseTag::Unknown);
            }
            d
        })
        .filter(|d| d.license != LicenseTag::Unknown && allowed.contains(&d.license))
        .collect();
    let funnel = LicenseFunnel {
        input,
        kept: kept.len(),
        resolved_remotely: unresolved.len(),
    };
    Ok((kept, funnel))
}
