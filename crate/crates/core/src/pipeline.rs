//! Config-driven run of the acquisition stages, in order:
//! ingest, relevance, license, extract, ner-filter, dedup, split.
//!
//! Every stage writes its artifacts into the output directory and a record
//! into `funnel_manifest.json`. A stage is skipped on rerun when its key
//! (stage config + input artifact hash) is unchanged and its recorded
//! artifacts are still on disk with the recorded hashes.

use std::collections::{BTreeSet, HashSet};
use std::fs::{self, File};
use std::io::{self, BufRead, BufReader};
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;
use walkdir::WalkDir;

use crate::corpus::{CorpusError, Document, LicenseTag, ParseOptions, Sections, SkipRecord, load_corpus, partition};
use crate::dataset::{DatasetError, Record, SplitSpec, Splits, shuffle_and_split, write_splits};
use crate::extraction::{
    ExtractionError, ExtractorBackend, NaiveBackend, RemoteOpenIe, Triplet, extract_corpus, load_triplets,
    save_triplets,
};
use crate::license::{HttpRegistry, LicenseCache, LicenseError, LicenseResolver, filter_by_license};
use crate::nerfilter::{
    EntityScorer, HttpEntityScorer, LexiconScorer, NerError, PhraseCache, ScoringOptions, StubScorer, dedup_triplets,
    filter_scored, save_scored, score_triplets,
};
use crate::relevance::{
    Cutoff, RelevanceError, RelevanceScorer, TermQuery, TfIdfScorer, build_vocabulary, rank_documents,
    write_ranking_csv,
};

pub const STAGES: [&str; 7] = [
    "ingest",
    "relevance",
    "license",
    "extract",
    "ner-filter",
    "dedup",
    "split",
];
pub const MANIFEST_FILE: &str = "funnel_manifest.json";

pub const ENV_NER_URL: &str = "TF_NER_URL";
pub const ENV_EMBED_URL: &str = "TF_EMBED_URL";
pub const ENV_OPENIE_URL: &str = "TF_OPENIE_URL";

#[derive(Debug, Error)]
pub enum StageFailure {
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error(transparent)]
    Relevance(#[from] RelevanceError),
    #[error(transparent)]
    License(#[from] LicenseError),
    #[error(transparent)]
    Extraction(#[from] ExtractionError),
    #[error(transparent)]
    Ner(#[from] NerError),
    #[error(transparent)]
    Dataset(#[from] DatasetError),
    #[error(transparent)]
    Io(#[from] io::Error),
}

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("config: {0}")]
    Config(String),
    #[error("stage {stage} failed: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: StageFailure,
    },
    #[error(transparent)]
    Io(#[from] io::Error),
}

// ---------------------------------------------------------------- config

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CorpusConfig {
    pub root: PathBuf,
    #[serde(default)]
    pub sections: Sections,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RelevanceConfig {
    pub terms: Vec<String>,
    #[serde(default)]
    pub top_k: Option<usize>,
    #[serde(default)]
    pub min_score: Option<f64>,
    #[serde(default = "one")]
    pub min_df: u64,
    #[serde(default = "yes")]
    pub phrase_boost: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ResolverMode {
    /// Registry lookups behind the on-disk cache.
    Registry,
    /// Cache only; a miss fails the stage.
    #[default]
    Cache,
    /// No lookups; only in-document license evidence counts.
    None,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LicenseConfig {
    pub allowed: Vec<String>,
    pub resolver: ResolverMode,
    pub registry_url: Option<String>,
    /// Name of the environment variable holding the registry API key.
    pub api_key_env: Option<String>,
    pub cache: Option<PathBuf>,
    pub max_concurrency: usize,
    pub politeness_delay_ms: u64,
}

impl Default for LicenseConfig {
    fn default() -> Self {
        Self {
            allowed: vec!["CC0".to_string()],
            resolver: ResolverMode::Cache,
            registry_url: None,
            api_key_env: None,
            cache: None,
            max_concurrency: 4,
            politeness_delay_ms: 350,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum BackendKind {
    #[default]
    Naive,
    Remote,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExtractionConfig {
    pub backend: BackendKind,
    pub openie_url: Option<String>,
    /// 0 = one worker per CPU.
    pub workers: usize,
    pub min_confidence: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum ScorerKind {
    #[default]
    Http,
    Stub,
    Lexicon,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NerConfig {
    pub scorer: ScorerKind,
    pub url: Option<String>,
    pub lexicon: Option<PathBuf>,
    pub threshold: f64,
    pub batch_size: usize,
    pub in_flight: usize,
    pub cache: Option<PathBuf>,
}

impl Default for NerConfig {
    fn default() -> Self {
        Self {
            scorer: ScorerKind::Http,
            url: None,
            lexicon: None,
            threshold: 0.80,
            batch_size: 64,
            in_flight: 2,
            cache: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    pub dir: PathBuf,
}

/// The single run configuration (TOML). Relative paths are resolved against
/// the directory containing the config file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    pub corpus: CorpusConfig,
    pub relevance: RelevanceConfig,
    #[serde(default)]
    pub license: LicenseConfig,
    #[serde(default)]
    pub extraction: ExtractionConfig,
    #[serde(default)]
    pub ner: NerConfig,
    #[serde(default)]
    pub split: SplitSpec,
    pub output: OutputConfig,
    #[serde(skip)]
    pub base_dir: PathBuf,
}

fn one() -> u64 {
    1
}

fn yes() -> bool {
    true
}

fn sha256_hex(bytes: impl AsRef<[u8]>) -> String {
    hex::encode(Sha256::digest(bytes))
}

fn hash_json(value: &impl Serialize) -> String {
    sha256_hex(serde_json::to_vec(value).expect("config serializes"))
}

impl PipelineConfig {
    pub fn parse(text: &str, base_dir: &Path) -> Result<Self, PipelineError> {
        let mut cfg: PipelineConfig = toml::from_str(text).map_err(|e| PipelineError::Config(e.to_string()))?;
        cfg.base_dir = base_dir.to_path_buf();
        Ok(cfg)
    }

    /// Reads, applies `TF_*` environment overrides and validates.
    pub fn load(path: &Path) -> Result<Self, PipelineError> {
        let text = fs::read_to_string(path)
            .map_err(|e| PipelineError::Config(format!("cannot read {}: {e}", path.display())))?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        let mut cfg = Self::parse(&text, &base)?;
        cfg.apply_env(|k| std::env::var(k).ok());
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn apply_env(&mut self, lookup: impl Fn(&str) -> Option<String>) {
        if let Some(url) = lookup(ENV_NER_URL).filter(|u| !u.is_empty()) {
            self.ner.url = Some(url);
        }
        if let Some(url) = lookup(ENV_OPENIE_URL).filter(|u| !u.is_empty()) {
            self.extraction.openie_url = Some(url);
        }
    }

    pub fn validate(&self) -> Result<(), PipelineError> {
        let bad = |m: &str| Err(PipelineError::Config(m.to_string()));
        if let Err(e) = TermQuery::new(&self.relevance.terms) {
            return Err(PipelineError::Config(format!("relevance.terms: {e}")));
        }
        if self.relevance.top_k == Some(0) {
            return bad("relevance.top_k must be at least 1");
        }
        if self.license.allowed.is_empty() {
            return bad("license.allowed must not be empty");
        }
        for name in &self.license.allowed {
            if LicenseTag::parse(name).is_none() {
                return Err(PipelineError::Config(format!("license.allowed: unknown tag {name:?}")));
            }
        }
        if self.license.resolver == ResolverMode::Registry && self.license.registry_url.is_none() {
            return bad("license.registry_url is required with resolver = \"registry\"");
        }
        if self.license.resolver == ResolverMode::Cache && self.license.cache.is_none() {
            return bad("license.cache is required with resolver = \"cache\"");
        }
        if self.extraction.backend == BackendKind::Remote && self.extraction.openie_url.is_none() {
            return bad("extraction.openie_url (or TF_OPENIE_URL) is required with backend = \"remote\"");
        }
        if self
            .extraction
            .min_confidence
            .is_some_and(|c| !(0.0..=1.0).contains(&c))
        {
            return bad("extraction.min_confidence must be in [0, 1]");
        }
        if !(0.0..=1.0).contains(&self.ner.threshold) {
            return bad("ner.threshold must be in [0, 1]");
        }
        if self.ner.batch_size == 0 || self.ner.in_flight == 0 {
            return bad("ner.batch_size and ner.in_flight must be at least 1");
        }
        match self.ner.scorer {
            ScorerKind::Http if self.ner.url.is_none() => {
                bad("ner.url (or TF_NER_URL) is required with scorer = \"http\"")
            }
            ScorerKind::Lexicon if self.ner.lexicon.is_none() => {
                bad("ner.lexicon is required with scorer = \"lexicon\"")
            }
            _ => Ok(()),
        }
    }

    pub fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }

    pub fn output_dir(&self) -> PathBuf {
        self.resolve(&self.output.dir)
    }

    /// SHA-256 of the canonical JSON form of the effective config. The
    /// output directory is left out: where artifacts go does not change them.
    pub fn config_hash(&self) -> String {
        let mut v = serde_json::to_value(self).expect("config serializes");
        v.as_object_mut().expect("config is an object").remove("output");
        hash_json(&v)
    }
}

// ---------------------------------------------------------------- manifest

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Artifact {
    pub path: String,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageRecord {
    pub stage: String,
    pub articles_in: usize,
    pub articles_out: usize,
    pub triplets_in: usize,
    pub triplets_out: usize,
    pub wall_time_s: f64,
    pub config_hash: String,
    /// Hash of (stage, stage config, input artifacts); the resumability key.
    pub stage_key: String,
    pub cached: bool,
    pub artifacts: Vec<Artifact>,
    #[serde(default)]
    pub details: serde_json::Value,
}

impl StageRecord {
    fn output_hash(&self) -> String {
        hash_json(&self.artifacts)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FunnelManifest {
    pub config_hash: String,
    /// True when every stage was reused from a previous run.
    pub cached: bool,
    pub stages: Vec<StageRecord>,
}

impl FunnelManifest {
    pub fn stage(&self, name: &str) -> Option<&StageRecord> {
        self.stages.iter().find(|s| s.stage == name)
    }

    pub fn read(path: &Path) -> io::Result<Self> {
        serde_json::from_str(&fs::read_to_string(path)?).map_err(io::Error::other)
    }

    /// Article counts after each filtering stage never increase.
    pub fn is_monotone(&self) -> bool {
        self.stages.windows(2).all(|w| w[1].articles_out <= w[0].articles_out)
    }
}

// ---------------------------------------------------------------- io helpers

fn write_atomic(path: &Path, bytes: &[u8]) -> io::Result<()> {
    let tmp = path.with_extension("partial");
    fs::write(&tmp, bytes)?;
    fs::rename(&tmp, path)
}

fn jsonl_bytes<T: Serialize>(items: &[T]) -> Vec<u8> {
    let mut out = Vec::new();
    for item in items {
        serde_json::to_writer(&mut out, item).expect("record serializes");
        out.push(b'\n');
    }
    out
}

/// Reads one JSON value per non-blank line.
pub fn read_jsonl<T: DeserializeOwned>(path: &Path) -> io::Result<Vec<T>> {
    let mut out = Vec::new();
    for line in BufReader::new(File::open(path)?).lines() {
        let line = line?;
        if !line.trim().is_empty() {
            out.push(serde_json::from_str(&line).map_err(io::Error::other)?);
        }
    }
    Ok(out)
}

/// Writes one JSON value per line, atomically.
pub fn write_jsonl<T: Serialize>(path: &Path, items: &[T]) -> io::Result<()> {
    write_atomic(path, &jsonl_bytes(items))
}

fn file_hash(path: &Path) -> io::Result<String> {
    Ok(sha256_hex(fs::read(path)?))
}

/// Hash of every file under `root`: relative paths and contents, in
/// lexicographic order.
fn tree_hash(root: &Path) -> io::Result<String> {
    let mut files: Vec<PathBuf> = WalkDir::new(root)
        .into_iter()
        .filter_map(|e| e.ok())
        .filter(|e| e.file_type().is_file())
        .map(|e| e.into_path())
        .collect();
    files.sort();
    let mut h = Sha256::new();
    for f in files {
        let rel = f.strip_prefix(root).unwrap_or(&f).to_string_lossy().replace('\\', "/");
        h.update(rel.as_bytes());
        h.update([0]);
        h.update(file_hash(&f)?.as_bytes());
    }
    Ok(hex::encode(h.finalize()))
}

fn optional_file_hash(path: Option<PathBuf>) -> io::Result<String> {
    match path {
        Some(p) if p.exists() => file_hash(&p),
        _ => Ok(String::new()),
    }
}

fn distinct_docs(triplets: &[Triplet]) -> usize {
    triplets.iter().map(|t| t.doc_id.as_str()).collect::<HashSet<_>>().len()
}

// ---------------------------------------------------------------- runner

#[derive(Default)]
struct Counts {
    articles_in: usize,
    articles_out: usize,
    triplets_in: usize,
    triplets_out: usize,
    details: serde_json::Value,
}

struct Runner {
    out: PathBuf,
    config_hash: String,
    previous: Option<FunnelManifest>,
    manifest: FunnelManifest,
}

impl Runner {
    fn reusable(&self, stage: &str, key: &str) -> Option<StageRecord> {
        let rec = self.previous.as_ref()?.stage(stage)?;
        if rec.stage_key != key {
            return None;
        }
        let intact = rec
            .artifacts
            .iter()
            .all(|a| file_hash(&self.out.join(&a.path)).is_ok_and(|h| h == a.sha256));
        intact.then(|| rec.clone())
    }

    /// Runs or reuses one stage; returns its output value and the hash of
    /// its artifacts (the next stage's input hash).
    fn stage<T>(
        &mut self,
        stage: &'static str,
        stage_config: serde_json::Value,
        input_hash: &str,
        compute: impl FnOnce(&Path) -> Result<(T, Counts, Vec<&'static str>), StageFailure>,
        load: impl FnOnce(&Path) -> Result<T, StageFailure>,
    ) -> Result<(T, String), PipelineError> {
        let key = hash_json(&serde_json::json!({
            "stage": stage,
            "config": stage_config,
            "input": input_hash,
        }));
        let started = Instant::now();
        let wrap = |source| PipelineError::Stage { stage, source };
        let (value, record) = match self.reusable(stage, &key) {
            Some(mut rec) => {
                log::info!("{stage}: reusing artifacts from the previous run");
                let value = load(&self.out).map_err(wrap)?;
                rec.cached = true;
                rec.config_hash = self.config_hash.clone();
                rec.wall_time_s = started.elapsed().as_secs_f64();
                (value, rec)
            }
            None => {
                log::info!("{stage}: running");
                let (value, counts, files) = compute(&self.out).map_err(wrap)?;
                let artifacts = files
                    .iter()
                    .map(|f| {
                        Ok(Artifact {
                            path: f.to_string(),
                            sha256: file_hash(&self.out.join(f))?,
                        })
                    })
                    .collect::<io::Result<Vec<_>>>()
                    .map_err(|e| wrap(e.into()))?;
                let rec = StageRecord {
                    stage: stage.to_string(),
                    articles_in: counts.articles_in,
                    articles_out: counts.articles_out,
                    triplets_in: counts.triplets_in,
                    triplets_out: counts.triplets_out,
                    wall_time_s: started.elapsed().as_secs_f64(),
                    config_hash: self.config_hash.clone(),
                    stage_key: key,
                    cached: false,
                    artifacts,
                    details: counts.details,
                };
                (value, rec)
            }
        };
        let out_hash = record.output_hash();
        self.manifest.stages.push(record);
        self.manifest.cached = self.manifest.stages.iter().all(|s| s.cached);
        self.write_manifest()?;
        Ok((value, out_hash))
    }

    fn write_manifest(&self) -> io::Result<()> {
        let json = serde_json::to_string_pretty(&self.manifest).map_err(io::Error::other)?;
        write_atomic(&self.out.join(MANIFEST_FILE), (json + "\n").as_bytes())
    }
}

fn build_backend(cfg: &ExtractionConfig) -> Box<dyn ExtractorBackend> {
    match cfg.backend {
        BackendKind::Naive => Box::new(NaiveBackend),
        BackendKind::Remote => Box::new(RemoteOpenIe::new(cfg.openie_url.clone().unwrap_or_default())),
    }
}

fn build_scorer(cfg: &PipelineConfig) -> Result<Box<dyn EntityScorer>, StageFailure> {
    Ok(match cfg.ner.scorer {
        ScorerKind::Http => Box::new(HttpEntityScorer::new(cfg.ner.url.clone().unwrap_or_default())),
        ScorerKind::Stub => Box::new(StubScorer),
        ScorerKind::Lexicon => {
            let path = cfg.resolve(cfg.ner.lexicon.as_deref().unwrap_or(Path::new("")));
            Box::new(LexiconScorer::load(&path)?)
        }
    })
}

/// Runs every stage in order, reusing unchanged stages from a previous run
/// in the same output directory.
pub fn run_pipeline(cfg: &PipelineConfig) -> Result<FunnelManifest, PipelineError> {
    cfg.validate()?;
    let out = cfg.output_dir();
    fs::create_dir_all(&out)?;
    let config_hash = cfg.config_hash();
    let previous = FunnelManifest::read(&out.join(MANIFEST_FILE)).ok();
    let mut r = Runner {
        out,
        config_hash: config_hash.clone(),
        previous,
        manifest: FunnelManifest {
            config_hash,
            cached: false,
            stages: Vec::new(),
        },
    };

    // ingest
    let root = cfg.resolve(&cfg.corpus.root);
    let corpus_hash = tree_hash(&root).map_err(|e| PipelineError::Stage {
        stage: "ingest",
        source: e.into(),
    })?;
    let (docs, h) = r.stage(
        "ingest",
        serde_json::to_value(cfg.corpus.sections).unwrap(),
        &corpus_hash,
        |out| {
            let stream = load_corpus(
                &root,
                ParseOptions {
                    sections: cfg.corpus.sections,
                },
            )?;
            let (docs, skips): (Vec<Document>, Vec<SkipRecord>) = partition(stream);
            write_atomic(&out.join("documents.jsonl"), &jsonl_bytes(&docs))?;
            write_atomic(&out.join("skips.jsonl"), &jsonl_bytes(&skips))?;
            let counts = Counts {
                articles_in: docs.len() + skips.len(),
                articles_out: docs.len(),
                details: serde_json::json!({ "skipped": skips.len() }),
                ..Default::default()
            };
            Ok((docs, counts, vec!["documents.jsonl", "skips.jsonl"]))
        },
        |out| Ok(read_jsonl(&out.join("documents.jsonl"))?),
    )?;

    // relevance
    let (relevant, h) = r.stage(
        "relevance",
        serde_json::to_value(&cfg.relevance).unwrap(),
        &h,
        |out| {
            let query = TermQuery::new(&cfg.relevance.terms)?;
            let vocab = build_vocabulary(docs.iter(), cfg.relevance.min_df)?;
            let scorer: Box<dyn RelevanceScorer> = if cfg.relevance.phrase_boost {
                Box::new(TfIdfScorer::new(&vocab))
            } else {
                Box::new(TfIdfScorer::without_phrases(&vocab))
            };
            let cutoff = Cutoff {
                top_k: cfg.relevance.top_k,
                min_score: cfg.relevance.min_score,
            };
            let ranking = rank_documents(&docs, &query, scorer.as_ref(), cutoff)?;
            let mut csv = Vec::new();
            write_ranking_csv(&ranking, &mut csv)?;
            write_atomic(&out.join("ranking.csv"), &csv)?;
            let by_id: std::collections::HashMap<&str, &Document> = docs.iter().map(|d| (d.id.as_str(), d)).collect();
            let kept: Vec<Document> = ranking.iter().map(|x| by_id[x.doc_id.as_str()].clone()).collect();
            write_atomic(&out.join("relevant.jsonl"), &jsonl_bytes(&kept))?;
            let counts = Counts {
                articles_in: docs.len(),
                articles_out: kept.len(),
                details: serde_json::json!({
                    "top_k": cfg.relevance.top_k,
                    "min_score": cfg.relevance.min_score,
                    "vocabulary": vocab.len(),
                }),
                ..Default::default()
            };
            Ok((kept, counts, vec!["ranking.csv", "relevant.jsonl"]))
        },
        |out| Ok(read_jsonl(&out.join("relevant.jsonl"))?),
    )?;
    drop(docs);

    // license
    let lic = &cfg.license;
    let cache_path = lic.cache.as_ref().map(|p| cfg.resolve(p));
    let license_input = hash_json(&[
        h.clone(),
        if lic.resolver == ResolverMode::Cache {
            optional_file_hash(cache_path.clone()).map_err(|e| PipelineError::Stage {
                stage: "license",
                source: e.into(),
            })?
        } else {
            String::new()
        },
    ]);
    let (licensed, h) = r.stage(
        "license",
        serde_json::to_value(lic).unwrap(),
        &license_input,
        |out| {
            let allowed: BTreeSet<LicenseTag> = lic.allowed.iter().filter_map(|s| LicenseTag::parse(s)).collect();
            let cache = match &cache_path {
                Some(p) => LicenseCache::open(p)?,
                None => LicenseCache::in_memory(),
            };
            let registry = lic.registry_url.as_ref().map(|url| {
                HttpRegistry::new(url.clone())
                    .with_api_key(lic.api_key_env.as_ref().and_then(|k| std::env::var(k).ok()))
            });
            let mut resolver = match lic.resolver {
                ResolverMode::Registry => LicenseResolver::new(cache, registry.as_ref().map(|r| r as _)),
                ResolverMode::Cache => LicenseResolver::offline(cache),
                ResolverMode::None => LicenseResolver::disabled(),
            };
            resolver.max_concurrency = lic.max_concurrency.max(1);
            resolver.politeness_delay = Duration::from_millis(lic.politeness_delay_ms);
            let n = relevant.len();
            let (kept, funnel) = filter_by_license(relevant.clone(), &allowed, &resolver)?;
            write_atomic(&out.join("licensed.jsonl"), &jsonl_bytes(&kept))?;
            let counts = Counts {
                articles_in: n,
                articles_out: kept.len(),
                details: serde_json::to_value(funnel).unwrap(),
                ..Default::default()
            };
            Ok((kept, counts, vec!["licensed.jsonl"]))
        },
        |out| Ok(read_jsonl(&out.join("licensed.jsonl"))?),
    )?;

    // extract
    let (triplets, h) = r.stage(
        "extract",
        serde_json::to_value(&cfg.extraction).unwrap(),
        &h,
        |out| {
            let backend = build_backend(&cfg.extraction);
            let ex = extract_corpus(
                &licensed,
                backend.as_ref(),
                cfg.extraction.workers,
                cfg.extraction.min_confidence,
            )?;
            save_triplets(&ex.triplets, &out.join("triplets.jsonl"))?;
            let counts = Counts {
                articles_in: licensed.len(),
                articles_out: distinct_docs(&ex.triplets),
                triplets_in: 0,
                triplets_out: ex.triplets.len(),
                details: serde_json::json!({
                    "backend": backend.name(),
                    "sentences": ex.sentences,
                    "skipped_sentences": ex.skipped_sentences,
                    "below_confidence": ex.below_confidence,
                }),
            };
            Ok((ex.triplets, counts, vec!["triplets.jsonl"]))
        },
        |out| Ok(load_triplets(&out.join("triplets.jsonl"))?),
    )?;

    // ner-filter
    let lexicon_hash = match cfg.ner.scorer {
        ScorerKind::Lexicon => optional_file_hash(cfg.ner.lexicon.as_ref().map(|p| cfg.resolve(p))),
        _ => Ok(String::new()),
    }
    .map_err(|e| PipelineError::Stage {
        stage: "ner-filter",
        source: e.into(),
    })?;
    let ner_cfg = serde_json::json!({
        "scorer": cfg.ner.scorer,
        "url": cfg.ner.url,
        "threshold": cfg.ner.threshold,
        "lexicon_sha256": lexicon_hash,
    });
    let (filtered, h) = r.stage(
        "ner-filter",
        ner_cfg,
        &h,
        |out| {
            let scorer = build_scorer(cfg)?;
            let mut cache = match &cfg.ner.cache {
                Some(p) => PhraseCache::open(&cfg.resolve(p))?,
                None => PhraseCache::in_memory(),
            };
            let options = ScoringOptions {
                batch_size: cfg.ner.batch_size,
                in_flight: cfg.ner.in_flight,
            };
            let scored = score_triplets(&triplets, scorer.as_ref(), &mut cache, options)?;
            save_scored(&scored, &out.join("scored.jsonl"))?;
            let (kept, funnel) = filter_scored(&scored, cfg.ner.threshold)?;
            save_triplets(&kept, &out.join("filtered.jsonl"))?;
            let counts = Counts {
                articles_in: distinct_docs(&triplets),
                articles_out: distinct_docs(&kept),
                triplets_in: triplets.len(),
                triplets_out: kept.len(),
                details: serde_json::json!({ "scorer": scorer.name(), "rejected": funnel.rejected }),
            };
            Ok((kept, counts, vec!["scored.jsonl", "filtered.jsonl"]))
        },
        |out| Ok(load_triplets(&out.join("filtered.jsonl"))?),
    )?;
    drop(triplets);

    // dedup
    let (kb, h) = r.stage(
        "dedup",
        serde_json::Value::Null,
        &h,
        |out| {
            let n = filtered.len();
            let articles_in = distinct_docs(&filtered);
            let kb = dedup_triplets(filtered.clone());
            save_triplets(&kb, &out.join("knowledge_base.jsonl"))?;
            let counts = Counts {
                articles_in,
                articles_out: distinct_docs(&kb),
                triplets_in: n,
                triplets_out: kb.len(),
                details: serde_json::json!({ "duplicates_removed": n - kb.len() }),
            };
            Ok((kb, counts, vec!["knowledge_base.jsonl"]))
        },
        |out| Ok(load_triplets(&out.join("knowledge_base.jsonl"))?),
    )?;

    // split
    let config_hash = r.config_hash.clone();
    r.stage(
        "split",
        serde_json::to_value(cfg.split).unwrap(),
        &h,
        |out| {
            let splits = shuffle_and_split(&kb, &cfg.split)?;
            let records = |ts: &[Triplet]| ts.iter().map(Record::from).collect::<Vec<_>>();
            let as_records = Splits {
                train: records(&splits.train),
                test: records(&splits.test),
                validation: records(&splits.validation),
            };
            let manifest = write_splits(&as_records, &cfg.split, kb.len(), out)?;
            let mut json = serde_json::to_value(&manifest).unwrap();
            json["config_hash"] = serde_json::Value::String(config_hash);
            let mut bytes = serde_json::to_vec_pretty(&json).map_err(io::Error::other)?;
            bytes.push(b'\n');
            write_atomic(&out.join("split_manifest.json"), &bytes)?;
            let all: Vec<Triplet> = [splits.train, splits.test, splits.validation].concat();
            let counts = Counts {
                articles_in: distinct_docs(&kb),
                articles_out: distinct_docs(&all),
                triplets_in: kb.len(),
                triplets_out: all.len(),
                details: serde_json::to_value(&manifest).unwrap(),
            };
            Ok((
                (),
                counts,
                vec!["train.csv", "test.csv", "validation.csv", "split_manifest.json"],
            ))
        },
        |_| Ok(()),
    )?;

    Ok(r.manifest)
}
