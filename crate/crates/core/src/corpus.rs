//! Article ingestion: JATS-style XML and plain text into [`Document`]s.

use std::collections::HashSet;
use std::fmt;
use std::fs;
use std::io::{self, Read};
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use roxmltree::{Node, ParsingOptions};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;
use walkdir::WalkDir;

use crate::text::collapse_whitespace;

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("malformed input: {0}")]
    MalformedInput(String),
    #[error("cannot read corpus root {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum LicenseTag {
    #[serde(rename = "CC0")]
    Cc0,
    #[serde(rename = "CC_BY")]
    CcBy,
    #[serde(rename = "CC_BY_NC")]
    CcByNc,
    #[serde(rename = "OTHER")]
    Other,
    #[serde(rename = "UNKNOWN")]
    Unknown,
}

impl LicenseTag {
    pub fn as_str(self) -> &'static str {
        match self {
            LicenseTag::Cc0 => "CC0",
            LicenseTag::CcBy => "CC_BY",
            LicenseTag::CcByNc => "CC_BY_NC",
            LicenseTag::Other => "OTHER",
            LicenseTag::Unknown => "UNKNOWN",
        }
    }

    /// Parses the canonical names produced by [`LicenseTag::as_str`].
    pub fn parse(name: &str) -> Option<Self> {
        Some(match name.trim().to_ascii_uppercase().as_str() {
            "CC0" => LicenseTag::Cc0,
            "CC_BY" => LicenseTag::CcBy,
            "CC_BY_NC" => LicenseTag::CcByNc,
            "OTHER" => LicenseTag::Other,
            "UNKNOWN" => LicenseTag::Unknown,
            _ => return None,
        })
    }

    /// Maps a license designator (registry string, URI, or statement) to a tag.
    ///
    /// Anything non-empty that is not recognised is `Other`: evidence exists but
    /// names no supported license. Empty input is `Unknown`.
    pub fn from_designator(raw: &str) -> Self {
        let s = raw.trim().to_ascii_lowercase();
        if s.is_empty() {
            return LicenseTag::Unknown;
        }
        if s.contains("publicdomain/zero")
            || s.contains("cc0")
            || s.contains("cc-zero")
            || s.contains("creative commons zero")
        {
            return LicenseTag::Cc0;
        }
        if let Some(kind) = creative_commons_kind(&s) {
            return match kind.as_str() {
                "by" => LicenseTag::CcBy,
                k if k.starts_with("by-nc") => LicenseTag::CcByNc,
                _ => LicenseTag::Other,
            };
        }
        LicenseTag::Other
    }
}

impl fmt::Display for LicenseTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Extracts the `by`, `by-nc`, `by-nc-nd`, ... component from a CC URI or
/// designator such as `CC BY-NC`.
fn creative_commons_kind(s: &str) -> Option<String> {
    if let Some(pos) = s.find("creativecommons.org/licenses/") {
        let rest = &s[pos + "creativecommons.org/licenses/".len()..];
        return Some(rest.split('/').next().unwrap_or_default().to_string());
    }
    let rest = s
        .strip_prefix("cc ")
        .or_else(|| s.strip_prefix("cc-"))
        .or_else(|| s.strip_prefix("cc_"))?;
    let kind = rest.split_whitespace().next().unwrap_or_default().replace('_', "-");
    kind.starts_with("by").then_some(kind)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Document {
    pub id: String,
    pub title: String,
    pub body: String,
    pub license: LicenseTag,
    pub source_path: String,
}

impl Document {
    /// SHA-256 over the identifying content, hex encoded.
    pub fn content_hash(&self) -> String {
        let mut h = Sha256::new();
        for part in [&self.id, &self.title, &self.body, self.license.as_str()] {
            h.update(part.as_bytes());
            h.update([0u8]);
        }
        hex::encode(h.finalize())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FormatHint {
    ArticleXml,
    PlainText,
}

impl FormatHint {
    pub fn from_path(path: &str) -> Option<Self> {
        let lower = path.to_ascii_lowercase();
        if lower.ends_with(".xml") || lower.ends_with(".nxml") {
            Some(FormatHint::ArticleXml)
        } else if lower.ends_with(".txt") {
            Some(FormatHint::PlainText)
        } else {
            None
        }
    }
}

/// Which article sections feed the body text.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Sections {
    /// Abstract followed by the article body.
    #[default]
    Full,
    AbstractOnly,
}

#[derive(Debug, Clone, Copy, Default)]
pub struct ParseOptions {
    pub sections: Sections,
}

/// Elements whose whole subtree is dropped from the body text.
const DROPPED: &[&str] = &[
    "fig",
    "fig-group",
    "table-wrap",
    "table-wrap-group",
    "table",
    "ref-list",
    "back",
    "supplementary-material",
    "disp-formula",
    "caption",
];

/// Parses one article. `source_path` is used for provenance and as the id
/// fallback (its file stem).
pub fn parse_document(
    raw: &[u8],
    format_hint: FormatHint,
    source_path: &str,
    options: ParseOptions,
) -> Result<Document, CorpusError> {
    let text = std::str::from_utf8(raw).map_err(|e| CorpusError::MalformedInput(format!("not valid UTF-8: {e}")))?;
    let text = text.strip_prefix('\u{feff}').unwrap_or(text);
    match format_hint {
        FormatHint::PlainText => Ok(Document {
            id: stem_id(source_path)?,
            title: String::new(),
            body: join_paragraphs(text.split("\n\n").map(str::to_string)),
            license: LicenseTag::Unknown,
            source_path: source_path.to_string(),
        }),
        FormatHint::ArticleXml => parse_article_xml(text, source_path, options),
    }
}

fn stem_id(source_path: &str) -> Result<String, CorpusError> {
    let name = source_path.rsplit(['/', '\\', '!']).next().unwrap_or(source_path);
    let stem = name.split('.').next().unwrap_or_default();
    if stem.is_empty() {
        return Err(CorpusError::MalformedInput(format!(
            "no identifier derivable from {source_path}"
        )));
    }
    Ok(stem.to_string())
}

fn join_paragraphs(paragraphs: impl IntoIterator<Item = String>) -> String {
    paragraphs
        .into_iter()
        .map(|p| collapse_whitespace(&p))
        .filter(|p| !p.is_empty())
        .collect::<Vec<_>>()
        .join("\n")
}

fn parse_article_xml(text: &str, source_path: &str, options: ParseOptions) -> Result<Document, CorpusError> {
    let opts = ParsingOptions {
        allow_dtd: true,
        ..ParsingOptions::default()
    };
    let xml = roxmltree::Document::parse_with_options(text, opts)
        .map_err(|e| CorpusError::MalformedInput(format!("XML: {e}")))?;
    let root = xml.root_element();

    let id = article_id(root).map(Ok).unwrap_or_else(|| stem_id(source_path))?;

    let title = root
        .descendants()
        .find(|n| n.has_tag_name("article-title"))
        .or_else(|| root.descendants().find(|n| n.has_tag_name("title")))
        .map(|n| collapse_whitespace(&inline_text(n)))
        .unwrap_or_default();

    let abstracts: Vec<Node> = root.descendants().filter(|n| n.has_tag_name("abstract")).collect();
    let bodies: Vec<Node> = root.descendants().filter(|n| n.has_tag_name("body")).collect();

    let mut paragraphs = Vec::new();
    let containers: Vec<Node> = match options.sections {
        Sections::AbstractOnly => abstracts,
        Sections::Full if abstracts.is_empty() && bodies.is_empty() => vec![root],
        Sections::Full => abstracts.into_iter().chain(bodies).collect(),
    };
    for container in containers {
        collect_paragraphs(container, &mut paragraphs);
    }
    let body = join_paragraphs(paragraphs);

    if title.is_empty() && body.is_empty() {
        return Err(CorpusError::MalformedInput(
            "no title or paragraph elements".to_string(),
        ));
    }

    Ok(Document {
        id,
        title,
        body,
        license: license_from_xml(root),
        source_path: source_path.to_string(),
    })
}

/// Accession precedence: `pmc`/`pmcid`, then `pmid`, then any other `article-id`.
fn article_id(root: Node) -> Option<String> {
    let ids: Vec<(Option<&str>, String)> = root
        .descendants()
        .filter(|n| n.has_tag_name("article-id"))
        .map(|n| (n.attribute("pub-id-type"), collapse_whitespace(&inline_text(n))))
        .filter(|(_, v)| !v.is_empty())
        .collect();
    let rank = |kind: Option<&str>| match kind {
        Some("pmc") | Some("pmcid") => 0,
        Some("pmid") => 1,
        _ => 2,
    };
    ids.into_iter().min_by_key(|(kind, _)| rank(*kind)).map(|(_, v)| v)
}

fn is_dropped(node: Node) -> bool {
    node.is_element() && DROPPED.contains(&node.tag_name().name())
}

/// Every `<p>` under `node` becomes one paragraph; nested paragraphs are
/// emitted separately, after their parent.
fn collect_paragraphs(node: Node, out: &mut Vec<String>) {
    for child in node.children().filter(|c| c.is_element()) {
        if is_dropped(child) {
            continue;
        }
        if child.has_tag_name("p") {
            out.push(inline_text(child));
        }
        collect_paragraphs(child, out);
    }
}

/// Concatenated text under `node`, skipping dropped elements and nested paragraphs.
fn inline_text(node: Node) -> String {
    let mut s = String::new();
    append_text(node, &mut s);
    s
}

fn append_text(node: Node, out: &mut String) {
    for child in node.children() {
        if child.is_text() {
            out.push_str(child.text().unwrap_or_default());
        } else if child.is_element() {
            if is_dropped(child) || child.has_tag_name("p") {
                continue;
            }
            append_text(child, out);
        }
    }
}

fn license_from_xml(root: Node) -> LicenseTag {
    let mut evidence = Vec::new();
    for n in root.descendants().filter(|n| n.is_element()) {
        match n.tag_name().name() {
            "license" => {
                for attr in n.attributes() {
                    if matches!(attr.name(), "href" | "license-type") {
                        evidence.push(attr.value().to_string());
                    }
                }
                evidence.push(inline_text(n));
            }
            "license_ref" => evidence.push(inline_text(n)),
            _ => {}
        }
    }
    let tags: Vec<LicenseTag> = evidence
        .iter()
        .map(|e| LicenseTag::from_designator(e))
        .filter(|t| *t != LicenseTag::Unknown)
        .collect();
    // The most specific designator wins: a recognised license beats OTHER.
    tags.iter()
        .copied()
        .find(|t| *t != LicenseTag::Other)
        .or_else(|| tags.first().copied())
        .unwrap_or(LicenseTag::Unknown)
}

/// Why a file did not become a document.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SkipRecord {
    pub path: String,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq)]
pub enum CorpusEntry {
    Document(Document),
    Skipped(SkipRecord),
}

struct RawItem {
    path: String,
    bytes: Result<Vec<u8>, String>,
}

/// Lazily parsed corpus in lexicographic path order. Files are parsed in
/// parallel batches; the emitted order never depends on scheduling.
pub struct CorpusStream {
    files: std::vec::IntoIter<PathBuf>,
    root: PathBuf,
    options: ParseOptions,
    batch_size: usize,
    pending: std::collections::VecDeque<CorpusEntry>,
    seen_ids: HashSet<String>,
}

pub fn load_corpus(root: &Path, options: ParseOptions) -> Result<CorpusStream, CorpusError> {
    let io_err = |source| CorpusError::Io {
        path: root.to_path_buf(),
        source,
    };
    let meta = fs::metadata(root).map_err(io_err)?;
    if !meta.is_dir() {
        return Err(io_err(io::Error::new(
            io::ErrorKind::NotADirectory,
            "corpus root is not a directory",
        )));
    }
    fs::read_dir(root).map_err(io_err)?;
    let mut files: Vec<PathBuf> = WalkDir::new(root)
        .into_iter()
        .filter_map(|e| e.ok())
        .filter(|e| e.file_type().is_file())
        .map(|e| e.into_path())
        .collect();
    files.sort();
    Ok(CorpusStream {
        files: files.into_iter(),
        root: root.to_path_buf(),
        options,
        batch_size: 256,
        pending: Default::default(),
        seen_ids: HashSet::new(),
    })
}

fn is_archive(path: &str) -> bool {
    let lower = path.to_ascii_lowercase();
    lower.ends_with(".tar.gz") || lower.ends_with(".tgz")
}

fn read_archive(path: &Path, display: &str) -> Result<Vec<RawItem>, String> {
    let file = fs::File::open(path).map_err(|e| e.to_string())?;
    let mut archive = tar::Archive::new(flate2::read::GzDecoder::new(file));
    let mut items = Vec::new();
    for entry in archive.entries().map_err(|e| e.to_string())? {
        let mut entry = entry.map_err(|e| e.to_string())?;
        if !entry.header().entry_type().is_file() {
            continue;
        }
        let inner = entry.path().map_err(|e| e.to_string())?.to_string_lossy().into_owned();
        let mut buf = Vec::new();
        let bytes = entry.read_to_end(&mut buf).map(|_| buf).map_err(|e| e.to_string());
        items.push(RawItem {
            path: format!("{display}!/{inner}"),
            bytes,
        });
    }
    items.sort_by(|a, b| a.path.cmp(&b.path));
    Ok(items)
}

impl CorpusStream {
    fn display_path(&self, path: &Path) -> String {
        path.strip_prefix(&self.root)
            .unwrap_or(path)
            .to_string_lossy()
            .replace('\\', "/")
    }

    fn fill(&mut self) -> bool {
        let mut raw = Vec::new();
        while raw.len() < self.batch_size {
            let Some(path) = self.files.next() else { break };
            let display = self.display_path(&path);
            if is_archive(&display) {
                match read_archive(&path, &display) {
                    Ok(items) => raw.extend(items),
                    Err(e) => raw.push(RawItem {
                        path: display,
                        bytes: Err(format!("unreadable archive: {e}")),
                    }),
                }
            } else {
                let bytes = fs::read(&path).map_err(|e| format!("unreadable file: {e}"));
                raw.push(RawItem { path: display, bytes });
            }
        }
        if raw.is_empty() {
            return false;
        }
        let options = self.options;
        let parsed: Vec<CorpusEntry> = raw.into_par_iter().map(|item| parse_item(item, options)).collect();
        for entry in parsed {
            let entry = match entry {
                CorpusEntry::Document(doc) if !self.seen_ids.insert(doc.id.clone()) => {
                    CorpusEntry::Skipped(SkipRecord {
                        reason: format!("duplicate id {}", doc.id),
                        path: doc.source_path,
                    })
                }
                other => other,
            };
            if let CorpusEntry::Skipped(skip) = &entry {
                log::warn!("skipping {}: {}", skip.path, skip.reason);
            }
            self.pending.push_back(entry);
        }
        true
    }
}

fn parse_item(item: RawItem, options: ParseOptions) -> CorpusEntry {
    let skip = |reason: String| {
        CorpusEntry::Skipped(SkipRecord {
            path: item.path.clone(),
            reason,
        })
    };
    let bytes = match &item.bytes {
        Ok(b) => b,
        Err(e) => return skip(e.clone()),
    };
    let Some(hint) = FormatHint::from_path(&item.path) else {
        return skip("unsupported file type".to_string());
    };
    match parse_document(bytes, hint, &item.path, options) {
        Ok(doc) => CorpusEntry::Document(doc),
        Err(e) => skip(e.to_string()),
    }
}

impl Iterator for CorpusStream {
    type Item = CorpusEntry;

    fn next(&mut self) -> Option<CorpusEntry> {
        loop {
            if let Some(e) = self.pending.pop_front() {
                return Some(e);
            }
            if !self.fill() {
                return None;
            }
        }
    }
}

/// Drains a stream into its documents and skip records.
pub fn partition(stream: impl Iterator<Item = CorpusEntry>) -> (Vec<Document>, Vec<SkipRecord>) {
    let mut docs = Vec::new();
    let mut skips = Vec::new();
    for e in stream {
        match e {
            CorpusEntry::Document(d) => docs.push(d),
            CorpusEntry::Skipped(s) => skips.push(s),
        }
    }
    (docs, skips)
}
