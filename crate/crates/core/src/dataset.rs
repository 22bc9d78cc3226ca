//! Train/test/validation splits, their CSV form, and the randomized gold
//! used as the MSPT baseline.

use std::fs::File;
use std::io::{self, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::extraction::Triplet;
use crate::rng::SplitMix64;

pub const CSV_HEADER: [&str; 3] = ["subject", "relation", "object"];

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("need {needed} records, only {available} available")]
    InsufficientRecords { needed: usize, available: usize },
    #[error("randomized gold needs at least 2 records, got {0}")]
    TooFewRecords(usize),
    #[error("{path}: {message}")]
    Csv { path: String, message: String },
    #[error(transparent)]
    Io(#[from] io::Error),
}

/// One row of a split file.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Record {
    pub subject: String,
    pub relation: String,
    pub object: String,
}

impl Record {
    pub fn new(subject: impl Into<String>, relation: impl Into<String>, object: impl Into<String>) -> Self {
        Self {
            subject: subject.into(),
            relation: relation.into(),
            object: object.into(),
        }
    }
}

impl From<&Triplet> for Record {
    fn from(t: &Triplet) -> Self {
        Record::new(t.subject.clone(), t.relation.clone(), t.object.clone())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SplitSpec {
    pub train: usize,
    pub test: usize,
    pub validation: usize,
    pub seed: u64,
}

impl SplitSpec {
    pub fn total(&self) -> usize {
        self.train + self.test + self.validation
    }
}

impl Default for SplitSpec {
    fn default() -> Self {
        Self {
            train: 10_000,
            test: 1_000,
            validation: 200,
            seed: 42,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Splits<T> {
    pub train: Vec<T>,
    pub test: Vec<T>,
    pub validation: Vec<T>,
}

/// Shuffles a copy of `records` with SplitMix64(`spec.seed`) and cuts it
/// into consecutive train, test and validation slices. Records beyond the
/// requested total are dropped.
pub fn shuffle_and_split<T: Clone>(records: &[T], spec: &SplitSpec) -> Result<Splits<T>, DatasetError> {
    if records.len() < spec.total() {
        return Err(DatasetError::InsufficientRecords {
            needed: spec.total(),
            available: records.len(),
        });
    }
    let mut shuffled = records.to_vec();
    SplitMix64::new(spec.seed).shuffle(&mut shuffled);
    let mut rest = shuffled.into_iter();
    let train = rest.by_ref().take(spec.train).collect();
    let test = rest.by_ref().take(spec.test).collect();
    let validation = rest.take(spec.validation).collect();
    Ok(Splits {
        train,
        test,
        validation,
    })
}

/// Serializes records with the `subject,relation,object` header, quoting only
/// where RFC 4180 requires it, LF line endings.
pub fn write_split<W: Write>(records: &[Record], out: W) -> Result<(), DatasetError> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .quote_style(csv::QuoteStyle::Necessary)
        .from_writer(out);
    let to_io = |e: csv::Error| DatasetError::Io(io::Error::other(e));
    w.write_record(CSV_HEADER).map_err(to_io)?;
    for r in records {
        w.write_record([&r.subject, &r.relation, &r.object]).map_err(to_io)?;
    }
    w.flush()?;
    Ok(())
}

pub fn split_csv_bytes(records: &[Record]) -> Vec<u8> {
    let mut buf = Vec::new();
    write_split(records, &mut buf).expect("writing to memory cannot fail");
    buf
}

pub fn write_split_csv(records: &[Record], path: &Path) -> Result<(), DatasetError> {
    let file = File::create(path)?;
    write_split(records, io::BufWriter::new(file))
}

pub fn parse_split(input: impl Read, origin: &str) -> Result<Vec<Record>, DatasetError> {
    let err = |message: String| DatasetError::Csv {
        path: origin.to_string(),
        message,
    };
    let mut r = csv::ReaderBuilder::new().has_headers(true).from_reader(input);
    let header = r.headers().map_err(|e| err(e.to_string()))?;
    if header.iter().collect::<Vec<_>>() != CSV_HEADER {
        return Err(err(format!("expected header {}", CSV_HEADER.join(","))));
    }
    let mut out = Vec::new();
    for row in r.records() {
        let row = row.map_err(|e| err(e.to_string()))?;
        out.push(Record::new(&row[0], &row[1], &row[2]));
    }
    Ok(out)
}

pub fn read_split_csv(path: &Path) -> Result<Vec<Record>, DatasetError> {
    let file = File::open(path)?;
    parse_split(io::BufReader::new(file), &path.display().to_string())
}

/// SHA-256 (hex) of the CSV serialization; the identity of a split.
pub fn split_hash(records: &[Record]) -> String {
    hex::encode(Sha256::digest(split_csv_bytes(records)))
}

#[derive(Debug, Clone, PartialEq)]
pub struct RandomizedGold {
    pub records: Vec<Record>,
    /// Row `i` takes its object from source row `permutation[i]`.
    pub permutation: Vec<usize>,
    pub fixed_points: usize,
}

/// Permutes the object column with a uniform permutation from
/// SplitMix64(`seed`). Fixed points are allowed and counted.
pub fn randomize_gold(records: &[Record], seed: u64) -> Result<RandomizedGold, DatasetError> {
    if records.len() < 2 {
        return Err(DatasetError::TooFewRecords(records.len()));
    }
    let permutation = SplitMix64::new(seed).permutation(records.len());
    let randomized = records
        .iter()
        .zip(&permutation)
        .map(|(r, &src)| Record {
            object: records[src].object.clone(),
            ..r.clone()
        })
        .collect();
    let fixed_points = permutation.iter().enumerate().filter(|(i, p)| i == *p).count();
    Ok(RandomizedGold {
        records: randomized,
        permutation,
        fixed_points,
    })
}

/// Pool variant: the replacement objects are the first `records.len()`
/// objects of `pool` after a seeded shuffle. `permutation` indexes `pool`.
pub fn randomize_gold_from_pool(
    records: &[Record],
    pool: &[Record],
    seed: u64,
) -> Result<RandomizedGold, DatasetError> {
    if records.len() < 2 {
        return Err(DatasetError::TooFewRecords(records.len()));
    }
    if pool.len() < records.len() {
        return Err(DatasetError::InsufficientRecords {
            needed: records.len(),
            available: pool.len(),
        });
    }
    let mut permutation = SplitMix64::new(seed).permutation(pool.len());
    permutation.truncate(records.len());
    let randomized: Vec<Record> = records
        .iter()
        .zip(&permutation)
        .map(|(r, &src)| Record {
            object: pool[src].object.clone(),
            ..r.clone()
        })
        .collect();
    let fixed_points = records
        .iter()
        .zip(&randomized)
        .filter(|(a, b)| a.object == b.object)
        .count();
    Ok(RandomizedGold {
        records: randomized,
        permutation,
        fixed_points,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitFileInfo {
    pub path: String,
    pub rows: usize,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RandomizationInfo {
    pub seed: u64,
    pub rows: usize,
    pub fixed_points: usize,
    pub from_pool: bool,
}

/// Run manifest written next to the split files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitManifest {
    pub seed: u64,
    pub available: usize,
    pub train: SplitFileInfo,
    pub test: SplitFileInfo,
    pub validation: SplitFileInfo,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub randomized_gold: Option<RandomizationInfo>,
}

/// Writes `train.csv`, `test.csv` and `validation.csv` into `dir` and
/// returns the manifest describing them (not yet written).
pub fn write_splits(
    splits: &Splits<Record>,
    spec: &SplitSpec,
    available: usize,
    dir: &Path,
) -> Result<SplitManifest, DatasetError> {
    std::fs::create_dir_all(dir)?;
    let info = |name: &str, rows: &[Record]| -> Result<SplitFileInfo, DatasetError> {
        let bytes = split_csv_bytes(rows);
        std::fs::write(dir.join(name), &bytes)?;
        Ok(SplitFileInfo {
            path: name.to_string(),
            rows: rows.len(),
            sha256: hex::encode(Sha256::digest(&bytes)),
        })
    };
    Ok(SplitManifest {
        seed: spec.seed,
        available,
        train: info("train.csv", &splits.train)?,
        test: info("test.csv", &splits.test)?,
        validation: info("validation.csv", &splits.validation)?,
        randomized_gold: None,
    })
}
