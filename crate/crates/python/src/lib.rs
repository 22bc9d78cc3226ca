//! Python bindings: records, splits, scoring and the full pipeline.
//!
//! Structured results (manifests, reports) cross the boundary as JSON strings;
//! the small numeric ones come back as tuples.

use std::path::PathBuf;

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use tripletforge::dataset::{self, SplitSpec};
use tripletforge::metrics::{self, EmbeddingProvider, ToyEmbedder, tokenize_for_rouge};
use tripletforge::mspt::{self, MsptOptions, TestKind};
use tripletforge::nerfilter::StubScorer;
use tripletforge::pipeline::{self, PipelineConfig};

type Triple = (f64, f64, f64);

fn value_err(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn runtime_err(e: impl std::fmt::Display) -> PyErr {
    PyRuntimeError::new_err(e.to_string())
}

/// One `subject, relation, object` row.
#[pyclass(frozen, get_all, eq, from_py_object)]
#[derive(Clone, PartialEq)]
pub struct Record {
    subject: String,
    relation: String,
    object: String,
}

#[pymethods]
impl Record {
    #[new]
    fn new(subject: String, relation: String, object: String) -> Self {
        Self {
            subject,
            relation,
            object,
        }
    }

    fn __repr__(&self) -> String {
        format!("Record({:?}, {:?}, {:?})", self.subject, self.relation, self.object)
    }
}

impl From<&Record> for dataset::Record {
    fn from(r: &Record) -> Self {
        dataset::Record::new(&r.subject, &r.relation, &r.object)
    }
}

impl From<dataset::Record> for Record {
    fn from(r: dataset::Record) -> Self {
        Self {
            subject: r.subject,
            relation: r.relation,
            object: r.object,
        }
    }
}

fn to_core(records: &[Record]) -> Vec<dataset::Record> {
    records.iter().map(Into::into).collect()
}

fn from_core(records: Vec<dataset::Record>) -> Vec<Record> {
    records.into_iter().map(Into::into).collect()
}

/// Shuffled train/test/validation split.
#[pyfunction]
#[pyo3(signature = (records, train=10_000, test=1_000, validation=200, seed=42))]
fn split(
    records: Vec<Record>,
    train: usize,
    test: usize,
    validation: usize,
    seed: u64,
) -> PyResult<(Vec<Record>, Vec<Record>, Vec<Record>)> {
    let spec = SplitSpec {
        train,
        test,
        validation,
        seed,
    };
    let s = dataset::shuffle_and_split(&to_core(&records), &spec).map_err(value_err)?;
    Ok((from_core(s.train), from_core(s.test), from_core(s.validation)))
}

/// SHA-256 of the CSV serialization.
#[pyfunction]
fn split_hash(records: Vec<Record>) -> String {
    dataset::split_hash(&to_core(&records))
}

#[pyfunction]
fn read_split_csv(path: PathBuf) -> PyResult<Vec<Record>> {
    dataset::read_split_csv(&path).map(from_core).map_err(value_err)
}

#[pyfunction]
fn write_split_csv(records: Vec<Record>, path: PathBuf) -> PyResult<()> {
    dataset::write_split_csv(&to_core(&records), &path).map_err(runtime_err)
}

/// Object-permuted gold: (records, permutation, fixed_points).
#[pyfunction]
fn randomize_gold(records: Vec<Record>, seed: u64) -> PyResult<(Vec<Record>, Vec<usize>, usize)> {
    let r = dataset::randomize_gold(&to_core(&records), seed).map_err(value_err)?;
    Ok((from_core(r.records), r.permutation, r.fixed_points))
}

#[pyfunction]
fn stub_probability(phrase: &str) -> f64 {
    StubScorer::probability(phrase)
}

#[pyfunction]
fn tokenize(text: &str) -> Vec<String> {
    tokenize_for_rouge(text)
}

fn triple(s: metrics::ScorePair) -> Triple {
    (s.precision, s.recall, s.f1)
}

/// (rouge1, rouge2, rougeL) as (precision, recall, f1) triples.
#[pyfunction]
fn rouge(candidate: &str, reference: &str) -> (Triple, Triple, Triple) {
    let (c, r) = (tokenize_for_rouge(candidate), tokenize_for_rouge(reference));
    (
        triple(metrics::rouge_n(&c, &r, 1)),
        triple(metrics::rouge_n(&c, &r, 2)),
        triple(metrics::rouge_l(&c, &r)),
    )
}

/// BERTScore with the deterministic toy embedder.
#[pyfunction]
#[pyo3(signature = (candidate, reference, dim=64))]
fn bertscore_toy(candidate: &str, reference: &str, dim: usize) -> PyResult<Triple> {
    let e = ToyEmbedder { dim };
    let v = e
        .embed(&[candidate.to_string(), reference.to_string()])
        .map_err(value_err)?;
    metrics::bertscore_or_zero(&v[0], &v[1]).map(triple).map_err(value_err)
}

/// (t, dof, two-sided p).
#[pyfunction]
fn welch_t_test(a: Vec<f64>, b: Vec<f64>) -> PyResult<Triple> {
    let r = mspt::welch_t_test(&a, &b).map_err(value_err)?;
    Ok((r.t_stat, r.dof, r.p_value))
}

/// Scores two split files with the toy embedder; returns the report as JSON.
#[pyfunction]
fn evaluate(pred: PathBuf, gold: PathBuf) -> PyResult<String> {
    let report = metrics::evaluate_file(&pred, &gold, &ToyEmbedder::default()).map_err(value_err)?;
    serde_json::to_string(&report).map_err(runtime_err)
}

/// Toy-embedder MSPT. Writes scores, plot and report into `out_dir` when
/// given; returns the report as JSON.
#[pyfunction]
#[pyo3(signature = (pred, gold, seed=42, out_dir=None))]
fn run_mspt(pred: PathBuf, gold: PathBuf, seed: u64, out_dir: Option<PathBuf>) -> PyResult<String> {
    let options = MsptOptions {
        seed,
        test: TestKind::Welch,
        pool: None,
    };
    let outcome = mspt::run_mspt_files(&pred, &gold, &options, &ToyEmbedder::default()).map_err(value_err)?;
    let report = match out_dir {
        Some(dir) => mspt::write_mspt_outputs(&outcome, &dir).map_err(runtime_err)?,
        None => outcome.report,
    };
    serde_json::to_string(&report).map_err(runtime_err)
}

/// Runs every stage from a TOML config; returns the funnel manifest as JSON.
#[pyfunction]
fn run_pipeline(config: PathBuf) -> PyResult<String> {
    let cfg = PipelineConfig::load(&config).map_err(value_err)?;
    let manifest = pipeline::run_pipeline(&cfg).map_err(runtime_err)?;
    serde_json::to_string(&manifest).map_err(runtime_err)
}

#[pymodule]
#[pyo3(name = "tripletforge")]
fn tripletforge_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Record>()?;
    m.add_function(wrap_pyfunction!(split, m)?)?;
    m.add_function(wrap_pyfunction!(split_hash, m)?)?;
    m.add_function(wrap_pyfunction!(read_split_csv, m)?)?;
    m.add_function(wrap_pyfunction!(write_split_csv, m)?)?;
    m.add_function(wrap_pyfunction!(randomize_gold, m)?)?;
    m.add_function(wrap_pyfunction!(stub_probability, m)?)?;
    m.add_function(wrap_pyfunction!(tokenize, m)?)?;
    m.add_function(wrap_pyfunction!(rouge, m)?)?;
    m.add_function(wrap_pyfunction!(bertscore_toy, m)?)?;
    m.add_function(wrap_pyfunction!(welch_t_test, m)?)?;
    m.add_function(wrap_pyfunction!(evaluate, m)?)?;
    m.add_function(wrap_pyfunction!(run_mspt, m)?)?;
    m.add_function(wrap_pyfunction!(run_pipeline, m)?)?;
    Ok(())
}
