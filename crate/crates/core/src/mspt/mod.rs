//! Meaning-based selectional preference test: per-row BERTScore F1 against
//! the true gold versus against a randomized gold, compared with a
//! significance test, plus the density plot of both distributions.

mod density;
mod plot;
mod special;
mod stats;

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::{DatasetError, Record, randomize_gold, randomize_gold_from_pool, read_split_csv};
use crate::metrics::{CachedEmbedder, EmbeddingProvider, MetricsError, bertscore_rows, check_alignment};

pub use density::{BANDWIDTH_FLOOR, Bin, histogram, kde_curve, silverman_bandwidth, trapezoid};
pub use plot::{ACTUAL_COLOR, BASELINE_COLOR, emit_distribution_plot, render_distribution_svg};
pub use special::{beta_inc, gamma_p, gamma_q, ln_beta, ln_gamma, normal_two_sided, student_t_two_sided};
pub use stats::{TestResult, mann_whitney_u, mean, variance, welch_t_test};

#[derive(Debug, Error)]
pub enum MsptError {
    #[error("need at least {needed} samples, got {got}")]
    TooFewSamples { needed: usize, got: usize },
    #[error("need at least 2 curve points, got {0}")]
    TooFewPoints(usize),
    #[error("histogram needs at least one bin")]
    ZeroBins,
    #[error("samples contain NaN or infinity")]
    NonFinite,
    #[error("both samples have zero variance (means {mean_a} and {mean_b}); conventional p = {p_value}")]
    DegenerateSamples { mean_a: f64, mean_b: f64, p_value: f64 },
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error(transparent)]
    Dataset(#[from] DatasetError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum TestKind {
    #[default]
    Welch,
    MannWhitney,
}

impl TestKind {
    pub fn run(self, a: &[f64], b: &[f64]) -> Result<TestResult, MsptError> {
        match self {
            TestKind::Welch => welch_t_test(a, b),
            TestKind::MannWhitney => mann_whitney_u(a, b),
        }
    }
}

/// Pre- versus post-fine-tuning deltas. `p_value_difference` is the plain
/// arithmetic pre − post and carries no inferential meaning.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MsptComparison {
    pub p_value_pre: f64,
    pub p_value_post: f64,
    pub p_value_difference: f64,
    pub gap_pct_pre: f64,
    pub gap_pct_post: f64,
    pub gap_increase_pct: f64,
}

pub fn compare_reports(pre: &MsptReport, post: &MsptReport) -> MsptComparison {
    MsptComparison {
        p_value_pre: pre.p_value,
        p_value_post: post.p_value,
        p_value_difference: pre.p_value - post.p_value,
        gap_pct_pre: pre.gap_pct,
        gap_pct_post: post.gap_pct,
        gap_increase_pct: post.gap_pct - pre.gap_pct,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MsptReport {
    pub n: usize,
    pub mean_actual: f64,
    pub mean_random: f64,
    /// (mean_actual − mean_random) × 100.
    pub gap_pct: f64,
    /// None when both samples are constant; `p_value` then holds the convention.
    pub t_stat: Option<f64>,
    pub dof: Option<f64>,
    pub p_value: f64,
    pub degenerate: bool,
    pub seed: u64,
    pub test: TestKind,
    pub embedder: String,
    pub randomized_from_pool: bool,
    pub fixed_points: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scores_file: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub plot_file: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub comparison: Option<MsptComparison>,
}

impl MsptReport {
    /// Builds the report from the two per-row F1 arrays.
    pub fn from_scores(actual: &[f64], random: &[f64], test: TestKind) -> Result<Self, MsptError> {
        let (mean_actual, mean_random) = (mean(actual), mean(random));
        let (t_stat, dof, p_value, degenerate) = match test.run(actual, random) {
            Ok(r) => (
                Some(r.t_stat),
                (test == TestKind::Welch).then_some(r.dof),
                r.p_value,
                false,
            ),
            Err(MsptError::DegenerateSamples { p_value, .. }) => (None, None, p_value, true),
            Err(e) => return Err(e),
        };
        Ok(Self {
            n: actual.len(),
            mean_actual,
            mean_random,
            gap_pct: (mean_actual - mean_random) * 100.0,
            t_stat,
            dof,
            p_value,
            degenerate,
            seed: 0,
            test,
            embedder: String::new(),
            randomized_from_pool: false,
            fixed_points: 0,
            scores_file: None,
            plot_file: None,
            comparison: None,
        })
    }
}

#[derive(Debug, Clone, Default)]
pub struct MsptOptions {
    pub seed: u64,
    pub test: TestKind,
    /// Draw randomized objects from this pool instead of permuting the gold.
    pub pool: Option<Vec<Record>>,
}

#[derive(Debug, Clone)]
pub struct MsptOutcome {
    pub report: MsptReport,
    pub actual: Vec<f64>,
    pub random: Vec<f64>,
    pub randomized_gold: Vec<Record>,
}

/// Per-row BERTScore F1 of the predictions against the gold and against the
/// randomized gold; each distinct text is embedded once.
pub fn run_mspt(
    predictions: &[Record],
    gold: &[Record],
    options: &MsptOptions,
    embedder: &dyn EmbeddingProvider,
) -> Result<MsptOutcome, MsptError> {
    if gold.len() < 2 {
        return Err(MsptError::TooFewSamples {
            needed: 2,
            got: gold.len(),
        });
    }
    check_alignment(predictions, gold)?;
    let randomized = match &options.pool {
        Some(pool) => randomize_gold_from_pool(gold, pool, options.seed)?,
        None => randomize_gold(gold, options.seed)?,
    };
    let cached = CachedEmbedder::new(embedder);
    let f1 = |rows: Vec<crate::metrics::ScorePair>| rows.into_iter().map(|s| s.f1).collect::<Vec<_>>();
    let actual = f1(bertscore_rows(predictions, gold, &cached)?);
    let random = f1(bertscore_rows(predictions, &randomized.records, &cached)?);
    let mut report = MsptReport::from_scores(&actual, &random, options.test)?;
    report.seed = options.seed;
    report.embedder = embedder.name();
    report.randomized_from_pool = options.pool.is_some();
    report.fixed_points = randomized.fixed_points;
    Ok(MsptOutcome {
        report,
        actual,
        random,
        randomized_gold: randomized.records,
    })
}

pub fn run_mspt_files(
    predictions: &Path,
    gold: &Path,
    options: &MsptOptions,
    embedder: &dyn EmbeddingProvider,
) -> Result<MsptOutcome, MsptError> {
    run_mspt(&read_split_csv(predictions)?, &read_split_csv(gold)?, options, embedder)
}

pub const REPORT_FILE: &str = "mspt_report.json";
pub const SCORES_FILE: &str = "mspt_scores.csv";
pub const PLOT_FILE: &str = "mspt_plot.svg";

/// Writes the per-row scores, the plot and the report into `dir`; returns
/// the report as written.
pub fn write_mspt_outputs(outcome: &MsptOutcome, dir: &Path) -> Result<MsptReport, MsptError> {
    fs::create_dir_all(dir)?;
    let mut scores = String::from("row,actual_f1,random_f1\n");
    for (i, (a, r)) in outcome.actual.iter().zip(&outcome.random).enumerate() {
        scores.push_str(&format!("{},{a},{r}\n", i + 1));
    }
    fs::write(dir.join(SCORES_FILE), scores)?;
    emit_distribution_plot(&outcome.actual, &outcome.random, &dir.join(PLOT_FILE))?;
    let mut report = outcome.report.clone();
    report.scores_file = Some(SCORES_FILE.to_string());
    report.plot_file = Some(PLOT_FILE.to_string());
    let json = serde_json::to_string_pretty(&report).map_err(std::io::Error::other)?;
    fs::write(dir.join(REPORT_FILE), json + "\n")?;
    Ok(report)
}

pub fn read_mspt_report(path: &Path) -> Result<MsptReport, MsptError> {
    let text = fs::read_to_string(path)?;
    serde_json::from_str(&text).map_err(|e| MsptError::Io(std::io::Error::other(e)))
}
