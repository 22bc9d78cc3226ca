use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Duration;

use clap::{Args, Parser, Subcommand};

use tripletforge::corpus::{Document, LicenseTag, ParseOptions, Sections, load_corpus, partition};
use tripletforge::dataset::{
    SplitSpec, Splits, randomize_gold, randomize_gold_from_pool, read_split_csv, shuffle_and_split, write_split_csv,
    write_splits,
};
use tripletforge::extraction::{
    ExtractorBackend, NaiveBackend, RemoteOpenIe, extract_corpus, load_triplets, save_triplets,
};
use tripletforge::http::{HttpClient, join_url};
use tripletforge::license::{HttpRegistry, LicenseCache, LicenseResolver, filter_by_license};
use tripletforge::metrics::{EmbeddingProvider, HttpEmbedder, ToyEmbedder, evaluate_file, write_eval_report};
use tripletforge::mspt::{
    MsptOptions, PLOT_FILE, REPORT_FILE, TestKind, compare_reports, emit_distribution_plot, read_mspt_report,
    run_mspt_files, write_mspt_outputs,
};
use tripletforge::nerfilter::{
    EntityScorer, HttpEntityScorer, LexiconScorer, PhraseCache, ScoringOptions, StubScorer, filter_scored, save_scored,
    score_triplets,
};
use tripletforge::pipeline::{
    BackendKind, ENV_EMBED_URL, ENV_NER_URL, ENV_OPENIE_URL, FunnelManifest, PipelineConfig, PipelineError, ScorerKind,
    read_jsonl, run_pipeline, write_jsonl,
};
use tripletforge::relevance::{Cutoff, TermQuery, TfIdfScorer, build_vocabulary, rank_documents, write_ranking_csv};

/// Knowledge-triplet acquisition and evaluation harness.
#[derive(Parser)]
#[command(name = "tripletforge", version)]
struct Cli {
    /// Probe the configured model services (GET /health) before anything else.
    #[arg(long, global = true)]
    check_services: bool,
    /// More logging (-v info, -vv debug).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,
    #[command(subcommand)]
    command: Option<Cmd>,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run every stage from a TOML config, reusing unchanged stages.
    Run {
        #[arg(long)]
        config: PathBuf,
    },
    /// Parse a corpus directory (XML, txt, tar.gz) into documents JSONL.
    Ingest {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long, value_enum, default_value_t = Sections::Full)]
        sections: Sections,
        #[arg(long)]
        out: PathBuf,
        /// Where to write skip records (default: next to --out).
        #[arg(long)]
        skips: Option<PathBuf>,
    },
    /// Rank documents by TF-IDF similarity to the query terms.
    Relevance {
        #[arg(long)]
        docs: PathBuf,
        /// Query term; repeatable.
        #[arg(long = "term", required = true)]
        terms: Vec<String>,
        #[arg(long)]
        top_k: Option<usize>,
        #[arg(long)]
        min_score: Option<f64>,
        #[arg(long, default_value_t = 1)]
        min_df: u64,
        #[arg(long)]
        no_phrase_boost: bool,
        /// Ranking CSV.
        #[arg(long)]
        out: PathBuf,
        /// Selected documents as JSONL.
        #[arg(long)]
        keep: Option<PathBuf>,
    },
    /// Keep documents whose license is in the allowed set.
    License {
        #[arg(long)]
        docs: PathBuf,
        #[arg(long = "allowed", default_values_t = ["CC0".to_string()])]
        allowed: Vec<String>,
        #[arg(long)]
        cache: Option<PathBuf>,
        #[arg(long)]
        registry_url: Option<String>,
        /// Environment variable that holds the registry API key.
        #[arg(long)]
        api_key_env: Option<String>,
        #[arg(long, default_value_t = 4)]
        max_concurrency: usize,
        #[arg(long, default_value_t = 350)]
        politeness_delay_ms: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Extract triplets from documents.
    Extract {
        #[arg(long)]
        docs: PathBuf,
        #[arg(long, value_enum, default_value_t = BackendKind::Naive)]
        backend: BackendKind,
        #[arg(long, env = ENV_OPENIE_URL)]
        openie_url: Option<String>,
        #[arg(long, default_value_t = 0)]
        workers: usize,
        #[arg(long)]
        min_confidence: Option<f64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Score subject/object phrases and keep triplets above the threshold.
    NerFilter {
        #[arg(long)]
        triplets: PathBuf,
        #[arg(long, value_enum, default_value_t = ScorerKind::Http)]
        scorer: ScorerKind,
        #[arg(long, env = ENV_NER_URL)]
        url: Option<String>,
        #[arg(long)]
        lexicon: Option<PathBuf>,
        #[arg(long, default_value_t = 0.80)]
        threshold: f64,
        #[arg(long, default_value_t = 64)]
        batch_size: usize,
        #[arg(long, default_value_t = 2)]
        in_flight: usize,
        /// JSONL phrase-probability cache.
        #[arg(long)]
        cache: Option<PathBuf>,
        /// Every triplet with its two probabilities.
        #[arg(long)]
        scored_out: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Shuffle triplets and write train/test/validation CSVs.
    Split {
        #[arg(long)]
        triplets: PathBuf,
        #[command(flatten)]
        spec: SpecArgs,
        #[arg(long)]
        out_dir: PathBuf,
    },
    /// Build a randomized gold file by permuting objects.
    Randomize {
        #[arg(long)]
        gold: PathBuf,
        #[arg(long)]
        seed: u64,
        /// Draw objects from this CSV instead of the gold itself.
        #[arg(long)]
        pool: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// ROUGE-1/2/L and BERTScore of predicted objects against gold.
    Eval {
        #[arg(long)]
        pred: PathBuf,
        #[arg(long)]
        gold: PathBuf,
        #[command(flatten)]
        embed: EmbedArgs,
        #[arg(long, default_value = "eval_report.json")]
        out: PathBuf,
    },
    /// Actual-versus-randomized BERTScore comparison with a significance test.
    Mspt {
        #[arg(long)]
        pred: PathBuf,
        #[arg(long)]
        gold: PathBuf,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        #[arg(long, value_enum, default_value_t = TestKind::Welch)]
        test: TestKind,
        #[arg(long)]
        pool: Option<PathBuf>,
        #[command(flatten)]
        embed: EmbedArgs,
        /// Earlier report (e.g. before fine-tuning) to compare against.
        #[arg(long)]
        compare_with: Option<PathBuf>,
        /// Exit 3 unless p <= --alpha.
        #[arg(long)]
        assert_significant: bool,
        #[arg(long, default_value_t = 0.05)]
        alpha: f64,
        #[arg(long, default_value = ".")]
        out_dir: PathBuf,
    },
    /// Redraw the distribution plot from an mspt_scores.csv file.
    Plot {
        #[arg(long)]
        scores: PathBuf,
        #[arg(long, default_value = PLOT_FILE)]
        out: PathBuf,
    },
}

#[derive(Args)]
struct SpecArgs {
    #[arg(long, default_value_t = 10_000)]
    train: usize,
    #[arg(long, default_value_t = 1_000)]
    test: usize,
    #[arg(long, default_value_t = 200)]
    validation: usize,
    #[arg(long, default_value_t = 42)]
    seed: u64,
}

#[derive(Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
enum EmbedderKind {
    /// HTTP when a URL is known, toy otherwise.
    Auto,
    Http,
    Toy,
}

#[derive(Args)]
struct EmbedArgs {
    #[arg(long, value_enum, default_value_t = EmbedderKind::Auto)]
    embedder: EmbedderKind,
    #[arg(long, env = ENV_EMBED_URL)]
    embed_url: Option<String>,
}

enum CliError {
    Usage(String),
    Stage(String),
    NotSignificant(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Stage(_) => 1,
            CliError::NotSignificant(_) => 3,
        }
    }
}

fn stage<E: std::fmt::Display>(what: &str) -> impl FnOnce(E) -> CliError + '_ {
    move |e| CliError::Stage(format!("{what}: {e}"))
}

type Res = Result<(), CliError>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let (CliError::Usage(m) | CliError::Stage(m) | CliError::NotSignificant(m)) = &e;
            eprintln!("error: {m}");
            ExitCode::from(e.code())
        }
    }
}

fn dispatch(cli: Cli) -> Res {
    if cli.check_services {
        let config = match &cli.command {
            Some(Cmd::Run { config }) => Some(load_config(config)?),
            _ => None,
        };
        check_services(config.as_ref())?;
    }
    let Some(cmd) = cli.command else {
        if cli.check_services {
            return Ok(());
        }
        return Err(CliError::Usage("no subcommand given; see --help".into()));
    };
    match cmd {
        Cmd::Run { config } => run(&config),
        Cmd::Ingest {
            corpus,
            sections,
            out,
            skips,
        } => ingest(&corpus, sections, &out, skips),
        Cmd::Relevance {
            docs,
            terms,
            top_k,
            min_score,
            min_df,
            no_phrase_boost,
            out,
            keep,
        } => relevance(
            &docs,
            &terms,
            Cutoff { top_k, min_score },
            min_df,
            !no_phrase_boost,
            &out,
            keep.as_deref(),
        ),
        Cmd::License {
            docs,
            allowed,
            cache,
            registry_url,
            api_key_env,
            max_concurrency,
            politeness_delay_ms,
            out,
        } => {
            let tags = allowed
                .iter()
                .map(|a| LicenseTag::parse(a).ok_or_else(|| CliError::Usage(format!("unknown license tag {a:?}"))))
                .collect::<Result<BTreeSet<_>, _>>()?;
            let docs: Vec<Document> = read_jsonl(&docs).map_err(stage("reading documents"))?;
            let cache = match cache {
                Some(p) => LicenseCache::open(&p).map_err(stage("license cache"))?,
                None => LicenseCache::in_memory(),
            };
            let registry = registry_url
                .map(|u| HttpRegistry::new(u).with_api_key(api_key_env.and_then(|k| std::env::var(k).ok())));
            let mut resolver = match &registry {
                Some(r) => LicenseResolver::new(cache, Some(r)),
                None => LicenseResolver::offline(cache),
            };
            resolver.max_concurrency = max_concurrency.max(1);
            resolver.politeness_delay = Duration::from_millis(politeness_delay_ms);
            let (kept, funnel) = filter_by_license(docs, &tags, &resolver).map_err(stage("license"))?;
            write_jsonl(&out, &kept).map_err(stage("writing documents"))?;
            println!(
                "license: {} in, {} kept, {} looked up",
                funnel.input, funnel.kept, funnel.resolved_remotely
            );
            Ok(())
        }
        Cmd::Extract {
            docs,
            backend,
            openie_url,
            workers,
            min_confidence,
            out,
        } => {
            let backend: Box<dyn ExtractorBackend> = match (backend, openie_url) {
                (BackendKind::Naive, _) => Box::new(NaiveBackend),
                (BackendKind::Remote, Some(url)) => Box::new(RemoteOpenIe::new(url)),
                (BackendKind::Remote, None) => {
                    return Err(CliError::Usage(format!(
                        "--backend remote needs --openie-url or {ENV_OPENIE_URL}"
                    )));
                }
            };
            let docs: Vec<Document> = read_jsonl(&docs).map_err(stage("reading documents"))?;
            let ex = extract_corpus(&docs, backend.as_ref(), workers, min_confidence).map_err(stage("extract"))?;
            save_triplets(&ex.triplets, &out).map_err(stage("writing triplets"))?;
            println!(
                "extract: {} documents, {} sentences, {} triplets",
                docs.len(),
                ex.sentences,
                ex.triplets.len()
            );
            Ok(())
        }
        Cmd::NerFilter {
            triplets,
            scorer,
            url,
            lexicon,
            threshold,
            batch_size,
            in_flight,
            cache,
            scored_out,
            out,
        } => {
            if !(0.0..=1.0).contains(&threshold) {
                return Err(CliError::Usage("--threshold must be in [0, 1]".into()));
            }
            let scorer: Box<dyn EntityScorer> = match (scorer, url, lexicon) {
                (ScorerKind::Http, Some(u), _) => Box::new(HttpEntityScorer::new(u)),
                (ScorerKind::Http, None, _) => {
                    return Err(CliError::Usage(format!("--scorer http needs --url or {ENV_NER_URL}")));
                }
                (ScorerKind::Stub, ..) => Box::new(StubScorer),
                (ScorerKind::Lexicon, _, Some(p)) => Box::new(LexiconScorer::load(&p).map_err(stage("lexicon"))?),
                (ScorerKind::Lexicon, _, None) => {
                    return Err(CliError::Usage("--scorer lexicon needs --lexicon".into()));
                }
            };
            let ts = load_triplets(&triplets).map_err(stage("reading triplets"))?;
            let mut cache = match cache {
                Some(p) => PhraseCache::open(&p).map_err(stage("phrase cache"))?,
                None => PhraseCache::in_memory(),
            };
            let opts = ScoringOptions { batch_size, in_flight };
            let scored = score_triplets(&ts, scorer.as_ref(), &mut cache, opts).map_err(stage("ner-filter"))?;
            if let Some(p) = scored_out {
                save_scored(&scored, &p).map_err(stage("writing scores"))?;
            }
            let (kept, funnel) = filter_scored(&scored, threshold).map_err(stage("ner-filter"))?;
            save_triplets(&kept, &out).map_err(stage("writing triplets"))?;
            println!(
                "ner-filter: {} in, {} kept, {} rejected",
                funnel.input, funnel.kept, funnel.rejected
            );
            Ok(())
        }
        Cmd::Split {
            triplets,
            spec,
            out_dir,
        } => {
            let spec = SplitSpec {
                train: spec.train,
                test: spec.test,
                validation: spec.validation,
                seed: spec.seed,
            };
            let ts = load_triplets(&triplets).map_err(stage("reading triplets"))?;
            let records: Vec<_> = ts.iter().map(Into::into).collect();
            let splits: Splits<_> = shuffle_and_split(&records, &spec).map_err(stage("split"))?;
            fs::create_dir_all(&out_dir).map_err(stage("output directory"))?;
            let manifest = write_splits(&splits, &spec, records.len(), &out_dir).map_err(stage("split"))?;
            let json = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
            fs::write(out_dir.join("split_manifest.json"), json + "\n").map_err(stage("writing manifest"))?;
            println!(
                "split: {} available, {}/{}/{} written",
                records.len(),
                spec.train,
                spec.test,
                spec.validation
            );
            Ok(())
        }
        Cmd::Randomize { gold, seed, pool, out } => {
            let g = read_split_csv(&gold).map_err(stage("reading gold"))?;
            let r = match pool {
                Some(p) => {
                    let pool = read_split_csv(&p).map_err(stage("reading pool"))?;
                    randomize_gold_from_pool(&g, &pool, seed)
                }
                None => randomize_gold(&g, seed),
            }
            .map_err(stage("randomize"))?;
            write_split_csv(&r.records, &out).map_err(stage("writing randomized gold"))?;
            println!("randomize: {} rows, {} fixed points", r.records.len(), r.fixed_points);
            Ok(())
        }
        Cmd::Eval { pred, gold, embed, out } => {
            let embedder = embedder(&embed)?;
            let report = evaluate_file(&pred, &gold, embedder.as_ref()).map_err(stage("eval"))?;
            write_eval_report(&report, &out).map_err(stage("writing report"))?;
            let a = &report.aggregate;
            println!(
                "eval: {} rows; F1 rouge1 {:.4} rouge2 {:.4} rougeL {:.4} bertscore {:.4} ({})",
                report.rows, a.rouge1.f1, a.rouge2.f1, a.rouge_l.f1, a.bertscore.f1, report.embedder
            );
            Ok(())
        }
        Cmd::Mspt {
            pred,
            gold,
            seed,
            test,
            pool,
            embed,
            compare_with,
            assert_significant,
            alpha,
            out_dir,
        } => {
            if !(0.0..=1.0).contains(&alpha) {
                return Err(CliError::Usage("--alpha must be in [0, 1]".into()));
            }
            let embedder = embedder(&embed)?;
            let pool = match pool {
                Some(p) => Some(read_split_csv(&p).map_err(stage("reading pool"))?),
                None => None,
            };
            let opts = MsptOptions { seed, test, pool };
            let mut outcome = run_mspt_files(&pred, &gold, &opts, embedder.as_ref()).map_err(stage("mspt"))?;
            if let Some(p) = compare_with {
                let pre = read_mspt_report(&p).map_err(stage("reading earlier report"))?;
                outcome.report.comparison = Some(compare_reports(&pre, &outcome.report));
            }
            let report = write_mspt_outputs(&outcome, &out_dir).map_err(stage("writing mspt outputs"))?;
            println!(
                "mspt: n={} actual {:.4} random {:.4} gap {:.2}% p={:e} -> {}",
                report.n,
                report.mean_actual,
                report.mean_random,
                report.gap_pct,
                report.p_value,
                out_dir.join(REPORT_FILE).display()
            );
            if assert_significant && !(report.p_value <= alpha) {
                return Err(CliError::NotSignificant(format!(
                    "p = {} exceeds alpha = {alpha}",
                    report.p_value
                )));
            }
            Ok(())
        }
        Cmd::Plot { scores, out } => {
            let (actual, random) = read_scores(&scores)?;
            emit_distribution_plot(&actual, &random, &out).map_err(stage("plot"))
        }
    }
}

fn load_config(path: &Path) -> Result<PipelineConfig, CliError> {
    PipelineConfig::load(path).map_err(|e| CliError::Usage(e.to_string()))
}

fn run(config: &Path) -> Res {
    let cfg = load_config(config)?;
    let manifest = run_pipeline(&cfg).map_err(|e| match e {
        PipelineError::Config(m) => CliError::Usage(m),
        other => CliError::Stage(other.to_string()),
    })?;
    print_funnel(&manifest);
    Ok(())
}

fn print_funnel(m: &FunnelManifest) {
    println!(
        "{:<11} {:>9} {:>9} {:>10} {:>10} {:>8}",
        "stage", "art_in", "art_out", "trip_in", "trip_out", "time_s"
    );
    for s in &m.stages {
        println!(
            "{:<11} {:>9} {:>9} {:>10} {:>10} {:>8.2}{}",
            s.stage,
            s.articles_in,
            s.articles_out,
            s.triplets_in,
            s.triplets_out,
            s.wall_time_s,
            if s.cached { "  (cached)" } else { "" }
        );
    }
    println!("config {}", &m.config_hash[..12]);
}

fn ingest(corpus: &Path, sections: Sections, out: &Path, skips: Option<PathBuf>) -> Res {
    let stream = load_corpus(corpus, ParseOptions { sections }).map_err(stage("ingest"))?;
    let (docs, skipped) = partition(stream);
    write_jsonl(out, &docs).map_err(stage("writing documents"))?;
    let skips = skips.unwrap_or_else(|| out.with_file_name("skips.jsonl"));
    write_jsonl(&skips, &skipped).map_err(stage("writing skips"))?;
    println!("ingest: {} documents, {} skipped", docs.len(), skipped.len());
    Ok(())
}

fn relevance(
    docs: &Path,
    terms: &[String],
    cutoff: Cutoff,
    min_df: u64,
    phrase_boost: bool,
    out: &Path,
    keep: Option<&Path>,
) -> Res {
    let query = TermQuery::new(terms).map_err(|e| CliError::Usage(e.to_string()))?;
    if cutoff.top_k == Some(0) {
        return Err(CliError::Usage("--top-k must be at least 1".into()));
    }
    let docs: Vec<Document> = read_jsonl(docs).map_err(stage("reading documents"))?;
    let vocab = build_vocabulary(docs.iter(), min_df).map_err(stage("relevance"))?;
    let scorer = if phrase_boost {
        TfIdfScorer::new(&vocab)
    } else {
        TfIdfScorer::without_phrases(&vocab)
    };
    let ranking = rank_documents(&docs, &query, &scorer, cutoff).map_err(stage("relevance"))?;
    let file = fs::File::create(out).map_err(stage("writing ranking"))?;
    write_ranking_csv(&ranking, file).map_err(stage("writing ranking"))?;
    if let Some(keep) = keep {
        let ids: std::collections::HashSet<&str> = ranking.iter().map(|r| r.doc_id.as_str()).collect();
        let kept: Vec<&Document> = docs.iter().filter(|d| ids.contains(d.id.as_str())).collect();
        write_jsonl(keep, &kept).map_err(stage("writing documents"))?;
    }
    println!("relevance: {} of {} documents selected", ranking.len(), docs.len());
    Ok(())
}

fn embedder(args: &EmbedArgs) -> Result<Box<dyn EmbeddingProvider>, CliError> {
    match (args.embedder, &args.embed_url) {
        (EmbedderKind::Toy, _) => Ok(Box::new(ToyEmbedder::default())),
        (EmbedderKind::Http | EmbedderKind::Auto, Some(u)) => Ok(Box::new(HttpEmbedder::new(u.clone()))),
        (EmbedderKind::Http, None) => Err(CliError::Usage(format!(
            "--embedder http needs --embed-url or {ENV_EMBED_URL}"
        ))),
        (EmbedderKind::Auto, None) => {
            log::warn!("no embedding service configured; using the toy embedder");
            Ok(Box::new(ToyEmbedder::default()))
        }
    }
}

fn read_scores(path: &Path) -> Result<(Vec<f64>, Vec<f64>), CliError> {
    let mut rdr = csv::Reader::from_path(path).map_err(stage("reading scores"))?;
    let (mut a, mut r) = (Vec::new(), Vec::new());
    for row in rdr.records() {
        let row = row.map_err(stage("reading scores"))?;
        let num = |i: usize| {
            row.get(i)
                .and_then(|v| v.parse::<f64>().ok())
                .ok_or_else(|| CliError::Stage(format!("{}: bad row {:?}", path.display(), row)))
        };
        a.push(num(1)?);
        r.push(num(2)?);
    }
    Ok((a, r))
}

/// Sidecar URLs get GET /health with `"status": "ok"`; the OpenIE server
/// only has to answer its root URL.
fn check_services(config: Option<&PipelineConfig>) -> Res {
    let env = |k: &str| std::env::var(k).ok().filter(|v| !v.is_empty());
    let mut sidecars: BTreeSet<String> = [env(ENV_NER_URL), env(ENV_EMBED_URL)].into_iter().flatten().collect();
    let mut openie: BTreeSet<String> = env(ENV_OPENIE_URL).into_iter().collect();
    if let Some(cfg) = config {
        if cfg.ner.scorer == ScorerKind::Http {
            sidecars.extend(cfg.ner.url.clone());
        }
        if cfg.extraction.backend == BackendKind::Remote {
            openie.extend(cfg.extraction.openie_url.clone());
        }
    }
    if sidecars.is_empty() && openie.is_empty() {
        return Err(CliError::Usage(format!(
            "--check-services: no service URL configured (set {ENV_NER_URL}, {ENV_EMBED_URL} or {ENV_OPENIE_URL})"
        )));
    }
    let client = HttpClient::new(Duration::from_secs(10));
    let mut failures = Vec::new();
    for base in &sidecars {
        let url = join_url(base, "/health");
        match client.get(&url, &[]) {
            Ok(body) => {
                let status = serde_json::from_str::<serde_json::Value>(&body)
                    .ok()
                    .and_then(|v| v.get("status").and_then(|s| s.as_str()).map(str::to_string));
                if status.as_deref() == Some("ok") {
                    println!("ok    {url}  {}", body.trim());
                } else {
                    failures.push(format!("{url}: unexpected health body {}", body.trim()));
                }
            }
            Err(e) => failures.push(e.to_string()),
        }
    }
    for base in &openie {
        match client.get(base, &[]) {
            Ok(_) => println!("ok    {base}"),
            Err(e) => failures.push(e.to_string()),
        }
    }
    if failures.is_empty() {
        Ok(())
    } else {
        for f in &failures {
            println!("FAIL  {f}");
        }
        Err(CliError::Stage(format!("{} service check(s) failed", failures.len())))
    }
}
