//! The 200-document fixture corpus through every stage.

use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde_json::Value;
use tripletforge::corpus::{LicenseTag, ParseOptions, load_corpus, partition};
use tripletforge::license::{LicenseCache, LicenseResolver, filter_by_license};
use tripletforge::pipeline::{FunnelManifest, PipelineConfig, PipelineError, STAGES, run_pipeline};

fn fixture() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/pipeline200")
}

fn truth() -> Value {
    serde_json::from_str(&fs::read_to_string(fixture().join("ground_truth.json")).unwrap()).unwrap()
}

fn config(out: &Path) -> PipelineConfig {
    let text = fs::read_to_string(fixture().join("tripletforge.toml")).unwrap();
    let mut cfg = PipelineConfig::parse(&text, &fixture()).unwrap();
    cfg.output.dir = out.to_path_buf();
    cfg.validate().unwrap();
    cfg
}

#[test]
fn counts_match_ground_truth() {
    let dir = tempfile::tempdir().unwrap();
    let started = Instant::now();
    let m = run_pipeline(&config(dir.path())).unwrap();
    assert!(started.elapsed().as_secs() < 60);
    let truth = truth();
    assert_eq!(m.stages.iter().map(|s| s.stage.as_str()).collect::<Vec<_>>(), STAGES);
    for s in &m.stages {
        let t = &truth["stages"][&s.stage];
        let got = [s.articles_in, s.articles_out, s.triplets_in, s.triplets_out];
        let want =
            ["articles_in", "articles_out", "triplets_in", "triplets_out"].map(|k| t[k].as_u64().unwrap() as usize);
        assert_eq!(got, want, "stage {}", s.stage);
        assert_eq!(s.config_hash, m.config_hash);
    }
    assert!(m.is_monotone());

    let ranked: BTreeSet<String> = fs::read_to_string(dir.path().join("ranking.csv"))
        .unwrap()
        .lines()
        .skip(1)
        .map(|l| l.split(',').next().unwrap().to_string())
        .collect();
    let relevant: BTreeSet<String> = serde_json::from_value(truth["relevant_ids"].clone()).unwrap();
    assert_eq!(ranked, relevant);
}

#[test]
fn all_cc0_documents_found() {
    let stream = load_corpus(&fixture().join("corpus"), ParseOptions::default()).unwrap();
    let (docs, skips) = partition(stream);
    assert_eq!((docs.len(), skips.len()), (200, 0));
    let resolver = LicenseResolver::offline(LicenseCache::open(&fixture().join("license_cache.jsonl")).unwrap());
    let (kept, _) = filter_by_license(docs, &BTreeSet::from([LicenseTag::Cc0]), &resolver).unwrap();
    let got: BTreeSet<String> = kept.into_iter().map(|d| d.id).collect();
    let want: BTreeSet<String> = serde_json::from_value(truth()["cc0_ids"].clone()).unwrap();
    assert_eq!(got.len(), 30);
    assert_eq!(got, want);
}

#[test]
fn rerun_is_cached_and_artifacts_are_byte_identical() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let first = run_pipeline(&config(a.path())).unwrap();
    let other = run_pipeline(&config(b.path())).unwrap();
    for (x, y) in first.stages.iter().zip(&other.stages) {
        assert_eq!(x.artifacts, y.artifacts, "stage {}", x.stage);
    }
    let again = run_pipeline(&config(a.path())).unwrap();
    assert!(again.cached);
    assert!(again.stages.iter().all(|s| s.cached));
    assert_eq!(
        FunnelManifest::read(&a.path().join("funnel_manifest.json")).unwrap(),
        again
    );
}

#[test]
fn oversized_split_reports_split_stage() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = config(dir.path());
    cfg.split.train = 10_000;
    let err = run_pipeline(&cfg).unwrap_err();
    assert!(matches!(err, PipelineError::Stage { stage: "split", .. }), "{err}");
    assert!(err.to_string().contains("only 36 available"), "{err}");
    // earlier stages and their artifacts survive
    let m = FunnelManifest::read(&dir.path().join("funnel_manifest.json")).unwrap();
    assert_eq!(m.stages.len(), 6);
    assert!(dir.path().join("knowledge_base.jsonl").exists());
}

#[test]
fn cli_run_prints_the_funnel() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = fs::read_to_string(fixture().join("tripletforge.toml")).unwrap();
    let root = fixture();
    let cfg = cfg
        .replace("root = \"corpus\"", &format!("root = {:?}", root.join("corpus")))
        .replace(
            "cache = \"license_cache.jsonl\"",
            &format!("cache = {:?}", root.join("license_cache.jsonl")),
        )
        .replace(
            "lexicon = \"lexicon.json\"",
            &format!("lexicon = {:?}", root.join("lexicon.json")),
        );
    let path = dir.path().join("tf.toml");
    fs::write(&path, cfg).unwrap();
    let out = std::process::Command::new(env!("CARGO_BIN_EXE_tripletforge"))
        .args(["run", "--config"])
        .arg(&path)
        .env_remove("TF_NER_URL")
        .env_remove("TF_OPENIE_URL")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let stdout = String::from_utf8(out.stdout).unwrap();
    assert!(
        stdout.lines().any(|l| l.starts_with("dedup") && l.contains(" 36 ")),
        "{stdout}"
    );
    assert!(dir.path().join("out/train.csv").exists());

    fs::write(&path, "[corpus]\nroot = 1\n").unwrap();
    let out = std::process::Command::new(env!("CARGO_BIN_EXE_tripletforge"))
        .args(["run", "--config"])
        .arg(&path)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}
