use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use suprahmm::corpus::{CorpusManifest, RecordKind, UtteranceRecord};
use suprahmm::features::{read_features, write_wav};
use suprahmm::store::bank_digest;

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_suprahmm")).args(args).output().expect("binary runs")
}

fn ok(args: &[&str]) -> String {
    let out = run(args);
    assert!(out.status.success(), "{args:?} failed: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// A small corpus that trains in a few seconds.
fn small_corpus(dir: &Path) {
    ok(&[
        "synth", "--out", s(dir), "--conditions", "3", "--speakers", "4", "--texts", "6", "--train-speakers", "2",
        "--train-texts", "3", "--min-frames", "30", "--max-frames", "40", "--dim", "8",
    ]);
}

fn train_small(corpus: &Path, bank: &Path, system: &str, seed: &str) -> String {
    ok(&[
        "train", "--corpus", s(corpus), "--split", s(&corpus.join("split.tsv")), "--bank", s(bank), "--system", system,
        "--mixtures", "2", "--supra-mixtures", "1", "--iters", "5", "--seed", seed,
    ])
}

#[test]
fn synth_train_evaluate() {
    let tmp = tempfile::tempdir().unwrap();
    let corpus = tmp.path().join("corpus");
    small_corpus(&corpus);
    let bank = tmp.path().join("bank");
    let base = tmp.path().join("base");
    train_small(&corpus, &bank, "csphmm2", "3");
    train_small(&corpus, &base, "hmm", "3");

    let docs: Vec<_> = fs::read_dir(&bank).unwrap().map(|e| e.unwrap().file_name()).collect();
    assert_eq!(docs.len(), 4, "three condition documents plus the manifest");

    let report = tmp.path().join("report");
    ok(&[
        "evaluate", "--corpus", s(&corpus), "--split", s(&corpus.join("split.tsv")), "--bank", s(&bank), "--out",
        s(&report), "--compare-bank", s(&base), "--alpha-sweep", "--baseline", "vq", "--codebook-size", "4",
    ]);

    let confusion = fs::read_to_string(report.join("confusion.csv")).unwrap();
    let rows: Vec<Vec<&str>> = confusion.lines().skip(1).map(|l| l.split(',').collect()).collect();
    assert_eq!(rows.len(), 3);
    for col in 1..=3 {
        let sum: f64 = rows.iter().map(|r| r[col].parse::<f64>().unwrap()).sum();
        assert!((sum - 100.0).abs() < 0.15, "column {col} sums to {sum}");
    }

    let perf = fs::read_to_string(report.join("performance.csv")).unwrap();
    assert!(perf.starts_with("condition,performance\n"));
    assert!(perf.lines().last().unwrap().starts_with("average,"));

    let sweep = fs::read_to_string(report.join("alpha_sweep.csv")).unwrap();
    assert_eq!(sweep.lines().count(), 12, "header plus 11 weights");
    assert!(sweep.lines().nth(1).unwrap().starts_with("0.0,"));
    assert!(sweep.lines().last().unwrap().starts_with("1.0,"));

    let ttest = fs::read_to_string(report.join("ttest.csv")).unwrap();
    assert!(ttest.lines().nth(1).unwrap().starts_with("csphmm2,hmm,"));

    let comparison = fs::read_to_string(report.join("comparison.csv")).unwrap();
    let names: Vec<&str> = comparison.lines().skip(1).map(|l| l.split(',').next().unwrap()).collect();
    assert_eq!(names, ["csphmm2", "hmm", "VQ"]);

    let predictions = fs::read_to_string(report.join("predictions.csv")).unwrap();
    assert_eq!(predictions.lines().count(), 1 + 3 * 2 * 3 * 2);

    let text = fs::read_to_string(report.join("report.txt")).unwrap();
    assert!(text.starts_with("suprahmm-report v1\n"));
    for section in ["[confusion]", "[performance]", "[ttest]", "[alpha_sweep]", "[comparison]"] {
        assert!(text.contains(section), "report lacks {section}");
    }
}

#[test]
fn fixed_seed_reproduces_bank_hash() {
    let tmp = tempfile::tempdir().unwrap();
    let corpus = tmp.path().join("corpus");
    small_corpus(&corpus);
    let a = tmp.path().join("a");
    let b = tmp.path().join("b");
    let c = tmp.path().join("c");
    train_small(&corpus, &a, "csphmm2", "11");
    train_small(&corpus, &b, "csphmm2", "11");
    train_small(&corpus, &c, "csphmm2", "12");
    assert_eq!(bank_digest(&a).unwrap(), bank_digest(&b).unwrap());
    assert_ne!(bank_digest(&a).unwrap(), bank_digest(&c).unwrap());
}

#[test]
fn plain_hmm_bank_has_no_suprasegmental_layer() {
    let tmp = tempfile::tempdir().unwrap();
    let corpus = tmp.path().join("corpus");
    small_corpus(&corpus);
    let bank = tmp.path().join("bank");
    ok(&[
        "train", "--corpus", s(&corpus), "--split", s(&corpus.join("split.tsv")), "--bank", s(&bank), "--order", "1",
        "--shape", "linear", "--supra-states", "0", "--alpha", "0", "--mixtures", "2", "--iters", "3",
    ]);
    let doc: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(bank.join("00-c0.json")).unwrap()).unwrap();
    let model = &doc["model"]["condition"];
    assert!(model["suprasegmental"].is_null());
    let manifest: serde_json::Value = serde_json::from_str(&fs::read_to_string(bank.join("bank.json")).unwrap()).unwrap();
    assert_eq!(manifest["alpha"], 0.0);
}

fn tone(n: usize, freq: f64, rate: u32) -> Vec<i16> {
    (0..n)
        .map(|i| {
            let t = i as f64 / rate as f64;
            let v = (2.0 * std::f64::consts::PI * freq * t).sin() + 0.3 * (2.0 * std::f64::consts::PI * 3.1 * freq * t).sin();
            (v * 8000.0) as i16
        })
        .collect()
}

fn wav_corpus(dir: &Path, corrupt: bool) {
    fs::create_dir_all(dir.join("audio")).unwrap();
    let conditions = ["neutral", "angry", "slow"];
    let mut records = Vec::new();
    for (i, cond) in conditions.iter().enumerate() {
        let id = format!("{cond}_s01_t01_r1");
        let path = format!("audio/{id}.wav");
        if corrupt && i == 1 {
            fs::write(dir.join(&path), b"RIFF this is not audio").unwrap();
        } else {
            write_wav(&dir.join(&path), &tone(8000 + 1600 * i, 120.0 + 40.0 * i as f64, 16_000), 16_000).unwrap();
        }
        records.push(UtteranceRecord {
            id,
            speaker: "s01".into(),
            text: "t01".into(),
            condition: cond.to_string(),
            rep: 1,
            path,
            kind: RecordKind::Wav,
        });
    }
    let manifest = CorpusManifest::new(conditions.iter().map(|c| c.to_string()).collect(), records).unwrap();
    manifest.write(&dir.join("corpus.tsv")).unwrap();
}

fn snapshot(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                files.push((p.strip_prefix(dir).unwrap().display().to_string(), fs::read(&p).unwrap()));
            }
        }
    }
    files.sort();
    files
}

#[test]
fn extract_writes_features_and_manifest() {
    let tmp = tempfile::tempdir().unwrap();
    let src = tmp.path().join("src");
    wav_corpus(&src, false);
    let out = tmp.path().join("out");
    ok(&["extract", "--corpus", s(&src), "--out", s(&out)]);

    let manifest = CorpusManifest::read(&out.join("corpus.tsv")).unwrap();
    assert_eq!(manifest.records.len(), 3);
    for r in &manifest.records {
        assert_eq!(r.kind, RecordKind::Feat);
        let seq = read_features(&out.join(&r.path)).unwrap();
        assert_eq!(seq.dim(), 32);
        let pros = read_features(&out.join(&r.path).with_extension("pros")).unwrap();
        assert_eq!((pros.dim(), pros.len()), (3, seq.len()));
    }
    let feats = fs::read_dir(out.join("features")).unwrap().filter(|e| {
        e.as_ref().unwrap().path().extension().is_some_and(|x| x == "feat")
    });
    assert_eq!(feats.count(), 3);

    let first = snapshot(&out);
    ok(&["extract", "--corpus", s(&src), "--out", s(&out)]);
    assert_eq!(snapshot(&out), first, "rerun changed the output");

    // Extracting an already-extracted corpus copies it unchanged.
    let again = tmp.path().join("again");
    ok(&["extract", "--corpus", s(&out), "--out", s(&again)]);
    assert_eq!(snapshot(&again), first);
}

#[test]
fn corrupt_wav_fails_that_record() {
    let tmp = tempfile::tempdir().unwrap();
    let src = tmp.path().join("src");
    wav_corpus(&src, true);
    let out = tmp.path().join("out");
    let res = run(&["extract", "--corpus", s(&src), "--out", s(&out)]);
    assert_eq!(res.status.code(), Some(1));
    let stderr = String::from_utf8_lossy(&res.stderr);
    assert!(stderr.contains("angry_s01_t01_r1"), "{stderr}");
    assert!(!stderr.contains("neutral_s01_t01_r1"), "{stderr}");
    assert!(!out.join("corpus.tsv").exists());
}

#[test]
fn configuration_errors_exit_2() {
    let tmp = tempfile::tempdir().unwrap();
    let corpus = tmp.path().join("corpus");
    small_corpus(&corpus);
    let bank = tmp.path().join("bank");
    let base = ["train", "--corpus", s(&corpus), "--bank", s(&bank)];
    for extra in [&["--alpha", "1.5"][..], &["--system", "nope"], &["--states", "5", "--supra-states", "2"]] {
        let args: Vec<&str> = base.iter().chain(extra).copied().collect();
        assert_eq!(run(&args).status.code(), Some(2), "{extra:?}");
    }
    assert!(!bank.exists());
}

#[test]
fn systems_lists_the_registry() {
    let out = ok(&["systems"]);
    let names: Vec<&str> = out.lines().map(|l| l.split('\t').next().unwrap()).collect();
    assert_eq!(names, ["hmm", "chmm2", "sphmm", "ltrsphmm1", "ltrsphmm2", "csphmm1", "csphmm2", "vq"]);
}
