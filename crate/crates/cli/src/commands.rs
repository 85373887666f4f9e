use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use suprahmm::baseline_vq::{train_vq_bank, VqConfig};
use suprahmm::classifier::{check_alpha, LabeledUtterance};
use suprahmm::corpus::{
    load_records, prosody_path, record_path, split, synth_generate, track_sequence, CorpusManifest, RecordKind,
    SplitPlan, SynthSpec, UtteranceRecord,
};
use suprahmm::evaluation::{
    alpha_sweep, comparison_csv, round_tenth, default_alpha_grid, matrix_csv, performance_csv, performance_table, sweep_csv,
    t_test, t_test_csv, ConfusionMatrix, PerformanceTable, SdConvention,
};
use suprahmm::features::{mfcc_extract, read_wav, write_features, MfccConfig};
use suprahmm::hmm::{Order, Shape, TrainConfig};
use suprahmm::store::{bank_digest, read_bank_manifest};
use suprahmm::systems::{load_recognizer, Recognizer, SystemOptions, SystemRegistry, VqRecognizer};
use suprahmm::utterance::prosody_track;

use crate::{EvaluateArgs, ExtractArgs, ShapeArg, SynthArgs, TrainArgs};

pub const REPORT_HEADER: &str = "suprahmm-report v1";
const MANIFEST_NAME: &str = "corpus.tsv";

/// Accepts either a manifest file or a directory holding `corpus.tsv`.
fn manifest_path(corpus: &Path) -> PathBuf {
    if corpus.is_dir() {
        corpus.join(MANIFEST_NAME)
    } else {
        corpus.to_path_buf()
    }
}

fn read_manifest(corpus: &Path) -> Result<(CorpusManifest, PathBuf)> {
    let path = manifest_path(corpus);
    let manifest = CorpusManifest::read(&path).with_context(|| format!("reading manifest {}", path.display()))?;
    let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
    Ok((manifest, base))
}

fn report_failures(failures: &[(String, suprahmm::Error)]) {
    for (id, e) in failures {
        eprintln!("record {id}: {e}");
    }
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

pub fn extract(args: &ExtractArgs) -> Result<usize> {
    let (manifest, base) = read_manifest(&args.corpus)?;
    let feat_dir = args.out.join("features");
    fs::create_dir_all(&feat_dir).with_context(|| format!("creating {}", feat_dir.display()))?;
    let mfcc = MfccConfig::default();

    let mut records = Vec::with_capacity(manifest.records.len());
    let mut failures = Vec::new();
    for rec in &manifest.records {
        let rel = format!("features/{}.feat", rec.id);
        let dest = args.out.join(&rel);
        let src = record_path(&base, rec);
        let outcome = match rec.kind {
            RecordKind::Wav => extract_wav(&src, &dest, &rec.id, &mfcc),
            RecordKind::Feat => copy_feat(&src, &dest),
        };
        match outcome {
            Ok(()) => records.push(UtteranceRecord { path: rel, kind: RecordKind::Feat, ..rec.clone() }),
            Err(e) => failures.push((rec.id.clone(), e)),
        }
    }
    for (id, e) in &failures {
        eprintln!("record {id}: {e:#}");
    }
    if !failures.is_empty() {
        eprintln!("{} of {} records failed; manifest not written", failures.len(), manifest.records.len());
        return Ok(failures.len());
    }
    let out = CorpusManifest { records, ..manifest };
    out.write(&args.out.join(MANIFEST_NAME))?;
    println!("extracted {} records into {}", out.records.len(), args.out.display());
    Ok(0)
}

fn extract_wav(src: &Path, dest: &Path, id: &str, mfcc: &MfccConfig) -> Result<()> {
    let clip = read_wav(src)?;
    let mut features = mfcc_extract(&clip, mfcc)?;
    features.id = id.to_string();
    let track = prosody_track(&clip, &mfcc.frame)?;
    write_features(dest, &features)?;
    write_features(&prosody_path(dest), &track_sequence(id, &track)?)?;
    Ok(())
}

fn copy_feat(src: &Path, dest: &Path) -> Result<()> {
    let same = |a: &Path, b: &Path| matches!((a.canonicalize(), b.canonicalize()), (Ok(x), Ok(y)) if x == y);
    if same(src, dest) {
        return Ok(());
    }
    fs::copy(src, dest).with_context(|| format!("copying {}", src.display()))?;
    let pros = prosody_path(src);
    if pros.exists() {
        fs::copy(&pros, prosody_path(dest)).with_context(|| format!("copying {}", pros.display()))?;
    }
    Ok(())
}

#[derive(Clone, Copy)]
enum Side {
    Train,
    Test,
}

struct Loaded {
    utterances: Vec<LabeledUtterance>,
    ids: Vec<String>,
    failures: usize,
}

/// Loads one side of the split (or every record without a plan), mapping
/// condition names onto `labels`.
fn load_side(
    manifest: &CorpusManifest,
    base: &Path,
    plan: Option<&Path>,
    side: Side,
    labels: &[String],
    mfcc: &MfccConfig,
) -> Result<Loaded> {
    let records: Vec<&UtteranceRecord> = match plan {
        Some(p) => {
            let plan = SplitPlan::read(p).with_context(|| format!("reading split {}", p.display()))?;
            let (train, test) = split(manifest, &plan)?;
            match side {
                Side::Train => train,
                Side::Test => test,
            }
        }
        None => manifest.records.iter().collect(),
    };
    let (ok, failed) = load_records(base, &records, mfcc);
    report_failures(&failed);
    let mut utterances = Vec::with_capacity(ok.len());
    let mut ids = Vec::with_capacity(ok.len());
    for (i, utterance) in ok {
        let cond = &records[i].condition;
        let Some(label) = labels.iter().position(|l| l == cond) else {
            bail!("record {} has condition {cond:?}, which the bank does not model", records[i].id);
        };
        ids.push(records[i].id.clone());
        utterances.push(LabeledUtterance { label, utterance });
    }
    if utterances.is_empty() {
        bail!("no usable records");
    }
    Ok(Loaded { utterances, ids, failures: failed.len() })
}

fn system_options(args: &TrainArgs) -> Result<SystemOptions> {
    let m = &args.model;
    check_alpha(m.alpha)?;
    Ok(SystemOptions {
        order: m.order.map(|o| if o == 1 { Order::First } else { Order::Second }),
        shape: m.shape.map(|s| match s {
            ShapeArg::Linear => Shape::Linear,
            ShapeArg::Circular => Shape::Circular,
        }),
        n_states: m.states,
        supra_states: m.supra_states,
        mixtures: m.mixtures,
        supra_mixtures: m.supra_mixtures,
        alpha: m.alpha,
        normalize: m.normalize,
        train: TrainConfig { max_iters: m.iters, tol: m.tol, ..TrainConfig::default() },
        seed: args.seed,
        codebook_size: m.codebook_size,
        features: MfccConfig::default(),
    })
}

pub fn train(args: &TrainArgs) -> Result<usize> {
    let registry = SystemRegistry::builtin();
    registry.get(&args.model.system)?;
    let opts = system_options(args)?;
    let (manifest, base) = read_manifest(&args.corpus)?;
    let loaded = load_side(&manifest, &base, args.split.as_deref(), Side::Train, &manifest.conditions, &opts.features)?;
    let recognizer = registry.train(&args.model.system, &manifest.conditions, &loaded.utterances, &opts)?;
    recognizer.save(&args.bank)?;
    println!(
        "trained {} on {} utterances; bank {} sha256 {}",
        recognizer.system(),
        loaded.utterances.len(),
        args.bank.display(),
        bank_digest(&args.bank)?
    );
    Ok(loaded.failures)
}

struct Scored {
    name: String,
    matrix: ConfusionMatrix,
    performance: PerformanceTable,
    predictions: Vec<usize>,
}

fn score(name: &str, rec: &dyn Recognizer, test: &[LabeledUtterance], alpha: Option<f64>) -> Result<Scored> {
    let predictions = match (alpha, rec.condition_bank()) {
        (Some(a), Some(bank)) => {
            test.iter().map(|u| Ok(bank.classify_at(&u.utterance, a)?.index)).collect::<Result<Vec<_>>>()?
        }
        (Some(_), None) => bail!("--alpha applies only to HMM banks"),
        (None, _) => test.iter().map(|u| Ok(rec.classify(&u.utterance)?)).collect::<Result<Vec<_>>>()?,
    };
    let truth: Vec<usize> = test.iter().map(|u| u.label).collect();
    let matrix = ConfusionMatrix::from_indices(&rec.labels(), &truth, &predictions)?;
    matrix.validate()?;
    let performance = performance_table(&matrix);
    Ok(Scored { name: name.to_string(), matrix, performance, predictions })
}

fn same_labels(a: &dyn Recognizer, b: &dyn Recognizer, what: &str) -> Result<()> {
    if a.labels() != b.labels() {
        bail!("{what} models conditions {:?}, expected {:?}", b.labels(), a.labels());
    }
    Ok(())
}

pub fn evaluate(args: &EvaluateArgs) -> Result<usize> {
    if let Some(a) = args.alpha {
        check_alpha(a)?;
    }
    if args.baseline.is_some() && args.split.is_none() {
        bail!("--baseline needs --split to know which records to train on");
    }
    let primary = load_recognizer(&args.bank).with_context(|| format!("loading bank {}", args.bank.display()))?;
    let features = read_bank_manifest(&args.bank)?.feature_config;
    let labels = primary.labels();
    let (manifest, base) = read_manifest(&args.corpus)?;
    let test = load_side(&manifest, &base, args.split.as_deref(), Side::Test, &labels, &features)?;
    let mut failures = test.failures;
    fs::create_dir_all(&args.out).with_context(|| format!("creating {}", args.out.display()))?;

    let main = score(primary.system(), primary.as_ref(), &test.utterances, args.alpha)?;
    let mut comparison = vec![(main.name.clone(), main.performance.average)];
    let mut report = String::new();
    let _ = writeln!(report, "{REPORT_HEADER}");
    let _ = writeln!(report, "# confusion: rows are identified conditions, columns are true conditions; each column sums to 100");
    let _ = writeln!(report, "# percentages are rounded to 0.1");
    let convention = if args.raw_sd { SdConvention::Raw } else { SdConvention::StandardError };
    let _ = writeln!(
        report,
        "# t-test: pooled deviation from per-condition {}; one-sided critical value {}",
        if args.raw_sd { "sample SD" } else { "standard error (sample SD / sqrt(n))" },
        args.critical
    );
    let _ = writeln!(report, "system: {}", main.name);
    let _ = writeln!(report, "test utterances: {}", test.utterances.len());
    let _ = writeln!(report, "record failures: {}", test.failures);

    write_text(&args.out.join("confusion.csv"), &matrix_csv(&main.matrix))?;
    write_text(&args.out.join("performance.csv"), &performance_csv(&main.performance))?;
    write_text(&args.out.join("predictions.csv"), &predictions_csv(&test, &labels, &main.predictions))?;
    let _ = write!(report, "\n[confusion]\n{}\n[performance]\n{}", matrix_csv(&main.matrix), performance_csv(&main.performance));

    if let Some(dir) = &args.compare_bank {
        let other = load_recognizer(dir).with_context(|| format!("loading bank {}", dir.display()))?;
        same_labels(primary.as_ref(), other.as_ref(), "comparison bank")?;
        let other_features = read_bank_manifest(dir)?.feature_config;
        let scored = if other_features == features {
            score(other.system(), other.as_ref(), &test.utterances, None)?
        } else {
            let reloaded = load_side(&manifest, &base, args.split.as_deref(), Side::Test, &labels, &other_features)?;
            failures += reloaded.failures;
            score(other.system(), other.as_ref(), &reloaded.utterances, None)?
        };
        let name_y = if scored.name == main.name { format!("{} (compare)", scored.name) } else { scored.name.clone() };
        let result = t_test(&main.performance, &scored.performance, convention, args.critical)?;
        let csv = t_test_csv(&main.name, &name_y, &result);
        write_text(&args.out.join("ttest.csv"), &csv)?;
        let _ = write!(report, "\n[ttest]\n{csv}");
        comparison.push((name_y, scored.performance.average));
    }

    if args.alpha_sweep {
        let Some(bank) = primary.condition_bank() else {
            bail!("--alpha-sweep needs an HMM bank");
        };
        if !bank.has_suprasegmental() {
            bail!("--alpha-sweep needs a bank with a suprasegmental layer");
        }
        let rows = alpha_sweep(bank, &test.utterances, &default_alpha_grid())?;
        let csv = sweep_csv(&rows);
        write_text(&args.out.join("alpha_sweep.csv"), &csv)?;
        let _ = write!(report, "\n[alpha_sweep]\n{csv}");
    }

    if args.baseline.is_some() {
        let train = load_side(&manifest, &base, args.split.as_deref(), Side::Train, &labels, &features)?;
        failures += train.failures;
        let cfg = VqConfig { codebook_size: args.codebook_size, seed: args.seed, ..VqConfig::default() };
        let bank = train_vq_bank(&labels, &train.utterances, &cfg)?;
        let vq = VqRecognizer { system: "vq".into(), bank };
        let scored = score("VQ", &vq, &test.utterances, None)?;
        comparison.push((scored.name, scored.performance.average));
    }

    let csv = comparison_csv(&comparison);
    write_text(&args.out.join("comparison.csv"), &csv)?;
    let _ = write!(report, "\n[comparison]\n{csv}");
    write_text(&args.out.join("report.txt"), &report)?;
    println!("{}: average performance {:.1}% over {} utterances", main.name, round_tenth(main.performance.average), test.utterances.len());
    Ok(failures)
}

fn predictions_csv(test: &Loaded, labels: &[String], predictions: &[usize]) -> String {
    let mut out = String::from("id,true,identified\n");
    for ((id, u), p) in test.ids.iter().zip(&test.utterances).zip(predictions) {
        let _ = writeln!(out, "{id},{},{}", labels[u.label], labels[*p]);
    }
    out
}

pub fn synth(args: &SynthArgs) -> Result<usize> {
    let spec = SynthSpec {
        n_conditions: args.conditions,
        separation: args.separation,
        prosodic_separation: args.prosodic_separation.unwrap_or(args.separation),
        speakers: args.speakers,
        texts: args.texts,
        reps: args.reps,
        train_speakers: args.train_speakers,
        train_texts: args.train_texts,
        min_frames: args.min_frames,
        max_frames: args.max_frames,
        dim: args.dim,
        speaker_spread: args.speaker_spread,
        seed: args.seed,
        ..SynthSpec::default()
    };
    let corpus = synth_generate(&spec)?;
    corpus.write(&args.out)?;
    println!(
        "wrote {} utterances over {} conditions to {}",
        corpus.utterances.len(),
        spec.n_conditions,
        args.out.display()
    );
    Ok(0)
}

pub fn systems() -> Result<usize> {
    let registry = SystemRegistry::builtin();
    for name in registry.names() {
        println!("{name}\t{}", registry.get(name)?.summary());
    }
    Ok(0)
}
