//! Acceptance suite: one PASS / FAIL / NOT RUN line per criterion.
//!
//! Criteria 5-8 need the loghub 2k structured logs, one directory per source
//! (`$UNIPARSER_LOGHUB_DIR/HDFS/HDFS_2k.log_structured.csv`, ...). Without that
//! variable they are reported as NOT RUN. Pass criterion numbers as arguments to run a
//! subset: `cargo test --release --test acceptance -- 5 8`.

mod common;

use std::panic::{self, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::time::Instant;

use common::{code, p, run, source_tree, stderr, stdout};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use tempfile::TempDir;
use uniparser::corpus::{read_records, synthetic_corpus, tokenize, LabeledDataset, RawRecord, TokenizedMessage};
use uniparser::kernels::{grad_check, GradCheck};
use uniparser::metrics::evaluate;
use uniparser::model::{
    batch_loss, batch_loss_and_grad, bce_with_grad, contrastive_loss, total_loss, Architecture, Batch,
    ContrastTriple, ContrastiveSample, LossOptions, ModelParameters, TokenClassifier, TokenExample,
};
use uniparser::runtime::{parse_batch, BatchOptions, ParseRecord};
use uniparser::trainer::{build_training_pool, fine_tune, train, TrainConfig};
use uniparser::Result;

const LOSS_TOLERANCE: f64 = 1e-5;
const GRAD_TOLERANCE: f64 = 1e-4;
const MIN_THROUGHPUT: f64 = 500.0;
const THROUGHPUT_MESSAGES: usize = 100_000;
const HDFS_MIN_GA: f64 = 0.95;
const HDFS_MIN_MLA: f64 = 0.85;
const ABLATION_MIN_GAP: f64 = 0.2;
const K_SWEEP_BAND: f64 = 0.15;
const FINE_TUNE_MIN_LIFT: f64 = 0.20;
const FINE_TUNE_SAMPLES: usize = 40;
const DESK_CAP: usize = 500;
const SEED: u64 = 42;

enum Outcome {
    Pass(String),
    Fail(String),
    NotRun(String),
}

type Criterion = (u32, &'static str, fn() -> Outcome);

fn check(pass: bool, detail: String) -> Outcome {
    if pass {
        Outcome::Pass(detail)
    } else {
        Outcome::Fail(detail)
    }
}

// --- 1 -----------------------------------------------------------------------------

/// Numbers and dotted versions are parameters, everything else template.
struct NumericStub;

impl TokenClassifier for NumericStub {
    fn token_probabilities(&self, m: &TokenizedMessage) -> Result<Vec<f64>> {
        Ok(m.token_texts()
            .map(|t| {
                let numeric = t.chars().any(|c| c.is_ascii_digit())
                    && t.chars().all(|c| c.is_ascii_digit() || c == '.');
                numeric as u8 as f64
            })
            .collect())
    }
}

fn metric_oracles() -> Outcome {
    let session = "SessionID=<*>, initialized by OSAgent, version (<*>).";
    let reading = "Reading data from <*>: <*>";
    let mut rows = Vec::new();
    for id in ["30546173", "30546174", "30546175"] {
        rows.push((format!("SessionID={id}, initialized by OSAgent, version (1.0.0)."), session));
    }
    // The right-hand group never varies, so "/etc/data/" and "success" look like template.
    for _ in 0..3 {
        rows.push(("Reading data from /etc/data/: success".to_string(), reading));
    }
    let raw: Vec<RawRecord> = rows
        .into_iter()
        .enumerate()
        .map(|(i, (content, template))| RawRecord {
            line_id: i as u64 + 1,
            content,
            template: template.to_string(),
        })
        .collect();
    let d = LabeledDataset::from_records("fig5", &raw);
    let r = match evaluate(&NumericStub, &d) {
        Ok(r) => r,
        Err(e) => return Outcome::Fail(e.to_string()),
    };
    check(
        d.len() == 6 && r.group_accuracy == 1.0 && r.message_level_accuracy == 0.5,
        format!("GA={} (want 1.0) MLA={} (want 0.5)", r.group_accuracy, r.message_level_accuracy),
    )
}

// --- 2 -----------------------------------------------------------------------------

fn loss_identities() -> Outcome {
    let (perfect, _) = bce_with_grad(1.0, 1.0);
    let (perfect_neg, _) = bce_with_grad(0.0, 0.0);
    let sample = ContrastiveSample {
        anchor: vec![1.0, 2.0],
        similar: vec![0.5, 0.25],
        dissimilar: vec![vec![0.5, 0.25]; 3],
    };
    let contrast = contrastive_loss(&sample, false).unwrap_or(f64::NAN);
    let ln3 = 3f64.ln();
    let total = total_loss(0.4, contrast, 0.01);
    let pass = perfect.abs() < LOSS_TOLERANCE
        && perfect_neg.abs() < LOSS_TOLERANCE
        && (contrast - ln3).abs() < LOSS_TOLERANCE
        && (total - (0.4 + 0.01 * contrast)).abs() < LOSS_TOLERANCE;
    check(
        pass,
        format!("bce(1,1)={perfect:.2e} bce(0,0)={perfect_neg:.2e} contrast={contrast:.6} (ln3={ln3:.6}) total={total:.6}"),
    )
}

// --- 3 -----------------------------------------------------------------------------

fn gradient_check() -> Outcome {
    let arch = Architecture {
        d_emb: 5,
        d_h: 4,
        k: 2,
        use_context: true,
    };
    let params = ModelParameters::init(arch, &mut ChaCha8Rng::seed_from_u64(SEED));
    let a = tokenize("Connected to 10.0.0.1 on port 22");
    let b = tokenize("job 17 finished in 3 ms");
    let batch = Batch {
        tokens: (0..a.len())
            .map(|i| TokenExample { message: &a, index: i, label: (i == 2 || i == 5) as u8 as f64 })
            .chain((0..b.len()).map(|i| TokenExample { message: &b, index: i, label: (i == 1 || i == 4) as u8 as f64 }))
            .collect(),
        contrast: vec![
            ContrastTriple { anchor: &a, similar: &a, dissimilar: vec![&b; 3] },
            ContrastTriple { anchor: &b, similar: &b, dissimilar: vec![&a; 3] },
        ],
    };
    let opts = LossOptions::default();
    let (_, grads) = match batch_loss_and_grad(&params, &batch, &opts) {
        Ok(g) => g,
        Err(e) => return Outcome::Fail(e.to_string()),
    };
    let report = grad_check(
        |v| {
            let mut q = params.clone();
            q.load_flat(v);
            batch_loss(&q, &batch, &opts).map(|l| l.total).unwrap_or(f64::NAN)
        },
        &params.flatten(),
        &grads.flatten(),
        &GradCheck::default(),
    );
    check(
        report.worst_relative < GRAD_TOLERANCE,
        format!(
            "worst relative error {:.2e} over {} coordinates (bound {GRAD_TOLERANCE:.0e})",
            report.worst_relative, report.checked
        ),
    )
}

// --- 4 -----------------------------------------------------------------------------

fn toy_convergence() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let train_set = LabeledDataset::from_records("toy", &synthetic_corpus(&mut rng, 200));
    let held_out = LabeledDataset::from_records("toy-held-out", &synthetic_corpus(&mut rng, 50));
    let pool = build_training_pool(std::slice::from_ref(&train_set), None, None).expect("pool");
    // ~1.5k tokens: 256-token batches give too few steps in four epochs.
    let cfg = TrainConfig {
        batch_size: 32,
        seed: SEED,
        ..TrainConfig::default()
    };
    let r = train(&pool, &cfg).and_then(|(m, _)| evaluate(&m, &held_out));
    match r {
        Ok(r) => check(
            r.message_level_accuracy == 1.0,
            format!("held-out MLA={} GA={} after 4 epochs", r.message_level_accuracy, r.group_accuracy),
        ),
        Err(e) => Outcome::Fail(e.to_string()),
    }
}

// --- 5-8 ---------------------------------------------------------------------------

fn loghub_dir() -> Option<PathBuf> {
    std::env::var_os("UNIPARSER_LOGHUB_DIR").map(PathBuf::from)
}

fn not_run() -> Outcome {
    Outcome::NotRun("loghub 2k data not available; set UNIPARSER_LOGHUB_DIR".into())
}

fn loghub_csv(dir: &Path) -> Option<PathBuf> {
    let name = dir.file_name()?.to_string_lossy().into_owned();
    ["_2k.log_structured_corrected.csv", "_2k.log_structured.csv"]
        .iter()
        .map(|suffix| dir.join(format!("{name}{suffix}")))
        .find(|p| p.is_file())
}

fn load_loghub(root: &Path) -> std::result::Result<Vec<LabeledDataset>, String> {
    let mut dirs: Vec<PathBuf> = std::fs::read_dir(root)
        .map_err(|e| format!("{}: {e}", root.display()))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_dir())
        .collect();
    dirs.sort();
    let mut out = Vec::new();
    for d in dirs {
        if let Some(csv) = loghub_csv(&d) {
            let name = d.file_name().unwrap_or_default().to_string_lossy().into_owned();
            let raw = read_records(&csv, "Content", "EventTemplate").map_err(|e| e.to_string())?;
            out.push(LabeledDataset::from_records(name, &raw));
        }
    }
    Ok(out)
}

fn held_out(datasets: &[LabeledDataset], name: &str) -> std::result::Result<LabeledDataset, String> {
    datasets
        .iter()
        .find(|d| d.source_name == name)
        .cloned()
        .ok_or_else(|| format!("source {name} missing from loghub directory"))
}

fn desk_config() -> TrainConfig {
    TrainConfig {
        seed: SEED,
        max_per_source: Some(DESK_CAP),
        ..TrainConfig::default()
    }
}

fn leave_one_out_mla(
    datasets: &[LabeledDataset],
    target: &LabeledDataset,
    cfg: &TrainConfig,
) -> std::result::Result<(ModelParameters, f64, f64), String> {
    let pool = build_training_pool(datasets, Some(&target.source_name), cfg.max_per_source)
        .map_err(|e| e.to_string())?;
    let (model, _) = train(&pool, cfg).map_err(|e| e.to_string())?;
    let r = evaluate(&model, target).map_err(|e| e.to_string())?;
    Ok((model, r.group_accuracy, r.message_level_accuracy))
}

fn with_loghub(f: impl FnOnce(&[LabeledDataset]) -> std::result::Result<Outcome, String>) -> Outcome {
    let Some(root) = loghub_dir() else {
        return not_run();
    };
    match load_loghub(&root).and_then(|d| f(&d)) {
        Ok(o) => o,
        Err(e) => Outcome::Fail(e),
    }
}

fn hdfs_spot_check() -> Outcome {
    with_loghub(|ds| {
        let hdfs = held_out(ds, "HDFS")?;
        let (_, ga, mla) = leave_one_out_mla(ds, &hdfs, &desk_config())?;
        Ok(check(
            ga >= HDFS_MIN_GA && mla >= HDFS_MIN_MLA,
            format!("HDFS held out: GA={ga:.4} (reference 1.000, bound {HDFS_MIN_GA}) MLA={mla:.4} (reference 1.000, bound {HDFS_MIN_MLA})"),
        ))
    })
}

fn ablation_ordering() -> Outcome {
    with_loghub(|ds| {
        let android = held_out(ds, "Android")?;
        let token_only = TrainConfig {
            use_context: false,
            lambda: 0.0,
            ..desk_config()
        };
        let context = TrainConfig {
            lambda: 0.0,
            ..desk_config()
        };
        let (_, _, a) = leave_one_out_mla(ds, &android, &token_only)?;
        let (_, _, b) = leave_one_out_mla(ds, &android, &context)?;
        let (_, _, c) = leave_one_out_mla(ds, &android, &desk_config())?;
        Ok(check(
            a < b && b < c && c - a >= ABLATION_MIN_GAP,
            format!("Android MLA token-only={a:.4} +context={b:.4} full={c:.4} (reference 0.352 / 0.587 / 0.838)"),
        ))
    })
}

fn k_sweep() -> Outcome {
    with_loghub(|ds| {
        let android = held_out(ds, "Android")?;
        let mut mlas = Vec::new();
        for k in 1..=5 {
            let (_, _, mla) = leave_one_out_mla(ds, &android, &TrainConfig { k, ..desk_config() })?;
            mlas.push(mla);
        }
        let max = mlas.iter().cloned().fold(f64::MIN, f64::max);
        let min = mlas.iter().cloned().fold(f64::MAX, f64::min);
        let best_k = mlas.iter().position(|&m| m == max).unwrap_or(0) + 1;
        let shown: Vec<String> = mlas.iter().enumerate().map(|(i, m)| format!("k={}:{m:.4}", i + 1)).collect();
        Ok(check(
            max - min <= K_SWEEP_BAND && (2..=4).contains(&best_k),
            format!("Android {} band={:.4} peak k={best_k} (reference 0.78-0.84, peak k=3)", shown.join(" "), max - min),
        ))
    })
}

fn fine_tune_lift() -> Outcome {
    with_loghub(|ds| {
        let proxifier = held_out(ds, "Proxifier")?;
        let (base, _, _) = leave_one_out_mla(ds, &proxifier, &desk_config())?;
        let sample = &proxifier.records[..FINE_TUNE_SAMPLES.min(proxifier.len())];
        let rest = LabeledDataset::from_labeled(
            "Proxifier",
            proxifier.records[sample.len()..].to_vec(),
            Vec::new(),
        );
        let before = evaluate(&base, &rest).map_err(|e| e.to_string())?.message_level_accuracy;
        let tuned = fine_tune(&base, sample, &TrainConfig { seed: SEED, ..TrainConfig::fine_tune() })
            .map_err(|e| e.to_string())?;
        let after = evaluate(&tuned, &rest).map_err(|e| e.to_string())?.message_level_accuracy;
        Ok(check(
            after - before >= FINE_TUNE_MIN_LIFT,
            format!("Proxifier MLA {before:.4} -> {after:.4} with {FINE_TUNE_SAMPLES} lines (reference 0.369 -> 0.893)"),
        ))
    })
}

// --- 9 -----------------------------------------------------------------------------

fn throughput() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    let model = ModelParameters::init(Architecture::default(), &mut rng);
    let messages: Vec<String> = synthetic_corpus(&mut rng, THROUGHPUT_MESSAGES)
        .into_iter()
        .map(|r| r.content)
        .collect();
    let render = |workers: usize| {
        let opts = BatchOptions {
            workers,
            ..BatchOptions::default()
        };
        parse_batch(&model, &messages, opts).map(|(results, report)| {
            let bytes: String = results
                .iter()
                .enumerate()
                .map(|(i, r)| ParseRecord::new(i + 1, &messages[i], r).to_json_line() + "\n")
                .collect();
            (bytes, report)
        })
    };
    let (four, report) = match render(4) {
        Ok(x) => x,
        Err(e) => return Outcome::Fail(e.to_string()),
    };
    let (one, _) = match render(1) {
        Ok(x) => x,
        Err(e) => return Outcome::Fail(e.to_string()),
    };
    let cores = std::thread::available_parallelism().map_or(1, |n| n.get());
    check(
        report.messages_per_second >= MIN_THROUGHPUT && four == one,
        format!(
            "{:.0} msg/s with 4 workers on {cores} core(s), {} messages (bound {MIN_THROUGHPUT}); output identical to 1 worker: {}",
            report.messages_per_second,
            report.messages,
            four == one
        ),
    )
}

// --- 10 ----------------------------------------------------------------------------

fn determinism() -> Outcome {
    let dir = TempDir::new().expect("temp dir");
    let data = source_tree(dir.path(), &[("Alpha", 1, 60), ("Beta", 2, 60), ("Gamma", 3, 60)]);
    let mut models = Vec::new();
    for i in 0..2 {
        let out = dir.path().join(format!("m{i}.json"));
        let res = run(&["train", "--data", p(&data), "--seed", "42", "--out", p(&out)]);
        if code(&res) != 0 {
            return Outcome::Fail(stderr(&res));
        }
        models.push(std::fs::read(&out).expect("model written"));
    }
    let input = dir.path().join("in.log");
    let rows = synthetic_corpus(&mut ChaCha8Rng::seed_from_u64(77), 2000);
    let text: String = rows.iter().map(|r| format!("{}\n", r.content)).collect();
    std::fs::write(&input, text).expect("write input");
    let model = dir.path().join("m0.json");
    let parses: Vec<String> = ["1", "2", "4"]
        .iter()
        .map(|w| stdout(&run(&["parse", "--model", p(&model), "--input", p(&input), "--workers", w])))
        .collect();
    let same_model = models[0] == models[1];
    let same_parse = parses.iter().all(|s| s == &parses[0]) && parses[0].lines().count() == 2000;
    check(
        same_model && same_parse,
        format!(
            "model files identical: {same_model} ({} bytes); parse output identical across 1/2/4 workers: {same_parse}",
            models[0].len()
        ),
    )
}

fn main() {
    let criteria: [Criterion; 10] = [
        (1, "metric oracles", metric_oracles),
        (2, "loss identities", loss_identities),
        (3, "gradient correctness", gradient_check),
        (4, "toy-corpus convergence", toy_convergence),
        (5, "HDFS leave-one-out spot-check", hdfs_spot_check),
        (6, "ablation ordering", ablation_ordering),
        (7, "k-sweep stability", k_sweep),
        (8, "fine-tuning lift", fine_tune_lift),
        (9, "throughput", throughput),
        (10, "determinism", determinism),
    ];
    let selected: Vec<u32> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let mut failed = 0;
    for (n, name, f) in criteria {
        if !selected.is_empty() && !selected.contains(&n) {
            continue;
        }
        let started = Instant::now();
        let outcome = panic::catch_unwind(AssertUnwindSafe(f))
            .unwrap_or_else(|e| {
                let msg = e
                    .downcast_ref::<String>()
                    .cloned()
                    .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                    .unwrap_or_default();
                Outcome::Fail(format!("panicked: {msg}"))
            });
        let secs = started.elapsed().as_secs_f64();
        let (tag, detail) = match outcome {
            Outcome::Pass(d) => ("PASS", d),
            Outcome::Fail(d) => {
                failed += 1;
                ("FAIL", d)
            }
            Outcome::NotRun(d) => ("NOT RUN", d),
        };
        println!("criterion {n:>2} [{tag}] {name}: {detail} ({secs:.1}s)");
    }
    if failed > 0 {
        println!("{failed} criterion(s) failed");
        std::process::exit(1);
    }
}
