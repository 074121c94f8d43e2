mod args;
mod data;

use std::fs;
use std::io::{self, BufWriter, Write};
use std::path::Path;
use std::process::ExitCode;
use std::time::Instant;

use clap::error::ErrorKind;
use clap::Parser;
use uniparser::corpus::LabeledDataset;
use uniparser::metrics::{evaluate, render_table, MetricReport, OracleClassifier};
use uniparser::model::ModelParameters;
use uniparser::runtime::{parse_batch_since, BatchOptions, ParseRecord};
use uniparser::trainer::{build_training_pool, fine_tune, train, TrainConfig};

use args::{Cli, Command, EvaluateArgs, FinetuneArgs, LabelsArgs, Optimizer, ParseArgs, ReportFormat, TrainArgs};

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Data(String),
    Numeric(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Data(_) => 2,
            CliError::Numeric(_) => 3,
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Usage(m) | CliError::Data(m) | CliError::Numeric(m) => m,
        }
    }
}

impl From<uniparser::Error> for CliError {
    fn from(e: uniparser::Error) -> Self {
        match e {
            e if e.is_numeric() => CliError::Numeric(e.to_string()),
            uniparser::Error::Config(_) | uniparser::Error::UnknownSource { .. } => {
                CliError::Usage(e.to_string())
            }
            e => CliError::Data(e.to_string()),
        }
    }
}

fn io_error(path: &Path) -> impl Fn(io::Error) -> CliError + '_ {
    move |e| CliError::Data(format!("{}: {e}", path.display()))
}

fn set_workers(workers: Option<usize>) -> Result<(), CliError> {
    if let Some(n) = workers {
        if n == 0 {
            return Err(CliError::Usage("--workers must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Usage(e.to_string()))?;
    }
    Ok(())
}

fn apply_optimizer(cfg: &mut TrainConfig, o: &Optimizer) {
    cfg.learning_rate = o.learning_rate;
    cfg.batch_size = o.batch_size;
    cfg.negatives = o.negatives;
    cfg.lambda = if o.disable_similarity { 0.0 } else { o.lambda };
    cfg.include_positive_in_denominator = o.include_positive_in_denominator;
    cfg.seed = o.seed;
}

fn cmd_train(a: TrainArgs) -> Result<(), CliError> {
    set_workers(a.optimizer.workers)?;
    let mut cfg = TrainConfig {
        epochs: a.epochs,
        k: a.k,
        d_emb: a.d_emb,
        d_h: a.d_h,
        max_per_source: a.max_per_source,
        use_context: !a.disable_context,
        ..TrainConfig::default()
    };
    apply_optimizer(&mut cfg, &a.optimizer);
    cfg.validate()?;

    let datasets = data::load_all(&a.data, &a.columns)?;
    let pool = build_training_pool(&datasets, a.exclude.as_deref(), cfg.max_per_source)?;
    if pool.is_empty() {
        return Err(CliError::Data("no labeled messages to train on".into()));
    }
    eprintln!(
        "training on {} messages ({} token examples) from {} sources: {}",
        pool.len(),
        pool.records.iter().map(|r| r.message.len()).sum::<usize>(),
        pool.sources.len(),
        pool.sources.join(", ")
    );
    let (model, report) = train(&pool, &cfg)?;
    for epoch in &report.epochs {
        println!("{epoch}");
    }
    model.save(&a.out)?;
    eprintln!("wrote {}", a.out.display());
    Ok(())
}

fn cmd_parse(a: ParseArgs) -> Result<(), CliError> {
    let model = ModelParameters::load(&a.model)?;
    let started = Instant::now();
    let text = fs::read_to_string(&a.input).map_err(io_error(&a.input))?;
    let lines: Vec<&str> = text.lines().collect();
    let opts = BatchOptions {
        batch_size: a.batch_size,
        workers: a.workers,
    };
    let (results, report) = parse_batch_since(&model, &lines, opts, started)?;

    let sink: Box<dyn Write> = match &a.out {
        Some(p) => Box::new(fs::File::create(p).map_err(io_error(p))?),
        None => Box::new(io::stdout().lock()),
    };
    let mut out = BufWriter::new(sink);
    let write_err = |e: io::Error| CliError::Data(format!("writing output: {e}"));
    for (i, (line, result)) in lines.iter().zip(&results).enumerate() {
        writeln!(out, "{}", ParseRecord::new(i + 1, line, result).to_json_line()).map_err(write_err)?;
    }
    out.flush().map_err(write_err)?;
    let failed = results.iter().filter(|r| r.is_err()).count();
    if failed > 0 {
        eprintln!("{failed} lines could not be parsed");
    }
    eprintln!("{report}");
    Ok(())
}

fn select_sources(datasets: Vec<LabeledDataset>, source: Option<&str>) -> Result<Vec<LabeledDataset>, CliError> {
    let Some(name) = source else {
        return Ok(datasets);
    };
    let valid: Vec<String> = datasets.iter().map(|d| d.source_name.clone()).collect();
    let chosen: Vec<LabeledDataset> = datasets.into_iter().filter(|d| d.source_name == name).collect();
    if chosen.is_empty() {
        return Err(CliError::Usage(format!(
            "unknown source {name:?}; valid sources: {}",
            valid.join(", ")
        )));
    }
    Ok(chosen)
}

fn cmd_evaluate(a: EvaluateArgs) -> Result<(), CliError> {
    set_workers(a.workers)?;
    let model = a.model.as_deref().map(ModelParameters::load).transpose()?;
    let datasets = select_sources(data::load_all(&a.data, &a.columns)?, a.source.as_deref())?;
    let mut reports: Vec<MetricReport> = Vec::new();
    for d in datasets {
        let d = match a.max_per_source {
            Some(cap) => d.truncated(cap),
            None => d,
        };
        if d.is_empty() {
            eprintln!("{}: no labeled messages, skipped", d.source_name);
            continue;
        }
        let report = match &model {
            Some(m) => evaluate(m, &d)?,
            None => evaluate(&OracleClassifier::new(&d), &d)?,
        };
        reports.push(report);
    }
    if reports.is_empty() {
        return Err(CliError::Data("no labeled messages to evaluate".into()));
    }
    match a.format {
        ReportFormat::Table => print!("{}", render_table(&reports)),
        ReportFormat::Json => {
            for r in &reports {
                println!("{}", serde_json::to_string(r).expect("report serializes"));
            }
        }
    }
    Ok(())
}

fn cmd_finetune(a: FinetuneArgs) -> Result<(), CliError> {
    set_workers(a.optimizer.workers)?;
    let base = ModelParameters::load(&a.model)?;
    let mut cfg = TrainConfig {
        epochs: a.epochs,
        ..TrainConfig::fine_tune()
    };
    apply_optimizer(&mut cfg, &a.optimizer);
    cfg.validate()?;

    let name = uniparser::corpus::source_name_for(&a.data);
    let mut sample = data::load(&name, &a.data, &a.columns)?;
    if let Some(n) = a.limit {
        sample = sample.truncated(n);
    }
    if sample.is_empty() {
        return Err(CliError::Data(format!("{}: no labeled rows to fine-tune on", a.data.display())));
    }
    eprintln!("fine-tuning on {} labeled messages", sample.len());
    let model = fine_tune(&base, &sample.records, &cfg)?;
    model.save(&a.out)?;
    eprintln!("wrote {}", a.out.display());
    Ok(())
}

fn cmd_labels(a: LabelsArgs) -> Result<(), CliError> {
    let name = uniparser::corpus::source_name_for(&a.data);
    let d = data::load(&name, &a.data, &a.columns)?;
    let mut out = BufWriter::new(io::stdout().lock());
    for r in d.records.iter().take(a.limit.unwrap_or(usize::MAX)) {
        let tokens: Vec<String> = r
            .message
            .token_texts()
            .zip(&r.labels)
            .map(|(t, l)| format!("{t}/{}", if l.is_parameter() { 'P' } else { 'T' }))
            .collect();
        writeln!(out, "{}\t{}", r.line_id, tokens.join(" "))
            .map_err(|e| CliError::Data(format!("writing output: {e}")))?;
    }
    out.flush().map_err(|e| CliError::Data(format!("writing output: {e}")))?;
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(1),
            };
        }
    };
    let result = match cli.command {
        Command::Train(a) => cmd_train(a),
        Command::Parse(a) => cmd_parse(a),
        Command::Evaluate(a) => cmd_evaluate(a),
        Command::Finetune(a) => cmd_finetune(a),
        Command::Labels(a) => cmd_labels(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message());
            ExitCode::from(e.exit_code())
        }
    }
}
