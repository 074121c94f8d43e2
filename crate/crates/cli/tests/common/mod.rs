#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use uniparser::corpus::{synthetic_corpus, RawRecord};

pub fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_uniparser"))
}

pub fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

pub fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

pub fn stdout(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).expect("utf-8 stdout")
}

pub fn stderr(out: &Output) -> String {
    String::from_utf8(out.stderr.clone()).expect("utf-8 stderr")
}

pub fn write_csv(path: &Path, rows: &[RawRecord]) {
    let mut w = csv::Writer::from_path(path).expect("create csv");
    w.write_record(["LineId", "Content", "EventTemplate"]).unwrap();
    for r in rows {
        w.write_record([r.line_id.to_string(), r.content.clone(), r.template.clone()])
            .unwrap();
    }
    w.flush().unwrap();
}

/// `root/<name>/<name>_2k.log_structured.csv` for each source, synthetic rows.
pub fn source_tree(root: &Path, sources: &[(&str, u64, usize)]) -> PathBuf {
    let data = root.join("data");
    for &(name, seed, n) in sources {
        let dir = data.join(name);
        std::fs::create_dir_all(&dir).unwrap();
        let rows = synthetic_corpus(&mut ChaCha8Rng::seed_from_u64(seed), n);
        write_csv(&dir.join(format!("{name}_2k.log_structured.csv")), &rows);
    }
    data
}

pub fn p(path: &Path) -> &str {
    path.to_str().expect("utf-8 path")
}
