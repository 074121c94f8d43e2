//! Locating and loading labeled sources.

use std::fs;
use std::path::{Path, PathBuf};

use uniparser::corpus::{read_records, source_name_for, LabeledDataset};

use crate::args::Columns;
use crate::CliError;

fn is_csv(p: &Path) -> bool {
    p.is_file() && p.extension().is_some_and(|e| e.eq_ignore_ascii_case("csv"))
}

fn sorted_entries(dir: &Path) -> Result<Vec<PathBuf>, CliError> {
    let mut entries: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(|e| CliError::Data(format!("{}: {e}", dir.display())))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .collect();
    entries.sort();
    Ok(entries)
}

/// The labeled CSV inside a source directory; `*_structured.csv` wins when several exist.
fn source_csv(dir: &Path) -> Result<Option<PathBuf>, CliError> {
    let csvs: Vec<PathBuf> = sorted_entries(dir)?.into_iter().filter(|p| is_csv(p)).collect();
    let structured = csvs.iter().find(|p| {
        p.file_name()
            .is_some_and(|n| n.to_string_lossy().ends_with("_structured.csv"))
    });
    Ok(structured.or(csvs.first()).cloned())
}

/// Resolves `--data` arguments to `(source name, csv path)` pairs.
///
/// A directory whose subdirectories hold CSVs is one source per subdirectory (named after
/// it); a directory of CSV files is one source per file; a file is a single source.
pub fn discover(paths: &[PathBuf]) -> Result<Vec<(String, PathBuf)>, CliError> {
    let mut sources = Vec::new();
    for path in paths {
        if path.is_file() {
            sources.push((source_name_for(path), path.clone()));
            continue;
        }
        if !path.is_dir() {
            return Err(CliError::Data(format!("{}: no such file or directory", path.display())));
        }
        let entries = sorted_entries(path)?;
        let mut found = false;
        for sub in entries.iter().filter(|p| p.is_dir()) {
            if let Some(csv) = source_csv(sub)? {
                let name = sub.file_name().unwrap_or_default().to_string_lossy().into_owned();
                sources.push((name, csv));
                found = true;
            }
        }
        if !found {
            for csv in entries.iter().filter(|p| is_csv(p)) {
                sources.push((source_name_for(csv), csv.clone()));
                found = true;
            }
        }
        if !found {
            return Err(CliError::Data(format!("{}: no labeled CSV files found", path.display())));
        }
    }
    let mut names: Vec<&str> = sources.iter().map(|(n, _)| n.as_str()).collect();
    names.sort_unstable();
    if let Some(w) = names.windows(2).find(|w| w[0] == w[1]) {
        return Err(CliError::Data(format!("source {:?} given more than once", w[0])));
    }
    Ok(sources)
}

/// Loads one labeled CSV, reporting skipped rows on stderr.
pub fn load(name: &str, path: &Path, columns: &Columns) -> Result<LabeledDataset, CliError> {
    let raw = read_records(path, &columns.content_column, &columns.template_column)?;
    let dataset = LabeledDataset::from_records(name, &raw);
    for s in &dataset.skipped {
        eprintln!("{s}");
    }
    if !dataset.skipped.is_empty() {
        eprintln!(
            "{name}: {} of {} rows skipped (template did not align)",
            dataset.skipped.len(),
            raw.len()
        );
    }
    Ok(dataset)
}

pub fn load_all(paths: &[PathBuf], columns: &Columns) -> Result<Vec<LabeledDataset>, CliError> {
    discover(paths)?
        .iter()
        .map(|(name, path)| load(name, path, columns))
        .collect()
}
