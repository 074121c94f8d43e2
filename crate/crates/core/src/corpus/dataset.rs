use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::align::{Label, TemplateMatcher};
use super::tokenize::{tokenize, TokenizedMessage};
use crate::error::{Error, Result};

pub const DEFAULT_CONTENT_COLUMN: &str = "Content";
pub const DEFAULT_TEMPLATE_COLUMN: &str = "EventTemplate";
const LINE_ID_COLUMN: &str = "LineId";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RawRecord {
    pub line_id: u64,
    pub content: String,
    pub template: String,
}

/// A tokenized message with one ground-truth label per token.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabeledMessage {
    pub line_id: u64,
    pub message: TokenizedMessage,
    pub labels: Vec<Label>,
    /// Ground-truth template the labels were derived from.
    pub template: String,
}

impl LabeledMessage {
    pub fn from_record(record: &RawRecord) -> Result<Self> {
        let matcher = TemplateMatcher::new(&record.template)?;
        Self::with_matcher(record, &matcher)
    }

    fn with_matcher(record: &RawRecord, matcher: &TemplateMatcher) -> Result<Self> {
        let message = tokenize(&record.content);
        if message.is_empty() {
            return Err(Error::EmptyMessage);
        }
        let labels = matcher.align(&message)?.labels;
        Ok(LabeledMessage {
            line_id: record.line_id,
            message,
            labels,
            template: record.template.clone(),
        })
    }

    pub fn group_key(&self) -> GroupKey {
        GroupKey::of(&self.message)
    }
}

/// Messages sharing a key are treated as similar by the contrastive objective.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct GroupKey {
    pub token_count: usize,
    pub first_token: String,
}

impl GroupKey {
    pub fn of(message: &TokenizedMessage) -> GroupKey {
        GroupKey {
            token_count: message.len(),
            first_token: message
                .tokens
                .first()
                .map(|t| t.text.clone())
                .unwrap_or_default(),
        }
    }
}

/// Groups in order of first appearance; indices within a group in file order.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Groups {
    keys: Vec<GroupKey>,
    members: Vec<Vec<usize>>,
    group_of: Vec<usize>,
}

impl Groups {
    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn message_count(&self) -> usize {
        self.group_of.len()
    }

    pub fn group_of(&self, index: usize) -> usize {
        self.group_of[index]
    }

    pub fn members(&self, group: usize) -> &[usize] {
        &self.members[group]
    }

    pub fn key(&self, group: usize) -> &GroupKey {
        &self.keys[group]
    }

    pub fn iter(&self) -> impl Iterator<Item = (&GroupKey, &[usize])> {
        self.keys.iter().zip(self.members.iter().map(Vec::as_slice))
    }

    pub fn to_map(&self) -> BTreeMap<GroupKey, Vec<usize>> {
        self.iter().map(|(k, v)| (k.clone(), v.to_vec())).collect()
    }
}

pub fn build_groups(records: &[LabeledMessage]) -> Groups {
    build_groups_from(records.iter().map(|r| &r.message))
}

pub fn build_groups_from<'a>(messages: impl IntoIterator<Item = &'a TokenizedMessage>) -> Groups {
    let mut index: HashMap<GroupKey, usize> = HashMap::new();
    let mut groups = Groups::default();
    for (i, m) in messages.into_iter().enumerate() {
        let key = GroupKey::of(m);
        let g = *index.entry(key.clone()).or_insert_with(|| {
            groups.keys.push(key);
            groups.members.push(Vec::new());
            groups.members.len() - 1
        });
        groups.members[g].push(i);
        groups.group_of.push(g);
    }
    groups
}

/// A row that could not be turned into a labeled message.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Skipped {
    pub line_id: u64,
    pub reason: String,
}

impl fmt::Display for Skipped {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "SKIP {}: {}", self.line_id, self.reason)
    }
}

#[derive(Debug, Clone)]
pub struct LabeledDataset {
    pub source_name: String,
    pub records: Vec<LabeledMessage>,
    pub groups: Groups,
    pub skipped: Vec<Skipped>,
}

impl LabeledDataset {
    pub fn from_records(source_name: impl Into<String>, raw: &[RawRecord]) -> LabeledDataset {
        let mut matchers: HashMap<&str, std::result::Result<TemplateMatcher, String>> =
            HashMap::new();
        let mut records = Vec::with_capacity(raw.len());
        let mut skipped = Vec::new();
        for r in raw {
            let matcher = matchers
                .entry(r.template.as_str())
                .or_insert_with(|| TemplateMatcher::new(&r.template).map_err(|e| e.to_string()));
            let labeled = match matcher {
                Ok(m) => LabeledMessage::with_matcher(r, m).map_err(|e| e.to_string()),
                Err(e) => Err(e.clone()),
            };
            match labeled {
                Ok(l) => records.push(l),
                Err(reason) => skipped.push(Skipped {
                    line_id: r.line_id,
                    reason,
                }),
            }
        }
        Self::from_labeled(source_name, records, skipped)
    }

    pub fn from_labeled(
        source_name: impl Into<String>,
        records: Vec<LabeledMessage>,
        skipped: Vec<Skipped>,
    ) -> LabeledDataset {
        let groups = build_groups(&records);
        LabeledDataset {
            source_name: source_name.into(),
            records,
            groups,
            skipped,
        }
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Keeps the first `cap` records and rebuilds groups.
    pub fn truncated(&self, cap: usize) -> LabeledDataset {
        let records = self.records.iter().take(cap).cloned().collect();
        Self::from_labeled(self.source_name.clone(), records, self.skipped.clone())
    }
}

/// Reads `(line_id, content, template)` rows from a CSV file with a header row.
///
/// Line ids come from a `LineId` column when present, otherwise the 1-based row number.
pub fn read_records(path: &Path, content_column: &str, template_column: &str) -> Result<Vec<RawRecord>> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new().flexible(true).from_reader(file);
    let headers = reader.headers().map_err(|e| Error::csv(path, e))?.clone();
    let column = |name: &str| {
        headers
            .iter()
            .position(|h| h.trim() == name)
            .ok_or_else(|| Error::MissingColumn {
                path: path.to_path_buf(),
                column: name.to_string(),
            })
    };
    let content_idx = column(content_column)?;
    let template_idx = column(template_column)?;
    let line_idx = column(LINE_ID_COLUMN).ok();

    let mut out = Vec::new();
    for (row, rec) in reader.records().enumerate() {
        let rec = rec.map_err(|e| Error::csv(path, e))?;
        let line_id = line_idx
            .and_then(|i| rec.get(i))
            .and_then(|s| s.trim().parse().ok())
            .unwrap_or(row as u64 + 1);
        out.push(RawRecord {
            line_id,
            content: rec.get(content_idx).unwrap_or_default().to_string(),
            template: rec.get(template_idx).unwrap_or_default().to_string(),
        });
    }
    Ok(out)
}

/// Loads a labeled dataset; rows that fail alignment are skipped and listed in `skipped`.
pub fn load_dataset(path: &Path, content_column: &str, template_column: &str) -> Result<LabeledDataset> {
    let raw = read_records(path, content_column, template_column)?;
    Ok(LabeledDataset::from_records(source_name_for(path), &raw))
}

/// `HDFS_2k.log_structured.csv` -> `HDFS`.
pub fn source_name_for(path: &Path) -> String {
    let stem = path
        .file_name()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    let base = stem.split('.').next().unwrap_or(&stem);
    let base = base.strip_suffix("_structured").unwrap_or(base);
    base.split('_').next().unwrap_or(base).to_string()
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn write_csv(body: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::Builder::new().suffix(".csv").tempfile().unwrap();
        f.write_all(body.as_bytes()).unwrap();
        f
    }

    fn labeled(raw: &str) -> LabeledMessage {
        LabeledMessage::from_record(&RawRecord {
            line_id: 1,
            content: raw.into(),
            template: raw.into(),
        })
        .unwrap()
    }

    #[test]
    fn single_row_single_token() {
        let f = write_csv("LineId,Content,EventTemplate\n1,x,x\n");
        let ds = load_dataset(f.path(), "Content", "EventTemplate").unwrap();
        assert_eq!(ds.len(), 1);
        assert_eq!(ds.records[0].labels, vec![Label::Template]);
    }

    #[test]
    fn missing_column_is_named() {
        let f = write_csv("LineId,Content\n1,x\n");
        match load_dataset(f.path(), "Content", "EventTemplate").unwrap_err() {
            Error::MissingColumn { column, .. } => assert_eq!(column, "EventTemplate"),
            e => panic!("unexpected {e}"),
        }
    }

    #[test]
    fn missing_file() {
        let err = load_dataset(Path::new("/nonexistent/x.csv"), "Content", "EventTemplate");
        assert!(matches!(err, Err(Error::Io { .. })));
    }

    #[test]
    fn alignment_failures_are_skipped_and_reported() {
        let f = write_csv(concat!(
            "LineId,Content,EventId,EventTemplate\n",
            "1,Connected to 10.0.0.1,E1,Connected to <*>\n",
            "2,Disconnected now,E2,Connected to <*>\n",
            "3,\"a, b\",E3,\"a, <*>\"\n",
            "4,   ,E4,<*>\n",
        ));
        let ds = load_dataset(f.path(), "Content", "EventTemplate").unwrap();
        assert_eq!(ds.len(), 2);
        assert_eq!(ds.records[1].message.raw, "a, b");
        let lines: Vec<u64> = ds.skipped.iter().map(|s| s.line_id).collect();
        assert_eq!(lines, vec![2, 4]);
        assert!(ds.skipped[0].to_string().starts_with("SKIP 2: "));
    }

    #[test]
    fn groups_by_length_and_first_token() {
        let recs = vec![labeled("a b c"), labeled("a x y"), labeled("b a"), labeled("a b")];
        let g = build_groups(&recs);
        assert_eq!(g.len(), 3);
        assert_eq!(g.group_of(0), g.group_of(1));
        assert_ne!(g.group_of(2), g.group_of(3));
        assert_eq!(g.members(0), &[0, 1]);
        assert_eq!(
            g.key(0),
            &GroupKey {
                token_count: 3,
                first_token: "a".into()
            }
        );
    }

    #[test]
    fn groups_partition_indices() {
        let recs: Vec<_> = ["a", "a b", "b", "a c", "a", "q r s"]
            .iter()
            .map(|s| labeled(s))
            .collect();
        let g = build_groups(&recs);
        let mut all: Vec<usize> = g.iter().flat_map(|(_, m)| m.iter().copied()).collect();
        all.sort();
        assert_eq!(all, (0..recs.len()).collect::<Vec<_>>());
    }

    #[test]
    fn source_names() {
        assert_eq!(source_name_for(Path::new("d/HDFS_2k.log_structured.csv")), "HDFS");
        assert_eq!(source_name_for(Path::new("Android.csv")), "Android");
    }
}
