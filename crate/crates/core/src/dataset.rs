//! Newline-delimited JSON ingestion of documents, spectra and ground truth.

use std::collections::{BTreeMap, BTreeSet};
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::corpus::{DocKind, RawDocument};
use crate::error::{Error, Result};
use crate::spectra::{ExecutionTrace, Outcome, ProgramSpectra};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub bug_id: String,
    pub test_id: String,
    pub outcome: Outcome,
    pub executed: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruthRecord {
    pub bug_id: String,
    pub faulty_methods: Vec<String>,
}

/// Parses one JSON object per non-blank line.
pub fn read_ndjson<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let value = serde_json::from_str(&line).map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            line: i + 1,
            message: e.to_string(),
        })?;
        out.push(value);
    }
    Ok(out)
}

pub fn write_ndjson<T: Serialize>(path: &Path, records: &[T]) -> Result<()> {
    let mut buf = Vec::new();
    for r in records {
        serde_json::to_writer(&mut buf, r).map_err(|e| Error::Data(e.to_string()))?;
        buf.push(b'\n');
    }
    let mut f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(&buf).map_err(|e| Error::io(path, e))
}

/// File locations of one project's data.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct DatasetPaths {
    pub bugs: std::path::PathBuf,
    pub methods: std::path::PathBuf,
    pub spectra: std::path::PathBuf,
    pub ground_truth: std::path::PathBuf,
}

/// A validated project: bug reports, methods, per-bug spectra and the faulty
/// methods of every localized bug. Collections are kept in id order so that
/// input ordering never affects results.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub bugs: Vec<RawDocument>,
    pub methods: Vec<RawDocument>,
    pub spectra: BTreeMap<String, ProgramSpectra>,
    pub ground_truth: BTreeMap<String, BTreeSet<String>>,
}

impl Dataset {
    pub fn load(paths: &DatasetPaths) -> Result<Self> {
        let bugs: Vec<RawDocument> = read_ndjson(&paths.bugs)?;
        let methods: Vec<RawDocument> = read_ndjson(&paths.methods)?;
        let traces: Vec<TraceRecord> = read_ndjson(&paths.spectra)?;
        let truth: Vec<GroundTruthRecord> = read_ndjson(&paths.ground_truth)?;
        Self::from_records(bugs, methods, traces, truth)
    }

    pub fn from_records(
        mut bugs: Vec<RawDocument>,
        mut methods: Vec<RawDocument>,
        traces: Vec<TraceRecord>,
        truth: Vec<GroundTruthRecord>,
    ) -> Result<Self> {
        check_documents(&mut bugs, DocKind::BugReport)?;
        check_documents(&mut methods, DocKind::Method)?;
        let bug_ids: BTreeSet<&str> = bugs.iter().map(|b| b.id.as_str()).collect();
        let method_ids: BTreeSet<&str> = methods.iter().map(|m| m.id.as_str()).collect();

        let mut grouped: BTreeMap<String, Vec<ExecutionTrace>> = BTreeMap::new();
        for t in traces {
            if !bug_ids.contains(t.bug_id.as_str()) {
                return Err(Error::Data(format!("spectra reference unknown bug {}", t.bug_id)));
            }
            if let Some(m) = t.executed.iter().find(|m| !method_ids.contains(m.as_str())) {
                return Err(Error::Data(format!(
                    "trace {} of bug {} executes unknown method {m}",
                    t.test_id, t.bug_id
                )));
            }
            grouped.entry(t.bug_id).or_default().push(ExecutionTrace {
                test_id: t.test_id,
                outcome: t.outcome,
                executed: t.executed.into_iter().collect(),
            });
        }
        let mut spectra = BTreeMap::new();
        for (bug, mut traces) in grouped {
            traces.sort_by(|a, b| a.test_id.cmp(&b.test_id));
            spectra.insert(bug.clone(), ProgramSpectra::new(bug, traces)?);
        }

        let mut ground_truth: BTreeMap<String, BTreeSet<String>> = BTreeMap::new();
        for r in truth {
            if !bug_ids.contains(r.bug_id.as_str()) {
                return Err(Error::Data(format!("ground truth for unknown bug {}", r.bug_id)));
            }
            if let Some(m) = r.faulty_methods.iter().find(|m| !method_ids.contains(m.as_str())) {
                return Err(Error::Data(format!(
                    "ground truth of bug {} names unknown method {m}",
                    r.bug_id
                )));
            }
            ground_truth
                .entry(r.bug_id)
                .or_default()
                .extend(r.faulty_methods);
        }
        ground_truth.retain(|_, faulty| !faulty.is_empty());

        Ok(Self {
            bugs,
            methods,
            spectra,
            ground_truth,
        })
    }

    /// Records in the on-disk shapes, for writing fixtures.
    pub fn to_records(&self) -> (Vec<TraceRecord>, Vec<GroundTruthRecord>) {
        let traces = self
            .spectra
            .iter()
            .flat_map(|(bug, p)| {
                p.traces().iter().map(move |t| TraceRecord {
                    bug_id: bug.clone(),
                    test_id: t.test_id.clone(),
                    outcome: t.outcome,
                    executed: t.executed.iter().cloned().collect(),
                })
            })
            .collect();
        let truth = self
            .ground_truth
            .iter()
            .map(|(bug, faulty)| GroundTruthRecord {
                bug_id: bug.clone(),
                faulty_methods: faulty.iter().cloned().collect(),
            })
            .collect();
        (traces, truth)
    }

    pub fn save(&self, paths: &DatasetPaths) -> Result<()> {
        let (traces, truth) = self.to_records();
        write_ndjson(&paths.bugs, &self.bugs)?;
        write_ndjson(&paths.methods, &self.methods)?;
        write_ndjson(&paths.spectra, &traces)?;
        write_ndjson(&paths.ground_truth, &truth)
    }

    /// Bugs usable in experiments: they have spectra and ground truth.
    pub fn localized_bugs(&self) -> Vec<&str> {
        self.bugs
            .iter()
            .map(|b| b.id.as_str())
            .filter(|b| self.spectra.contains_key(*b) && self.ground_truth.contains_key(*b))
            .collect()
    }
}

pub(crate) fn check_documents(docs: &mut [RawDocument], kind: DocKind) -> Result<()> {
    if let Some(d) = docs.iter().find(|d| d.kind != kind) {
        return Err(Error::Data(format!(
            "document {} has kind {:?}, expected {:?}",
            d.id, d.kind, kind
        )));
    }
    docs.sort_by(|a, b| a.id.cmp(&b.id));
    if let Some(w) = docs.windows(2).find(|w| w[0].id == w[1].id) {
        return Err(Error::Data(format!("duplicate document id {}", w[0].id)));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn doc(id: &str, kind: DocKind) -> RawDocument {
        RawDocument {
            id: id.into(),
            kind,
            fields: BTreeMap::from([("text".into(), id.into())]),
        }
    }

    #[test]
    fn parse_error_carries_line_number() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("docs.jsonl");
        std::fs::write(
            &p,
            "{\"id\":\"a\",\"kind\":\"method\",\"fields\":{}}\n\n{not json}\n",
        )
        .unwrap();
        let err = read_ndjson::<RawDocument>(&p).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 3, .. }), "{err}");
    }

    #[test]
    fn rejects_unknown_references_and_duplicates() {
        let bugs = vec![doc("b1", DocKind::BugReport)];
        let methods = vec![doc("m1", DocKind::Method)];
        let bad_trace = TraceRecord {
            bug_id: "b1".into(),
            test_id: "t".into(),
            outcome: Outcome::Fail,
            executed: vec!["m9".into()],
        };
        assert!(Dataset::from_records(bugs.clone(), methods.clone(), vec![bad_trace], vec![]).is_err());
        let dup = vec![doc("m1", DocKind::Method), doc("m1", DocKind::Method)];
        assert!(Dataset::from_records(bugs.clone(), dup, vec![], vec![]).is_err());
        let wrong_kind = vec![doc("m1", DocKind::BugReport)];
        assert!(Dataset::from_records(bugs, wrong_kind, vec![], vec![]).is_err());
    }

    #[test]
    fn roundtrip_through_files() {
        let bugs = vec![doc("b2", DocKind::BugReport), doc("b1", DocKind::BugReport)];
        let methods = vec![doc("m1", DocKind::Method), doc("m2", DocKind::Method)];
        let traces = vec![
            TraceRecord {
                bug_id: "b1".into(),
                test_id: "t2".into(),
                outcome: Outcome::Pass,
                executed: vec!["m2".into()],
            },
            TraceRecord {
                bug_id: "b1".into(),
                test_id: "t1".into(),
                outcome: Outcome::Fail,
                executed: vec!["m1".into(), "m2".into()],
            },
        ];
        let truth = vec![GroundTruthRecord {
            bug_id: "b1".into(),
            faulty_methods: vec!["m1".into()],
        }];
        let ds = Dataset::from_records(bugs, methods, traces, truth).unwrap();
        assert_eq!(ds.bugs[0].id, "b1");
        assert_eq!(ds.localized_bugs(), vec!["b1"]);

        let dir = tempfile::tempdir().unwrap();
        let paths = DatasetPaths {
            bugs: dir.path().join("bugs.jsonl"),
            methods: dir.path().join("methods.jsonl"),
            spectra: dir.path().join("spectra.jsonl"),
            ground_truth: dir.path().join("truth.jsonl"),
        };
        ds.save(&paths).unwrap();
        assert_eq!(Dataset::load(&paths).unwrap(), ds);
    }
}
