use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedEntry {
    pub rank: usize,
    pub method_id: String,
    pub score: f64,
}

/// Methods of one query in descending score order, ranks starting at 1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedList {
    pub bug_id: String,
    pub entries: Vec<RankedEntry>,
}

/// Sorts by descending score with ascending method id among ties.
pub fn rank_methods<S: AsRef<str>>(bug_id: &str, scores: &[(S, f64)]) -> RankedList {
    let mut order: Vec<(&str, f64)> = scores.iter().map(|(m, s)| (m.as_ref(), *s)).collect();
    order.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(b.0)));
    RankedList {
        bug_id: bug_id.to_string(),
        entries: order
            .into_iter()
            .enumerate()
            .map(|(i, (m, s))| RankedEntry {
                rank: i + 1,
                method_id: m.to_string(),
                score: s,
            })
            .collect(),
    }
}

impl RankedList {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn rank_of(&self, method_id: &str) -> Option<usize> {
        self.entries
            .iter()
            .find(|e| e.method_id == method_id)
            .map(|e| e.rank)
    }

    /// Rank of the best-placed faulty method.
    pub fn best_faulty_rank(&self, faulty: &BTreeSet<String>) -> Option<usize> {
        self.entries
            .iter()
            .find(|e| faulty.contains(&e.method_id))
            .map(|e| e.rank)
    }

    /// Appends rows (bug_id, rank, method_id, score) to a CSV writer.
    pub fn write_rows<W: std::io::Write>(&self, w: &mut csv::Writer<W>) -> csv::Result<()> {
        for e in &self.entries {
            w.write_record([
                self.bug_id.as_str(),
                &e.rank.to_string(),
                e.method_id.as_str(),
                &e.score.to_string(),
            ])?;
        }
        Ok(())
    }
}

pub fn write_ranked_lists(path: &Path, lists: &[RankedList]) -> Result<()> {
    let err = |e: csv::Error| Error::Data(format!("{}: {e}", path.display()));
    let mut w = csv::Writer::from_path(path).map_err(err)?;
    w.write_record(["bug_id", "rank", "method_id", "score"]).map_err(err)?;
    for l in lists {
        l.write_rows(&mut w).map_err(err)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// True when some faulty method sits at rank <= n.
pub fn top_n_hit(ranked: &RankedList, faulty: &BTreeSet<String>, n: usize) -> bool {
    ranked.best_faulty_rank(faulty).is_some_and(|r| r <= n)
}

/// Mean of precision-at-k over the ranks of the faulty methods.
pub fn average_precision(ranked: &RankedList, faulty: &BTreeSet<String>) -> Result<f64> {
    if faulty.is_empty() {
        return Err(Error::Data(format!("bug {} has no faulty methods", ranked.bug_id)));
    }
    let present: BTreeSet<&str> = ranked.entries.iter().map(|e| e.method_id.as_str()).collect();
    if let Some(missing) = faulty.iter().find(|f| !present.contains(f.as_str())) {
        return Err(Error::MissingFaulty {
            bug_id: ranked.bug_id.clone(),
            method_id: missing.clone(),
        });
    }
    let mut hits = 0usize;
    let mut sum = 0.0;
    for (k, e) in ranked.entries.iter().enumerate() {
        if faulty.contains(&e.method_id) {
            hits += 1;
            sum += hits as f64 / (k + 1) as f64;
        }
    }
    Ok(sum / hits as f64)
}

pub fn mean_average_precision(aps: &[f64]) -> Result<f64> {
    if aps.is_empty() {
        return Err(Error::Data("MAP of an empty set".into()));
    }
    Ok(aps.iter().sum::<f64>() / aps.len() as f64)
}

/// Per-bug outcome of one ranking.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BugOutcome {
    pub average_precision: f64,
    pub best_rank: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ClassDelta {
    pub count: usize,
    /// Mean of AP_a - AP_b over the class; 0 when the class is empty.
    pub expected_delta_ap: f64,
    /// Mean of rank_b - rank_a over the class; 0 when the class is empty.
    pub expected_delta_rank: f64,
    pub empty: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DeltaAnalysis {
    pub improved: ClassDelta,
    pub deteriorated: ClassDelta,
    pub unchanged: usize,
}

/// Classifies each bug by whether `a` places its best faulty method above
/// (improved), below (deteriorated) or level with `b`.
pub fn delta_analysis(
    a: &BTreeMap<String, BugOutcome>,
    b: &BTreeMap<String, BugOutcome>,
) -> Result<DeltaAnalysis> {
    if a.len() != b.len() || a.keys().any(|k| !b.contains_key(k)) {
        return Err(Error::Data("delta analysis needs the same bugs on both sides".into()));
    }
    let mut improved = Vec::new();
    let mut deteriorated = Vec::new();
    let mut unchanged = 0;
    for (bug, oa) in a {
        let ob = &b[bug];
        let d = (
            oa.average_precision - ob.average_precision,
            ob.best_rank as f64 - oa.best_rank as f64,
        );
        match oa.best_rank.cmp(&ob.best_rank) {
            std::cmp::Ordering::Less => improved.push(d),
            std::cmp::Ordering::Greater => deteriorated.push(d),
            std::cmp::Ordering::Equal => unchanged += 1,
        }
    }
    let summarize = |ds: &[(f64, f64)]| {
        if ds.is_empty() {
            return ClassDelta {
                empty: true,
                ..ClassDelta::default()
            };
        }
        let n = ds.len() as f64;
        ClassDelta {
            count: ds.len(),
            expected_delta_ap: ds.iter().map(|d| d.0).sum::<f64>() / n,
            expected_delta_rank: ds.iter().map(|d| d.1).sum::<f64>() / n,
            empty: false,
        }
    };
    Ok(DeltaAnalysis {
        improved: summarize(&improved),
        deteriorated: summarize(&deteriorated),
        unchanged,
    })
}
