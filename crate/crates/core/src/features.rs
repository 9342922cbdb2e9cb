//! Per (bug, method) feature vectors: text similarity, Tarantula score of the
//! method, and suspiciousness-weighted word similarity.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use rayon::prelude::*;

use crate::corpus::{cosine_similarity, Corpus, Document, SparseVector};
use crate::error::{Error, Result};
use crate::integrator::instance_weights;
use crate::spectra::{tarantula_ratio, Outcome, ProgramSpectra};
use crate::NUM_FEATURES;

pub const FEATURE_NAMES: [&str; NUM_FEATURES] = ["text", "spectra", "suspword"];

pub type FeatureVector = [f64; NUM_FEATURES];

/// Cosine similarity of the two TF-IDF vectors.
pub fn feat_text(bug: &Document, method: &Document) -> f64 {
    cosine_similarity(&bug.tfidf, &method.tfidf)
}

/// Tarantula score of the method under the bug's spectra.
pub fn feat_spectra(method_id: &str, spectra: &ProgramSpectra) -> f64 {
    spectra.tarantula(method_id)
}

/// Suspiciousness of a word: Tarantula over the traces that execute at least
/// one method containing the word.
pub fn ss_word<S: AsRef<str>>(
    word: &str,
    spectra: &ProgramSpectra,
    method_words: &BTreeMap<String, BTreeSet<S>>,
) -> f64 {
    let mut fail_hit = 0;
    let mut pass_hit = 0;
    for t in spectra.traces() {
        let hit = t.executed.iter().any(|m| {
            method_words
                .get(m)
                .is_some_and(|ws| ws.iter().any(|w| w.as_ref() == word))
        });
        if hit {
            match t.outcome {
                Outcome::Fail => fail_hit += 1,
                Outcome::Pass => pass_hit += 1,
            }
        }
    }
    tarantula_ratio(fail_hit, spectra.n_fail(), pass_hit, spectra.n_pass())
}

/// ss_word for every corpus term under one bug's spectra.
#[derive(Debug, Clone)]
pub struct WordSuspiciousness {
    scores: Vec<f64>,
}

impl WordSuspiciousness {
    /// `method_terms` maps a method id to the corpus term ids of its words.
    pub fn compute(
        spectra: &ProgramSpectra,
        method_terms: &BTreeMap<&str, Vec<u32>>,
        vocabulary_len: usize,
    ) -> Self {
        let mut fail_hits = vec![0usize; vocabulary_len];
        let mut pass_hits = vec![0usize; vocabulary_len];
        let mut seen = vec![false; vocabulary_len];
        let mut touched = Vec::new();
        for t in spectra.traces() {
            for m in &t.executed {
                for &term in method_terms.get(m.as_str()).into_iter().flatten() {
                    if !seen[term as usize] {
                        seen[term as usize] = true;
                        touched.push(term);
                    }
                }
            }
            let hits = match t.outcome {
                Outcome::Fail => &mut fail_hits,
                Outcome::Pass => &mut pass_hits,
            };
            for &term in &touched {
                hits[term as usize] += 1;
                seen[term as usize] = false;
            }
            touched.clear();
        }
        let scores = fail_hits
            .iter()
            .zip(&pass_hits)
            .map(|(&f, &p)| tarantula_ratio(f, spectra.n_fail(), p, spectra.n_pass()))
            .collect();
        Self { scores }
    }

    pub fn score(&self, term: u32) -> f64 {
        self.scores.get(term as usize).copied().unwrap_or(0.0)
    }

    /// SSTFIDF weights of a document: ss_word * TF-IDF, per term.
    pub fn weigh(&self, tfidf: &SparseVector) -> SparseVector {
        tfidf.map_weights(|term, w| self.score(term) * w)
    }
}

/// SS_word(w) * ln(f(w,d)+1) * ln(|C|/df(w)).
pub fn sstfidf(word: &str, ss: &WordSuspiciousness, doc: &Document, corpus: &Corpus) -> f64 {
    match corpus.term_id(word) {
        Some(term) => ss.score(term) * corpus.tfidf_weight(word, &doc.token_counts),
        None => 0.0,
    }
}

/// Tarantula(m) times the cosine of the SSTFIDF vectors of bug and method.
pub fn feat_suspword(
    bug: &Document,
    method: &Document,
    ss: &WordSuspiciousness,
    spectra_score: f64,
) -> f64 {
    if spectra_score == 0.0 {
        return 0.0;
    }
    spectra_score * cosine_similarity(&ss.weigh(&bug.tfidf), &ss.weigh(&method.tfidf))
}

/// Corpus term ids of each method's words.
pub fn method_terms<'a>(methods: &'a [Document], corpus: &Corpus) -> BTreeMap<&'a str, Vec<u32>> {
    methods
        .iter()
        .map(|m| {
            let terms = m
                .token_counts
                .keys()
                .filter_map(|w| corpus.term_id(w))
                .collect();
            (m.id.as_str(), terms)
        })
        .collect()
}

/// Features, labels and instance weights for a bugs x methods grid.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureTensor {
    bugs: Vec<String>,
    methods: Vec<String>,
    bug_index: BTreeMap<String, usize>,
    method_index: BTreeMap<String, usize>,
    x: Vec<FeatureVector>,
    labels: Vec<Option<bool>>,
    weights: Vec<Option<f64>>,
}

impl FeatureTensor {
    pub fn new(
        bugs: Vec<String>,
        methods: Vec<String>,
        x: Vec<FeatureVector>,
        labels: Vec<Option<bool>>,
        weights: Vec<Option<f64>>,
    ) -> Result<Self> {
        let cells = bugs.len() * methods.len();
        if x.len() != cells || labels.len() != cells || weights.len() != cells {
            return Err(Error::Data(format!(
                "tensor shape mismatch: {} x {} grid with {} features, {} labels, {} weights",
                bugs.len(),
                methods.len(),
                x.len(),
                labels.len(),
                weights.len()
            )));
        }
        if x.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::Data("non-finite feature value".into()));
        }
        let bug_index = bugs.iter().enumerate().map(|(i, b)| (b.clone(), i)).collect();
        let method_index = methods.iter().enumerate().map(|(i, m)| (m.clone(), i)).collect();
        Ok(Self {
            bugs,
            methods,
            bug_index,
            method_index,
            x,
            labels,
            weights,
        })
    }

    pub fn bugs(&self) -> &[String] {
        &self.bugs
    }

    pub fn methods(&self) -> &[String] {
        &self.methods
    }

    pub fn bug_position(&self, id: &str) -> Option<usize> {
        self.bug_index.get(id).copied()
    }

    pub fn method_position(&self, id: &str) -> Option<usize> {
        self.method_index.get(id).copied()
    }

    fn cell(&self, bug: usize, method: usize) -> usize {
        bug * self.methods.len() + method
    }

    pub fn features(&self, bug: usize, method: usize) -> &FeatureVector {
        &self.x[self.cell(bug, method)]
    }

    pub fn label(&self, bug: usize, method: usize) -> Option<bool> {
        self.labels[self.cell(bug, method)]
    }

    pub fn weight(&self, bug: usize, method: usize) -> Option<f64> {
        self.weights[self.cell(bug, method)]
    }

    pub fn row(&self, bug: usize) -> &[FeatureVector] {
        let n = self.methods.len();
        &self.x[bug * n..(bug + 1) * n]
    }

    pub fn row_labels(&self, bug: usize) -> &[Option<bool>] {
        let n = self.methods.len();
        &self.labels[bug * n..(bug + 1) * n]
    }

    /// Copy with feature column `j` set to zero everywhere (ablation).
    pub fn with_zeroed_feature(&self, j: usize) -> Self {
        let mut out = self.clone();
        for v in &mut out.x {
            v[j] = 0.0;
        }
        out
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path).map_err(|e| csv_error(path, e))?;
        w.write_record([
            "bug_id",
            "method_id",
            "f_text",
            "f_spectra",
            "f_suspword",
            "label",
            "weight",
        ])
        .map_err(|e| csv_error(path, e))?;
        for (b, bug) in self.bugs.iter().enumerate() {
            for (m, method) in self.methods.iter().enumerate() {
                let x = self.features(b, m);
                let label = match self.label(b, m) {
                    Some(true) => "1".to_string(),
                    Some(false) => "0".to_string(),
                    None => "NA".to_string(),
                };
                let weight = self
                    .weight(b, m)
                    .map(|w| w.to_string())
                    .unwrap_or_else(|| "NA".into());
                w.write_record([
                    bug.as_str(),
                    method.as_str(),
                    &x[0].to_string(),
                    &x[1].to_string(),
                    &x[2].to_string(),
                    &label,
                    &weight,
                ])
                .map_err(|e| csv_error(path, e))?;
            }
        }
        w.flush().map_err(|e| Error::io(path, e))
    }

    /// Reads a grid written by [`FeatureTensor::write_csv`]. Rows may come in
    /// any order but must cover the full bugs x methods grid exactly once.
    pub fn read_csv(path: &Path) -> Result<Self> {
        let mut r = csv::Reader::from_path(path).map_err(|e| csv_error(path, e))?;
        let mut cells: BTreeMap<(String, String), (FeatureVector, Option<bool>, Option<f64>)> =
            BTreeMap::new();
        for (i, rec) in r.records().enumerate() {
            let line = i + 2;
            let rec = rec.map_err(|e| csv_error(path, e))?;
            let parse_err = |message: String| Error::Parse {
                path: path.to_path_buf(),
                line,
                message,
            };
            if rec.len() != 7 {
                return Err(parse_err(format!("expected 7 columns, found {}", rec.len())));
            }
            let num = |s: &str| -> Result<f64> {
                s.parse::<f64>().map_err(|e| parse_err(format!("{s:?}: {e}")))
            };
            let x = [num(&rec[2])?, num(&rec[3])?, num(&rec[4])?];
            let label = match &rec[5] {
                "1" => Some(true),
                "0" => Some(false),
                "NA" => None,
                other => return Err(parse_err(format!("bad label {other:?}"))),
            };
            let weight = match &rec[6] {
                "NA" => None,
                s => Some(num(s)?),
            };
            if cells
                .insert((rec[0].to_string(), rec[1].to_string()), (x, label, weight))
                .is_some()
            {
                return Err(parse_err(format!("duplicate cell ({}, {})", &rec[0], &rec[1])));
            }
        }
        let bugs: Vec<String> = cells.keys().map(|k| k.0.clone()).collect::<BTreeSet<_>>().into_iter().collect();
        let methods: Vec<String> = cells.keys().map(|k| k.1.clone()).collect::<BTreeSet<_>>().into_iter().collect();
        if cells.len() != bugs.len() * methods.len() {
            return Err(Error::Data(format!("{}: incomplete feature grid", path.display())));
        }
        let mut x = Vec::with_capacity(cells.len());
        let mut labels = Vec::with_capacity(cells.len());
        let mut weights = Vec::with_capacity(cells.len());
        for (_, (v, l, w)) in cells {
            x.push(v);
            labels.push(l);
            weights.push(w);
        }
        Self::new(bugs, methods, x, labels, weights)
    }
}

fn csv_error(path: &Path, e: csv::Error) -> Error {
    Error::Data(format!("{}: {e}", path.display()))
}

/// Assembles the feature grid for `bugs` x `methods`.
///
/// Bugs in `queries` get absent labels; every other bug must have ground truth.
/// Every bug needs spectra. Instance weights are computed over all labeled
/// cells.
pub fn build_feature_tensor(
    bugs: &[Document],
    methods: &[Document],
    spectra_by_bug: &BTreeMap<String, ProgramSpectra>,
    corpus: &Corpus,
    ground_truth: &BTreeMap<String, BTreeSet<String>>,
    queries: &BTreeSet<String>,
) -> Result<FeatureTensor> {
    for b in bugs {
        if !spectra_by_bug.contains_key(&b.id) {
            return Err(Error::MissingSpectra(b.id.clone()));
        }
        if !queries.contains(&b.id) && !ground_truth.contains_key(&b.id) {
            return Err(Error::MissingLabels(b.id.clone()));
        }
    }
    let terms = method_terms(methods, corpus);
    let rows: Vec<(Vec<FeatureVector>, Vec<Option<bool>>)> = bugs
        .par_iter()
        .map(|b| {
            let spectra = &spectra_by_bug[&b.id];
            let ss = WordSuspiciousness::compute(spectra, &terms, corpus.vocabulary_len());
            let bug_sst = ss.weigh(&b.tfidf);
            let table = spectra.stats_table();
            let unexecuted = spectra.unexecuted_stats();
            let faulty = ground_truth.get(&b.id);
            let is_query = queries.contains(&b.id);
            methods
                .iter()
                .map(|m| {
                    let text = feat_text(b, m);
                    let spec = table
                        .get(m.id.as_str())
                        .copied()
                        .unwrap_or(unexecuted)
                        .tarantula();
                    let susp = if spec == 0.0 {
                        0.0
                    } else {
                        spec * cosine_similarity(&bug_sst, &ss.weigh(&m.tfidf))
                    };
                    let label = if is_query {
                        None
                    } else {
                        Some(faulty.is_some_and(|f| f.contains(&m.id)))
                    };
                    ([text, spec, susp], label)
                })
                .unzip()
        })
        .collect();

    let mut x = Vec::with_capacity(bugs.len() * methods.len());
    let mut labels = Vec::with_capacity(bugs.len() * methods.len());
    for (rx, rl) in rows {
        x.extend(rx);
        labels.extend(rl);
    }
    let observed: Vec<bool> = labels.iter().flatten().copied().collect();
    let weights = if observed.is_empty() {
        vec![None; labels.len()]
    } else {
        let w = instance_weights(&observed)?;
        labels.iter().map(|l| l.map(|y| w.weight(y))).collect()
    };
    FeatureTensor::new(
        bugs.iter().map(|b| b.id.clone()).collect(),
        methods.iter().map(|m| m.id.clone()).collect(),
        x,
        labels,
        weights,
    )
}
