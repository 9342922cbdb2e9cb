//! End-to-end localization: corpus, graphs and features for a dataset, then
//! per-query ranking under any of the supported models.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::aml::{aml_fit, aml_score, AmlConfig};
use crate::corpus::{count_tokens, Corpus, DocKind, Document, PreprocessConfig, TokenCounts};
use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::evaluation::{rank_methods, RankedList};
use crate::features::{build_feature_tensor, FeatureTensor};
use crate::graphs::{build_similarity_graph, SimilarityGraph, SparsifyRule};
use crate::integrator::{fit, HyperParams, Problem};
use crate::spectra::{score_elements, SbflFormula};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Model {
    Netml,
    Aml,
    Tarantula,
    Ochiai,
    Dstar,
}

impl Model {
    pub const ALL: [Model; 5] = [Model::Netml, Model::Aml, Model::Tarantula, Model::Ochiai, Model::Dstar];

    /// Whether the model learns from historical bugs.
    pub fn is_supervised(self) -> bool {
        matches!(self, Model::Netml | Model::Aml)
    }

    pub fn name(self) -> &'static str {
        match self {
            Model::Netml => "netml",
            Model::Aml => "aml",
            Model::Tarantula => "tarantula",
            Model::Ochiai => "ochiai",
            Model::Dstar => "dstar",
        }
    }
}

impl fmt::Display for Model {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Model {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Model::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown model {s:?}")))
    }
}

/// Everything needed to turn a query into a ranking.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSettings {
    pub model: Model,
    pub hp: HyperParams,
    pub aml: AmlConfig,
    /// Exponent of D*.
    pub dstar: u32,
    pub seed: u64,
}

impl Default for ModelSettings {
    fn default() -> Self {
        Self {
            model: Model::Netml,
            hp: HyperParams::default(),
            aml: AmlConfig::default(),
            dstar: 2,
            seed: 0,
        }
    }
}

/// A deterministic seed for the named substream of `seed`.
pub fn substream_seed(seed: u64, name: &str) -> u64 {
    // FNV-1a over the name, then a splitmix64 finalizer over the mix.
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for byte in name.bytes() {
        h ^= byte as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    let mut z = seed ^ h.rotate_left(17);
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Preprocessed corpus, graphs and features of one dataset.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub dataset: Dataset,
    /// Corpus of method documents; every TF-IDF vector is weighted against it.
    pub corpus: Corpus,
    /// Bug reports vectorized against the method corpus.
    pub bug_docs: Vec<Document>,
    pub bug_graph: SimilarityGraph,
    pub method_graph: SimilarityGraph,
    /// Every bug with spectra against every method. Bugs without ground
    /// truth have unlabeled rows.
    pub tensor: FeatureTensor,
}

fn counts_of(docs: &[crate::corpus::RawDocument], cfg: &PreprocessConfig) -> Vec<(String, DocKind, TokenCounts)> {
    docs.iter()
        .map(|d| (d.id.clone(), d.kind, count_tokens(d.tokens(cfg))))
        .collect()
}

impl Prepared {
    pub fn new(dataset: Dataset, cfg: &PreprocessConfig, sparsify: SparsifyRule) -> Result<Self> {
        let corpus = Corpus::build(counts_of(&dataset.methods, cfg));
        let bug_counts = counts_of(&dataset.bugs, cfg);
        // Bug-to-bug similarity is measured within the bug-report corpus.
        let bug_corpus = Corpus::build(bug_counts.clone());
        let bug_graph = build_similarity_graph(bug_corpus.documents(), sparsify);
        let method_graph = build_similarity_graph(corpus.documents(), sparsify);
        let bug_docs: Vec<Document> = bug_counts
            .into_iter()
            .map(|(id, kind, counts)| corpus.document_for(id, kind, counts))
            .collect();
        let with_spectra: Vec<Document> = bug_docs
            .iter()
            .filter(|d| dataset.spectra.contains_key(&d.id))
            .cloned()
            .collect();
        let queries: BTreeSet<String> = with_spectra
            .iter()
            .filter(|d| !dataset.ground_truth.contains_key(&d.id))
            .map(|d| d.id.clone())
            .collect();
        let tensor = build_feature_tensor(
            &with_spectra,
            corpus.documents(),
            &dataset.spectra,
            &corpus,
            &dataset.ground_truth,
            &queries,
        )?;
        Ok(Self {
            dataset,
            corpus,
            bug_docs,
            bug_graph,
            method_graph,
            tensor,
        })
    }

    /// A copy whose feature column `j` is zero everywhere.
    pub fn with_zeroed_feature(&self, j: usize) -> Self {
        Self {
            tensor: self.tensor.with_zeroed_feature(j),
            ..self.clone()
        }
    }

    /// Ranks methods for `query` using `history` as training bugs.
    ///
    /// When `restrict` is given only those methods are ranked; training still
    /// sees every method.
    pub fn localize(
        &self,
        query: &str,
        history: &[&str],
        settings: &ModelSettings,
        restrict: Option<&BTreeSet<String>>,
    ) -> Result<RankedList> {
        if self.bug_graph.position(query).is_none() {
            return Err(Error::UnknownBug(query.to_string()));
        }
        let spectra = self
            .dataset
            .spectra
            .get(query)
            .ok_or_else(|| Error::MissingSpectra(query.to_string()))?;
        let methods = self.tensor.methods();
        let scores: Vec<(String, f64)> = match settings.model {
            Model::Tarantula | Model::Ochiai | Model::Dstar => {
                let formula = match settings.model {
                    Model::Tarantula => SbflFormula::Tarantula,
                    Model::Ochiai => SbflFormula::Ochiai,
                    _ => SbflFormula::Dstar,
                };
                score_elements(spectra, methods.iter().map(String::as_str), formula, settings.dstar)
                    .into_iter()
                    .map(|(m, s)| (m.to_string(), s))
                    .collect()
            }
            Model::Netml | Model::Aml => {
                let candidates: Vec<&str> = history
                    .iter()
                    .copied()
                    .filter(|b| *b != query && self.tensor.bug_position(b).is_some())
                    .collect();
                if candidates.is_empty() {
                    return Err(Error::EmptyHistory);
                }
                settings.hp.validate()?;
                let neighbors = self
                    .bug_graph
                    .top_k_neighbors(query, settings.hp.k, Some(&candidates))?;
                if settings.model == Model::Netml {
                    self.netml_scores(query, &neighbors, &settings.hp)?
                } else {
                    self.aml_scores(query, &neighbors, settings)?
                }
            }
        };
        let kept: Vec<(String, f64)> = match restrict {
            Some(r) => scores.into_iter().filter(|(m, _)| r.contains(m)).collect(),
            None => scores,
        };
        Ok(rank_methods(query, &kept))
    }

    fn netml_scores(&self, query: &str, neighbors: &[String], hp: &HyperParams) -> Result<Vec<(String, f64)>> {
        let problem = Problem::for_query(&self.tensor, query, neighbors, &self.bug_graph, &self.method_graph)?;
        let outcome = fit(&problem, hp)?;
        let row = problem
            .bugs()
            .iter()
            .position(|b| b == query)
            .expect("query is part of its own problem");
        Ok(problem
            .methods()
            .iter()
            .cloned()
            .zip(outcome.scores(&problem, row))
            .collect())
    }

    fn aml_scores(&self, query: &str, neighbors: &[String], settings: &ModelSettings) -> Result<Vec<(String, f64)>> {
        let mut xs = Vec::new();
        let mut ys = Vec::new();
        let mut sorted: Vec<&String> = neighbors.iter().collect();
        sorted.sort();
        for b in sorted {
            let row = self
                .tensor
                .bug_position(b)
                .ok_or_else(|| Error::UnknownBug(b.clone()))?;
            for (x, y) in self.tensor.row(row).iter().zip(self.tensor.row_labels(row)) {
                let y = y.ok_or_else(|| Error::MissingLabels(b.clone()))?;
                xs.push(*x);
                ys.push(y);
            }
        }
        let seed = substream_seed(settings.seed, &format!("aml/{query}"));
        let params = aml_fit(&xs, &ys, &settings.aml, seed)?;
        let q = self
            .tensor
            .bug_position(query)
            .ok_or_else(|| Error::MissingSpectra(query.to_string()))?;
        Ok(self
            .tensor
            .methods()
            .iter()
            .cloned()
            .zip(self.tensor.row(q).iter().map(|x| aml_score(x, &params.theta)))
            .collect())
    }
}

/// Joins two projects into one dataset; ids must not collide.
pub fn merge_datasets(source: &Dataset, target: &Dataset) -> Result<Dataset> {
    let ids = |d: &Dataset| -> BTreeSet<String> {
        d.bugs.iter().chain(&d.methods).map(|x| x.id.clone()).collect()
    };
    let (a, b) = (ids(source), ids(target));
    if let Some(shared) = a.intersection(&b).next() {
        return Err(Error::Data(format!(
            "source and target projects share the id {shared}"
        )));
    }
    let (mut traces, mut truth) = source.to_records();
    let (t2, g2) = target.to_records();
    traces.extend(t2);
    truth.extend(g2);
    let bugs = source.bugs.iter().chain(&target.bugs).cloned().collect();
    let methods = source.methods.iter().chain(&target.methods).cloned().collect();
    Dataset::from_records(bugs, methods, traces, truth)
}

/// Faulty methods per bug, restricted to bugs in `ids`.
pub fn ground_truth_for<'a>(
    dataset: &'a Dataset,
    ids: &[&str],
) -> BTreeMap<&'a str, &'a BTreeSet<String>> {
    ids.iter()
        .filter_map(|id| dataset.ground_truth.get_key_value(*id))
        .map(|(k, v)| (k.as_str(), v))
        .collect()
}
