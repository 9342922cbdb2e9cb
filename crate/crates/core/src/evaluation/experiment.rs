use std::collections::BTreeSet;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::metrics::{
    average_precision, delta_analysis, mean_average_precision, top_n_hit, BugOutcome, DeltaAnalysis,
    RankedList,
};
use super::stats::{benjamini_hochberg, wilcoxon_signed_rank, WilcoxonResult};
use crate::corpus::PreprocessConfig;
use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::graphs::SparsifyRule;
use crate::pipeline::{merge_datasets, substream_seed, Model, ModelSettings, Prepared};

pub const TOP_N: [usize; 3] = [1, 5, 10];

/// Splits `ids` into `folds` groups: a seeded shuffle of the sorted ids, dealt
/// round-robin.
pub fn fold_assignment(ids: &[&str], folds: usize, seed: u64) -> Result<Vec<Vec<String>>> {
    if folds < 2 {
        return Err(Error::Config("at least two folds are required".into()));
    }
    if ids.len() < folds {
        return Err(Error::Data(format!(
            "{} bugs cannot fill {folds} folds",
            ids.len()
        )));
    }
    let mut sorted: Vec<&str> = ids.to_vec();
    sorted.sort_unstable();
    sorted.dedup();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    sorted.shuffle(&mut rng);
    let mut out = vec![Vec::new(); folds];
    for (i, id) in sorted.into_iter().enumerate() {
        out[i % folds].push(id.to_string());
    }
    for fold in &mut out {
        fold.sort();
    }
    Ok(out)
}

/// Inner cross-validated search over (alpha, beta) for the integrator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSearch {
    pub alphas: Vec<f64>,
    pub betas: Vec<f64>,
    pub inner_folds: usize,
}

impl Default for GridSearch {
    fn default() -> Self {
        let grid = vec![1e-3, 1e-2, 1e-1, 1.0, 10.0];
        Self {
            alphas: grid.clone(),
            betas: grid,
            inner_folds: 3,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FoldChoice {
    pub fold: usize,
    pub alpha: f64,
    pub beta: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BugResult {
    pub bug_id: String,
    pub fold: usize,
    pub average_precision: f64,
    pub best_rank: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TopN {
    pub n: usize,
    pub count: usize,
    pub proportion: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Pairing {
    PerBug,
    PerFold,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub baseline: String,
    pub pairing: Pairing,
    pub wilcoxon: Option<WilcoxonResult>,
    pub adjusted_p: Option<f64>,
    /// Why no test was run, when it was not.
    pub note: Option<String>,
    pub delta: DeltaAnalysis,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub label: String,
    pub model: Model,
    pub folds: usize,
    pub seed: u64,
    pub bugs: Vec<BugResult>,
    pub top_n: Vec<TopN>,
    pub map: f64,
    pub fold_maps: Vec<f64>,
    pub selected: Vec<FoldChoice>,
    pub comparisons: Vec<Comparison>,
}

/// Rankings of a run together with its report.
#[derive(Debug, Clone)]
pub struct Evaluation {
    pub report: EvalReport,
    pub rankings: Vec<RankedList>,
}

fn localize_all(
    prepared: &Prepared,
    queries: &[String],
    history: &[&str],
    settings: &ModelSettings,
    restrict: Option<&BTreeSet<String>>,
) -> Result<Vec<RankedList>> {
    queries
        .par_iter()
        .map(|q| prepared.localize(q, history, settings, restrict))
        .collect()
}

fn outcome(prepared: &Prepared, ranked: &RankedList) -> Result<BugOutcome> {
    let faulty = prepared
        .dataset
        .ground_truth
        .get(&ranked.bug_id)
        .ok_or_else(|| Error::MissingLabels(ranked.bug_id.clone()))?;
    Ok(BugOutcome {
        average_precision: average_precision(ranked, faulty)?,
        best_rank: ranked
            .best_faulty_rank(faulty)
            .ok_or_else(|| Error::MissingFaulty {
                bug_id: ranked.bug_id.clone(),
                method_id: faulty.iter().next().cloned().unwrap_or_default(),
            })?,
    })
}

fn map_of(prepared: &Prepared, rankings: &[RankedList]) -> Result<f64> {
    let aps = rankings
        .iter()
        .map(|r| outcome(prepared, r).map(|o| o.average_precision))
        .collect::<Result<Vec<_>>>()?;
    mean_average_precision(&aps)
}

/// Picks (alpha, beta) maximizing inner-CV MAP over `train`; the first grid
/// point wins ties.
pub fn select_hyperparameters(
    prepared: &Prepared,
    train: &[&str],
    settings: &ModelSettings,
    grid: &GridSearch,
    seed: u64,
) -> Result<(f64, f64)> {
    let fallback = (settings.hp.alpha, settings.hp.beta);
    if grid.inner_folds < 2 || train.len() < grid.inner_folds || grid.alphas.is_empty() || grid.betas.is_empty() {
        return Ok(fallback);
    }
    let inner = fold_assignment(train, grid.inner_folds, seed)?;
    let mut best: Option<(f64, (f64, f64))> = None;
    for &alpha in &grid.alphas {
        for &beta in &grid.betas {
            let mut s = settings.clone();
            s.hp.alpha = alpha;
            s.hp.beta = beta;
            let mut rankings = Vec::new();
            for (i, queries) in inner.iter().enumerate() {
                let history: Vec<&str> = inner
                    .iter()
                    .enumerate()
                    .filter(|(k, _)| *k != i)
                    .flat_map(|(_, f)| f.iter().map(String::as_str))
                    .collect();
                rankings.extend(localize_all(prepared, queries, &history, &s, None)?);
            }
            let map = map_of(prepared, &rankings)?;
            if best.is_none_or(|(m, _)| map > m) {
                best = Some((map, (alpha, beta)));
            }
        }
    }
    Ok(best.map_or(fallback, |(_, ab)| ab))
}

fn build_report(
    prepared: &Prepared,
    label: &str,
    settings: &ModelSettings,
    folds: usize,
    rankings: &[(usize, RankedList)],
    selected: Vec<FoldChoice>,
) -> Result<EvalReport> {
    let mut bugs = Vec::with_capacity(rankings.len());
    for (fold, r) in rankings {
        let o = outcome(prepared, r)?;
        bugs.push(BugResult {
            bug_id: r.bug_id.clone(),
            fold: *fold,
            average_precision: o.average_precision,
            best_rank: o.best_rank,
        });
    }
    bugs.sort_by(|a, b| a.bug_id.cmp(&b.bug_id));
    let n = bugs.len();
    let top_n = TOP_N
        .iter()
        .map(|&k| {
            let count = rankings
                .iter()
                .filter(|(_, r)| top_n_hit(r, &prepared.dataset.ground_truth[&r.bug_id], k))
                .count();
            TopN {
                n: k,
                count,
                proportion: if n == 0 { 0.0 } else { count as f64 / n as f64 },
            }
        })
        .collect();
    let map = mean_average_precision(&bugs.iter().map(|b| b.average_precision).collect::<Vec<_>>())?;
    let fold_maps = (0..folds)
        .map(|f| {
            let aps: Vec<f64> = bugs
                .iter()
                .filter(|b| b.fold == f)
                .map(|b| b.average_precision)
                .collect();
            if aps.is_empty() {
                Ok(0.0)
            } else {
                mean_average_precision(&aps)
            }
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(EvalReport {
        label: label.to_string(),
        model: settings.model,
        folds,
        seed: settings.seed,
        bugs,
        top_n,
        map,
        fold_maps,
        selected,
        comparisons: Vec::new(),
    })
}

/// K-fold cross-validation over the localized bugs of `prepared`.
///
/// When `grid` is given and the model is the integrator, (alpha, beta) are
/// chosen per fold by an inner cross-validation on that fold's training bugs.
pub fn cross_validate(
    prepared: &Prepared,
    folds: usize,
    settings: &ModelSettings,
    grid: Option<&GridSearch>,
    label: &str,
) -> Result<Evaluation> {
    let ids = prepared.dataset.localized_bugs();
    let assignment = fold_assignment(&ids, folds, substream_seed(settings.seed, "folds"))?;
    let mut rankings: Vec<(usize, RankedList)> = Vec::new();
    let mut selected = Vec::new();
    for (f, queries) in assignment.iter().enumerate() {
        let history: Vec<&str> = assignment
            .iter()
            .enumerate()
            .filter(|(k, _)| *k != f)
            .flat_map(|(_, fold)| fold.iter().map(String::as_str))
            .collect();
        let mut s = settings.clone();
        if let (Some(g), Model::Netml) = (grid, settings.model) {
            let (alpha, beta) =
                select_hyperparameters(prepared, &history, settings, g, substream_seed(settings.seed, &format!("inner/{f}")))?;
            s.hp.alpha = alpha;
            s.hp.beta = beta;
            selected.push(FoldChoice { fold: f, alpha, beta });
        }
        for r in localize_all(prepared, queries, &history, &s, None)? {
            rankings.push((f, r));
        }
    }
    let report = build_report(prepared, label, settings, folds, &rankings, selected)?;
    let mut lists: Vec<RankedList> = rankings.into_iter().map(|(_, r)| r).collect();
    lists.sort_by(|a, b| a.bug_id.cmp(&b.bug_id));
    Ok(Evaluation { report, rankings: lists })
}

/// Trains on every localized bug of `source` and localizes every localized
/// bug of `target`, ranking only target methods.
#[allow(clippy::too_many_arguments)]
pub fn cross_project(
    source: &Dataset,
    target: &Dataset,
    preprocess: &PreprocessConfig,
    sparsify: SparsifyRule,
    settings: &ModelSettings,
    grid: Option<&GridSearch>,
    label: &str,
) -> Result<Evaluation> {
    let merged = merge_datasets(source, target)?;
    let prepared = Prepared::new(merged, preprocess, sparsify)?;
    let history: Vec<&str> = source.localized_bugs();
    if settings.model.is_supervised() && history.is_empty() {
        return Err(Error::EmptyHistory);
    }
    let queries: Vec<String> = target.localized_bugs().into_iter().map(String::from).collect();
    if queries.is_empty() {
        return Err(Error::Data("target project has no localized bugs".into()));
    }
    let restrict: BTreeSet<String> = target.methods.iter().map(|m| m.id.clone()).collect();
    let mut s = settings.clone();
    let mut selected = Vec::new();
    if let (Some(g), Model::Netml) = (grid, settings.model) {
        let (alpha, beta) =
            select_hyperparameters(&prepared, &history, settings, g, substream_seed(settings.seed, "inner/0"))?;
        s.hp.alpha = alpha;
        s.hp.beta = beta;
        selected.push(FoldChoice { fold: 0, alpha, beta });
    }
    let lists = localize_all(&prepared, &queries, &history, &s, Some(&restrict))?;
    let tagged: Vec<(usize, RankedList)> = lists.iter().cloned().map(|r| (0, r)).collect();
    let report = build_report(&prepared, label, settings, 1, &tagged, selected)?;
    Ok(Evaluation { report, rankings: lists })
}

/// Attaches to `subject` a one-sided signed-rank comparison (subject better
/// than baseline) against each baseline, with BH-adjusted p-values across
/// the baselines.
pub fn attach_comparisons(subject: &mut EvalReport, baselines: &[&EvalReport], pairing: Pairing) -> Result<()> {
    let mut comparisons = Vec::with_capacity(baselines.len());
    for base in baselines {
        let ids_a: Vec<&str> = subject.bugs.iter().map(|b| b.bug_id.as_str()).collect();
        let ids_b: Vec<&str> = base.bugs.iter().map(|b| b.bug_id.as_str()).collect();
        if ids_a != ids_b {
            return Err(Error::Data(format!(
                "{} and {} cover different bugs",
                subject.label, base.label
            )));
        }
        let outcomes = |r: &EvalReport| -> Vec<(String, BugOutcome)> {
            r.bugs
                .iter()
                .map(|b| {
                    (
                        b.bug_id.clone(),
                        BugOutcome {
                            average_precision: b.average_precision,
                            best_rank: b.best_rank,
                        },
                    )
                })
                .collect()
        };
        let delta = delta_analysis(
            &outcomes(subject).into_iter().collect(),
            &outcomes(base).into_iter().collect(),
        )?;
        let (xs, ys): (Vec<f64>, Vec<f64>) = match pairing {
            Pairing::PerBug => subject
                .bugs
                .iter()
                .zip(&base.bugs)
                .map(|(a, b)| (a.average_precision, b.average_precision))
                .unzip(),
            Pairing::PerFold => (subject.fold_maps.clone(), base.fold_maps.clone()),
        };
        let (wilcoxon, note) = match wilcoxon_signed_rank(&xs, &ys) {
            Ok(w) => (Some(w), None),
            Err(Error::TooFewPairs(n)) => (None, Some(format!("only {n} non-tied pairs"))),
            Err(e) => return Err(e),
        };
        comparisons.push(Comparison {
            baseline: base.label.clone(),
            pairing,
            wilcoxon,
            adjusted_p: None,
            note,
            delta,
        });
    }
    let tested: Vec<usize> = (0..comparisons.len())
        .filter(|&i| comparisons[i].wilcoxon.is_some())
        .collect();
    let raw: Vec<f64> = tested
        .iter()
        .map(|&i| comparisons[i].wilcoxon.as_ref().map_or(1.0, |w| w.p_value))
        .collect();
    for (&i, adj) in tested.iter().zip(benjamini_hochberg(&raw)) {
        comparisons[i].adjusted_p = Some(adj);
    }
    subject.comparisons = comparisons;
    Ok(())
}

fn csv_error(path: &Path, e: impl std::fmt::Display) -> Error {
    Error::Data(format!("{}: {e}", path.display()))
}

impl EvalReport {
    pub fn write_json(&self, path: &Path) -> Result<()> {
        let mut text = serde_json::to_string_pretty(self).map_err(|e| csv_error(path, e))?;
        text.push('\n');
        std::fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    /// Per-bug table: bug_id, fold, average_precision, best_rank.
    pub fn write_bugs_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path).map_err(|e| csv_error(path, e))?;
        w.write_record(["bug_id", "fold", "average_precision", "best_rank"])
            .map_err(|e| csv_error(path, e))?;
        for b in &self.bugs {
            w.write_record([
                b.bug_id.clone(),
                b.fold.to_string(),
                b.average_precision.to_string(),
                b.best_rank.to_string(),
            ])
            .map_err(|e| csv_error(path, e))?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }
}

/// One row per report: Top-1/5/10 counts and proportions, then MAP; a second
/// table lists every comparison.
pub fn write_summary_csv(path: &Path, reports: &[&EvalReport]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_error(path, e))?;
    let mut header = vec!["label".to_string(), "model".to_string(), "bugs".to_string()];
    for n in TOP_N {
        header.push(format!("top{n}"));
        header.push(format!("top{n}_proportion"));
    }
    header.push("map".into());
    w.write_record(&header).map_err(|e| csv_error(path, e))?;
    for r in reports {
        let mut row = vec![r.label.clone(), r.model.to_string(), r.bugs.len().to_string()];
        for t in &r.top_n {
            row.push(t.count.to_string());
            row.push(t.proportion.to_string());
        }
        row.push(r.map.to_string());
        w.write_record(&row).map_err(|e| csv_error(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn write_comparisons_csv(path: &Path, report: &EvalReport) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_error(path, e))?;
    w.write_record([
        "subject",
        "baseline",
        "pairing",
        "n",
        "statistic",
        "p_value",
        "adjusted_p",
        "improved",
        "deteriorated",
        "unchanged",
        "improved_delta_ap",
        "improved_delta_rank",
        "deteriorated_delta_ap",
        "deteriorated_delta_rank",
    ])
    .map_err(|e| csv_error(path, e))?;
    let opt = |v: Option<f64>| v.map_or_else(|| "NA".to_string(), |x| x.to_string());
    for c in &report.comparisons {
        let d = &c.delta;
        w.write_record([
            report.label.clone(),
            c.baseline.clone(),
            match c.pairing {
                Pairing::PerBug => "per_bug".into(),
                Pairing::PerFold => "per_fold".into(),
            },
            c.wilcoxon.map_or_else(|| "NA".into(), |x| x.n.to_string()),
            opt(c.wilcoxon.map(|x| x.statistic)),
            opt(c.wilcoxon.map(|x| x.p_value)),
            opt(c.adjusted_p),
            d.improved.count.to_string(),
            d.deteriorated.count.to_string(),
            d.unchanged.to_string(),
            d.improved.expected_delta_ap.to_string(),
            d.improved.expected_delta_rank.to_string(),
            d.deteriorated.expected_delta_ap.to_string(),
            d.deteriorated.expected_delta_rank.to_string(),
        ])
        .map_err(|e| csv_error(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}
