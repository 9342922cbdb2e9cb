//! Command-line front end.
//!
//! Every command reads one JSON configuration document (`--config`) whose
//! fields can each be overridden by a long flag of the same name.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use anyhow::Context;
use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::aml::AmlConfig;
use crate::corpus::{count_tokens, Corpus, DocKind, PreprocessConfig, RawDocument};
use crate::dataset::{check_documents, read_ndjson, Dataset, DatasetPaths};
use crate::error::Error;
use crate::evaluation::{
    attach_comparisons, cross_project, cross_validate, write_comparisons_csv, write_ranked_lists,
    write_summary_csv, EvalReport, Evaluation, GridSearch, Pairing,
};
use crate::features::FEATURE_NAMES;
use crate::graphs::SparsifyRule;
use crate::integrator::HyperParams;
use crate::pipeline::{Model, ModelSettings, Prepared};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub bugs: Option<PathBuf>,
    pub methods: Option<PathBuf>,
    pub spectra: Option<PathBuf>,
    pub ground_truth: Option<PathBuf>,
    pub target_bugs: Option<PathBuf>,
    pub target_methods: Option<PathBuf>,
    pub target_spectra: Option<PathBuf>,
    pub target_ground_truth: Option<PathBuf>,
    pub stopwords: Option<PathBuf>,
    pub keywords: Option<PathBuf>,
    pub model: Model,
    /// Baselines the model is compared against in `evaluate` and `cross-project`.
    pub compare: Vec<Model>,
    pub alpha: f64,
    pub beta: f64,
    pub k: usize,
    pub t_max: usize,
    pub eta0: f64,
    pub aml_lambda: f64,
    pub aml_eta: f64,
    pub aml_t_max: usize,
    pub dstar: u32,
    /// Keep only graph edges at or above this weight.
    pub graph_threshold: Option<f64>,
    /// Keep only each node's heaviest edges.
    pub graph_top_k: Option<usize>,
    pub folds: usize,
    /// Choose alpha and beta per fold by inner cross-validation.
    pub grid_search: bool,
    pub pairing: Pairing,
    pub seed: Option<u64>,
    pub output_dir: PathBuf,
    pub bug_id: Option<String>,
}

impl Default for RunConfig {
    fn default() -> Self {
        let hp = HyperParams::default();
        let aml = AmlConfig::default();
        Self {
            bugs: None,
            methods: None,
            spectra: None,
            ground_truth: None,
            target_bugs: None,
            target_methods: None,
            target_spectra: None,
            target_ground_truth: None,
            stopwords: None,
            keywords: None,
            model: Model::Netml,
            compare: Vec::new(),
            alpha: hp.alpha,
            beta: hp.beta,
            k: hp.k,
            t_max: hp.t_max,
            eta0: hp.eta0,
            aml_lambda: aml.lambda,
            aml_eta: aml.eta,
            aml_t_max: aml.t_max,
            dstar: 2,
            graph_threshold: None,
            graph_top_k: None,
            folds: 10,
            grid_search: true,
            pairing: Pairing::PerBug,
            seed: None,
            output_dir: PathBuf::from("out"),
            bug_id: None,
        }
    }
}

fn parse_pairing(s: &str) -> Result<Pairing, String> {
    match s {
        "per_bug" => Ok(Pairing::PerBug),
        "per_fold" => Ok(Pairing::PerFold),
        _ => Err(format!("expected per_bug or per_fold, got {s:?}")),
    }
}

/// Flags overriding fields of the configuration file.
#[derive(Debug, Clone, Default, Args)]
#[command(rename_all = "snake_case")]
pub struct Overrides {
    #[arg(long)]
    bugs: Option<PathBuf>,
    #[arg(long)]
    methods: Option<PathBuf>,
    #[arg(long)]
    spectra: Option<PathBuf>,
    #[arg(long)]
    ground_truth: Option<PathBuf>,
    #[arg(long)]
    target_bugs: Option<PathBuf>,
    #[arg(long)]
    target_methods: Option<PathBuf>,
    #[arg(long)]
    target_spectra: Option<PathBuf>,
    #[arg(long)]
    target_ground_truth: Option<PathBuf>,
    #[arg(long)]
    stopwords: Option<PathBuf>,
    #[arg(long)]
    keywords: Option<PathBuf>,
    #[arg(long)]
    model: Option<Model>,
    /// Comma-separated baseline models.
    #[arg(long, value_delimiter = ',')]
    compare: Option<Vec<Model>>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    beta: Option<f64>,
    #[arg(long)]
    k: Option<usize>,
    #[arg(long)]
    t_max: Option<usize>,
    #[arg(long)]
    eta0: Option<f64>,
    #[arg(long)]
    aml_lambda: Option<f64>,
    #[arg(long)]
    aml_eta: Option<f64>,
    #[arg(long)]
    aml_t_max: Option<usize>,
    #[arg(long)]
    dstar: Option<u32>,
    #[arg(long)]
    graph_threshold: Option<f64>,
    #[arg(long)]
    graph_top_k: Option<usize>,
    #[arg(long)]
    folds: Option<usize>,
    #[arg(long)]
    grid_search: Option<bool>,
    #[arg(long, value_parser = parse_pairing)]
    pairing: Option<Pairing>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    output_dir: Option<PathBuf>,
    #[arg(long)]
    bug_id: Option<String>,
}

impl RunConfig {
    /// Reads `path` (if any), resolving its relative paths against the file's
    /// directory, then applies `overrides`.
    pub fn load(path: Option<&Path>, overrides: &Overrides) -> Result<Self, Error> {
        let mut cfg = match path {
            None => RunConfig::default(),
            Some(p) => {
                let text = std::fs::read_to_string(p)
                    .map_err(|e| Error::Config(format!("{}: {e}", p.display())))?;
                let mut cfg: RunConfig = serde_json::from_str(&text)
                    .map_err(|e| Error::Config(format!("{}: {e}", p.display())))?;
                let base = p.parent().unwrap_or(Path::new(""));
                cfg.rebase(base);
                cfg
            }
        };
        cfg.apply(overrides);
        Ok(cfg)
    }

    fn rebase(&mut self, base: &Path) {
        let join = |p: &mut Option<PathBuf>| {
            if let Some(x) = p {
                if x.is_relative() {
                    *x = base.join(&*x);
                }
            }
        };
        for p in [
            &mut self.bugs,
            &mut self.methods,
            &mut self.spectra,
            &mut self.ground_truth,
            &mut self.target_bugs,
            &mut self.target_methods,
            &mut self.target_spectra,
            &mut self.target_ground_truth,
            &mut self.stopwords,
            &mut self.keywords,
        ] {
            join(p);
        }
        if self.output_dir.is_relative() {
            self.output_dir = base.join(&self.output_dir);
        }
    }

    fn apply(&mut self, o: &Overrides) {
        macro_rules! set {
            ($($f:ident),*) => { $( if let Some(v) = &o.$f { self.$f = Some(v.clone()); } )* };
        }
        macro_rules! put {
            ($($f:ident),*) => { $( if let Some(v) = &o.$f { self.$f = v.clone(); } )* };
        }
        set!(
            bugs, methods, spectra, ground_truth, target_bugs, target_methods, target_spectra,
            target_ground_truth, stopwords, keywords, graph_threshold, graph_top_k, seed, bug_id
        );
        put!(
            model, compare, alpha, beta, k, t_max, eta0, aml_lambda, aml_eta, aml_t_max, dstar, folds,
            grid_search, pairing, output_dir
        );
    }

    pub fn hyper_params(&self) -> HyperParams {
        HyperParams {
            alpha: self.alpha,
            beta: self.beta,
            k: self.k,
            t_max: self.t_max,
            eta0: self.eta0,
        }
    }

    pub fn settings(&self, model: Model) -> Result<ModelSettings, Error> {
        let seed = self
            .seed
            .ok_or_else(|| Error::Config("a seed is required (config field or --seed)".into()))?;
        let hp = self.hyper_params();
        hp.validate()?;
        let aml = AmlConfig {
            lambda: self.aml_lambda,
            eta: self.aml_eta,
            t_max: self.aml_t_max,
        };
        aml.validate()?;
        Ok(ModelSettings {
            model,
            hp,
            aml,
            dstar: self.dstar,
            seed,
        })
    }

    pub fn sparsify(&self) -> Result<SparsifyRule, Error> {
        match (self.graph_threshold, self.graph_top_k) {
            (Some(_), Some(_)) => Err(Error::Config(
                "graph_threshold and graph_top_k are mutually exclusive".into(),
            )),
            (Some(t), None) => Ok(SparsifyRule::Threshold(t)),
            (None, Some(k)) => Ok(SparsifyRule::TopKPerNode(k)),
            (None, None) => Ok(SparsifyRule::KeepAll),
        }
    }

    pub fn preprocess_config(&self) -> Result<PreprocessConfig, Error> {
        for p in [&self.stopwords, &self.keywords].into_iter().flatten() {
            require_exists(p)?;
        }
        PreprocessConfig::default().with_lists(self.stopwords.as_deref(), self.keywords.as_deref())
    }

    fn grid(&self) -> Option<GridSearch> {
        self.grid_search.then(GridSearch::default)
    }

    fn dataset_paths(&self, target: bool) -> Result<DatasetPaths, Error> {
        let (b, m, s, g, what) = if target {
            (&self.target_bugs, &self.target_methods, &self.target_spectra, &self.target_ground_truth, "target_")
        } else {
            (&self.bugs, &self.methods, &self.spectra, &self.ground_truth, "")
        };
        let need = |p: &Option<PathBuf>, name: &str| -> Result<PathBuf, Error> {
            let p = p
                .clone()
                .ok_or_else(|| Error::Config(format!("missing {what}{name} path")))?;
            require_exists(&p)?;
            Ok(p)
        };
        Ok(DatasetPaths {
            bugs: need(b, "bugs")?,
            methods: need(m, "methods")?,
            spectra: need(s, "spectra")?,
            ground_truth: need(g, "ground_truth")?,
        })
    }
}

fn require_exists(p: &Path) -> Result<(), Error> {
    if p.exists() {
        Ok(())
    } else {
        Err(Error::Config(format!("{} does not exist", p.display())))
    }
}

#[derive(Debug, Parser)]
#[command(name = "netml", version, about = "Multi-modal bug localization")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct Common {
    /// JSON configuration file.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[command(flatten)]
    pub overrides: Overrides,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Tokenize bug reports and methods and write the corpus artifact.
    Preprocess(Common),
    /// Write the feature tensor and both similarity graphs.
    Features(Common),
    /// Rank methods for one bug, trained on every other localized bug.
    Localize(Common),
    /// Cross-validate the model (and any baselines).
    Evaluate(Common),
    /// Cross-validate the model with each feature dropped in turn.
    Ablate(Common),
    /// Train on one project and localize bugs of another.
    CrossProject(Common),
}

#[derive(Serialize)]
struct ArtifactDocument<'a> {
    id: &'a str,
    kind: DocKind,
    token_counts: &'a BTreeMap<String, u32>,
    tfidf: BTreeMap<String, f64>,
}

#[derive(Serialize)]
struct ArtifactBody<'a> {
    size: usize,
    doc_freq: BTreeMap<&'a str, u32>,
    methods: Vec<ArtifactDocument<'a>>,
    bug_reports: Vec<ArtifactDocument<'a>>,
}

#[derive(Serialize)]
struct Artifact<'a> {
    content_hash: String,
    #[serde(flatten)]
    body: ArtifactBody<'a>,
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> anyhow::Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn read_documents(path: &Option<PathBuf>, name: &str, kind: DocKind) -> Result<Vec<RawDocument>, Error> {
    let p = path
        .as_ref()
        .ok_or_else(|| Error::Config(format!("missing {name} path")))?;
    require_exists(p)?;
    let mut docs: Vec<RawDocument> = read_ndjson(p)?;
    check_documents(&mut docs, kind)?;
    Ok(docs)
}

/// Returns the written artifact's content hash.
pub fn cmd_preprocess(cfg: &RunConfig) -> anyhow::Result<String> {
    let pp = cfg.preprocess_config()?;
    let methods = read_documents(&cfg.methods, "methods", DocKind::Method)?;
    let bugs = read_documents(&cfg.bugs, "bugs", DocKind::BugReport)?;
    let corpus = Corpus::build(
        methods
            .iter()
            .map(|d| (d.id.clone(), d.kind, count_tokens(d.tokens(&pp)))),
    );
    let bug_docs: Vec<_> = bugs
        .iter()
        .map(|d| corpus.document_for(d.id.clone(), d.kind, count_tokens(d.tokens(&pp))))
        .collect();
    fn entry<'a>(corpus: &Corpus, d: &'a crate::corpus::Document) -> ArtifactDocument<'a> {
        ArtifactDocument {
            id: &d.id,
            kind: d.kind,
            token_counts: &d.token_counts,
            tfidf: corpus.tfidf_by_word(d),
        }
    }
    let body = ArtifactBody {
        size: corpus.size(),
        doc_freq: corpus.doc_freqs().collect(),
        methods: corpus.documents().iter().map(|d| entry(&corpus, d)).collect(),
        bug_reports: bug_docs.iter().map(|d| entry(&corpus, d)).collect(),
    };
    let content_hash = hex(&Sha256::digest(serde_json::to_vec(&body)?));
    std::fs::create_dir_all(&cfg.output_dir)?;
    write_json(
        &cfg.output_dir.join("corpus.json"),
        &Artifact {
            content_hash: content_hash.clone(),
            body,
        },
    )?;
    Ok(content_hash)
}

fn prepare(cfg: &RunConfig) -> anyhow::Result<Prepared> {
    let pp = cfg.preprocess_config()?;
    let sparsify = cfg.sparsify()?;
    let dataset = Dataset::load(&cfg.dataset_paths(false)?)?;
    Ok(Prepared::new(dataset, &pp, sparsify)?)
}

pub fn cmd_features(cfg: &RunConfig) -> anyhow::Result<()> {
    let prepared = prepare(cfg)?;
    std::fs::create_dir_all(&cfg.output_dir)?;
    prepared.tensor.write_csv(&cfg.output_dir.join("features.csv"))?;
    prepared.bug_graph.write_csv(&cfg.output_dir.join("bug_graph.csv"))?;
    prepared.method_graph.write_csv(&cfg.output_dir.join("method_graph.csv"))?;
    println!(
        "{} bugs x {} methods; features {}",
        prepared.tensor.bugs().len(),
        prepared.tensor.methods().len(),
        FEATURE_NAMES.join(", ")
    );
    Ok(())
}

pub fn cmd_localize(cfg: &RunConfig) -> anyhow::Result<()> {
    let bug = cfg
        .bug_id
        .clone()
        .ok_or_else(|| Error::Config("localize needs bug_id".into()))?;
    let settings = cfg.settings(cfg.model)?;
    let prepared = prepare(cfg)?;
    let history: Vec<&str> = prepared
        .dataset
        .localized_bugs()
        .into_iter()
        .filter(|b| *b != bug)
        .collect();
    let ranked = prepared.localize(&bug, &history, &settings, None)?;
    std::fs::create_dir_all(&cfg.output_dir)?;
    write_ranked_lists(&cfg.output_dir.join("ranking.csv"), std::slice::from_ref(&ranked))?;
    for e in ranked.entries.iter().take(10) {
        println!("{:>4}  {:<40} {:.6}", e.rank, e.method_id, e.score);
    }
    Ok(())
}

fn print_summary(report: &EvalReport) {
    let tops: Vec<String> = report
        .top_n
        .iter()
        .map(|t| format!("top{} {} ({:.2}%)", t.n, t.count, 100.0 * t.proportion))
        .collect();
    println!("{:<20} {}  MAP {:.4}", report.label, tops.join("  "), report.map);
}

fn write_outputs(dir: &Path, main: &Evaluation, others: &[Evaluation]) -> anyhow::Result<()> {
    std::fs::create_dir_all(dir)?;
    let all: Vec<&EvalReport> = std::iter::once(&main.report)
        .chain(others.iter().map(|e| &e.report))
        .collect();
    write_json(&dir.join("report.json"), &all)?;
    write_summary_csv(&dir.join("summary.csv"), &all)?;
    write_comparisons_csv(&dir.join("comparisons.csv"), &main.report)?;
    main.report.write_bugs_csv(&dir.join("bugs.csv"))?;
    write_ranked_lists(&dir.join("rankings.csv"), &main.rankings)?;
    for r in &all {
        print_summary(r);
    }
    Ok(())
}

fn compare_against(main: &mut Evaluation, others: &[Evaluation], pairing: Pairing) -> anyhow::Result<()> {
    if !others.is_empty() {
        let refs: Vec<&EvalReport> = others.iter().map(|e| &e.report).collect();
        attach_comparisons(&mut main.report, &refs, pairing)?;
    }
    Ok(())
}

pub fn cmd_evaluate(cfg: &RunConfig) -> anyhow::Result<()> {
    let prepared = prepare(cfg)?;
    let grid = cfg.grid();
    let run = |model: Model| -> anyhow::Result<Evaluation> {
        let settings = cfg.settings(model)?;
        Ok(cross_validate(&prepared, cfg.folds, &settings, grid.as_ref(), model.name())?)
    };
    let mut main = run(cfg.model)?;
    let others = cfg
        .compare
        .iter()
        .filter(|m| **m != cfg.model)
        .map(|m| run(*m))
        .collect::<anyhow::Result<Vec<_>>>()?;
    compare_against(&mut main, &others, cfg.pairing)?;
    write_outputs(&cfg.output_dir, &main, &others)
}

pub fn cmd_ablate(cfg: &RunConfig) -> anyhow::Result<()> {
    let prepared = prepare(cfg)?;
    let grid = cfg.grid();
    let settings = cfg.settings(cfg.model)?;
    let mut main = cross_validate(&prepared, cfg.folds, &settings, grid.as_ref(), "all")?;
    let variants = FEATURE_NAMES
        .iter()
        .enumerate()
        .map(|(j, name)| {
            let label = format!("without_{name}");
            cross_validate(&prepared.with_zeroed_feature(j), cfg.folds, &settings, grid.as_ref(), &label)
                .map_err(anyhow::Error::from)
        })
        .collect::<anyhow::Result<Vec<_>>>()?;
    compare_against(&mut main, &variants, cfg.pairing)?;
    write_outputs(&cfg.output_dir, &main, &variants)
}

pub fn cmd_cross_project(cfg: &RunConfig) -> anyhow::Result<()> {
    let pp = cfg.preprocess_config()?;
    let sparsify = cfg.sparsify()?;
    let source = Dataset::load(&cfg.dataset_paths(false)?)?;
    let target = Dataset::load(&cfg.dataset_paths(true)?)?;
    let grid = cfg.grid();
    let run = |model: Model| -> anyhow::Result<Evaluation> {
        let settings = cfg.settings(model)?;
        Ok(cross_project(&source, &target, &pp, sparsify, &settings, grid.as_ref(), model.name())?)
    };
    let mut main = run(cfg.model)?;
    let others = cfg
        .compare
        .iter()
        .filter(|m| **m != cfg.model)
        .map(|m| run(*m))
        .collect::<anyhow::Result<Vec<_>>>()?;
    compare_against(&mut main, &others, cfg.pairing)?;
    write_outputs(&cfg.output_dir, &main, &others)
}

pub fn run(cli: Cli) -> anyhow::Result<()> {
    let common = match &cli.command {
        Command::Preprocess(c)
        | Command::Features(c)
        | Command::Localize(c)
        | Command::Evaluate(c)
        | Command::Ablate(c)
        | Command::CrossProject(c) => c,
    };
    let cfg = RunConfig::load(common.config.as_deref(), &common.overrides)?;
    match cli.command {
        Command::Preprocess(_) => {
            let hash = cmd_preprocess(&cfg)?;
            println!("corpus written; content hash {hash}");
            Ok(())
        }
        Command::Features(_) => cmd_features(&cfg),
        Command::Localize(_) => cmd_localize(&cfg),
        Command::Evaluate(_) => cmd_evaluate(&cfg),
        Command::Ablate(_) => cmd_ablate(&cfg),
        Command::CrossProject(_) => cmd_cross_project(&cfg),
    }
}

/// Exit code for an error raised by [`run`].
pub fn exit_code(err: &anyhow::Error) -> i32 {
    err.chain()
        .find_map(|e| e.downcast_ref::<Error>())
        .map_or(3, Error::exit_code)
}
