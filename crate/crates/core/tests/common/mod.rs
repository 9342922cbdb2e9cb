//! Shared fixtures and independent oracles for the integration tests.
#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use netml::corpus::{DocKind, RawDocument};
use netml::dataset::{Dataset, DatasetPaths, GroundTruthRecord, TraceRecord};
use netml::graphs::SimilarityGraph;
use netml::integrator::{IntegratorParams, Problem};
use netml::spectra::Outcome;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub type Vec3 = [f64; 3];

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// A training problem kept as plain arrays so the oracles below never touch
/// library code.
#[derive(Debug, Clone)]
pub struct RawProblem {
    pub nb: usize,
    pub nm: usize,
    pub x: Vec<Vec3>,
    pub y: Vec<Option<bool>>,
    pub bug_edges: Vec<(usize, usize, f64)>,
    pub method_edges: Vec<(usize, usize, f64)>,
}

fn random_edges(r: &mut ChaCha8Rng, n: usize, density: f64) -> Vec<(usize, usize, f64)> {
    let mut out = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            if r.gen_bool(density) {
                out.push((i, j, r.gen_range(0.05..1.0)));
            }
        }
    }
    out
}

impl RawProblem {
    /// Up to 5 bugs x 8 methods; when `with_query`, the last bug is unlabeled.
    pub fn random(seed: u64, with_query: bool) -> Self {
        let mut r = rng(seed);
        let nb = r.gen_range(2..=5);
        let nm = r.gen_range(2..=8);
        let x: Vec<Vec3> = (0..nb * nm)
            .map(|_| [r.gen_range(0.0..1.0), r.gen_range(0.0..1.0), r.gen_range(0.0..1.0)])
            .collect();
        let mut y = Vec::with_capacity(nb * nm);
        for b in 0..nb {
            let query = with_query && b == nb - 1;
            let faulty = r.gen_range(0..nm);
            for m in 0..nm {
                y.push(if query { None } else { Some(m == faulty || r.gen_bool(0.1)) });
            }
        }
        // guarantee both classes among labeled cells
        if y.iter().flatten().all(|v| *v) {
            y[0] = Some(false);
        }
        let bug_edges = random_edges(&mut r, nb, 0.7);
        let method_edges = random_edges(&mut r, nm, 0.5);
        Self { nb, nm, x, y, bug_edges, method_edges }
    }

    pub fn weights(&self) -> Vec<f64> {
        let labeled: Vec<bool> = self.y.iter().flatten().copied().collect();
        let pos = labeled.iter().filter(|v| **v).count() as f64;
        let neg = labeled.len() as f64 - pos;
        self.y
            .iter()
            .map(|l| match l {
                Some(true) => 1.0 / pos,
                Some(false) => 1.0 / neg,
                None => 0.0,
            })
            .collect()
    }

    pub fn problem(&self) -> Problem {
        let bugs = (0..self.nb).map(|i| format!("b{i}")).collect();
        let methods = (0..self.nm).map(|i| format!("m{i}")).collect();
        Problem::new(
            self.x.clone(),
            self.y.clone(),
            SimilarityGraph::from_edges(bugs, &self.bug_edges).unwrap(),
            SimilarityGraph::from_edges(methods, &self.method_edges).unwrap(),
        )
        .unwrap()
    }

    pub fn random_params(&self, seed: u64, scale: f64) -> IntegratorParams {
        let mut r = rng(seed);
        let mut draw = |n: usize| -> Vec<Vec3> {
            (0..n)
                .map(|_| [r.gen_range(-scale..scale), r.gen_range(-scale..scale), r.gen_range(-scale..scale)])
                .collect()
        };
        IntegratorParams { u: draw(self.nb), v: draw(self.nm) }
    }

    fn z(&self, u: &[Vec3], v: &[Vec3], b: usize, m: usize) -> f64 {
        let x = &self.x[b * self.nm + m];
        (0..3).map(|j| (u[b][j] + v[m][j]) * x[j]).sum()
    }

    /// Straight-line evaluation of the objective.
    pub fn loss(&self, u: &[Vec3], v: &[Vec3], alpha: f64, beta: f64) -> f64 {
        let w = self.weights();
        let mut total = 0.0;
        for b in 0..self.nb {
            for m in 0..self.nm {
                let i = b * self.nm + m;
                if let Some(label) = self.y[i] {
                    let s = (1.0 / (1.0 + (-self.z(u, v, b, m)).exp())).clamp(1e-12, 1.0 - 1e-12);
                    total -= w[i] * if label { s.ln() } else { (1.0 - s).ln() };
                }
            }
        }
        for p in u.iter().chain(v) {
            for c in p {
                total += 0.5 * alpha * c * c;
            }
        }
        for &(i, k, e) in &self.bug_edges {
            for j in 0..3 {
                total += 0.5 * beta * e * (u[i][j] - u[k][j]).powi(2);
            }
        }
        for &(i, k, e) in &self.method_edges {
            for j in 0..3 {
                total += 0.5 * beta * e * (v[i][j] - v[k][j]).powi(2);
            }
        }
        total
    }

    pub fn gradient(&self, u: &[Vec3], v: &[Vec3], alpha: f64, beta: f64) -> (Vec<Vec3>, Vec<Vec3>) {
        let w = self.weights();
        let mut gu = vec![[0.0; 3]; self.nb];
        let mut gv = vec![[0.0; 3]; self.nm];
        for b in 0..self.nb {
            for m in 0..self.nm {
                let i = b * self.nm + m;
                if let Some(label) = self.y[i] {
                    let s = 1.0 / (1.0 + (-self.z(u, v, b, m)).exp());
                    let r = w[i] * (s - if label { 1.0 } else { 0.0 });
                    for j in 0..3 {
                        gu[b][j] += r * self.x[i][j];
                        gv[m][j] += r * self.x[i][j];
                    }
                }
            }
        }
        for b in 0..self.nb {
            for j in 0..3 {
                gu[b][j] += alpha * u[b][j];
            }
        }
        for m in 0..self.nm {
            for j in 0..3 {
                gv[m][j] += alpha * v[m][j];
            }
        }
        for &(i, k, e) in &self.bug_edges {
            for j in 0..3 {
                let d = beta * e * (u[i][j] - u[k][j]);
                gu[i][j] += d;
                gu[k][j] -= d;
            }
        }
        for &(i, k, e) in &self.method_edges {
            for j in 0..3 {
                let d = beta * e * (v[i][j] - v[k][j]);
                gv[i][j] += d;
                gv[k][j] -= d;
            }
        }
        (gu, gv)
    }

    /// Minimizes the objective by gradient descent from zero, with
    /// Barzilai-Borwein trial steps and Armijo backtracking, until the
    /// gradient norm drops below 1e-9 or no step makes progress. Returns the
    /// final loss and gradient norm; with ridge strength `alpha` the objective
    /// is `alpha`-strongly convex, so the loss is within |g|^2 / (2 alpha) of
    /// the minimum.
    pub fn descent_minimum(&self, alpha: f64, beta: f64) -> (f64, f64) {
        let flat = |u: &[Vec3], v: &[Vec3]| -> Vec<f64> { u.iter().chain(v).flatten().copied().collect() };
        let split = |p: &[f64]| -> (Vec<Vec3>, Vec<Vec3>) {
            let rows: Vec<Vec3> = p.chunks(3).map(|c| [c[0], c[1], c[2]]).collect();
            let (u, v) = rows.split_at(self.nb);
            (u.to_vec(), v.to_vec())
        };
        let eval = |p: &[f64]| {
            let (u, v) = split(p);
            let (gu, gv) = self.gradient(&u, &v, alpha, beta);
            (self.loss(&u, &v, alpha, beta), flat(&gu, &gv))
        };
        let mut p = vec![0.0; 3 * (self.nb + self.nm)];
        let (mut f, mut g) = eval(&p);
        let mut step = 1.0;
        'outer: for _ in 0..100_000 {
            let g2: f64 = g.iter().map(|x| x * x).sum();
            if g2 < 1e-18 {
                break;
            }
            loop {
                if step < 1e-16 {
                    break 'outer;
                }
                let trial: Vec<f64> = p.iter().zip(&g).map(|(x, d)| x - step * d).collect();
                let (nf, ng) = eval(&trial);
                // the slack absorbs round-off once decreases fall below f's resolution
                if nf <= f - 1e-4 * step * g2 + 1e-14 * f.abs() {
                    let s: Vec<f64> = trial.iter().zip(&p).map(|(a, b)| a - b).collect();
                    let y: Vec<f64> = ng.iter().zip(&g).map(|(a, b)| a - b).collect();
                    let sy: f64 = s.iter().zip(&y).map(|(a, b)| a * b).sum();
                    let ss: f64 = s.iter().map(|a| a * a).sum();
                    step = if sy > 0.0 { ss / sy } else { 1.0 };
                    p = trial;
                    f = nf;
                    g = ng;
                    break;
                }
                step *= 0.5;
            }
        }
        (f, g.iter().map(|x| x * x).sum::<f64>().sqrt())
    }
}

/// Brute-force Tarantula of every element of a random trace matrix.
pub fn tarantula_oracle(fail: &[Vec<bool>], pass: &[Vec<bool>], e: usize) -> f64 {
    let ef = fail.iter().filter(|t| t[e]).count() as f64;
    let es = pass.iter().filter(|t| t[e]).count() as f64;
    let rf = ef / fail.len() as f64;
    let rs = if pass.is_empty() { 0.0 } else { es / pass.len() as f64 };
    if rf + rs == 0.0 {
        0.0
    } else {
        rf / (rf + rs)
    }
}

pub fn ochiai_oracle(fail: &[Vec<bool>], pass: &[Vec<bool>], e: usize) -> f64 {
    let ef = fail.iter().filter(|t| t[e]).count() as f64;
    let es = pass.iter().filter(|t| t[e]).count() as f64;
    let d = (fail.len() as f64 * (ef + es)).sqrt();
    if d == 0.0 {
        0.0
    } else {
        ef / d
    }
}

/// Sort by descending score, then ascending id.
pub fn rank_oracle(scores: &[(String, f64)]) -> Vec<String> {
    let mut v = scores.to_vec();
    v.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then(a.0.cmp(&b.0)));
    v.into_iter().map(|(id, _)| id).collect()
}

pub fn doc(id: &str, kind: DocKind, text: &str) -> RawDocument {
    let field = if kind == DocKind::BugReport { "summary" } else { "body" };
    RawDocument {
        id: id.into(),
        kind,
        fields: [(field.to_string(), text.to_string())].into_iter().collect(),
    }
}

pub fn trace(bug: &str, test: usize, outcome: Outcome, executed: &[String]) -> TraceRecord {
    TraceRecord {
        bug_id: bug.into(),
        test_id: format!("t{test}"),
        outcome,
        executed: executed.to_vec(),
    }
}

const COMMON: [&str; 8] = ["value", "data", "list", "item", "node", "buffer", "state", "config"];

fn topic(m: usize) -> [String; 3] {
    let c = |k: char| format!("topic{}{}", (b'a' + m as u8) as char, k);
    [c('x'), c('y'), c('z')]
}

fn method_text(r: &mut ChaCha8Rng, m: usize) -> String {
    let mut words: Vec<String> = topic(m).to_vec();
    words.push(COMMON.choose(r).unwrap().to_string());
    words.push(COMMON.choose(r).unwrap().to_string());
    words.join(" ")
}

/// Traces for a bug whose faulty methods always run in failing tests.
fn bug_traces(r: &mut ChaCha8Rng, bug: &str, faulty: &[usize], n_methods: usize, out: &mut Vec<TraceRecord>) {
    let name = |m: usize| format!("m{m:02}");
    let mut test = 0;
    for _ in 0..2 {
        let mut exec: BTreeSet<usize> = faulty.iter().copied().collect();
        while exec.len() < faulty.len() + 2 {
            exec.insert(r.gen_range(0..n_methods));
        }
        out.push(trace(bug, test, Outcome::Fail, &exec.iter().map(|&m| name(m)).collect::<Vec<_>>()));
        test += 1;
    }
    for _ in 0..3 {
        let exec: BTreeSet<usize> = (0..3)
            .map(|_| r.gen_range(0..n_methods))
            .filter(|m| !faulty.contains(m))
            .collect();
        out.push(trace(bug, test, Outcome::Pass, &exec.iter().map(|&m| name(m)).collect::<Vec<_>>()));
        test += 1;
    }
}

/// A corpus where the query report says almost nothing. The training
/// reports that share its one distinctive word were all fixed in the same
/// method, which the query's failing test also runs; more numerous unrelated reports
/// were fixed in a popular decoy method that also runs in the query's failing
/// test and sorts before the faulty one.
pub struct Motivation {
    pub dataset: Dataset,
    pub query: String,
    pub faulty: String,
}

pub fn motivation(seed: u64) -> Motivation {
    motivation_with(seed, 2, 5)
}

pub fn motivation_with(seed: u64, n_similar: usize, n_decoy: usize) -> Motivation {
    let mut r = rng(seed);
    let n_methods = 12;
    let star = r.gen_range(6..n_methods);
    let decoy = r.gen_range(0..star);
    let name = |m: usize| format!("m{m:02}");
    let methods: Vec<RawDocument> = (0..n_methods)
        .map(|m| doc(&name(m), DocKind::Method, &method_text(&mut r, m)))
        .collect();
    let mut bugs = Vec::new();
    let mut traces = Vec::new();
    let mut truth = Vec::new();
    for (prefix, target, tag, count) in [("a", star, "widget", n_similar), ("b", decoy, "engine", n_decoy)] {
        for i in 0..count {
            let id = format!("{prefix}{i}");
            let mut words: Vec<String> = topic(target).choose_multiple(&mut r, 2).cloned().collect();
            words.push(tag.into());
            words.push(COMMON.choose(&mut r).unwrap().to_string());
            words.shuffle(&mut r);
            bugs.push(doc(&id, DocKind::BugReport, &words.join(" ")));
            bug_traces(&mut r, &id, &[target], n_methods, &mut traces);
            truth.push(GroundTruthRecord { bug_id: id, faulty_methods: vec![name(target)] });
        }
    }
    let query = "q".to_string();
    bugs.push(doc(&query, DocKind::BugReport, "widget"));
    // The faulty method only runs in the failing test; the decoy also runs in
    // one passing test.
    let mut fail: BTreeSet<usize> = [star, decoy].into();
    while fail.len() < 4 {
        fail.insert(r.gen_range(0..n_methods));
    }
    traces.push(trace(&query, 0, Outcome::Fail, &fail.iter().map(|&m| name(m)).collect::<Vec<_>>()));
    let mut passing: BTreeSet<usize> = [decoy].into();
    passing.insert(r.gen_range(0..n_methods));
    passing.remove(&star);
    traces.push(trace(&query, 1, Outcome::Pass, &passing.iter().map(|&m| name(m)).collect::<Vec<_>>()));
    let other: Vec<String> = (0..n_methods)
        .filter(|m| !fail.contains(m))
        .take(2)
        .map(name)
        .collect();
    traces.push(trace(&query, 2, Outcome::Pass, &other));
    truth.push(GroundTruthRecord { bug_id: query.clone(), faulty_methods: vec![name(star)] });
    Motivation {
        dataset: Dataset::from_records(bugs, methods, traces, truth).unwrap(),
        query,
        faulty: name(star),
    }
}

/// A random project of `n_bugs` localized bugs over `n_methods` methods whose
/// report text and spectra both carry signal about the faulty method.
pub fn project(seed: u64, prefix: &str, n_bugs: usize, n_methods: usize) -> Dataset {
    let mut r = rng(seed);
    let name = |m: usize| format!("{prefix}m{m:02}");
    let methods: Vec<RawDocument> = (0..n_methods)
        .map(|m| {
            let id = name(m);
            let text = method_text(&mut r, m % 26);
            doc(&id, DocKind::Method, &format!("{text} {prefix}code"))
        })
        .collect();
    let mut bugs = Vec::new();
    let mut traces = Vec::new();
    let mut truth = Vec::new();
    for i in 0..n_bugs {
        let id = format!("{prefix}b{i:02}");
        let target = r.gen_range(0..n_methods);
        let mut words: Vec<String> = topic(target % 26).choose_multiple(&mut r, 1).cloned().collect();
        for _ in 0..3 {
            words.push(COMMON.choose(&mut r).unwrap().to_string());
        }
        if r.gen_bool(0.5) {
            words.push(topic(r.gen_range(0..n_methods) % 26)[0].clone());
        }
        bugs.push(doc(&id, DocKind::BugReport, &words.join(" ")));
        let mut tr = Vec::new();
        bug_traces(&mut r, &id, &[target], n_methods, &mut tr);
        for t in &mut tr {
            // rename into this project's namespace
            t.executed = t
                .executed
                .iter()
                .map(|m| name(m[1..].parse::<usize>().unwrap()))
                .collect();
        }
        traces.extend(tr);
        truth.push(GroundTruthRecord { bug_id: id, faulty_methods: vec![name(target)] });
    }
    Dataset::from_records(bugs, methods, traces, truth).unwrap()
}

pub fn save(dataset: &Dataset, dir: &Path, prefix: &str) -> DatasetPaths {
    let paths = DatasetPaths {
        bugs: dir.join(format!("{prefix}bugs.jsonl")),
        methods: dir.join(format!("{prefix}methods.jsonl")),
        spectra: dir.join(format!("{prefix}spectra.jsonl")),
        ground_truth: dir.join(format!("{prefix}ground_truth.jsonl")),
    };
    dataset.save(&paths).unwrap();
    paths
}

/// All files of a directory, by name.
pub fn read_dir_bytes(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    std::fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (e.file_name().to_string_lossy().into_owned(), std::fs::read(e.path()).unwrap())
        })
        .collect()
}
