//! The network-Lasso regularized integrator.
//!
//! Relevancy of method `m` to bug `b` is `sum_j (u_bj + v_mj) x_bmj`. The loss
//! is weighted cross-entropy over labeled pairs, a ridge penalty on all
//! parameters, and a network-Lasso penalty over the bug and method similarity
//! graphs:
//!
//! ```text
//! L = -sum_{b,m} w_bm [y ln s + (1 - y) ln(1 - s)]
//!     + alpha/2 * sum (u^2 + v^2)
//!     + beta/2 * sum_j [ sum_{(b,b')} e_bb' (u_bj - u_b'j)^2 + sum_{(m,m')} e_mm' (v_mj - v_m'j)^2 ]
//! ```
//!
//! with graph sums over undirected edges. Rows without labels (the query) add
//! nothing to the entropy term; their parameters are set by the two penalties.
//! [`fit`] minimizes `L` with per-feature damped Newton sweeps.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::{FeatureTensor, FeatureVector};
use crate::graphs::SimilarityGraph;
use crate::NUM_FEATURES;

pub use crate::evaluation::rank_methods;

/// Probabilities are clamped to `[EPS, 1 - EPS]` before taking logs.
pub const LOG_CLAMP: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HyperParams {
    /// Ridge strength, > 0.
    pub alpha: f64,
    /// Network-Lasso strength, >= 0.
    pub beta: f64,
    /// Number of nearest historical bugs to train on.
    pub k: usize,
    /// Newton sweeps.
    pub t_max: usize,
    /// Initial damping factor in (0, 1].
    pub eta0: f64,
}

impl Default for HyperParams {
    fn default() -> Self {
        Self {
            alpha: 0.1,
            beta: 0.1,
            k: 10,
            t_max: 30,
            eta0: 1.0,
        }
    }
}

impl HyperParams {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.to_string()));
        if !(self.alpha > 0.0 && self.alpha.is_finite()) {
            return bad("alpha must be positive and finite");
        }
        if !(self.beta >= 0.0 && self.beta.is_finite()) {
            return bad("beta must be non-negative and finite");
        }
        if self.k == 0 {
            return bad("k must be at least 1");
        }
        if !(self.eta0 > 0.0 && self.eta0 <= 1.0) {
            return bad("eta0 must lie in (0, 1]");
        }
        Ok(())
    }
}

/// Per-class instance weights: `1/N_faulty` for faulty pairs and
/// `1/(N - N_faulty)` for the rest.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InstanceWeights {
    pub positive: f64,
    pub negative: f64,
}

impl InstanceWeights {
    pub fn weight(&self, faulty: bool) -> f64 {
        if faulty {
            self.positive
        } else {
            self.negative
        }
    }
}

pub fn instance_weights(labels: &[bool]) -> Result<InstanceWeights> {
    let n = labels.len();
    let faulty = labels.iter().filter(|&&y| y).count();
    if faulty == 0 || faulty == n {
        return Err(Error::DegenerateLabels(format!(
            "{faulty} faulty out of {n} instances; both classes are required"
        )));
    }
    Ok(InstanceWeights {
        positive: 1.0 / faulty as f64,
        negative: 1.0 / (n - faulty) as f64,
    })
}

/// Numerically stable logistic function.
pub fn logistic(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

pub fn predict_score(x: &FeatureVector, u: &FeatureVector, v: &FeatureVector) -> f64 {
    (0..NUM_FEATURES).map(|j| (u[j] + v[j]) * x[j]).sum()
}

/// The data of one training problem: bugs x methods features, optional labels,
/// per-cell instance weights (0 on unlabeled cells) and both graphs restricted
/// to the problem's nodes.
#[derive(Debug, Clone)]
pub struct Problem {
    bugs: Vec<String>,
    methods: Vec<String>,
    x: Vec<FeatureVector>,
    y: Vec<Option<bool>>,
    w: Vec<f64>,
    bug_graph: SimilarityGraph,
    method_graph: SimilarityGraph,
}

impl Problem {
    /// Builds a problem whose instance weights come from its own labeled cells.
    pub fn new(
        x: Vec<FeatureVector>,
        y: Vec<Option<bool>>,
        bug_graph: SimilarityGraph,
        method_graph: SimilarityGraph,
    ) -> Result<Self> {
        let labeled: Vec<bool> = y.iter().flatten().copied().collect();
        let iw = instance_weights(&labeled)?;
        let w = y.iter().map(|l| l.map_or(0.0, |f| iw.weight(f))).collect();
        Self::with_weights(x, y, w, bug_graph, method_graph)
    }

    /// Builds a problem with explicit weights (ignored on unlabeled cells).
    pub fn with_weights(
        x: Vec<FeatureVector>,
        y: Vec<Option<bool>>,
        mut w: Vec<f64>,
        bug_graph: SimilarityGraph,
        method_graph: SimilarityGraph,
    ) -> Result<Self> {
        let cells = bug_graph.len() * method_graph.len();
        if x.len() != cells || y.len() != cells || w.len() != cells {
            return Err(Error::Data(format!(
                "problem shape mismatch: {} bugs x {} methods but {} / {} / {} cells",
                bug_graph.len(),
                method_graph.len(),
                x.len(),
                y.len(),
                w.len()
            )));
        }
        if x.iter().flatten().any(|v| !v.is_finite()) || w.iter().any(|v| !v.is_finite() || *v < 0.0)
        {
            return Err(Error::Data("features must be finite and weights non-negative".into()));
        }
        for (wi, yi) in w.iter_mut().zip(&y) {
            if yi.is_none() {
                *wi = 0.0;
            }
        }
        Ok(Self {
            bugs: bug_graph.nodes().to_vec(),
            methods: method_graph.nodes().to_vec(),
            x,
            y,
            w,
            bug_graph,
            method_graph,
        })
    }

    /// Working set for a query: the query plus its neighbors (sorted by id)
    /// against every method of the tensor. Neighbor rows keep their labels,
    /// the query row is unlabeled, and weights are recomputed over the
    /// neighbor rows.
    pub fn for_query(
        tensor: &FeatureTensor,
        query: &str,
        neighbors: &[String],
        bug_graph: &SimilarityGraph,
        method_graph: &SimilarityGraph,
    ) -> Result<Self> {
        let mut ids: Vec<&str> = neighbors.iter().map(String::as_str).collect();
        ids.push(query);
        ids.sort_unstable();
        ids.dedup();
        let method_ids: Vec<&str> = tensor.methods().iter().map(String::as_str).collect();
        let local_bugs = bug_graph.subgraph(&ids)?;
        let local_methods = if method_graph.nodes() == tensor.methods() {
            method_graph.clone()
        } else {
            method_graph.subgraph(&method_ids)?
        };
        let mut x = Vec::with_capacity(ids.len() * method_ids.len());
        let mut y = Vec::with_capacity(ids.len() * method_ids.len());
        for id in &ids {
            let row = tensor
                .bug_position(id)
                .ok_or_else(|| Error::UnknownBug(id.to_string()))?;
            x.extend_from_slice(tensor.row(row));
            if *id == query {
                y.extend(std::iter::repeat_n(None, method_ids.len()));
            } else {
                let labels = tensor.row_labels(row);
                if labels.iter().any(Option::is_none) {
                    return Err(Error::MissingLabels(id.to_string()));
                }
                y.extend_from_slice(labels);
            }
        }
        Self::new(x, y, local_bugs, local_methods)
    }

    pub fn bugs(&self) -> &[String] {
        &self.bugs
    }

    pub fn methods(&self) -> &[String] {
        &self.methods
    }

    pub fn bug_graph(&self) -> &SimilarityGraph {
        &self.bug_graph
    }

    pub fn method_graph(&self) -> &SimilarityGraph {
        &self.method_graph
    }

    pub fn n_bugs(&self) -> usize {
        self.bugs.len()
    }

    pub fn n_methods(&self) -> usize {
        self.methods.len()
    }

    fn cell(&self, b: usize, m: usize) -> usize {
        b * self.methods.len() + m
    }

    pub fn features(&self, b: usize, m: usize) -> &FeatureVector {
        &self.x[self.cell(b, m)]
    }

    pub fn label(&self, b: usize, m: usize) -> Option<bool> {
        self.y[self.cell(b, m)]
    }

    pub fn weight(&self, b: usize, m: usize) -> f64 {
        self.w[self.cell(b, m)]
    }

    /// Target value used in the entropy term; 0 on unlabeled cells, where the
    /// weight is 0 anyway.
    fn target(&self, idx: usize) -> f64 {
        match self.y[idx] {
            Some(true) => 1.0,
            _ => 0.0,
        }
    }

    /// Same problem with every instance weight multiplied by `c`.
    pub fn scaled_weights(&self, c: f64) -> Self {
        let mut out = self.clone();
        for w in &mut out.w {
            *w *= c;
        }
        out
    }

    /// Rows without any label.
    pub fn query_rows(&self) -> Vec<usize> {
        (0..self.n_bugs())
            .filter(|&b| (0..self.n_methods()).all(|m| self.label(b, m).is_none()))
            .collect()
    }
}

/// Learned bug-report (`u`) and method (`v`) parameter vectors, indexed like
/// the problem's bugs and methods.
#[derive(Debug, Clone, PartialEq)]
pub struct IntegratorParams {
    pub u: Vec<FeatureVector>,
    pub v: Vec<FeatureVector>,
}

impl IntegratorParams {
    pub fn zeros(problem: &Problem) -> Self {
        Self {
            u: vec![[0.0; NUM_FEATURES]; problem.n_bugs()],
            v: vec![[0.0; NUM_FEATURES]; problem.n_methods()],
        }
    }

    pub fn is_finite(&self) -> bool {
        self.u.iter().chain(&self.v).flatten().all(|p| p.is_finite())
    }

    pub fn score(&self, problem: &Problem, b: usize, m: usize) -> f64 {
        predict_score(problem.features(b, m), &self.u[b], &self.v[m])
    }

    /// Parameters as CSV: node_id, kind, p1, p2, p3.
    pub fn write_csv(&self, problem: &Problem, path: &Path) -> Result<()> {
        let err = |e: csv::Error| Error::Data(format!("{}: {e}", path.display()));
        let mut w = csv::Writer::from_path(path).map_err(err)?;
        w.write_record(["node_id", "kind", "p1", "p2", "p3"]).map_err(err)?;
        let rows = problem
            .bugs()
            .iter()
            .zip(&self.u)
            .map(|(id, p)| (id, "bug", p))
            .chain(problem.methods().iter().zip(&self.v).map(|(id, p)| (id, "method", p)));
        for (id, kind, p) in rows {
            w.write_record([
                id.as_str(),
                kind,
                &p[0].to_string(),
                &p[1].to_string(),
                &p[2].to_string(),
            ])
            .map_err(err)?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct LossBreakdown {
    pub entropy: f64,
    pub ridge: f64,
    pub lasso: f64,
}

impl LossBreakdown {
    pub fn total(&self) -> f64 {
        self.entropy + self.ridge + self.lasso
    }
}

/// Logistic outputs for every cell.
pub fn probabilities(problem: &Problem, params: &IntegratorParams) -> Vec<f64> {
    let mut out = Vec::with_capacity(problem.n_bugs() * problem.n_methods());
    for b in 0..problem.n_bugs() {
        for m in 0..problem.n_methods() {
            out.push(logistic(params.score(problem, b, m)));
        }
    }
    out
}

/// Weighted cross-entropy of cached probabilities.
pub fn entropy_loss(problem: &Problem, sigma: &[f64]) -> f64 {
    let mut acc = 0.0;
    for (idx, &s) in sigma.iter().enumerate() {
        let w = problem.w[idx];
        if w == 0.0 {
            continue;
        }
        let s = s.clamp(LOG_CLAMP, 1.0 - LOG_CLAMP);
        let y = problem.target(idx);
        acc -= w * (y * s.ln() + (1.0 - y) * (1.0 - s).ln());
    }
    acc
}

pub fn loss_full(problem: &Problem, params: &IntegratorParams, alpha: f64, beta: f64) -> LossBreakdown {
    let entropy = entropy_loss(problem, &probabilities(problem, params));
    let squares: f64 = params.u.iter().chain(&params.v).flatten().map(|p| p * p).sum();
    let graph_term = |graph: &SimilarityGraph, p: &[FeatureVector]| -> f64 {
        graph
            .edges()
            .map(|(i, k, e)| {
                (0..NUM_FEATURES)
                    .map(|j| e * (p[i][j] - p[k][j]).powi(2))
                    .sum::<f64>()
            })
            .sum()
    };
    let lasso = graph_term(&problem.bug_graph, &params.u) + graph_term(&problem.method_graph, &params.v);
    LossBreakdown {
        entropy,
        ridge: 0.5 * alpha * squares,
        lasso: 0.5 * beta * lasso,
    }
}

/// First and second partial derivative of the loss in `u_bj`, with
/// `sigma` the cached probabilities.
pub fn grad_hess_u(
    problem: &Problem,
    params: &IntegratorParams,
    sigma: &[f64],
    alpha: f64,
    beta: f64,
    b: usize,
    j: usize,
) -> (f64, f64) {
    let neighbor_sum: f64 = problem
        .bug_graph
        .neighbors(b)
        .iter()
        .map(|&(k, e)| e * params.u[k][j])
        .sum();
    newton_terms(
        problem,
        sigma,
        (0..problem.n_methods()).map(|m| problem.cell(b, m)),
        j,
        params.u[b][j],
        problem.bug_graph.degree(b),
        neighbor_sum,
        alpha,
        beta,
    )
}

/// First and second partial derivative of the loss in `v_mj`.
pub fn grad_hess_v(
    problem: &Problem,
    params: &IntegratorParams,
    sigma: &[f64],
    alpha: f64,
    beta: f64,
    m: usize,
    j: usize,
) -> (f64, f64) {
    let neighbor_sum: f64 = problem
        .method_graph
        .neighbors(m)
        .iter()
        .map(|&(k, e)| e * params.v[k][j])
        .sum();
    newton_terms(
        problem,
        sigma,
        (0..problem.n_bugs()).map(|b| problem.cell(b, m)),
        j,
        params.v[m][j],
        problem.method_graph.degree(m),
        neighbor_sum,
        alpha,
        beta,
    )
}

/// `(sum w (s - y) x_j + beta (p q - nbr) + alpha p, sum w s (1 - s) x_j^2 + beta q + alpha)`
#[allow(clippy::too_many_arguments)]
fn newton_terms(
    problem: &Problem,
    sigma: &[f64],
    cells: impl Iterator<Item = usize>,
    j: usize,
    param: f64,
    degree: f64,
    neighbor_sum: f64,
    alpha: f64,
    beta: f64,
) -> (f64, f64) {
    let mut grad = 0.0;
    let mut curv = 0.0;
    for idx in cells {
        let w = problem.w[idx];
        if w == 0.0 {
            continue;
        }
        let s = sigma[idx];
        let x = problem.x[idx][j];
        grad += w * (s - problem.target(idx)) * x;
        curv += w * s * (1.0 - s) * x * x;
    }
    grad += beta * (param * degree - neighbor_sum) + alpha * param;
    curv += beta * degree + alpha;
    (grad, curv)
}

/// Result of [`fit`].
#[derive(Debug, Clone)]
pub struct FitOutcome {
    pub params: IntegratorParams,
    /// Entropy after initialization, then after every sweep.
    pub entropy_trace: Vec<f64>,
    /// Damping factor used in each sweep.
    pub eta_trace: Vec<f64>,
}

impl FitOutcome {
    /// Relevancy scores of bug row `b` against every method.
    pub fn scores(&self, problem: &Problem, b: usize) -> Vec<f64> {
        (0..problem.n_methods())
            .map(|m| self.params.score(problem, b, m))
            .collect()
    }
}

/// Adaptive per-feature damped Newton learning.
///
/// Parameters start at zero. Each of the `t_max` sweeps visits features
/// j = 1..3; for each it freezes the neighbor sums of all `u_.j`, updates every
/// `u_bj`, then does the same for `v_.j`. Probabilities are refreshed once per
/// sweep. The damping factor halves when the entropy rises over a sweep and
/// otherwise doubles, capped at 1.
pub fn fit(problem: &Problem, hp: &HyperParams) -> Result<FitOutcome> {
    hp.validate()?;
    let (alpha, beta) = (hp.alpha, hp.beta);
    let mut params = IntegratorParams::zeros(problem);
    let mut sigma = probabilities(problem, &params);
    let mut current = entropy_loss(problem, &sigma);
    let mut eta = hp.eta0;
    let mut entropy_trace = vec![current];
    let mut eta_trace = Vec::with_capacity(hp.t_max);
    let mut neighbor_sums = vec![0.0; problem.n_bugs().max(problem.n_methods())];

    for sweep in 0..hp.t_max {
        let previous = current;
        eta_trace.push(eta);
        for j in 0..NUM_FEATURES {
            for (b, slot) in neighbor_sums.iter_mut().enumerate().take(problem.n_bugs()) {
                *slot = problem
                    .bug_graph
                    .neighbors(b)
                    .iter()
                    .map(|&(k, e)| e * params.u[k][j])
                    .sum();
            }
            for b in 0..problem.n_bugs() {
                let (numer, denom) = newton_terms(
                    problem,
                    &sigma,
                    (0..problem.n_methods()).map(|m| problem.cell(b, m)),
                    j,
                    params.u[b][j],
                    problem.bug_graph.degree(b),
                    neighbor_sums[b],
                    alpha,
                    beta,
                );
                debug_assert!(denom > 0.0);
                params.u[b][j] -= eta * numer / denom;
            }
            for (m, slot) in neighbor_sums.iter_mut().enumerate().take(problem.n_methods()) {
                *slot = problem
                    .method_graph
                    .neighbors(m)
                    .iter()
                    .map(|&(k, e)| e * params.v[k][j])
                    .sum();
            }
            for m in 0..problem.n_methods() {
                let (numer, denom) = newton_terms(
                    problem,
                    &sigma,
                    (0..problem.n_bugs()).map(|b| problem.cell(b, m)),
                    j,
                    params.v[m][j],
                    problem.method_graph.degree(m),
                    neighbor_sums[m],
                    alpha,
                    beta,
                );
                debug_assert!(denom > 0.0);
                params.v[m][j] -= eta * numer / denom;
            }
        }
        if !params.is_finite() {
            return Err(Error::NonFiniteState(format!(
                "parameters diverged in sweep {} (eta {eta}, alpha {alpha}, beta {beta})",
                sweep + 1
            )));
        }
        sigma = probabilities(problem, &params);
        current = entropy_loss(problem, &sigma);
        entropy_trace.push(current);
        eta = if current > previous {
            eta / 2.0
        } else {
            (2.0 * eta).min(1.0)
        };
    }
    Ok(FitOutcome {
        params,
        entropy_trace,
        eta_trace,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn graph(ids: &[&str], edges: &[(usize, usize, f64)]) -> SimilarityGraph {
        SimilarityGraph::from_edges(ids.iter().map(|s| s.to_string()).collect(), edges).unwrap()
    }

    #[test]
    fn predict_and_logistic_examples() {
        let zero = [0.0; 3];
        assert_eq!(predict_score(&[0.3, 0.2, 0.1], &zero, &zero), 0.0);
        assert_eq!(predict_score(&[0.5, 0.7, 0.9], &[1.0, 0.0, 0.0], &zero), 0.5);
        let s = predict_score(&[0.2, 0.5, 0.1], &[1.0, 2.0, 0.0], &[-1.0, 1.0, 1.0]);
        assert!((s - 1.6).abs() < 1e-15);
        assert_eq!(logistic(0.0), 0.5);
        assert!((logistic(500.0) - 1.0).abs() < 1e-12);
        assert!(logistic(-800.0) >= 0.0 && logistic(-800.0).is_finite());
        assert!((logistic(1.0) - 0.731_058_58).abs() < 1e-8);
    }

    #[test]
    fn instance_weight_examples() {
        let mut labels = vec![false; 10];
        labels[0] = true;
        labels[1] = true;
        let w = instance_weights(&labels).unwrap();
        assert_eq!((w.positive, w.negative), (0.5, 0.125));
        let half = instance_weights(&[true, true, false, false]).unwrap();
        assert_eq!(half.positive, half.negative);
        let one = instance_weights(&[true, false]).unwrap();
        assert_eq!((one.positive, one.negative), (1.0, 1.0));
        assert!(matches!(instance_weights(&[false, false]), Err(Error::DegenerateLabels(_))));
        assert!(matches!(instance_weights(&[]), Err(Error::DegenerateLabels(_))));
    }

    fn two_by_two() -> Problem {
        let x = vec![[0.5, 0.2, 0.1], [0.1, 0.9, 0.3], [0.4, 0.4, 0.0], [0.0, 0.3, 0.8]];
        let y = vec![Some(true), Some(false), Some(false), Some(true)];
        Problem::new(x, y, graph(&["b1", "b2"], &[(0, 1, 0.6)]), graph(&["m1", "m2"], &[(0, 1, 0.3)])).unwrap()
    }

    #[test]
    fn loss_at_zero_is_weighted_ln2() {
        let p = two_by_two();
        let params = IntegratorParams::zeros(&p);
        let l = loss_full(&p, &params, 0.7, 0.9);
        let total_w: f64 = (0..2).flat_map(|b| (0..2).map(move |m| (b, m))).map(|(b, m)| p.weight(b, m)).sum();
        assert!((l.entropy - total_w * 2f64.ln()).abs() < 1e-15);
        assert_eq!((l.ridge, l.lasso), (0.0, 0.0));
    }

    #[test]
    fn lasso_vanishes_for_equal_parameters() {
        let p = two_by_two();
        let params = IntegratorParams {
            u: vec![[0.3, -0.2, 0.5]; 2],
            v: vec![[1.0, 0.0, -1.0]; 2],
        };
        assert_eq!(loss_full(&p, &params, 1.0, 5.0).lasso, 0.0);
        assert!(loss_full(&p, &params, 1.0, 0.0).lasso == 0.0);
    }

    /// Straight-line summation of all three terms on the 2x2 fixture.
    #[test]
    fn loss_matches_straight_line_oracle() {
        let p = two_by_two();
        let u = [[0.3, -0.2, 0.5], [-0.1, 0.4, 0.2]];
        let v = [[0.2, 0.1, -0.3], [0.0, -0.5, 0.6]];
        let params = IntegratorParams { u: u.to_vec(), v: v.to_vec() };
        let (alpha, beta) = (0.3, 1.7);
        let xs = [[0.5, 0.2, 0.1], [0.1, 0.9, 0.3], [0.4, 0.4, 0.0], [0.0, 0.3, 0.8]];
        let ys = [1.0, 0.0, 0.0, 1.0];
        let w = 0.5; // two positives and two negatives
        let mut entropy = 0.0;
        for b in 0..2 {
            for m in 0..2 {
                let i = b * 2 + m;
                let f: f64 = (0..3).map(|j| (u[b][j] + v[m][j]) * xs[i][j]).sum();
                let s = 1.0 / (1.0 + (-f).exp());
                entropy += -w * (ys[i] * s.ln() + (1.0 - ys[i]) * (1.0 - s).ln());
            }
        }
        let mut sq = 0.0;
        for p3 in u.iter().chain(v.iter()) {
            for q in p3 {
                sq += q * q;
            }
        }
        let mut lasso = 0.0;
        for j in 0..3 {
            lasso += 0.6 * (u[0][j] - u[1][j]).powi(2) + 0.3 * (v[0][j] - v[1][j]).powi(2);
        }
        let expected = entropy + alpha / 2.0 * sq + beta / 2.0 * lasso;
        let got = loss_full(&p, &params, alpha, beta).total();
        assert!((got - expected).abs() < 1e-12, "{got} vs {expected}");
    }

    #[test]
    fn derivatives_at_the_origin() {
        // x = 0 everywhere: gradient 0, curvature alpha + beta q.
        let x = vec![[0.0; 3]; 4];
        let y = vec![Some(true), Some(false), Some(false), Some(true)];
        let p = Problem::new(x, y, graph(&["b1", "b2"], &[(0, 1, 0.6)]), graph(&["m1", "m2"], &[(0, 1, 0.3)])).unwrap();
        let params = IntegratorParams::zeros(&p);
        let sigma = probabilities(&p, &params);
        for j in 0..3 {
            assert_eq!(grad_hess_u(&p, &params, &sigma, 0.2, 0.5, 0, j), (0.0, 0.2 + 0.5 * 0.6));
            assert_eq!(grad_hess_v(&p, &params, &sigma, 0.2, 0.5, 1, j), (0.0, 0.2 + 0.5 * 0.3));
        }
    }

    #[test]
    fn zero_beta_is_weighted_logistic_regression() {
        let p = two_by_two();
        let params = IntegratorParams {
            u: vec![[0.3, -0.2, 0.5], [-0.1, 0.4, 0.2]],
            v: vec![[0.2, 0.1, -0.3], [0.0, -0.5, 0.6]],
        };
        let sigma = probabilities(&p, &params);
        let (g, h) = grad_hess_u(&p, &params, &sigma, 0.4, 0.0, 1, 2);
        let mut eg = 0.4 * params.u[1][2];
        let mut eh = 0.4;
        for m in 0..2 {
            let s = sigma[2 + m];
            let y = if p.label(1, m).unwrap() { 1.0 } else { 0.0 };
            let x = p.features(1, m)[2];
            eg += p.weight(1, m) * (s - y) * x;
            eh += p.weight(1, m) * s * (1.0 - s) * x * x;
        }
        assert!((g - eg).abs() < 1e-15 && (h - eh).abs() < 1e-15);
    }

    #[test]
    fn zero_sweeps_give_zero_scores() {
        let p = two_by_two();
        let hp = HyperParams { t_max: 0, ..HyperParams::default() };
        let out = fit(&p, &hp).unwrap();
        assert!(out.scores(&p, 0).iter().all(|&s| s == 0.0));
        assert_eq!(out.entropy_trace.len(), 1);
    }

    #[test]
    fn fit_reduces_entropy_and_separates_labels() {
        let p = two_by_two();
        let out = fit(&p, &HyperParams { alpha: 0.01, beta: 0.01, ..HyperParams::default() }).unwrap();
        assert!(out.entropy_trace.last().unwrap() < &out.entropy_trace[0]);
        let s0 = out.scores(&p, 0);
        let s1 = out.scores(&p, 1);
        assert!(s0[0] > s0[1] && s1[1] > s1[0]);
    }

    #[test]
    fn invalid_hyperparameters_rejected() {
        let p = two_by_two();
        for hp in [
            HyperParams { alpha: 0.0, ..HyperParams::default() },
            HyperParams { beta: -1.0, ..HyperParams::default() },
            HyperParams { eta0: 1.5, ..HyperParams::default() },
            HyperParams { k: 0, ..HyperParams::default() },
        ] {
            assert!(matches!(fit(&p, &hp), Err(Error::Config(_))));
        }
    }

    #[test]
    fn query_rows_are_detected_and_unweighted() {
        let x = vec![[0.5, 0.2, 0.1], [0.1, 0.9, 0.3], [0.4, 0.4, 0.0], [0.0, 0.3, 0.8]];
        let y = vec![Some(true), Some(false), None, None];
        let p = Problem::new(x, y, graph(&["b1", "q"], &[(0, 1, 0.6)]), graph(&["m1", "m2"], &[])).unwrap();
        assert_eq!(p.query_rows(), vec![1]);
        assert_eq!(p.weight(1, 0), 0.0);
        assert_eq!(p.weight(0, 0), 1.0);
    }
}
