//! Cosine similarity graphs over bug reports or methods, and K-NN retrieval.

use std::collections::BTreeMap;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::{cosine_similarity, Document};
use crate::error::{Error, Result};

/// Which pairwise edges survive graph construction.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "rule", content = "value")]
pub enum SparsifyRule {
    /// Every nonzero similarity becomes an edge.
    #[default]
    KeepAll,
    /// Drop edges with weight below the threshold.
    Threshold(f64),
    /// Keep an edge when it is among the k heaviest of either endpoint.
    TopKPerNode(usize),
}

/// Weighted undirected graph without self loops. Adjacency lists are sorted
/// by neighbor index.
#[derive(Debug, Clone, PartialEq)]
pub struct SimilarityGraph {
    nodes: Vec<String>,
    index: BTreeMap<String, usize>,
    adjacency: Vec<Vec<(usize, f64)>>,
    degree: Vec<f64>,
}

impl SimilarityGraph {
    /// Builds from a symmetric edge list; each undirected edge listed once.
    pub fn from_edges(nodes: Vec<String>, edges: &[(usize, usize, f64)]) -> Result<Self> {
        let n = nodes.len();
        let mut adjacency = vec![Vec::new(); n];
        for &(i, j, w) in edges {
            if i >= n || j >= n || i == j {
                return Err(Error::Data(format!("invalid edge ({i}, {j})")));
            }
            if !w.is_finite() || w < 0.0 {
                return Err(Error::Data(format!("invalid edge weight {w}")));
            }
            if w > 0.0 {
                adjacency[i].push((j, w));
                adjacency[j].push((i, w));
            }
        }
        for list in &mut adjacency {
            list.sort_by_key(|e| e.0);
            if list.windows(2).any(|w| w[0].0 == w[1].0) {
                return Err(Error::Data("duplicate edge".into()));
            }
        }
        let degree = adjacency
            .iter()
            .map(|l| l.iter().map(|e| e.1).sum())
            .collect();
        let index = nodes.iter().enumerate().map(|(i, id)| (id.clone(), i)).collect();
        Ok(Self {
            nodes,
            index,
            adjacency,
            degree,
        })
    }

    pub fn nodes(&self) -> &[String] {
        &self.nodes
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn position(&self, id: &str) -> Option<usize> {
        self.index.get(id).copied()
    }

    pub fn neighbors(&self, i: usize) -> &[(usize, f64)] {
        &self.adjacency[i]
    }

    /// Degree sum q_i = sum_j e_ij.
    pub fn degree(&self, i: usize) -> f64 {
        self.degree[i]
    }

    pub fn weight(&self, i: usize, j: usize) -> f64 {
        self.adjacency[i]
            .binary_search_by_key(&j, |e| e.0)
            .map(|k| self.adjacency[i][k].1)
            .unwrap_or(0.0)
    }

    /// Undirected edges (i < j) in index order.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        self.adjacency.iter().enumerate().flat_map(|(i, l)| {
            l.iter()
                .filter(move |e| e.0 > i)
                .map(move |&(j, w)| (i, j, w))
        })
    }

    /// Induced subgraph on the given ids, in the given order.
    pub fn subgraph(&self, ids: &[&str]) -> Result<SimilarityGraph> {
        let positions: Vec<usize> = ids
            .iter()
            .map(|id| {
                self.position(id)
                    .ok_or_else(|| Error::Data(format!("node {id} not in graph")))
            })
            .collect::<Result<_>>()?;
        let mut edges = Vec::new();
        for (a, &pa) in positions.iter().enumerate() {
            for (b, &pb) in positions.iter().enumerate().skip(a + 1) {
                let w = self.weight(pa, pb);
                if w > 0.0 {
                    edges.push((a, b, w));
                }
            }
        }
        Self::from_edges(ids.iter().map(|s| s.to_string()).collect(), &edges)
    }

    /// The K heaviest neighbors of `query` among `candidates` (all other
    /// nodes when `None`), heaviest first, ties broken by ascending id.
    /// Zero-weight candidates count as neighbors of weight 0.
    pub fn top_k_neighbors(
        &self,
        query: &str,
        k: usize,
        candidates: Option<&[&str]>,
    ) -> Result<Vec<String>> {
        let q = self
            .position(query)
            .ok_or_else(|| Error::UnknownBug(query.to_string()))?;
        let pool: Vec<usize> = match candidates {
            Some(c) => c
                .iter()
                .filter_map(|id| self.position(id))
                .filter(|&i| i != q)
                .collect(),
            None => (0..self.len()).filter(|&i| i != q).collect(),
        };
        let mut scored: Vec<(f64, &str)> = pool
            .into_iter()
            .map(|i| (self.weight(q, i), self.nodes[i].as_str()))
            .collect();
        scored.sort_by(|a, b| b.0.total_cmp(&a.0).then_with(|| a.1.cmp(b.1)));
        scored.dedup_by(|a, b| a.1 == b.1);
        Ok(scored.into_iter().take(k).map(|(_, id)| id.to_string()).collect())
    }

    /// Edge list as CSV with columns src,dst,weight.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)
            .map_err(|e| Error::Data(format!("{}: {e}", path.display())))?;
        let mut rows = vec![["src".to_string(), "dst".to_string(), "weight".to_string()]];
        rows.extend(
            self.edges()
                .map(|(i, j, wt)| [self.nodes[i].clone(), self.nodes[j].clone(), wt.to_string()]),
        );
        for r in rows {
            w.write_record(&r)
                .map_err(|e| Error::Data(format!("{}: {e}", path.display())))?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }
}

/// Pairwise cosine similarity of TF-IDF vectors, then sparsified.
pub fn build_similarity_graph(docs: &[Document], rule: SparsifyRule) -> SimilarityGraph {
    let n = docs.len();
    let rows: Vec<Vec<(usize, usize, f64)>> = (0..n)
        .into_par_iter()
        .map(|i| {
            ((i + 1)..n)
                .filter_map(|j| {
                    let w = cosine_similarity(&docs[i].tfidf, &docs[j].tfidf);
                    (w > 0.0).then_some((i, j, w))
                })
                .collect()
        })
        .collect();
    let mut edges: Vec<(usize, usize, f64)> = rows.into_iter().flatten().collect();
    match rule {
        SparsifyRule::KeepAll => {}
        SparsifyRule::Threshold(t) => edges.retain(|e| e.2 >= t),
        SparsifyRule::TopKPerNode(k) => {
            let mut per_node: Vec<Vec<(f64, usize)>> = vec![Vec::new(); n];
            for (idx, &(i, j, w)) in edges.iter().enumerate() {
                per_node[i].push((w, idx));
                per_node[j].push((w, idx));
            }
            let mut keep = vec![false; edges.len()];
            for list in &mut per_node {
                list.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
                for &(_, idx) in list.iter().take(k) {
                    keep[idx] = true;
                }
            }
            edges = edges
                .into_iter()
                .zip(keep)
                .filter_map(|(e, k)| k.then_some(e))
                .collect();
        }
    }
    SimilarityGraph::from_edges(docs.iter().map(|d| d.id.clone()).collect(), &edges)
        .expect("cosine edges are valid")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{count_tokens, Corpus, DocKind};
    use proptest::prelude::*;

    fn docs(texts: &[&[&str]]) -> Vec<Document> {
        let corpus = Corpus::build(texts.iter().enumerate().map(|(i, t)| {
            (format!("d{i}"), DocKind::BugReport, count_tokens(t.iter().copied()))
        }));
        corpus.documents().to_vec()
    }

    #[test]
    fn single_node_and_identical_pair() {
        let g = build_similarity_graph(&docs(&[&["a", "b"]]), SparsifyRule::KeepAll);
        assert_eq!(g.edges().count(), 0);
        assert_eq!(g.degree(0), 0.0);

        let d = docs(&[&["a", "b"], &["a", "b"], &["c"]]);
        let g = build_similarity_graph(&d[..2], SparsifyRule::KeepAll);
        assert_eq!(g.edges().collect::<Vec<_>>(), vec![(0, 1, 1.0)]);
    }

    #[test]
    fn three_doc_edges_match_pairwise_cosine() {
        let d = docs(&[&["a", "b"], &["b", "c", "c"], &["a", "d"], &["e"]]);
        let g = build_similarity_graph(&d, SparsifyRule::KeepAll);
        for i in 0..d.len() {
            for j in 0..d.len() {
                let expected = if i == j { 0.0 } else { cosine_similarity(&d[i].tfidf, &d[j].tfidf) };
                assert_eq!(g.weight(i, j), expected);
            }
        }
    }

    #[test]
    fn knn_examples() {
        let nodes: Vec<String> = ["q", "b1", "b2", "b3"].iter().map(|s| s.to_string()).collect();
        let g = SimilarityGraph::from_edges(nodes.clone(), &[(0, 1, 0.9), (0, 2, 0.2), (0, 3, 0.5)]).unwrap();
        assert_eq!(g.top_k_neighbors("q", 2, None).unwrap(), vec!["b1", "b3"]);
        assert_eq!(g.top_k_neighbors("q", 10, None).unwrap().len(), 3);
        let empty = SimilarityGraph::from_edges(nodes, &[]).unwrap();
        assert_eq!(empty.top_k_neighbors("q", 2, None).unwrap(), vec!["b1", "b2"]);
        assert_eq!(
            g.top_k_neighbors("q", 5, Some(&["b2", "b3", "q"])).unwrap(),
            vec!["b3", "b2"]
        );
        assert!(g.top_k_neighbors("zz", 1, None).is_err());
    }

    #[test]
    fn sparsify_rules() {
        let d = docs(&[&["a", "b"], &["a", "c"], &["a", "b", "c"], &["b", "z"]]);
        let full = build_similarity_graph(&d, SparsifyRule::KeepAll);
        let thr = build_similarity_graph(&d, SparsifyRule::Threshold(0.3));
        assert!(thr.edges().all(|e| e.2 >= 0.3));
        assert!(thr.edges().count() <= full.edges().count());
        let top1 = build_similarity_graph(&d, SparsifyRule::TopKPerNode(1));
        assert!(top1.edges().count() <= d.len());
        for i in 0..d.len() {
            let best = full.neighbors(i).iter().map(|e| e.1).fold(0.0, f64::max);
            if best > 0.0 {
                assert!(top1.neighbors(i).iter().any(|e| e.1 == best));
            }
        }
    }

    #[test]
    fn subgraph_keeps_weights() {
        let d = docs(&[&["a", "b"], &["a", "c"], &["a", "b", "c"]]);
        let g = build_similarity_graph(&d, SparsifyRule::KeepAll);
        let s = g.subgraph(&["d2", "d0"]).unwrap();
        assert_eq!(s.weight(0, 1), g.weight(2, 0));
        assert_eq!(s.degree(0), s.weight(0, 1));
    }

    fn arb_graph() -> impl Strategy<Value = (usize, Vec<(usize, usize, f64)>)> {
        (2usize..9).prop_flat_map(|n| {
            let pairs: Vec<(usize, usize)> = (0..n).flat_map(|i| ((i + 1)..n).map(move |j| (i, j))).collect();
            let m = pairs.len();
            (Just(n), proptest::collection::vec(prop_oneof![Just(0.0), 0.0f64..1.0, Just(0.5)], m))
                .prop_map(move |(n, ws)| (n, pairs.iter().zip(ws).map(|(&(i, j), w)| (i, j, w)).collect()))
        })
    }

    proptest! {
        #[test]
        fn degree_and_knn_properties((n, edges) in arb_graph(), k in 1usize..10) {
            let nodes: Vec<String> = (0..n).map(|i| format!("n{i}")).collect();
            let g = SimilarityGraph::from_edges(nodes.clone(), &edges).unwrap();
            for i in 0..n {
                let brute: f64 = (0..n).map(|j| g.weight(i, j)).sum();
                prop_assert!((brute - g.degree(i)).abs() < 1e-12);
                for j in 0..n {
                    prop_assert_eq!(g.weight(i, j), g.weight(j, i));
                }
            }
            // K-NN output is a prefix of a brute-force sort
            let mut all: Vec<(f64, String)> = (1..n).map(|j| (g.weight(0, j), nodes[j].clone())).collect();
            all.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap().then(a.1.cmp(&b.1)));
            let expect: Vec<String> = all.into_iter().take(k).map(|e| e.1).collect();
            prop_assert_eq!(g.top_k_neighbors("n0", k, None).unwrap(), expect);
        }
    }
}
