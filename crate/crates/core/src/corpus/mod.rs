//! Text preprocessing, TF-IDF weighting and cosine similarity.

mod porter;
mod preprocess;
mod vector;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

pub use porter::porter_stem;
pub use preprocess::{
    parse_word_list, preprocess_text, read_word_list, PreprocessConfig, Stemmer,
};
pub use vector::{cosine_similarity, SparseVector};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DocKind {
    BugReport,
    Method,
}

/// A document as ingested: named raw text segments.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RawDocument {
    pub id: String,
    pub kind: DocKind,
    /// Segments in a fixed (sorted) order so concatenation is reproducible.
    pub fields: BTreeMap<String, String>,
}

impl RawDocument {
    /// All fields preprocessed and concatenated with equal weight.
    pub fn tokens(&self, cfg: &PreprocessConfig) -> Vec<String> {
        self.fields
            .values()
            .flat_map(|text| preprocess_text(text, cfg))
            .collect()
    }
}

pub type TokenCounts = BTreeMap<String, u32>;

pub fn count_tokens<I, S>(tokens: I) -> TokenCounts
where
    I: IntoIterator<Item = S>,
    S: Into<String>,
{
    let mut counts = TokenCounts::new();
    for t in tokens {
        *counts.entry(t.into()).or_insert(0) += 1;
    }
    counts
}

/// A preprocessed document with its TF-IDF vector against some corpus.
#[derive(Debug, Clone, PartialEq)]
pub struct Document {
    pub id: String,
    pub kind: DocKind,
    pub token_counts: TokenCounts,
    /// TF-IDF weights, keyed by the corpus term index. Terms unknown to the
    /// corpus, or present in every corpus document, carry no entry.
    pub tfidf: SparseVector,
}

impl Document {
    pub fn term_frequency(&self, word: &str) -> u32 {
        self.token_counts.get(word).copied().unwrap_or(0)
    }
}

/// A frozen document collection with document frequencies.
#[derive(Debug, Clone, Default)]
pub struct Corpus {
    terms: Vec<String>,
    term_index: BTreeMap<String, u32>,
    doc_freq: Vec<u32>,
    documents: Vec<Document>,
    doc_index: BTreeMap<String, usize>,
    size: usize,
}

impl Corpus {
    /// Indexes the given documents. Later duplicates of an id are rejected
    /// by the caller (dataset loading); here the first occurrence wins the
    /// id lookup.
    pub fn build<I>(docs: I) -> Self
    where
        I: IntoIterator<Item = (String, DocKind, TokenCounts)>,
    {
        let docs: Vec<_> = docs.into_iter().collect();
        let mut df: BTreeMap<&str, u32> = BTreeMap::new();
        for (_, _, counts) in &docs {
            for word in counts.keys() {
                *df.entry(word.as_str()).or_insert(0) += 1;
            }
        }
        let terms: Vec<String> = df.keys().map(|w| w.to_string()).collect();
        let doc_freq: Vec<u32> = df.values().copied().collect();
        let term_index = terms
            .iter()
            .enumerate()
            .map(|(i, t)| (t.clone(), i as u32))
            .collect();
        let mut corpus = Corpus {
            terms,
            term_index,
            doc_freq,
            documents: Vec::with_capacity(docs.len()),
            doc_index: BTreeMap::new(),
            size: docs.len(),
        };
        for (id, kind, counts) in docs {
            let doc = corpus.document_for(id, kind, counts);
            corpus.doc_index.entry(doc.id.clone()).or_insert(corpus.documents.len());
            corpus.documents.push(doc);
        }
        corpus
    }

    /// Number of documents |C|.
    pub fn size(&self) -> usize {
        self.size
    }

    pub fn documents(&self) -> &[Document] {
        &self.documents
    }

    pub fn document(&self, id: &str) -> Option<&Document> {
        self.doc_index.get(id).map(|&i| &self.documents[i])
    }

    pub fn term_id(&self, word: &str) -> Option<u32> {
        self.term_index.get(word).copied()
    }

    pub fn term(&self, id: u32) -> &str {
        &self.terms[id as usize]
    }

    pub fn vocabulary_len(&self) -> usize {
        self.terms.len()
    }

    pub fn doc_freq(&self, word: &str) -> u32 {
        self.term_id(word)
            .map(|i| self.doc_freq[i as usize])
            .unwrap_or(0)
    }

    /// (term, document frequency) pairs in term order.
    pub fn doc_freqs(&self) -> impl Iterator<Item = (&str, u32)> {
        self.terms
            .iter()
            .map(String::as_str)
            .zip(self.doc_freq.iter().copied())
    }

    /// ln(|C| / df(w)); 0 for words absent from the index.
    pub fn idf(&self, word: &str) -> f64 {
        self.term_id(word).map(|i| self.idf_of(i)).unwrap_or(0.0)
    }

    fn idf_of(&self, term: u32) -> f64 {
        (self.size() as f64 / self.doc_freq[term as usize] as f64).ln()
    }

    /// ln(f(w,d) + 1) * ln(|C| / df(w)).
    pub fn tfidf_weight(&self, word: &str, counts: &TokenCounts) -> f64 {
        let tf = counts.get(word).copied().unwrap_or(0);
        if tf == 0 {
            return 0.0;
        }
        (tf as f64 + 1.0).ln() * self.idf(word)
    }

    /// TF-IDF vector of arbitrary token counts against this corpus.
    pub fn vectorize(&self, counts: &TokenCounts) -> SparseVector {
        SparseVector::from_entries(
            counts
                .iter()
                .filter_map(|(word, &tf)| {
                    let term = self.term_id(word)?;
                    Some((term, (tf as f64 + 1.0).ln() * self.idf_of(term)))
                })
                .collect(),
        )
    }

    /// Wraps external token counts as a document weighted against this corpus.
    pub fn document_for(&self, id: String, kind: DocKind, token_counts: TokenCounts) -> Document {
        let tfidf = self.vectorize(&token_counts);
        Document {
            id,
            kind,
            token_counts,
            tfidf,
        }
    }

    /// TF-IDF weights of a document keyed by word, for inspection and export.
    pub fn tfidf_by_word(&self, doc: &Document) -> BTreeMap<String, f64> {
        doc.tfidf
            .entries()
            .iter()
            .map(|&(t, w)| (self.term(t).to_string(), w))
            .collect()
    }
}
