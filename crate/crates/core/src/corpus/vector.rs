/// Sparse non-negative vector keyed by term index, entries sorted by index.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SparseVector {
    entries: Vec<(u32, f64)>,
}

impl SparseVector {
    /// Builds from unsorted entries; zero weights are dropped and duplicate
    /// keys summed.
    pub fn from_entries(mut entries: Vec<(u32, f64)>) -> Self {
        entries.sort_by_key(|e| e.0);
        let mut merged: Vec<(u32, f64)> = Vec::with_capacity(entries.len());
        for (k, v) in entries {
            match merged.last_mut() {
                Some(last) if last.0 == k => last.1 += v,
                _ => merged.push((k, v)),
            }
        }
        merged.retain(|e| e.1 != 0.0);
        Self { entries: merged }
    }

    pub fn entries(&self) -> &[(u32, f64)] {
        &self.entries
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, key: u32) -> f64 {
        self.entries
            .binary_search_by_key(&key, |e| e.0)
            .map(|i| self.entries[i].1)
            .unwrap_or(0.0)
    }

    pub fn dot(&self, other: &SparseVector) -> f64 {
        let (mut i, mut j, mut acc) = (0, 0, 0.0);
        let (a, b) = (&self.entries, &other.entries);
        while i < a.len() && j < b.len() {
            match a[i].0.cmp(&b[j].0) {
                std::cmp::Ordering::Less => i += 1,
                std::cmp::Ordering::Greater => j += 1,
                std::cmp::Ordering::Equal => {
                    acc += a[i].1 * b[j].1;
                    i += 1;
                    j += 1;
                }
            }
        }
        acc
    }

    pub fn norm(&self) -> f64 {
        self.entries.iter().map(|e| e.1 * e.1).sum::<f64>().sqrt()
    }

    /// Elementwise rescaling; entries mapped to zero are dropped.
    pub fn map_weights(&self, mut f: impl FnMut(u32, f64) -> f64) -> SparseVector {
        SparseVector {
            entries: self
                .entries
                .iter()
                .map(|&(k, v)| (k, f(k, v)))
                .filter(|e| e.1 != 0.0)
                .collect(),
        }
    }
}

/// Cosine similarity of two non-negative vectors, 0 when either norm is 0.
/// Clamped to [0, 1] against rounding.
pub fn cosine_similarity(q: &SparseVector, d: &SparseVector) -> f64 {
    let denom = q.norm() * d.norm();
    if denom == 0.0 {
        return 0.0;
    }
    if q == d {
        return 1.0;
    }
    (q.dot(d) / denom).clamp(0.0, 1.0)
}
