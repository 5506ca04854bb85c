//! Ranking by symmetric KL and truncated ranking metrics.

use ndarray::Array1;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::training::metric::symmetric_kl_unchecked;

/// Corpus indices with their distance to the query in ascending order, ties
/// by ascending index.
pub fn rank_by_distance(query: &Array1<f64>, corpus: &[Array1<f64>]) -> Result<Vec<(usize, f64)>> {
    if let Some(bad) = corpus.iter().position(|p| p.len() != query.len()) {
        return Err(Error::Usage(format!(
            "corpus entry {bad} has {} components, query has {}",
            corpus[bad].len(),
            query.len()
        )));
    }
    let mut ranked: Vec<(usize, f64)> = corpus
        .par_iter()
        .enumerate()
        .map(|(i, p)| (i, symmetric_kl_unchecked(query.view(), p.view())))
        .collect();
    ranked.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
    Ok(ranked)
}

/// One ranked answer list with binary relevance.
#[derive(Debug, Clone, PartialEq)]
pub struct RetrievalResult {
    pub query: usize,
    /// `(corpus id, distance)`, non-decreasing in distance.
    pub ranked: Vec<(usize, f64)>,
    /// Relevance of each entry of `ranked`.
    pub relevant: Vec<bool>,
}

impl RetrievalResult {
    /// Rank `corpus` against `query` and mark entries whose label equals
    /// `query_label`. Unlabeled entries are never relevant.
    pub fn by_label(
        query: usize,
        query_profile: &Array1<f64>,
        query_label: Option<u32>,
        corpus: &[Array1<f64>],
        corpus_labels: &[Option<u32>],
    ) -> Result<Self> {
        if corpus.len() != corpus_labels.len() {
            return Err(Error::Usage("corpus and label lists differ in length".into()));
        }
        let ranked = rank_by_distance(query_profile, corpus)?;
        let relevant = ranked
            .iter()
            .map(|&(i, _)| query_label.is_some() && corpus_labels[i] == query_label)
            .collect();
        Ok(Self { query, ranked, relevant })
    }
}

fn check_k(k: usize) -> Result<()> {
    if k == 0 {
        return Err(Error::Usage("cutoff k must be at least 1".into()));
    }
    Ok(())
}

/// Average precision over the first `k` entries, normalized by
/// `min(k, total relevant in the list)`. No relevant entries gives 0.
pub fn average_precision(relevant: &[bool], k: usize) -> f64 {
    let total = relevant.iter().filter(|&&r| r).count();
    if total == 0 || k == 0 {
        return 0.0;
    }
    let mut hits = 0usize;
    let mut sum = 0.0;
    for (i, &r) in relevant.iter().take(k).enumerate() {
        if r {
            hits += 1;
            sum += hits as f64 / (i + 1) as f64;
        }
    }
    sum / total.min(k) as f64
}

/// NDCG over the first `k` entries with binary gains and a `1/log2(rank+1)`
/// discount; the ideal list puts every relevant entry first.
pub fn ndcg(relevant: &[bool], k: usize) -> f64 {
    let total = relevant.iter().filter(|&&r| r).count();
    if total == 0 || k == 0 {
        return 0.0;
    }
    let discount = |i: usize| 1.0 / ((i + 2) as f64).log2();
    let dcg: f64 = relevant.iter().take(k).enumerate().filter(|(_, &r)| r).map(|(i, _)| discount(i)).sum();
    let ideal: f64 = (0..total.min(k)).map(discount).sum();
    dcg / ideal
}

fn mean_over(results: &[RetrievalResult], metric: impl Fn(&[bool]) -> f64) -> f64 {
    if results.is_empty() {
        return 0.0;
    }
    results.iter().map(|r| metric(&r.relevant)).sum::<f64>() / results.len() as f64
}

pub fn map_at_k(results: &[RetrievalResult], k: usize) -> Result<f64> {
    check_k(k)?;
    Ok(mean_over(results, |r| average_precision(r, k)))
}

pub fn ndcg_at_k(results: &[RetrievalResult], k: usize) -> Result<f64> {
    check_k(k)?;
    Ok(mean_over(results, |r| ndcg(r, k)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn ranking_examples() {
        let q = array![0.2, 0.9];
        let corpus = vec![array![0.5, 0.5], q.clone(), array![0.2, 0.8]];
        let r = rank_by_distance(&q, &corpus).unwrap();
        assert_eq!(r[0], (1, 0.0));
        assert_eq!(r[1].0, 2);
        let dup = vec![q.clone(), q.clone()];
        assert_eq!(rank_by_distance(&q, &dup).unwrap().iter().map(|e| e.0).collect::<Vec<_>>(), [0, 1]);
        assert!(rank_by_distance(&q, &[array![0.1]]).is_err());
    }

    #[test]
    fn metric_examples() {
        assert!((average_precision(&[true, false, true], 3) - 5.0 / 6.0).abs() < 1e-15);
        assert_eq!(average_precision(&[true, true], 2), 1.0);
        assert_eq!(ndcg(&[true, true], 2), 1.0);
        assert_eq!(average_precision(&[false, false], 2), 0.0);
        assert_eq!(ndcg(&[false, false], 2), 0.0);
        let expected = (1.0 + 1.0 / 4f64.log2()) / (1.0 + 1.0 / 3f64.log2());
        assert!((ndcg(&[true, false, true], 3) - expected).abs() < 1e-15);
        assert!(map_at_k(&[], 0).is_err());
    }
}
