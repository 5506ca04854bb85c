//! k-means on binary codes with Hamming distance and elementwise-majority
//! (median) centroids, plus the Rand index.

use rand::seq::index::sample;

use super::similarity::jaccard;
use crate::error::{Error, Result};
use crate::rng::{stream_rng, Stream};

pub fn hamming_distance(p: &[bool], q: &[bool]) -> usize {
    p.iter().zip(q).filter(|(a, b)| a != b).count()
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClusterAssignment {
    /// Cluster id of every record, in `0..centroids.len()`.
    pub labels: Vec<usize>,
    pub centroids: Vec<Vec<bool>>,
    pub iterations: usize,
}

/// Nearest centroid, ties to the lowest cluster id.
fn nearest(code: &[bool], centroids: &[Vec<bool>]) -> (usize, usize) {
    let mut best = (0, usize::MAX);
    for (c, centroid) in centroids.iter().enumerate() {
        let d = hamming_distance(code, centroid);
        if d < best.1 {
            best = (c, d);
        }
    }
    best
}

/// Cluster binary codes into `clusters` groups.
///
/// Initial centroids are distinct codes picked by seeded sampling without
/// replacement from the sorted list of distinct codes, so the result does
/// not depend on record order. A centroid bit is 1 only under a strict
/// majority. An empty cluster is re-seeded with the code of the record
/// farthest from its centroid (ties to the lexicographically smallest code).
pub fn hamming_kmeans(codes: &[Vec<bool>], clusters: usize, seed: u64, max_iter: usize) -> Result<ClusterAssignment> {
    if clusters == 0 {
        return Err(Error::Usage("need at least one cluster".into()));
    }
    let width = codes.first().map_or(0, Vec::len);
    if codes.iter().any(|c| c.len() != width) {
        return Err(Error::Usage("codes differ in length".into()));
    }
    let mut distinct: Vec<&Vec<bool>> = codes.iter().collect();
    distinct.sort();
    distinct.dedup();
    if clusters > distinct.len() {
        return Err(Error::Usage(format!(
            "{clusters} clusters requested but only {} distinct codes",
            distinct.len()
        )));
    }
    let mut rng = stream_rng(seed, Stream::Kmeans);
    let mut centroids: Vec<Vec<bool>> = sample(&mut rng, distinct.len(), clusters)
        .into_iter()
        .map(|i| distinct[i].clone())
        .collect();

    let mut labels: Vec<usize> = Vec::new();
    let mut iterations = 0;
    while iterations < max_iter.max(1) {
        iterations += 1;
        let assigned: Vec<(usize, usize)> = codes.iter().map(|c| nearest(c, &centroids)).collect();
        let new_labels: Vec<usize> = assigned.iter().map(|a| a.0).collect();
        let stable = new_labels == labels;
        labels = new_labels;
        if stable {
            break;
        }
        let mut counts = vec![0usize; clusters];
        let mut ones = vec![vec![0usize; width]; clusters];
        for (code, &l) in codes.iter().zip(&labels) {
            counts[l] += 1;
            for (o, &b) in ones[l].iter_mut().zip(code) {
                *o += usize::from(b);
            }
        }
        let mut dist: Vec<usize> = assigned.iter().map(|a| a.1).collect();
        for c in 0..clusters {
            if counts[c] > 0 {
                centroids[c] = ones[c].iter().map(|&o| 2 * o > counts[c]).collect();
            } else {
                let far = (0..codes.len())
                    .max_by(|&i, &j| dist[i].cmp(&dist[j]).then_with(|| codes[j].cmp(&codes[i])))
                    .expect("codes are non-empty");
                centroids[c] = codes[far].clone();
                dist[far] = 0;
            }
        }
    }
    Ok(ClusterAssignment { labels, centroids, iterations })
}

fn rand_index_by<F: Fn(usize, usize) -> bool>(assignment: &[usize], same_in_reference: F) -> f64 {
    let n = assignment.len();
    if n < 2 {
        return 1.0;
    }
    let mut agree = 0usize;
    for i in 0..n {
        for j in i + 1..n {
            agree += usize::from((assignment[i] == assignment[j]) == same_in_reference(i, j));
        }
    }
    agree as f64 / (n * (n - 1) / 2) as f64
}

/// Fraction of record pairs on which two labelings agree (same or
/// different group).
pub fn rand_index(a: &[usize], b: &[usize]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::Usage(format!("labelings cover {} and {} records", a.len(), b.len())));
    }
    Ok(rand_index_by(a, |i, j| b[i] == b[j]))
}

/// Rand index against a pairwise reference in which two records belong
/// together when the Jaccard overlap of their code sets is at least `rho2`.
pub fn rand_index_overlap(assignment: &[usize], code_sets: &[Vec<bool>], rho2: f64) -> Result<f64> {
    if assignment.len() != code_sets.len() {
        return Err(Error::Usage(format!(
            "assignment covers {} records, reference {}",
            assignment.len(),
            code_sets.len()
        )));
    }
    if !(0.0..=1.0).contains(&rho2) {
        return Err(Error::Usage(format!("rho2 must lie in [0, 1], got {rho2}")));
    }
    Ok(rand_index_by(assignment, |i, j| jaccard(&code_sets[i], &code_sets[j]) >= rho2))
}
