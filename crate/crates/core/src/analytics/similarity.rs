use crate::error::{Error, Result};

/// Jaccard index of two bit sets. Two empty sets count as identical (1).
/// Shorter codes are padded with zeros.
pub fn jaccard(p: &[bool], q: &[bool]) -> f64 {
    let n = p.len().max(q.len());
    let bit = |c: &[bool], i: usize| c.get(i).copied().unwrap_or(false);
    let (mut inter, mut union) = (0usize, 0usize);
    for i in 0..n {
        let (a, b) = (bit(p, i), bit(q, i));
        inter += usize::from(a && b);
        union += usize::from(a || b);
    }
    if union == 0 {
        1.0
    } else {
        inter as f64 / union as f64
    }
}

/// Ranks starting at 1, ties sharing their average rank.
fn average_ranks(x: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..x.len()).collect();
    idx.sort_by(|&a, &b| x[a].total_cmp(&x[b]));
    let mut ranks = vec![0.0; x.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && x[idx[j + 1]] == x[idx[i]] {
            j += 1;
        }
        let r = (i + j) as f64 / 2.0 + 1.0;
        for &k in &idx[i..=j] {
            ranks[k] = r;
        }
        i = j + 1;
    }
    ranks
}

/// Spearman rank correlation with average ranks for ties.
///
/// If either input is constant the correlation is undefined; the result is
/// then 1 when both rank vectors coincide and 0 otherwise.
pub fn spearman(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::Usage(format!("spearman: lengths differ ({} vs {})", x.len(), y.len())));
    }
    if x.is_empty() {
        return Err(Error::Usage("spearman: empty input".into()));
    }
    let (rx, ry) = (average_ranks(x), average_ranks(y));
    let n = x.len() as f64;
    let mean = (n + 1.0) / 2.0;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in rx.iter().zip(&ry) {
        sxy += (a - mean) * (b - mean);
        sxx += (a - mean).powi(2);
        syy += (b - mean).powi(2);
    }
    if sxx == 0.0 || syy == 0.0 {
        return Ok(if rx == ry { 1.0 } else { 0.0 });
    }
    Ok(sxy / (sxx * syy).sqrt())
}
