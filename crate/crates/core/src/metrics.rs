//! Clustering quality: internal indices (silhouette, Calinski–Harabasz,
//! Davies–Bouldin) on Euclidean distances, external agreement scores from the
//! contingency table, and the misclassification rate under the optimal label
//! bijection.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::data::DataMatrix;
use crate::error::{Error, Result};

/// Largest label count accepted by [`misclassification_rate`].
pub const MAX_ASSIGNMENT_K: usize = 12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusteringReport {
    pub silhouette: f64,
    pub calinski_harabasz: f64,
    pub davies_bouldin: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub adjusted_rand: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rand: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub homogeneity: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub completeness: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub misclassification: Option<f64>,
}

impl ClusteringReport {
    /// Internal indices always; external scores when `truth` is given.
    pub fn compute(x: &DataMatrix, pred: &[usize], truth: Option<&[usize]>) -> Result<Self> {
        let internal = internal_metrics(x, pred)?;
        let mut report = ClusteringReport {
            silhouette: internal.silhouette,
            calinski_harabasz: internal.calinski_harabasz,
            davies_bouldin: internal.davies_bouldin,
            adjusted_rand: None,
            rand: None,
            homogeneity: None,
            completeness: None,
            misclassification: None,
        };
        if let Some(t) = truth {
            let e = external_metrics(t, pred)?;
            report.adjusted_rand = Some(e.adjusted_rand);
            report.rand = Some(e.rand);
            report.homogeneity = Some(e.homogeneity);
            report.completeness = Some(e.completeness);
            report.misclassification = misclassification_rate(t, pred).ok();
        }
        Ok(report)
    }

    pub fn to_table(&self) -> String {
        let mut rows = vec![
            ("silhouette", Some(self.silhouette)),
            ("calinski_harabasz", Some(self.calinski_harabasz)),
            ("davies_bouldin", Some(self.davies_bouldin)),
            ("adjusted_rand", self.adjusted_rand),
            ("rand", self.rand),
            ("homogeneity", self.homogeneity),
            ("completeness", self.completeness),
            ("misclassification", self.misclassification),
        ];
        rows.retain(|r| r.1.is_some());
        rows.iter()
            .map(|(k, v)| format!("{k:<20}{:>14.6}\n", v.unwrap_or(f64::NAN)))
            .collect()
    }
}

/// Relabels to `0..K` in order of first appearance.
fn compact(labels: &[usize]) -> (Vec<usize>, usize) {
    let mut map = BTreeMap::new();
    let mut out = Vec::with_capacity(labels.len());
    for &l in labels {
        let next = map.len();
        out.push(*map.entry(l).or_insert(next));
    }
    (out, map.len())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InternalScores {
    pub silhouette: f64,
    pub calinski_harabasz: f64,
    pub davies_bouldin: f64,
}

pub fn internal_metrics(x: &DataMatrix, labels: &[usize]) -> Result<InternalScores> {
    if labels.len() != x.nrows() {
        return Err(Error::DimensionMismatch {
            expected: x.nrows(),
            got: labels.len(),
        });
    }
    let (lab, k) = compact(labels);
    if k < 2 {
        return Err(Error::InvalidParameter("internal metrics need at least 2 clusters".into()));
    }
    let n = x.nrows();
    let d = x.ncols();
    let mut counts = vec![0usize; k];
    let mut centroids = vec![vec![0.0; d]; k];
    for (row, &l) in x.rows().zip(&lab) {
        counts[l] += 1;
        for (c, v) in centroids[l].iter_mut().zip(row) {
            *c += v;
        }
    }
    for (c, &m) in centroids.iter_mut().zip(&counts) {
        for v in c.iter_mut() {
            *v /= m as f64;
        }
    }
    let dist = |a: &[f64], b: &[f64]| -> f64 { a.iter().zip(b).map(|(p, q)| (p - q) * (p - q)).sum::<f64>().sqrt() };

    // silhouette: singletons score 0
    let mut sil = 0.0;
    let mut sums = vec![0.0; k];
    for i in 0..n {
        sums.iter_mut().for_each(|s| *s = 0.0);
        let ri = x.row(i);
        for j in 0..n {
            if j != i {
                sums[lab[j]] += dist(ri, x.row(j));
            }
        }
        let own = lab[i];
        if counts[own] > 1 {
            let a = sums[own] / (counts[own] - 1) as f64;
            let b = (0..k)
                .filter(|&c| c != own)
                .map(|c| sums[c] / counts[c] as f64)
                .fold(f64::INFINITY, f64::min);
            let m = a.max(b);
            if m > 0.0 {
                sil += (b - a) / m;
            }
        }
    }
    let silhouette = sil / n as f64;

    let mut mean = vec![0.0; d];
    for row in x.rows() {
        for (m, v) in mean.iter_mut().zip(row) {
            *m += v / n as f64;
        }
    }
    let between: f64 = (0..k)
        .map(|c| counts[c] as f64 * centroids[c].iter().zip(&mean).map(|(a, b)| (a - b) * (a - b)).sum::<f64>())
        .sum();
    let mut within = 0.0;
    let mut scatter = vec![0.0; k];
    for (row, &l) in x.rows().zip(&lab) {
        let dd: f64 = row.iter().zip(&centroids[l]).map(|(a, b)| (a - b) * (a - b)).sum();
        within += dd;
        scatter[l] += dd.sqrt();
    }
    let calinski_harabasz = if within == 0.0 {
        1.0
    } else {
        between * (n - k) as f64 / (within * (k - 1) as f64)
    };
    for (s, &m) in scatter.iter_mut().zip(&counts) {
        *s /= m as f64;
    }
    let mut db = 0.0;
    for a in 0..k {
        let mut worst: f64 = 0.0;
        for b in 0..k {
            if a != b {
                let sep = dist(&centroids[a], &centroids[b]);
                let r = if sep > 0.0 {
                    (scatter[a] + scatter[b]) / sep
                } else {
                    f64::INFINITY
                };
                worst = worst.max(r);
            }
        }
        db += worst;
    }
    Ok(InternalScores {
        silhouette,
        calinski_harabasz,
        davies_bouldin: db / k as f64,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExternalScores {
    pub adjusted_rand: f64,
    pub rand: f64,
    pub homogeneity: f64,
    pub completeness: f64,
}

/// Contingency counts `n_ij` with compacted class and cluster labels.
fn contingency(truth: &[usize], pred: &[usize]) -> Result<Vec<Vec<f64>>> {
    if truth.len() != pred.len() {
        return Err(Error::DimensionMismatch {
            expected: truth.len(),
            got: pred.len(),
        });
    }
    let (t, kt) = compact(truth);
    let (p, kp) = compact(pred);
    let mut m = vec![vec![0.0; kp]; kt];
    for (&a, &b) in t.iter().zip(&p) {
        m[a][b] += 1.0;
    }
    Ok(m)
}

fn pairs(v: f64) -> f64 {
    v * (v - 1.0) / 2.0
}

fn entropy(counts: &[f64], n: f64) -> f64 {
    counts
        .iter()
        .filter(|&&c| c > 0.0)
        .map(|&c| -(c / n) * (c / n).ln())
        .sum()
}

pub fn external_metrics(truth: &[usize], pred: &[usize]) -> Result<ExternalScores> {
    let m = contingency(truth, pred)?;
    let n = truth.len() as f64;
    let rows: Vec<f64> = m.iter().map(|r| r.iter().sum()).collect();
    let cols: Vec<f64> = (0..m.first().map_or(0, Vec::len))
        .map(|j| m.iter().map(|r| r[j]).sum())
        .collect();

    // unordered pair counts: same/same, same/different, different/same, rest
    let same_both: f64 = m.iter().flatten().map(|&v| pairs(v)).sum();
    let same_true = rows.iter().map(|&v| pairs(v)).sum::<f64>() - same_both;
    let same_pred = cols.iter().map(|&v| pairs(v)).sum::<f64>() - same_both;
    let total = pairs(n);
    let neither = total - same_both - same_true - same_pred;
    let rand = if total > 0.0 { (same_both + neither) / total } else { 1.0 };
    let adjusted_rand = if same_true == 0.0 && same_pred == 0.0 {
        1.0
    } else {
        2.0 * (same_both * neither - same_true * same_pred)
            / ((same_both + same_true) * (same_true + neither) + (same_both + same_pred) * (same_pred + neither))
    };

    let h_c = entropy(&rows, n);
    let h_k = entropy(&cols, n);
    // H(C|K) and H(K|C)
    let mut h_c_given_k = 0.0;
    let mut h_k_given_c = 0.0;
    for (i, r) in m.iter().enumerate() {
        for (j, &v) in r.iter().enumerate() {
            if v > 0.0 {
                h_c_given_k -= v / n * (v / cols[j]).ln();
                h_k_given_c -= v / n * (v / rows[i]).ln();
            }
        }
    }
    // clamped: rounding can push 1 - H(.|.)/H(.) a few ulps outside [0, 1]
    let homogeneity = if h_c == 0.0 { 1.0 } else { (1.0 - h_c_given_k / h_c).clamp(0.0, 1.0) };
    let completeness = if h_k == 0.0 { 1.0 } else { (1.0 - h_k_given_c / h_k).clamp(0.0, 1.0) };
    Ok(ExternalScores {
        adjusted_rand,
        rand,
        homogeneity,
        completeness,
    })
}

/// Minimum-cost perfect assignment on a square matrix (Hungarian method
/// with potentials). Returns `assign[row] = column`.
pub fn min_cost_assignment(cost: &[Vec<f64>]) -> Vec<usize> {
    let n = cost.len();
    // 1-based arrays with a virtual column 0
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; n + 1];
    let mut p = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0;
        let mut minv = vec![f64::INFINITY; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0;
            for j in 1..=n {
                if !used[j] {
                    let cur = cost[i0 - 1][j - 1] - u[i0] - v[j];
                    if cur < minv[j] {
                        minv[j] = cur;
                        way[j] = j0;
                    }
                    if minv[j] < delta {
                        delta = minv[j];
                        j1 = j;
                    }
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if p[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut assign = vec![0; n];
    for j in 1..=n {
        if p[j] > 0 {
            assign[p[j] - 1] = j - 1;
        }
    }
    assign
}

/// Fraction of points mislabelled under the best bijection between
/// predicted and true labels; the contingency table is zero-padded to square.
pub fn misclassification_rate(truth: &[usize], pred: &[usize]) -> Result<f64> {
    let m = contingency(truth, pred)?;
    let kt = m.len();
    let kp = m.first().map_or(0, Vec::len);
    let k = kt.max(kp);
    if k > MAX_ASSIGNMENT_K {
        return Err(Error::Unsupported(format!(
            "misclassification rate supports at most {MAX_ASSIGNMENT_K} labels, got {k}"
        )));
    }
    if truth.is_empty() {
        return Ok(0.0);
    }
    let cost: Vec<Vec<f64>> = (0..k)
        .map(|i| (0..k).map(|j| -m.get(i).and_then(|r| r.get(j)).copied().unwrap_or(0.0)).collect())
        .collect();
    let assign = min_cost_assignment(&cost);
    let matched: f64 = assign.iter().enumerate().map(|(i, &j)| -cost[i][j]).sum();
    Ok(1.0 - matched / truth.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn perfect_and_permuted_labels() {
        let t = [0, 0, 1, 1, 2, 2, 2];
        let p = [5, 5, 3, 3, 9, 9, 9];
        let e = external_metrics(&t, &p).unwrap();
        for v in [e.adjusted_rand, e.rand, e.homogeneity, e.completeness] {
            assert!((v - 1.0).abs() < 1e-15);
        }
        assert_eq!(misclassification_rate(&t, &p).unwrap(), 0.0);
    }

    #[test]
    fn tenth_moved() {
        let t: Vec<usize> = (0..100).map(|i| i / 50).collect();
        let mut p: Vec<usize> = t.iter().map(|&l| 1 - l).collect();
        for v in p.iter_mut().take(10) {
            *v = 1 - *v;
        }
        assert!((misclassification_rate(&t, &p).unwrap() - 0.10).abs() < 1e-15);
    }

    #[test]
    fn assignment_limit() {
        let t: Vec<usize> = (0..13).collect();
        assert!(misclassification_rate(&t, &t).is_err());
    }

    #[test]
    fn separated_blobs_silhouette() {
        let mut rows = Vec::new();
        let mut labels = Vec::new();
        for i in 0..10 {
            let e = i as f64 * 0.01;
            rows.push(vec![e, -e]);
            rows.push(vec![100.0 + e, 100.0 - e]);
            labels.extend([0, 1]);
        }
        let x = DataMatrix::from_rows(&rows).unwrap();
        let s = internal_metrics(&x, &labels).unwrap();
        assert!(s.silhouette > 0.9);
        assert!(s.davies_bouldin < 0.01);
        assert!(internal_metrics(&x, &[0; 20]).is_err());
    }

    #[test]
    fn hungarian_small() {
        let cost = vec![vec![4.0, 1.0, 3.0], vec![2.0, 0.0, 5.0], vec![3.0, 2.0, 2.0]];
        let a = min_cost_assignment(&cost);
        let total: f64 = a.iter().enumerate().map(|(i, &j)| cost[i][j]).sum();
        assert_eq!(total, 5.0);
    }
}
