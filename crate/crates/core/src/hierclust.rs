//! Agglomerative clustering with average (UPGMA) or complete linkage,
//! dendrogram cuts and the adjusted Rand index.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::dissimilarity::DissimilarityMatrix;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Linkage {
    Average,
    Complete,
}

impl Linkage {
    pub const ALL: [Linkage; 2] = [Linkage::Average, Linkage::Complete];

    pub fn name(self) -> &'static str {
        match self {
            Linkage::Average => "average",
            Linkage::Complete => "complete",
        }
    }
}

impl fmt::Display for Linkage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Linkage {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "average" => Ok(Linkage::Average),
            "complete" => Ok(Linkage::Complete),
            _ => Err(Error::Config(format!("unknown linkage `{s}` (expected average or complete)"))),
        }
    }
}

/// One agglomeration step. Leaves are `0..d`; the cluster formed at step
/// `s` gets id `d + s`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Merge {
    pub a: usize,
    pub b: usize,
    pub height: f64,
    pub size: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dendrogram {
    pub linkage: Linkage,
    pub leaf_labels: Vec<String>,
    pub merges: Vec<Merge>,
}

impl Dendrogram {
    pub fn n_leaves(&self) -> usize {
        self.leaf_labels.len()
    }

    pub fn heights(&self) -> Vec<f64> {
        self.merges.iter().map(|m| m.height).collect()
    }
}

/// Cluster labels `0..k`, numbered by first appearance in leaf order.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Partition {
    pub labels: Vec<usize>,
    pub k: usize,
}

impl Partition {
    /// Relabel arbitrary ids into canonical first-appearance order.
    pub fn from_labels<T: PartialEq + Copy>(raw: &[T]) -> Self {
        let mut seen: Vec<T> = Vec::new();
        let labels = raw
            .iter()
            .map(|x| match seen.iter().position(|s| s == x) {
                Some(p) => p,
                None => {
                    seen.push(*x);
                    seen.len() - 1
                }
            })
            .collect();
        Partition { labels, k: seen.len() }
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn clusters(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.k];
        for (i, &l) in self.labels.iter().enumerate() {
            out[l].push(i);
        }
        out
    }
}

struct Cluster {
    id: usize,
    rep: usize,
    size: usize,
}

/// Standard agglomerative clustering. Equal inter-cluster dissimilarities
/// are resolved by the lexicographically smallest pair of cluster
/// representatives (smallest leaf index in each cluster).
pub fn agglomerate(delta: &DissimilarityMatrix, linkage: Linkage) -> Result<Dendrogram> {
    agglomerate_values(&delta.tickers, &delta.values, linkage)
}

/// Check that `values` is a square, symmetric, non-negative matrix with a
/// zero diagonal.
pub fn validate_dissimilarities(values: &[Vec<f64>]) -> Result<()> {
    let d = values.len();
    for (i, row) in values.iter().enumerate() {
        if row.len() != d {
            return Err(Error::domain(format!("matrix is not {d}×{d}")));
        }
        if row[i] != 0.0 {
            return Err(Error::domain(format!("nonzero diagonal at {i}")));
        }
        for j in 0..i {
            if !(row[j] >= 0.0 && row[j].is_finite()) || row[j] != values[j][i] {
                return Err(Error::domain(format!("entry ({i}, {j}) is negative, non-finite or asymmetric")));
            }
        }
    }
    Ok(())
}

/// [`agglomerate`] on an arbitrary dissimilarity matrix.
pub fn agglomerate_values(labels: &[String], values: &[Vec<f64>], linkage: Linkage) -> Result<Dendrogram> {
    let d = values.len();
    if d < 2 {
        return Err(Error::domain("clustering needs at least two items"));
    }
    if labels.len() != d {
        return Err(Error::domain(format!("{} labels for {d} items", labels.len())));
    }
    validate_dissimilarities(values)?;
    let mut clusters: Vec<Cluster> = (0..d).map(|i| Cluster { id: i, rep: i, size: 1 }).collect();
    // pairwise statistic between active clusters: sum (average) or max (complete)
    let mut stat: Vec<Vec<f64>> = values.to_vec();
    let mut merges = Vec::with_capacity(d - 1);
    let mut last_height = f64::NEG_INFINITY;

    let value = |stat: &Vec<Vec<f64>>, a: &Cluster, b: &Cluster, ia: usize, ib: usize| match linkage {
        Linkage::Complete => stat[ia][ib],
        Linkage::Average => stat[ia][ib] / (a.size * b.size) as f64,
    };

    for step in 0..d - 1 {
        let n = clusters.len();
        let mut best: Option<(f64, (usize, usize), usize, usize)> = None;
        for i in 0..n {
            for j in i + 1..n {
                let h = value(&stat, &clusters[i], &clusters[j], i, j);
                let reps = {
                    let (x, y) = (clusters[i].rep, clusters[j].rep);
                    (x.min(y), x.max(y))
                };
                let better = match best {
                    None => true,
                    Some((bh, br, _, _)) => h < bh || (h == bh && reps < br),
                };
                if better {
                    best = Some((h, reps, i, j));
                }
            }
        }
        let (h, _, i, j) = best.expect("at least two active clusters");
        // UPGMA is monotone; this only absorbs last-bit rounding in the sums
        let height = h.max(last_height);
        last_height = height;
        let (ci, cj) = (&clusters[i], &clusters[j]);
        merges.push(Merge {
            a: ci.id.min(cj.id),
            b: ci.id.max(cj.id),
            height,
            size: ci.size + cj.size,
        });
        let merged = Cluster {
            id: d + step,
            rep: ci.rep.min(cj.rep),
            size: ci.size + cj.size,
        };
        // combine rows i and j into i, then drop j
        for m in 0..n {
            if m == i || m == j {
                continue;
            }
            let v = match linkage {
                Linkage::Complete => stat[i][m].max(stat[j][m]),
                Linkage::Average => stat[i][m] + stat[j][m],
            };
            stat[i][m] = v;
            stat[m][i] = v;
        }
        stat[i][i] = 0.0;
        clusters[i] = merged;
        clusters.remove(j);
        stat.remove(j);
        for row in stat.iter_mut() {
            row.remove(j);
        }
    }
    Ok(Dendrogram {
        linkage,
        leaf_labels: labels.to_vec(),
        merges,
    })
}

/// Partition left after undoing the last `k - 1` merges.
pub fn cut_k(dendrogram: &Dendrogram, k: usize) -> Result<Partition> {
    let d = dendrogram.n_leaves();
    if k < 1 || k > d {
        return Err(Error::domain(format!("k = {k} outside [1, {d}]")));
    }
    // cluster id -> representative leaf, via union of member lists
    let mut owner: Vec<usize> = (0..d).collect();
    let mut members: Vec<Vec<usize>> = (0..d).map(|i| vec![i]).collect();
    for m in &dendrogram.merges[..d - k] {
        let mut joined = std::mem::take(&mut members[m.a]);
        joined.append(&mut std::mem::take(&mut members[m.b]));
        members.push(joined);
        let id = members.len() - 1;
        for &leaf in &members[id] {
            owner[leaf] = id;
        }
    }
    Ok(Partition::from_labels(&owner))
}


/// Mean silhouette width computed from the dissimilarity matrix; singleton
/// clusters contribute 0.
pub fn silhouette_mean(delta: &[Vec<f64>], p: &Partition) -> Result<f64> {
    let d = delta.len();
    if p.len() != d {
        return Err(Error::domain(format!("partition of {} items for a {d}-item matrix", p.len())));
    }
    if p.k < 2 || p.k >= d {
        return Err(Error::domain(format!("silhouette needs 2 <= k <= d - 1, got k = {}", p.k)));
    }
    let sizes: Vec<usize> = p.clusters().iter().map(Vec::len).collect();
    let mut total = 0.0;
    for i in 0..d {
        let own = p.labels[i];
        if sizes[own] == 1 {
            continue;
        }
        let mut sums = vec![0.0; p.k];
        for j in 0..d {
            if j != i {
                sums[p.labels[j]] += delta[i][j];
            }
        }
        let a = sums[own] / (sizes[own] - 1) as f64;
        let b = (0..p.k)
            .filter(|&c| c != own)
            .map(|c| sums[c] / sizes[c] as f64)
            .fold(f64::INFINITY, f64::min);
        let denom = a.max(b);
        if denom > 0.0 {
            total += (b - a) / denom;
        }
    }
    Ok(total / d as f64)
}

/// The cut in `[k_min, k_max]` with the largest mean silhouette; ties go to
/// the smaller `k`. Returns the partition and its score.
pub fn best_cut_silhouette(
    dendrogram: &Dendrogram,
    delta: &[Vec<f64>],
    k_min: usize,
    k_max: usize,
) -> Result<(Partition, f64)> {
    let d = dendrogram.n_leaves();
    if !(2 <= k_min && k_min <= k_max && k_max < d) {
        return Err(Error::domain(format!(
            "k range [{k_min}, {k_max}] invalid for {d} items (need 2 <= k_min <= k_max <= d - 1)"
        )));
    }
    let mut best: Option<(Partition, f64)> = None;
    for k in k_min..=k_max {
        let p = cut_k(dendrogram, k)?;
        let s = silhouette_mean(delta, &p)?;
        if best.as_ref().is_none_or(|(_, bs)| s > *bs) {
            best = Some((p, s));
        }
    }
    Ok(best.expect("non-empty k range"))
}

/// Cut where consecutive merge heights jump the most: with heights
/// `h_1..h_{d-1}`, maximise `h_{m+1} - h_m` and return `k = d - m`. Ties go to
/// the larger `m` (fewer clusters).
pub fn best_cut_max_gap(dendrogram: &Dendrogram) -> Result<Partition> {
    let d = dendrogram.n_leaves();
    if d < 3 {
        return Err(Error::domain(format!("max-gap cut needs at least 3 items, got {d}")));
    }
    let h = dendrogram.heights();
    let mut best_m = 1;
    let mut best_gap = f64::NEG_INFINITY;
    for m in 1..d - 1 {
        let gap = h[m] - h[m - 1];
        if gap >= best_gap {
            best_gap = gap;
            best_m = m;
        }
    }
    cut_k(dendrogram, d - best_m)
}

fn choose2(n: usize) -> f64 {
    (n * n.saturating_sub(1)) as f64 / 2.0
}

pub fn adjusted_rand_index(p1: &Partition, p2: &Partition) -> Result<f64> {
    if p1.len() != p2.len() {
        return Err(Error::domain(format!("partitions of {} and {} items", p1.len(), p2.len())));
    }
    let n = p1.len();
    let mut table = vec![vec![0usize; p2.k]; p1.k];
    for (&a, &b) in p1.labels.iter().zip(&p2.labels) {
        table[a][b] += 1;
    }
    let index: f64 = table.iter().flatten().map(|&c| choose2(c)).sum();
    let rows: f64 = table.iter().map(|r| choose2(r.iter().sum())).sum();
    let cols: f64 = (0..p2.k).map(|j| choose2(table.iter().map(|r| r[j]).sum())).sum();
    let total = choose2(n);
    let expected = if total > 0.0 { rows * cols / total } else { 0.0 };
    let max = 0.5 * (rows + cols);
    if max == expected {
        // both trivial in the same way (all singletons or one cluster)
        return Ok(1.0);
    }
    Ok((index - expected) / (max - expected))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn labels(d: usize) -> Vec<String> {
        (0..d).map(|i| format!("A{i}")).collect()
    }

    fn matrix(values: Vec<Vec<f64>>) -> Vec<Vec<f64>> {
        validate_dissimilarities(&values).unwrap();
        values
    }

    fn tree(m: &[Vec<f64>], linkage: Linkage) -> Dendrogram {
        agglomerate_values(&labels(m.len()), m, linkage).unwrap()
    }

    #[test]
    fn three_point_traces() {
        let m = matrix(vec![vec![0.0, 1.0, 3.0], vec![1.0, 0.0, 5.0], vec![3.0, 5.0, 0.0]]);
        let c = tree(&m, Linkage::Complete);
        let a = tree(&m, Linkage::Average);
        assert_eq!(c.heights(), vec![1.0, 5.0]);
        assert_eq!(a.heights(), vec![1.0, 4.0]);
        assert_eq!(c.merges[0], Merge { a: 0, b: 1, height: 1.0, size: 2 });
        assert_eq!(c.merges[1], Merge { a: 2, b: 3, height: 5.0, size: 3 });
        assert_eq!(cut_k(&c, 2).unwrap().labels, vec![0, 0, 1]);
        assert_eq!(cut_k(&c, 1).unwrap().k, 1);
        assert_eq!(cut_k(&c, 3).unwrap().labels, vec![0, 1, 2]);
        assert!(cut_k(&c, 0).is_err() && cut_k(&c, 4).is_err());

        let m = matrix(vec![vec![0.0, 1.0, 5.0], vec![1.0, 0.0, 5.0], vec![5.0, 5.0, 0.0]]);
        assert_eq!(tree(&m, Linkage::Average).heights(), vec![1.0, 5.0]);
        assert_eq!(tree(&m, Linkage::Complete).heights(), vec![1.0, 5.0]);
    }

    #[test]
    fn ties_use_representatives() {
        // all equal: merges proceed (0,1), then {0,1} with 2, ...
        let d = 4;
        let m = matrix((0..d).map(|i| (0..d).map(|j| if i == j { 0.0 } else { 1.0 }).collect()).collect());
        let g = tree(&m, Linkage::Average);
        let pairs: Vec<(usize, usize)> = g.merges.iter().map(|m| (m.a, m.b)).collect();
        assert_eq!(pairs, vec![(0, 1), (2, 4), (3, 5)]);
    }

    #[test]
    fn silhouette_examples() {
        let m = matrix(vec![
            vec![0.0, 0.1, 0.9, 0.9],
            vec![0.1, 0.0, 0.9, 0.9],
            vec![0.9, 0.9, 0.0, 0.1],
            vec![0.9, 0.9, 0.1, 0.0],
        ]);
        let p = Partition::from_labels(&[0, 0, 1, 1]);
        assert!((silhouette_mean(&m, &p).unwrap() - 0.8 / 0.9).abs() < 1e-15);
        let z = matrix(vec![
            vec![0.0, 0.0, 1.0, 1.0],
            vec![0.0, 0.0, 1.0, 1.0],
            vec![1.0, 1.0, 0.0, 0.0],
            vec![1.0, 1.0, 0.0, 0.0],
        ]);
        assert_eq!(silhouette_mean(&z, &p).unwrap(), 1.0);
        let e = matrix((0..4).map(|i| (0..4).map(|j| if i == j { 0.0 } else { 0.7 }).collect()).collect());
        assert_eq!(silhouette_mean(&e, &Partition::from_labels(&[0, 1, 1, 1])).unwrap(), 0.0);
        assert!(silhouette_mean(&e, &Partition::from_labels(&[0, 0, 0, 0])).is_err());
        assert!(silhouette_mean(&e, &Partition::from_labels(&[0, 1, 2, 3])).is_err());
    }

    #[test]
    fn max_gap_examples() {
        let g = |h: &[f64]| Dendrogram {
            linkage: Linkage::Average,
            leaf_labels: (0..=h.len()).map(|i| i.to_string()).collect(),
            merges: h
                .iter()
                .enumerate()
                .map(|(s, &height)| Merge {
                    a: if s == 0 { 0 } else { h.len() + s },
                    b: s + 1,
                    height,
                    size: s + 2,
                })
                .collect(),
        };
        assert_eq!(best_cut_max_gap(&g(&[0.1, 0.2, 1.0])).unwrap().k, 2);
        assert_eq!(best_cut_max_gap(&g(&[1.0, 2.0, 3.0, 4.0])).unwrap().k, 2);
        assert!(best_cut_max_gap(&g(&[1.0])).is_err());
    }

    #[test]
    fn ari_examples() {
        let a = Partition::from_labels(&[0, 0, 1, 1, 2]);
        let b = Partition::from_labels(&[7, 7, 3, 3, 9]);
        assert_eq!(adjusted_rand_index(&a, &b).unwrap(), 1.0);
        let singles = Partition::from_labels(&[0, 1, 2, 3]);
        let one = Partition::from_labels(&[0, 0, 0, 0]);
        assert_eq!(adjusted_rand_index(&singles, &one).unwrap(), 0.0);
        assert!(adjusted_rand_index(&a, &one).is_err());
    }
}
