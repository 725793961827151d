//! Evidence accumulation: an ensemble of partitions over (family, quantile,
//! linkage) combined into a co-association (consensus) matrix.

use log::warn;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::copula::{fit_pair, CopulaFit, Family};
use crate::dissimilarity::{build_matrix, DissimilarityMatrix, MatrixMeta, Provenance, Tail};
use crate::error::{Error, Result};
use crate::hierclust::{
    agglomerate, agglomerate_values, best_cut_max_gap, best_cut_silhouette, cut_k, Dendrogram, Linkage, Partition,
};
use crate::marginal::PseudoObs;

pub const DEFAULT_QUANTILES: [f64; 4] = [0.05, 0.1, 0.15, 0.2];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EnsembleConfig {
    pub families: Vec<Family>,
    pub quantiles: Vec<f64>,
    pub linkages: Vec<Linkage>,
    pub k_min: usize,
    pub k_max: usize,
    pub tail: Tail,
}

impl Default for EnsembleConfig {
    fn default() -> Self {
        EnsembleConfig {
            families: Family::ALL.to_vec(),
            quantiles: DEFAULT_QUANTILES.to_vec(),
            linkages: Linkage::ALL.to_vec(),
            k_min: 5,
            k_max: 10,
            tail: Tail::Lower,
        }
    }
}

fn has_duplicates<T: PartialEq>(xs: &[T]) -> bool {
    xs.iter().enumerate().any(|(i, x)| xs[..i].contains(x))
}

impl EnsembleConfig {
    /// Checks the configuration on its own, and against `d` items if given.
    pub fn validate(&self, d: Option<usize>) -> Result<()> {
        if self.families.is_empty() || self.quantiles.is_empty() || self.linkages.is_empty() {
            return Err(Error::Config("ensemble needs at least one family, quantile and linkage".into()));
        }
        if has_duplicates(&self.families) || has_duplicates(&self.quantiles) || has_duplicates(&self.linkages) {
            return Err(Error::Config("ensemble families, quantiles and linkages must be distinct".into()));
        }
        if let Some(q) = self.quantiles.iter().find(|q| !(**q > 0.0 && **q <= 0.5)) {
            return Err(Error::Config(format!("quantile {q} outside (0, 0.5]")));
        }
        if !(2 <= self.k_min && self.k_min <= self.k_max) {
            return Err(Error::Config(format!(
                "invalid k range [{}, {}] (need 2 <= k_min <= k_max)",
                self.k_min, self.k_max
            )));
        }
        if let Some(d) = d {
            if self.k_max + 1 > d {
                return Err(Error::Config(format!("k_max = {} needs at least {} series, have {d}", self.k_max, self.k_max + 1)));
            }
        }
        Ok(())
    }

    pub fn size(&self) -> usize {
        self.families.len() * self.quantiles.len() * self.linkages.len()
    }
}

/// Co-association votes `V`, consensus `M = V / n` and `D = 1 - M`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConsensusState {
    pub votes: Vec<Vec<u32>>,
    pub consensus: Vec<Vec<f64>>,
    pub dissimilarity: Vec<Vec<f64>>,
    pub ensemble_size: usize,
}

/// 1 when items `i` and `j` share a cluster.
pub fn partition_vote(p: &Partition, i: usize, j: usize) -> Result<u32> {
    match (p.labels.get(i), p.labels.get(j)) {
        (Some(a), Some(b)) => Ok(u32::from(a == b)),
        _ => Err(Error::domain(format!("index ({i}, {j}) outside a {}-item partition", p.len()))),
    }
}

pub fn accumulate(partitions: &[Partition]) -> Result<ConsensusState> {
    let Some(first) = partitions.first() else {
        return Err(Error::domain("cannot accumulate an empty ensemble"));
    };
    let d = first.len();
    if let Some(p) = partitions.iter().find(|p| p.len() != d) {
        return Err(Error::domain(format!("partitions over {} and {d} items", p.len())));
    }
    let mut votes = vec![vec![0u32; d]; d];
    for p in partitions {
        for i in 0..d {
            for j in 0..d {
                votes[i][j] += u32::from(p.labels[i] == p.labels[j]);
            }
        }
    }
    let n = partitions.len();
    let consensus: Vec<Vec<f64>> = votes
        .iter()
        .map(|row| row.iter().map(|&v| f64::from(v) / n as f64).collect())
        .collect();
    let dissimilarity = consensus.iter().map(|row| row.iter().map(|m| 1.0 - m).collect()).collect();
    Ok(ConsensusState {
        votes,
        consensus,
        dissimilarity,
        ensemble_size: n,
    })
}

impl ConsensusState {
    pub fn dissimilarity_matrix(&self, tickers: &[String]) -> Result<DissimilarityMatrix> {
        DissimilarityMatrix::new(
            tickers.to_vec(),
            self.dissimilarity.clone(),
            MatrixMeta {
                family: None,
                q: None,
                provenance: Provenance::Consensus,
                tail: Tail::Lower,
            },
        )
    }
}

/// All-pairs fits of one family.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CopulaLayer {
    pub family: Family,
    pub fits: Vec<CopulaFit>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DroppedFamily {
    pub family: Family,
    pub reason: String,
}

/// `(i, j)` with `i < j` in row-major order.
pub fn pairs(d: usize) -> Vec<(usize, usize)> {
    (0..d).flat_map(|i| (i + 1..d).map(move |j| (i, j))).collect()
}

/// Fit every family to every pair. A family with any failed pair is
/// dropped as a whole and reported.
pub fn fit_copula_layers(pseudo: &PseudoObs, families: &[Family]) -> (Vec<CopulaLayer>, Vec<DroppedFamily>) {
    let pairs = pairs(pseudo.n_series());
    let jobs: Vec<(Family, (usize, usize))> =
        families.iter().flat_map(|&f| pairs.iter().map(move |&p| (f, p))).collect();
    let results: Vec<Result<CopulaFit>> = jobs
        .par_iter()
        .map(|&(f, (i, j))| fit_pair(f, (i, j), &pseudo.u[i], &pseudo.u[j]))
        .collect();
    let mut layers = Vec::new();
    let mut dropped = Vec::new();
    for (fi, &family) in families.iter().enumerate() {
        let chunk = &results[fi * pairs.len()..(fi + 1) * pairs.len()];
        match chunk.iter().find_map(|r| r.as_ref().err()) {
            Some(e) => {
                warn!("dropping copula family {family}: {e}");
                dropped.push(DroppedFamily {
                    family,
                    reason: e.to_string(),
                });
            }
            None => layers.push(CopulaLayer {
                family,
                fits: chunk.iter().map(|r| r.as_ref().expect("checked").clone()).collect(),
            }),
        }
    }
    (layers, dropped)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub family: Family,
    pub q: f64,
    pub linkage: Linkage,
    pub k: usize,
    pub silhouette: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Ensemble {
    pub matrices: Vec<DissimilarityMatrix>,
    pub entries: Vec<ManifestEntry>,
    pub partitions: Vec<Partition>,
}

/// Build `Δ(C, q)` for every layer and quantile, then cluster each under
/// every linkage with the silhouette cut. Output order is
/// family → quantile → linkage, independent of scheduling.
pub fn build_ensemble(tickers: &[String], layers: &[CopulaLayer], cfg: &EnsembleConfig) -> Result<Ensemble> {
    cfg.validate(Some(tickers.len()))?;
    if layers.is_empty() {
        return Err(Error::Pipeline("every copula family was dropped; the ensemble is empty".into()));
    }
    let jobs: Vec<(&CopulaLayer, f64)> =
        layers.iter().flat_map(|l| cfg.quantiles.iter().map(move |&q| (l, q))).collect();
    type Built = (DissimilarityMatrix, Vec<(ManifestEntry, Partition)>);
    let built: Vec<Result<Built>> = jobs
        .par_iter()
        .map(|&(layer, q)| {
            let m = build_matrix(tickers, &layer.fits, layer.family, q, cfg.tail)?;
            let mut out = Vec::with_capacity(cfg.linkages.len());
            for &linkage in &cfg.linkages {
                let tree = agglomerate(&m, linkage)?;
                let (p, s) = best_cut_silhouette(&tree, &m.values, cfg.k_min, cfg.k_max)?;
                out.push((
                    ManifestEntry {
                        family: layer.family,
                        q,
                        linkage,
                        k: p.k,
                        silhouette: s,
                    },
                    p,
                ));
            }
            Ok((m, out))
        })
        .collect();
    let mut ens = Ensemble {
        matrices: Vec::new(),
        entries: Vec::new(),
        partitions: Vec::new(),
    };
    for b in built {
        let (m, members) = b?;
        ens.matrices.push(m);
        for (e, p) in members {
            ens.entries.push(e);
            ens.partitions.push(p);
        }
    }
    Ok(ens)
}

/// Fit, build and accumulate in one call.
pub fn run_ensemble(tickers: &[String], pseudo: &PseudoObs, cfg: &EnsembleConfig) -> Result<(Vec<Partition>, ConsensusState)> {
    cfg.validate(Some(pseudo.n_series()))?;
    let (layers, _) = fit_copula_layers(pseudo, &cfg.families);
    let ens = build_ensemble(tickers, &layers, cfg)?;
    let state = accumulate(&ens.partitions)?;
    Ok((ens.partitions, state))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(tag = "rule", rename_all = "snake_case", deny_unknown_fields)]
pub enum CutRule {
    #[default]
    MaxGap,
    Silhouette { k_min: usize, k_max: usize },
    FixedK { k: usize },
}

/// Cluster `D` and cut it per `rule`.
pub fn final_partition(
    state: &ConsensusState,
    tickers: &[String],
    linkage: Linkage,
    rule: CutRule,
) -> Result<(Dendrogram, Partition)> {
    let tree = agglomerate_values(tickers, &state.dissimilarity, linkage)?;
    let p = match rule {
        CutRule::MaxGap => best_cut_max_gap(&tree)?,
        CutRule::Silhouette { k_min, k_max } => best_cut_silhouette(&tree, &state.dissimilarity, k_min, k_max)?.0,
        CutRule::FixedK { k } => cut_k(&tree, k)?,
    };
    Ok((tree, p))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn votes() {
        let p = Partition::from_labels(&[0, 0, 1]);
        assert_eq!(partition_vote(&p, 0, 1).unwrap(), 1);
        assert_eq!(partition_vote(&p, 0, 2).unwrap(), 0);
        assert_eq!(partition_vote(&p, 2, 2).unwrap(), 1);
        assert!(partition_vote(&p, 0, 3).is_err());
    }

    #[test]
    fn accumulate_examples() {
        let a = Partition::from_labels(&[0, 0, 1]);
        let b = Partition::from_labels(&[0, 1, 1]);
        let s = accumulate(&[a.clone(), b]).unwrap();
        assert_eq!(s.consensus[0][1], 0.5);
        assert_eq!(s.consensus[1][2], 0.5);
        assert_eq!(s.consensus[0][2], 0.0);
        assert_eq!(s.ensemble_size, 2);
        let same = accumulate(&[a.clone(), a.clone(), a]).unwrap();
        assert!(same.consensus.iter().flatten().all(|m| *m == 0.0 || *m == 1.0));
        assert!(accumulate(&[]).is_err());
        assert!(accumulate(&[Partition::from_labels(&[0, 1]), Partition::from_labels(&[0])]).is_err());
    }

    #[test]
    fn perfect_blocks_recovered() {
        let truth = Partition::from_labels(&[0, 0, 0, 1, 1, 2, 2, 2, 2]);
        let s = accumulate(std::slice::from_ref(&truth)).unwrap();
        let names: Vec<String> = (0..9).map(|i| i.to_string()).collect();
        for l in Linkage::ALL {
            let (_, p) = final_partition(&s, &names, l, CutRule::MaxGap).unwrap();
            assert_eq!(p, truth);
        }
    }

    #[test]
    fn config_checks() {
        let cfg = EnsembleConfig::default();
        assert_eq!(cfg.size(), 64);
        assert!(cfg.validate(Some(38)).is_ok());
        assert!(cfg.validate(Some(10)).is_err());
        let bad = EnsembleConfig {
            quantiles: vec![0.6],
            ..EnsembleConfig::default()
        };
        assert!(matches!(bad.validate(None), Err(Error::Config(_))));
        assert_eq!(pairs(38).len(), 703);
    }
}
