//! Staged batch pipeline with content-hashed artifact caching.
//!
//! Each stage writes into `<output>/<stage>/` and finishes by writing
//! `stage.json`, which records a key derived from the stage's configuration
//! (chained through its upstream keys), the SHA-256 of every output file and
//! the digests of the upstream records it consumed. A stage whose record
//! still matches is not recomputed. A failed stage leaves a `FAILED` file
//! with the diagnostic.

pub mod config;

use std::collections::BTreeMap;
use std::fmt;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use log::{info, warn};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::copula::Family;
use crate::data::{load_prices, split_train_test, to_log_returns, ReturnPanel};
use crate::dissimilarity::{build_asymptotic_matrix, DissimilarityMatrix};
use crate::ensemble::{accumulate, build_ensemble, final_partition, fit_copula_layers, CopulaLayer, DroppedFamily, ManifestEntry};
use crate::error::{Error, Result};
use crate::hierclust::{agglomerate, best_cut_silhouette, Linkage, Partition};
use crate::io;
use crate::marginal::{fit_marginals, pseudo_observations, MarginalRecord, PseudoObs};
use crate::portfolio::{
    backtest, cluster_min_cvar, covariance, equal_weight, global_min_variance, min_cvar_unconstrained, BacktestReport,
    PortfolioWeights,
};

pub use config::{PipelineConfig, Strategy};

const RECORD: &str = "stage.json";
const FAILED: &str = "FAILED";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Stage {
    Ingest,
    Marginals,
    Copulas,
    Ensemble,
    Consensus,
    Portfolio,
}

impl Stage {
    pub const ALL: [Stage; 6] = [
        Stage::Ingest,
        Stage::Marginals,
        Stage::Copulas,
        Stage::Ensemble,
        Stage::Consensus,
        Stage::Portfolio,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Stage::Ingest => "ingest",
            Stage::Marginals => "marginals",
            Stage::Copulas => "copulas",
            Stage::Ensemble => "ensemble",
            Stage::Consensus => "consensus",
            Stage::Portfolio => "portfolio",
        }
    }

    /// Stages whose artifacts this one reads.
    pub fn deps(self) -> &'static [Stage] {
        match self {
            Stage::Ingest => &[],
            Stage::Marginals => &[Stage::Ingest],
            Stage::Copulas => &[Stage::Marginals],
            Stage::Ensemble => &[Stage::Marginals, Stage::Copulas],
            Stage::Consensus => &[Stage::Marginals, Stage::Ensemble],
            Stage::Portfolio => &[Stage::Ingest, Stage::Copulas, Stage::Consensus],
        }
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Stage {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Stage::ALL
            .into_iter()
            .find(|st| st.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown stage `{s}`")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StageRecord {
    pub stage: Stage,
    pub key: String,
    /// Digest of each consumed upstream `stage.json`.
    pub inputs: BTreeMap<Stage, String>,
    /// SHA-256 of each output, by path relative to the stage directory.
    pub outputs: BTreeMap<String, String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PseudoPanel {
    pub tickers: Vec<String>,
    pub u: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleManifest {
    pub families: Vec<Family>,
    pub dropped: Vec<DroppedFamily>,
    pub quantiles: Vec<f64>,
    pub linkages: Vec<Linkage>,
    pub n_matrices: usize,
    pub n_partitions: usize,
    pub entries: Vec<ManifestEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SkippedStrategy {
    pub strategy: Strategy,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct RunSummary {
    pub executed: Vec<Stage>,
    pub cached: Vec<Stage>,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

type Outputs = Vec<(String, Vec<u8>)>;

fn json_bytes<T: Serialize>(value: &T) -> Result<Vec<u8>> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    Ok(s.into_bytes())
}

pub struct Pipeline {
    cfg: PipelineConfig,
    out: PathBuf,
    keys: BTreeMap<Stage, String>,
}

impl Pipeline {
    /// Reads the data file (fails before anything is written if it is
    /// missing) and derives every stage key.
    pub fn new(cfg: PipelineConfig) -> Result<Self> {
        let bytes = std::fs::read(&cfg.data.path)
            .map_err(|e| Error::Data(format!("cannot read price data {}: {e}", cfg.data.path.display())))?;
        let data_hash = sha256_hex(&bytes);
        let mut keys = BTreeMap::new();
        for stage in Stage::ALL {
            let params = match stage {
                Stage::Ingest => serde_json::json!({
                    "data_sha256": data_hash,
                    "format": cfg.data.format(),
                    "split": cfg.split.date,
                }),
                Stage::Marginals => serde_json::json!({}),
                Stage::Copulas => serde_json::json!({ "families": cfg.fitted_families() }),
                Stage::Ensemble => serde_json::to_value(&cfg.ensemble)?,
                Stage::Consensus => serde_json::to_value(cfg.final_cut)?,
                Stage::Portfolio => serde_json::to_value(&cfg.portfolio)?,
            };
            let upstream: Vec<&String> = stage.deps().iter().map(|d| &keys[d]).collect();
            let blob = serde_json::json!({
                "stage": stage,
                "version": env!("CARGO_PKG_VERSION"),
                "params": params,
                "upstream": upstream,
            });
            keys.insert(stage, sha256_hex(blob.to_string().as_bytes()));
        }
        let out = cfg.output.dir.clone();
        Ok(Pipeline { cfg, out, keys })
    }

    pub fn config(&self) -> &PipelineConfig {
        &self.cfg
    }

    pub fn output_dir(&self) -> &Path {
        &self.out
    }

    fn stage_dir(&self, stage: Stage) -> PathBuf {
        self.out.join(stage.name())
    }

    /// Run every stage, reusing those whose records are still valid.
    pub fn run(&self) -> Result<RunSummary> {
        let mut summary = RunSummary::default();
        for stage in Stage::ALL {
            match self.verify(stage) {
                Ok(()) => {
                    info!("stage {stage}: cached");
                    summary.cached.push(stage);
                }
                Err(reason) => {
                    info!("stage {stage}: running ({reason})");
                    self.execute(stage)?;
                    summary.executed.push(stage);
                }
            }
        }
        Ok(summary)
    }

    /// Run one stage against cached upstream artifacts.
    pub fn run_stage(&self, stage: Stage) -> Result<()> {
        for &dep in stage.deps() {
            self.verify_chain(dep)?;
        }
        self.execute(stage)
    }

    /// Verify `stage` and all of its ancestors, naming the most upstream
    /// stage that needs a rerun.
    pub fn verify_chain(&self, stage: Stage) -> Result<()> {
        for &dep in stage.deps() {
            self.verify_chain(dep)?;
        }
        self.verify(stage).map_err(|message| Error::Dependency {
            stage: stage.name().into(),
            message,
        })
    }

    fn record_digest(&self, stage: Stage) -> std::result::Result<String, String> {
        record_digest(&self.out, stage)
    }

    /// Is the stage's record present, current and consistent with its files?
    fn verify(&self, stage: Stage) -> std::result::Result<(), String> {
        let record = check_record(&self.out, stage)?;
        if record.key != self.keys[&stage] {
            return Err(format!("{stage} artifacts are stale for this configuration"));
        }
        Ok(())
    }

    fn execute(&self, stage: Stage) -> Result<()> {
        let dir = self.stage_dir(stage);
        if dir.exists() {
            std::fs::remove_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
        }
        let mut inputs = BTreeMap::new();
        for &dep in stage.deps() {
            let digest = self.record_digest(dep).map_err(|message| Error::Dependency {
                stage: dep.name().into(),
                message,
            })?;
            inputs.insert(dep, digest);
        }
        let outcome = self.compute(stage).and_then(|files| {
            let mut outputs = BTreeMap::new();
            for (name, bytes) in files {
                io::write_file(&dir.join(&name), &bytes)?;
                outputs.insert(name, sha256_hex(&bytes));
            }
            Ok(outputs)
        });
        match outcome {
            Ok(outputs) => {
                let record = StageRecord {
                    stage,
                    key: self.keys[&stage].clone(),
                    inputs,
                    outputs,
                };
                io::write_json(&dir.join(RECORD), &record)
            }
            Err(e) => {
                let text = format!("stage {stage} failed: {e}\n");
                if let Err(w) = io::write_file(&dir.join(FAILED), text) {
                    warn!("cannot write failure marker: {w}");
                }
                Err(e)
            }
        }
    }

    fn load<T: DeserializeOwned>(&self, stage: Stage, name: &str) -> Result<T> {
        io::read_json(&self.stage_dir(stage).join(name)).map_err(|e| Error::Dependency {
            stage: stage.name().into(),
            message: e.to_string(),
        })
    }

    fn compute(&self, stage: Stage) -> Result<Outputs> {
        match stage {
            Stage::Ingest => self.ingest(),
            Stage::Marginals => self.marginals(),
            Stage::Copulas => self.copulas(),
            Stage::Ensemble => self.ensemble(),
            Stage::Consensus => self.consensus(),
            Stage::Portfolio => self.portfolio(),
        }
    }

    fn ingest(&self) -> Result<Outputs> {
        let prices = load_prices(&self.cfg.data.path, &self.cfg.data.format())?;
        self.cfg.validate_for(prices.tickers.len())?;
        let returns = to_log_returns(&prices)?;
        let (train, test) = split_train_test(&returns, self.cfg.split.date)?;
        info!(
            "{} assets, {} training and {} testing returns",
            train.n_assets(),
            train.len(),
            test.len()
        );
        Ok(vec![
            ("train.json".into(), json_bytes(&train)?),
            ("test.json".into(), json_bytes(&test)?),
        ])
    }

    fn marginals(&self) -> Result<Outputs> {
        let train: ReturnPanel = self.load(Stage::Ingest, "train.json")?;
        let fits = fit_marginals(&train.tickers, &train.returns)?;
        let records: Vec<MarginalRecord> = fits.iter().map(|f| f.record()).collect();
        let residuals: Vec<Vec<f64>> = fits.iter().map(|f| f.std_residuals().to_vec()).collect();
        let pseudo = pseudo_observations(&residuals)?;
        Ok(vec![
            ("marginals.json".into(), json_bytes(&records)?),
            (
                "pseudo_obs.json".into(),
                json_bytes(&PseudoPanel {
                    tickers: train.tickers,
                    u: pseudo.u,
                })?,
            ),
        ])
    }

    fn copulas(&self) -> Result<Outputs> {
        let panel: PseudoPanel = self.load(Stage::Marginals, "pseudo_obs.json")?;
        let families = self.cfg.fitted_families();
        let d = panel.tickers.len();
        info!("fitting {} families to {} pairs", families.len(), d * (d - 1) / 2);
        let (layers, dropped) = fit_copula_layers(&PseudoObs { u: panel.u }, &families);
        let mut out = Vec::new();
        for layer in &layers {
            out.push((format!("{}.json", layer.family), json_bytes(layer)?));
        }
        out.push(("dropped.json".into(), json_bytes(&dropped)?));
        Ok(out)
    }

    /// Layers for `families` that survived fitting.
    fn layers(&self, families: &[Family]) -> Result<(Vec<CopulaLayer>, Vec<DroppedFamily>)> {
        let dropped: Vec<DroppedFamily> = self.load(Stage::Copulas, "dropped.json")?;
        let mut layers = Vec::new();
        let mut missing = Vec::new();
        for &f in families {
            if let Some(d) = dropped.iter().find(|d| d.family == f) {
                missing.push(d.clone());
            } else {
                layers.push(self.load(Stage::Copulas, &format!("{f}.json"))?);
            }
        }
        Ok((layers, missing))
    }

    fn ensemble(&self) -> Result<Outputs> {
        let panel: PseudoPanel = self.load(Stage::Marginals, "pseudo_obs.json")?;
        let ecfg = &self.cfg.ensemble;
        let (layers, dropped) = self.layers(&ecfg.families)?;
        let ens = build_ensemble(&panel.tickers, &layers, ecfg)?;
        let mut out = Vec::new();
        for m in &ens.matrices {
            let stem = format!(
                "matrices/{}_q{}",
                m.meta.family.map_or("none", Family::name),
                m.meta.q.map_or_else(|| "inf".to_string(), |q| q.to_string())
            );
            out.push((format!("{stem}.csv"), m.to_csv().into_bytes()));
            out.push((format!("{stem}.json"), json_bytes(&m.meta)?));
        }
        let labels: Vec<&Vec<usize>> = ens.partitions.iter().map(|p| &p.labels).collect();
        let manifest = EnsembleManifest {
            families: layers.iter().map(|l| l.family).collect(),
            dropped,
            quantiles: ecfg.quantiles.clone(),
            linkages: ecfg.linkages.clone(),
            n_matrices: ens.matrices.len(),
            n_partitions: ens.partitions.len(),
            entries: ens.entries,
        };
        info!("{} matrices, {} partitions", manifest.n_matrices, manifest.n_partitions);
        out.push(("manifest.json".into(), json_bytes(&manifest)?));
        out.push(("partitions.json".into(), json_bytes(&labels)?));
        Ok(out)
    }

    fn consensus(&self) -> Result<Outputs> {
        let labels: Vec<Vec<usize>> = self.load(Stage::Ensemble, "partitions.json")?;
        let panel: PseudoPanel = self.load(Stage::Marginals, "pseudo_obs.json")?;
        let partitions: Vec<Partition> = labels.iter().map(|l| Partition::from_labels(l)).collect();
        let state = accumulate(&partitions)?;
        let fc = self.cfg.final_cut;
        let (tree, part) = final_partition(&state, &panel.tickers, fc.linkage, fc.cut)?;
        info!("consensus partition with {} clusters", part.k);
        let votes: Vec<Vec<f64>> = state.votes.iter().map(|r| r.iter().map(|&v| f64::from(v)).collect()).collect();
        let dm = state.dissimilarity_matrix(&panel.tickers)?;
        Ok(vec![
            ("votes.csv".into(), io::matrix_to_csv(&panel.tickers, &votes).into_bytes()),
            ("consensus.csv".into(), io::matrix_to_csv(&panel.tickers, &state.consensus).into_bytes()),
            ("dissimilarity.csv".into(), dm.to_csv().into_bytes()),
            ("dissimilarity.json".into(), json_bytes(&dm.meta)?),
            ("dendrogram.json".into(), json_bytes(&tree)?),
            ("partition.csv".into(), io::partition_to_csv(&panel.tickers, &part.labels).into_bytes()),
        ])
    }

    fn portfolio(&self) -> Result<Outputs> {
        let train: ReturnPanel = self.load(Stage::Ingest, "train.json")?;
        let test: ReturnPanel = self.load(Stage::Ingest, "test.json")?;
        let pcfg = &self.cfg.portfolio;
        let alpha = pcfg.alpha;
        let mut out = Vec::new();
        let mut summary = String::from("strategy,mu_annual,sigma_annual,cvar_annual,mdd,ce,n_assets\n");
        let mut skipped = Vec::new();
        for &strategy in &pcfg.strategies {
            let mut partition = None;
            let weights = match strategy {
                Strategy::EqualWeight => equal_weight(&train.tickers)?,
                Strategy::MinVariance => global_min_variance(&train.tickers, &covariance(&train))?,
                Strategy::MinCvar => min_cvar_unconstrained(&train, alpha)?,
                Strategy::Ensemble => {
                    let bytes = io::read_file(&self.stage_dir(Stage::Consensus).join("partition.csv"))?;
                    let (tickers, labels) = io::parse_partition_csv(&bytes)?;
                    if tickers != train.tickers {
                        return Err(Error::Dependency {
                            stage: Stage::Consensus.name().into(),
                            message: "consensus partition lists different assets".into(),
                        });
                    }
                    let p = Partition::from_labels(&labels);
                    let sel = cluster_min_cvar(&train, &p, alpha)?;
                    partition = Some(p);
                    sel.weights
                }
                Strategy::Copula { family, linkage } => {
                    let (layers, dropped) = self.layers(&[family])?;
                    let Some(layer) = layers.first() else {
                        warn!("skipping {strategy}: {family} fits were dropped");
                        skipped.push(SkippedStrategy {
                            strategy,
                            reason: dropped.first().map(|d| d.reason.clone()).unwrap_or_default(),
                        });
                        continue;
                    };
                    let m = build_asymptotic_matrix(&train.tickers, &layer.fits, family)?;
                    let p = copula_partition(&m, linkage, pcfg.copula_k_min, pcfg.copula_k_max)?;
                    let sel = cluster_min_cvar(&train, &p, alpha)?;
                    partition = Some(p);
                    sel.weights
                }
            };
            let weights = PortfolioWeights {
                strategy: strategy.to_string(),
                ..weights
            };
            let report = backtest(&weights, &test, alpha)?;
            let stem = strategy.file_stem();
            if let Some(p) = partition {
                out.push((
                    format!("partitions/{stem}.csv"),
                    io::partition_to_csv(&train.tickers, &p.labels).into_bytes(),
                ));
            }
            let held = weights.weights.iter().filter(|w| **w != 0.0).count();
            writeln!(
                summary,
                "{},{},{},{},{},{},{}",
                strategy, report.mu_annual, report.sigma_annual, report.cvar_annual, report.mdd, report.ce, held
            )
            .expect("writing to a String");
            out.push((format!("weights/{stem}.json"), json_bytes(&weights)?));
            out.push((format!("curves/{stem}.csv"), report.curve_csv().into_bytes()));
            out.push((format!("reports/{stem}.json"), json_bytes(&report)?));
        }
        out.push(("summary.csv".into(), summary.into_bytes()));
        out.push(("skipped.json".into(), json_bytes(&skipped)?));
        Ok(out)
    }
}

/// Partition from one copula's asymptotic tail dependence, cut at the best
/// silhouette in `[k_min, k_max]`.
pub fn copula_partition(m: &DissimilarityMatrix, linkage: Linkage, k_min: usize, k_max: usize) -> Result<Partition> {
    let tree = agglomerate(m, linkage)?;
    Ok(best_cut_silhouette(&tree, &m.values, k_min, k_max)?.0)
}

fn with_workers<T: Send>(workers: Option<usize>, f: impl FnOnce() -> Result<T> + Send) -> Result<T> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = workers {
        builder = builder.num_threads(n);
    }
    let pool = builder.build().map_err(|e| Error::Pipeline(format!("cannot start worker pool: {e}")))?;
    pool.install(f)
}

/// Load the config and apply a worker-count override.
fn prepare(config_path: &Path, workers: Option<usize>) -> Result<(Pipeline, Option<usize>)> {
    let cfg = PipelineConfig::load(config_path)?;
    if workers == Some(0) {
        return Err(Error::Config("worker count must be at least 1".into()));
    }
    let n = workers.or(cfg.runtime.workers);
    Ok((Pipeline::new(cfg)?, n))
}

/// Full run. `workers` overrides the configured pool size.
pub fn run_pipeline(config_path: &Path, workers: Option<usize>) -> Result<RunSummary> {
    let (p, n) = prepare(config_path, workers)?;
    with_workers(n, || p.run())
}

pub fn run_stage(config_path: &Path, stage: Stage, workers: Option<usize>) -> Result<()> {
    let (p, n) = prepare(config_path, workers)?;
    with_workers(n, || p.run_stage(stage))
}

/// Check the config and that the price data parses and splits. Writes
/// nothing.
pub fn validate(config_path: &Path) -> Result<PipelineConfig> {
    let cfg = PipelineConfig::load(config_path)?;
    let prices = load_prices(&cfg.data.path, &cfg.data.format()).map_err(|e| match e {
        Error::Io { path, source } => Error::Data(format!("cannot read price data {}: {source}", path.display())),
        other => other,
    })?;
    cfg.validate_for(prices.tickers.len())?;
    split_train_test(&to_log_returns(&prices)?, cfg.split.date)?;
    Ok(cfg)
}

/// Plain-text summary of a finished artifact directory.
fn record_digest(out: &Path, stage: Stage) -> std::result::Result<String, String> {
    std::fs::read(out.join(stage.name()).join(RECORD))
        .map(|b| sha256_hex(&b))
        .map_err(|_| format!("no {stage} record"))
}

/// Everything [`Pipeline::verify`] checks except the configuration key:
/// the record, its output hashes and the upstream records it was built from.
fn check_record(out: &Path, stage: Stage) -> std::result::Result<StageRecord, String> {
    let dir = out.join(stage.name());
    let bytes = std::fs::read(dir.join(RECORD)).map_err(|_| format!("{stage} artifacts missing"))?;
    let record: StageRecord =
        serde_json::from_slice(&bytes).map_err(|e| format!("{stage} record unreadable: {e}"))?;
    if record.stage != stage {
        return Err(format!("{stage} record belongs to stage {}", record.stage));
    }
    for &dep in stage.deps() {
        if record.inputs.get(&dep) != Some(&record_digest(out, dep)?) {
            return Err(format!("{stage} was built from different {dep} artifacts"));
        }
    }
    for (name, hash) in &record.outputs {
        let data = std::fs::read(dir.join(name)).map_err(|_| format!("{stage} artifact {name} missing"))?;
        if &sha256_hex(&data) != hash {
            return Err(format!("{stage} artifact {name} is corrupt"));
        }
    }
    Ok(record)
}

/// Text summary of a finished run. The artifact chain must be intact; the
/// configuration is not needed, so staleness against a config is not checked.
pub fn report(artifact_dir: &Path) -> Result<String> {
    let missing = |stage: Stage, e: Error| Error::Dependency {
        stage: stage.name().into(),
        message: e.to_string(),
    };
    for stage in Stage::ALL {
        check_record(artifact_dir, stage).map_err(|message| Error::Dependency {
            stage: stage.name().into(),
            message,
        })?;
    }
    let dir = artifact_dir.join(Stage::Portfolio.name());
    let record: StageRecord = io::read_json(&dir.join(RECORD)).map_err(|e| missing(Stage::Portfolio, e))?;
    let mut out = String::new();
    let part = artifact_dir.join(Stage::Consensus.name()).join("partition.csv");
    if let Ok(bytes) = io::read_file(&part) {
        let (tickers, labels) = io::parse_partition_csv(&bytes).map_err(|e| missing(Stage::Consensus, e))?;
        let p = Partition::from_labels(&labels);
        writeln!(out, "consensus partition: {} clusters", p.k).expect("writing to a String");
        for (c, members) in p.clusters().iter().enumerate() {
            let mut names: Vec<&str> = members.iter().map(|&i| tickers[i].as_str()).collect();
            names.sort_unstable();
            writeln!(out, "  {}: {}", c + 1, names.join(" ")).expect("writing to a String");
        }
        out.push('\n');
    }
    writeln!(
        out,
        "{:<28} {:>9} {:>9} {:>9} {:>9} {:>9}  assets",
        "strategy", "mu", "sigma", "cvar", "mdd", "ce"
    )
    .expect("writing to a String");
    let summary = io::read_file(&dir.join("summary.csv")).map_err(|e| missing(Stage::Portfolio, e))?;
    let order: Vec<String> = String::from_utf8_lossy(&summary)
        .lines()
        .skip(1)
        .filter_map(|l| l.split(',').next())
        .map(|s| s.replace(':', "_"))
        .collect();
    for stem in order {
        let name = format!("reports/{stem}.json");
        if !record.outputs.contains_key(&name) {
            return Err(missing(Stage::Portfolio, Error::Data(format!("{name} is not a recorded output"))));
        }
        let r: BacktestReport = io::read_json(&dir.join(&name)).map_err(|e| missing(Stage::Portfolio, e))?;
        let held = r.weights.iter().filter(|w| **w != 0.0).count();
        writeln!(
            out,
            "{:<28} {:>8.2}% {:>8.2}% {:>8.2}% {:>8.2}% {:>8.2}%  {held}",
            r.strategy,
            100.0 * r.mu_annual,
            100.0 * r.sigma_annual,
            100.0 * r.cvar_annual,
            100.0 * r.mdd,
            100.0 * r.ce
        )
        .expect("writing to a String");
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stage_names() {
        for s in Stage::ALL {
            assert_eq!(s.name().parse::<Stage>().unwrap(), s);
            assert!(s.deps().iter().all(|d| *d < s));
        }
        assert_eq!("copula".parse::<Stage>().unwrap_err().exit_code(), 1);
    }
}
