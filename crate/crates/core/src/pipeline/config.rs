//! TOML pipeline configuration.
//!
//! ```toml
//! [data]
//! path = "prices.csv"        # relative to the config file
//! layout = "wide"            # or "long"
//!
//! [split]
//! date = "2023-07-01"        # first day of the test period
//!
//! [ensemble]                 # every key optional
//! families = ["gaussian", "student_t", "clayton", "survival_gumbel",
//!             "frank", "survival_joe", "survival_galambos", "bb1"]
//! quantiles = [0.05, 0.1, 0.15, 0.2]
//! linkages = ["average", "complete"]
//! k_min = 5
//! k_max = 10
//! tail = "lower"
//!
//! [final]
//! linkage = "complete"
//! cut = { rule = "max_gap" }  # or silhouette { k_min, k_max }, fixed_k { k }
//!
//! [portfolio]
//! alpha = 0.2
//! strategies = ["ew", "gmv", "min_cvar", "ensemble",
//!               "copula:student_t:complete", "copula:bb1:average"]
//! copula_k_min = 5
//! copula_k_max = 10
//!
//! [output]
//! dir = "artifacts"
//!
//! [runtime]
//! workers = 4                 # TAILCLUST_WORKERS overrides
//! ```

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use chrono::NaiveDate;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::copula::Family;
use crate::data::{parse_date, Layout, PriceFormat};
use crate::ensemble::{CutRule, EnsembleConfig};
use crate::error::{Error, Result};
use crate::hierclust::Linkage;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    pub data: DataConfig,
    pub split: SplitConfig,
    #[serde(default)]
    pub ensemble: EnsembleConfig,
    #[serde(default, rename = "final")]
    pub final_cut: FinalConfig,
    #[serde(default)]
    pub portfolio: PortfolioConfig,
    #[serde(default)]
    pub output: OutputConfig,
    #[serde(default)]
    pub runtime: RuntimeConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataConfig {
    pub path: PathBuf,
    #[serde(default)]
    pub layout: Layout,
    #[serde(default = "default_date_column")]
    pub date_column: String,
    #[serde(default = "default_ticker_column")]
    pub ticker_column: String,
    #[serde(default = "default_price_column")]
    pub price_column: String,
}

fn default_date_column() -> String {
    PriceFormat::default().date_column
}

fn default_ticker_column() -> String {
    PriceFormat::default().ticker_column
}

fn default_price_column() -> String {
    PriceFormat::default().price_column
}

impl DataConfig {
    pub fn format(&self) -> PriceFormat {
        PriceFormat {
            layout: self.layout,
            date_column: self.date_column.clone(),
            ticker_column: self.ticker_column.clone(),
            price_column: self.price_column.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SplitConfig {
    #[serde(deserialize_with = "de_date")]
    pub date: NaiveDate,
}

/// Accepts a quoted `YYYY-MM-DD` string or a bare TOML date.
fn de_date<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<NaiveDate, D::Error> {
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Repr {
        Text(String),
        Toml(toml::value::Datetime),
    }
    let text = match Repr::deserialize(d)? {
        Repr::Text(s) => s,
        Repr::Toml(dt) => dt.to_string(),
    };
    parse_date(&text).ok_or_else(|| serde::de::Error::custom(format!("invalid date `{text}`")))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FinalConfig {
    pub linkage: Linkage,
    pub cut: CutRule,
}

impl Default for FinalConfig {
    fn default() -> Self {
        FinalConfig {
            linkage: Linkage::Complete,
            cut: CutRule::MaxGap,
        }
    }
}

/// A portfolio construction rule.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Strategy {
    EqualWeight,
    MinVariance,
    MinCvar,
    /// One asset per consensus cluster.
    Ensemble,
    /// One asset per cluster of a single copula's asymptotic tail dependence.
    Copula { family: Family, linkage: Linkage },
}

impl Strategy {
    pub fn defaults() -> Vec<Strategy> {
        vec![
            Strategy::EqualWeight,
            Strategy::MinVariance,
            Strategy::MinCvar,
            Strategy::Ensemble,
            Strategy::Copula {
                family: Family::StudentT,
                linkage: Linkage::Complete,
            },
            Strategy::Copula {
                family: Family::Bb1,
                linkage: Linkage::Average,
            },
        ]
    }

    /// Name usable as a file stem.
    pub fn file_stem(&self) -> String {
        self.to_string().replace(':', "_")
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Strategy::EqualWeight => f.write_str("ew"),
            Strategy::MinVariance => f.write_str("gmv"),
            Strategy::MinCvar => f.write_str("min_cvar"),
            Strategy::Ensemble => f.write_str("ensemble"),
            Strategy::Copula { family, linkage } => write!(f, "copula:{family}:{linkage}"),
        }
    }
}

impl FromStr for Strategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ew" => Ok(Strategy::EqualWeight),
            "gmv" => Ok(Strategy::MinVariance),
            "min_cvar" => Ok(Strategy::MinCvar),
            "ensemble" => Ok(Strategy::Ensemble),
            _ => {
                let parts: Vec<&str> = s.split(':').collect();
                match parts.as_slice() {
                    ["copula", family, linkage] => Ok(Strategy::Copula {
                        family: family.parse().map_err(|_| Error::Config(format!("unknown copula family `{family}`")))?,
                        linkage: linkage.parse()?,
                    }),
                    _ => Err(Error::Config(format!(
                        "unknown strategy `{s}` (expected ew, gmv, min_cvar, ensemble or copula:<family>:<linkage>)"
                    ))),
                }
            }
        }
    }
}

impl Serialize for Strategy {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Strategy {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PortfolioConfig {
    pub alpha: f64,
    pub strategies: Vec<Strategy>,
    /// Silhouette range for the single-copula strategies.
    pub copula_k_min: usize,
    pub copula_k_max: usize,
}

impl Default for PortfolioConfig {
    fn default() -> Self {
        PortfolioConfig {
            alpha: 0.2,
            strategies: Strategy::defaults(),
            copula_k_min: 5,
            copula_k_max: 10,
        }
    }
}

impl PortfolioConfig {
    pub fn copula_families(&self) -> Vec<Family> {
        let mut out = Vec::new();
        for s in &self.strategies {
            if let Strategy::Copula { family, .. } = s {
                if !out.contains(family) {
                    out.push(*family);
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    pub dir: PathBuf,
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig {
            dir: PathBuf::from("artifacts"),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RuntimeConfig {
    pub workers: Option<usize>,
}

impl PipelineConfig {
    /// Parse and validate. Relative paths are resolved against `base`.
    pub fn from_toml(text: &str, base: &Path) -> Result<Self> {
        let mut cfg: PipelineConfig = toml::from_str(text).map_err(|e| Error::Config(e.message().to_string()))?;
        cfg.data.path = base.join(&cfg.data.path);
        cfg.output.dir = base.join(&cfg.output.dir);
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read config {}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new(""));
        PipelineConfig::from_toml(&text, base)
    }

    pub fn validate(&self) -> Result<()> {
        self.ensemble.validate(None)?;
        match self.final_cut.cut {
            CutRule::MaxGap => {}
            CutRule::Silhouette { k_min, k_max } => {
                if !(2 <= k_min && k_min <= k_max) {
                    return Err(Error::Config(format!("invalid final silhouette range [{k_min}, {k_max}]")));
                }
            }
            CutRule::FixedK { k } => {
                if k == 0 {
                    return Err(Error::Config("final fixed_k needs k >= 1".into()));
                }
            }
        }
        let p = &self.portfolio;
        if !(p.alpha > 0.0 && p.alpha < 1.0) {
            return Err(Error::Config(format!("portfolio alpha {} outside (0, 1)", p.alpha)));
        }
        if p.strategies.is_empty() {
            return Err(Error::Config("no portfolio strategies".into()));
        }
        if p.strategies.iter().enumerate().any(|(i, s)| p.strategies[..i].contains(s)) {
            return Err(Error::Config("duplicate portfolio strategy".into()));
        }
        if !(2 <= p.copula_k_min && p.copula_k_min <= p.copula_k_max) {
            return Err(Error::Config(format!(
                "invalid copula strategy k range [{}, {}]",
                p.copula_k_min, p.copula_k_max
            )));
        }
        if self.runtime.workers == Some(0) {
            return Err(Error::Config("runtime.workers must be at least 1".into()));
        }
        Ok(())
    }

    /// Checks that depend on the number of assets.
    pub fn validate_for(&self, d: usize) -> Result<()> {
        self.ensemble.validate(Some(d))?;
        let too_big = |k: usize| k > d;
        match self.final_cut.cut {
            CutRule::Silhouette { k_max, .. } if k_max >= d => {
                return Err(Error::Config(format!("final k_max = {k_max} needs more than {d} series")));
            }
            CutRule::FixedK { k } if too_big(k) => {
                return Err(Error::Config(format!("final k = {k} exceeds {d} series")));
            }
            _ => {}
        }
        if !self.portfolio.copula_families().is_empty() && self.portfolio.copula_k_max >= d {
            return Err(Error::Config(format!(
                "copula_k_max = {} needs more than {d} series",
                self.portfolio.copula_k_max
            )));
        }
        Ok(())
    }

    /// Families fitted by the copula stage: the ensemble's, then any extra
    /// ones required by single-copula strategies.
    pub fn fitted_families(&self) -> Vec<Family> {
        let mut out = self.ensemble.families.clone();
        for f in self.portfolio.copula_families() {
            if !out.contains(&f) {
                out.push(f);
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = "[data]\npath = \"p.csv\"\n[split]\ndate = \"2023-07-01\"\n";

    #[test]
    fn defaults() {
        let c = PipelineConfig::from_toml(MINIMAL, Path::new("/x")).unwrap();
        assert_eq!(c.data.path, PathBuf::from("/x/p.csv"));
        assert_eq!(c.output.dir, PathBuf::from("/x/artifacts"));
        assert_eq!(c.ensemble.size(), 64);
        assert_eq!(c.final_cut.cut, CutRule::MaxGap);
        assert_eq!(c.portfolio.alpha, 0.2);
        assert_eq!(c.portfolio.strategies.len(), 6);
        assert_eq!(c.split.date, NaiveDate::from_ymd_opt(2023, 7, 1).unwrap());
    }

    #[test]
    fn bare_toml_date() {
        let c = PipelineConfig::from_toml("[data]\npath = \"p.csv\"\n[split]\ndate = 2023-07-01\n", Path::new("")).unwrap();
        assert_eq!(c.split.date, NaiveDate::from_ymd_opt(2023, 7, 1).unwrap());
    }

    #[test]
    fn strategies_round_trip() {
        for s in Strategy::defaults() {
            assert_eq!(s.to_string().parse::<Strategy>().unwrap(), s);
        }
        assert_eq!(Strategy::defaults()[4].file_stem(), "copula_student_t_complete");
        assert!("copula:nope:average".parse::<Strategy>().is_err());
        assert!("copula:clayton".parse::<Strategy>().is_err());
    }

    #[test]
    fn rejects() {
        let bad = [
            format!("{MINIMAL}extra = 1\n"),
            format!("{MINIMAL}[ensemble]\nquantiles = [0.7]\n"),
            format!("{MINIMAL}[ensemble]\nk_min = 4\nk_max = 3\n"),
            format!("{MINIMAL}[final]\ncut = {{ rule = \"fixed_k\", k = 0 }}\n"),
            format!("{MINIMAL}[final]\ncut = {{ rule = \"median\" }}\n"),
            format!("{MINIMAL}[portfolio]\nalpha = 1.5\n"),
            format!("{MINIMAL}[portfolio]\nstrategies = [\"ew\", \"ew\"]\n"),
            format!("{MINIMAL}[runtime]\nworkers = 0\n"),
            "[split]\ndate = \"2023-07-01\"\n".to_string(),
            "[data]\npath = \"p.csv\"\n[split]\ndate = \"July\"\n".to_string(),
        ];
        for text in bad {
            let e = PipelineConfig::from_toml(&text, Path::new("")).unwrap_err();
            assert_eq!(e.exit_code(), 1, "{text}: {e}");
        }
    }

    #[test]
    fn families_union() {
        let text = format!("{MINIMAL}[ensemble]\nfamilies = [\"clayton\"]\n");
        let c = PipelineConfig::from_toml(&text, Path::new("")).unwrap();
        assert_eq!(c.fitted_families(), vec![Family::Clayton, Family::StudentT, Family::Bb1]);
        assert!(c.validate_for(8).is_err());
        assert!(c.validate_for(11).is_ok());
    }
}
