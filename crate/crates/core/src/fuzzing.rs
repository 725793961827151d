//! Entry points shared by the cargo-fuzz targets and the seed regression
//! test. Each one must return normally on any input.

use std::path::Path;

use crate::data::{parse_prices, to_log_returns, Layout, PriceFormat, ReturnPanel};
use crate::io::{matrix_to_csv, parse_matrix_csv, parse_partition_csv, partition_to_csv};
use crate::pipeline::{EnsembleManifest, PipelineConfig, PseudoPanel, StageRecord};

fn prices(bytes: &[u8], layout: Layout) {
    let format = PriceFormat {
        layout,
        ..PriceFormat::default()
    };
    if let Ok(panel) = parse_prices(bytes, &format) {
        assert_eq!(panel.prices.len(), panel.tickers.len());
        assert!(panel.prices.iter().all(|row| row.len() == panel.dates.len()));
        assert!(panel.dates.windows(2).all(|w| w[0] < w[1]));
        if let Ok(r) = to_log_returns(&panel) {
            assert_eq!(r.dates.len() + 1, panel.dates.len());
        }
    }
}

pub fn prices_wide(bytes: &[u8]) {
    prices(bytes, Layout::Wide);
}

pub fn prices_long(bytes: &[u8]) {
    prices(bytes, Layout::Long);
}

pub fn config_toml(bytes: &[u8]) {
    if let Ok(text) = std::str::from_utf8(bytes) {
        if let Ok(cfg) = PipelineConfig::from_toml(text, Path::new("base")) {
            assert!(cfg.data.path.starts_with("base") || cfg.data.path.is_absolute());
        }
    }
}

pub fn matrix_csv(bytes: &[u8]) {
    if let Ok((tickers, values)) = parse_matrix_csv(bytes) {
        assert_eq!(values.len(), tickers.len());
        assert!(values.iter().all(|row| row.len() == tickers.len()));
        let text = matrix_to_csv(&tickers, &values);
        if let Ok((t2, v2)) = parse_matrix_csv(text.as_bytes()) {
            assert_eq!(matrix_to_csv(&t2, &v2), text);
        }
    }
}

pub fn partition_csv(bytes: &[u8]) {
    if let Ok((tickers, labels)) = parse_partition_csv(bytes) {
        assert_eq!(tickers.len(), labels.len());
        let text = partition_to_csv(&tickers, &labels);
        if let Ok((t2, l2)) = parse_partition_csv(text.as_bytes()) {
            assert_eq!(partition_to_csv(&t2, &l2), text);
        }
    }
}

fn round_trip<T>(bytes: &[u8])
where
    T: serde::Serialize + serde::de::DeserializeOwned + PartialEq + std::fmt::Debug,
{
    if let Ok(v) = serde_json::from_slice::<T>(bytes) {
        let text = serde_json::to_string(&v).expect("artifact serializes");
        let back: T = serde_json::from_str(&text).expect("serialized artifact parses");
        assert_eq!(serde_json::to_string(&back).unwrap(), text);
    }
}

pub fn artifact_json(bytes: &[u8]) {
    round_trip::<StageRecord>(bytes);
    round_trip::<PseudoPanel>(bytes);
    round_trip::<EnsembleManifest>(bytes);
    round_trip::<ReturnPanel>(bytes);
}

pub type Target = fn(&[u8]);

pub const TARGETS: [(&str, Target); 6] = [
    ("prices_wide", prices_wide),
    ("prices_long", prices_long),
    ("config_toml", config_toml),
    ("matrix_csv", matrix_csv),
    ("partition_csv", partition_csv),
    ("artifact_json", artifact_json),
];
