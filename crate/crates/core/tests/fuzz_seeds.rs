use std::path::PathBuf;

use tailclust::fuzzing::TARGETS;

#[test]
fn corpus_seeds_run_clean() {
    let root = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fuzz/corpus");
    for (name, target) in TARGETS {
        let dir = root.join(name);
        let mut seeds = 0;
        for entry in std::fs::read_dir(&dir).unwrap_or_else(|e| panic!("{}: {e}", dir.display())) {
            let bytes = std::fs::read(entry.unwrap().path()).unwrap();
            target(&bytes);
            // every prefix too, which covers truncated files
            for cut in (0..bytes.len()).step_by(bytes.len() / 64 + 1) {
                target(&bytes[..cut]);
            }
            seeds += 1;
        }
        assert!(seeds >= 2, "{name} has {seeds} seeds");
    }
}

#[test]
fn real_artifacts_parse() {
    let root = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fuzz/corpus");
    let read = |p: &str| std::fs::read(root.join(p)).unwrap();
    let (tickers, values) = tailclust::io::parse_matrix_csv(&read("matrix_csv/dissimilarity.csv")).unwrap();
    assert_eq!(values.len(), tickers.len());
    tailclust::io::parse_partition_csv(&read("partition_csv/consensus.csv")).unwrap();
    let format = tailclust::data::PriceFormat::default();
    tailclust::data::parse_prices(&read("prices_wide/synthetic.csv"), &format).unwrap();
    let long = tailclust::data::PriceFormat {
        layout: tailclust::data::Layout::Long,
        ..format
    };
    tailclust::data::parse_prices(&read("prices_long/synthetic.csv"), &long).unwrap();
    serde_json::from_slice::<tailclust::pipeline::StageRecord>(&read("artifact_json/stage.json")).unwrap();
    serde_json::from_slice::<tailclust::pipeline::EnsembleManifest>(&read("artifact_json/manifest.json")).unwrap();
    let text = String::from_utf8(read("config_toml/full.toml")).unwrap();
    tailclust::pipeline::PipelineConfig::from_toml(&text, std::path::Path::new(".")).unwrap();
}
