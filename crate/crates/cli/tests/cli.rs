use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use chrono::NaiveDate;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use tailclust::data::prices_to_csv;
use tailclust::marginal::GarchParams;
use tailclust::sim;

const SMALL: &str = r#"[ensemble]
families = ["clayton", "frank"]
quantiles = [0.1]
k_min = 2
k_max = 3

[portfolio]
strategies = ["ew", "gmv", "ensemble", "copula:clayton:average"]
copula_k_min = 2
copula_k_max = 3
"#;

fn market(dir: &Path, extra: &str) -> PathBuf {
    let p = GarchParams {
        mu: 2e-4,
        omega: 2e-6,
        alpha: 0.05,
        gamma: 0.10,
        beta: 0.85,
        nu: 6.0,
    };
    let (tickers, returns, _) = sim::clayton_blocks(&[3, 3], 4.0, &p, 400, &mut ChaCha8Rng::seed_from_u64(3));
    let prices = sim::prices_from_returns(&tickers, &returns, NaiveDate::from_ymd_opt(2019, 1, 1).unwrap());
    let split = prices.dates[prices.dates.len() - 30];
    std::fs::write(dir.join("prices.csv"), prices_to_csv(&prices)).unwrap();
    let config = dir.join("config.toml");
    std::fs::write(&config, format!("[data]\npath = \"prices.csv\"\n\n[split]\ndate = \"{split}\"\n\n{SMALL}{extra}")).unwrap();
    config
}

fn tailclust(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_tailclust"))
        .args(args)
        .env_remove("TAILCLUST_WORKERS")
        .env("RUST_LOG", "warn")
        .output()
        .unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn read(dir: &Path, rel: &str) -> Vec<u8> {
    std::fs::read(dir.join(rel)).unwrap()
}

#[test]
fn usage_and_config_errors_exit_1() {
    assert_eq!(code(&tailclust(&[])), 1);
    assert_eq!(code(&tailclust(&["frobnicate"])), 1);
    assert_eq!(code(&tailclust(&["--help"])), 0);
    let tmp = tempfile::tempdir().unwrap();
    let config = market(tmp.path(), "\n[runtime]\nworkers = 0\n");
    assert_eq!(code(&tailclust(&["validate", s(&config)])), 1);
    let missing = tmp.path().join("nope.toml");
    assert_eq!(code(&tailclust(&["run", s(&missing)])), 1);
    let config = market(tmp.path(), "");
    assert_eq!(code(&tailclust(&["stage", "copula", s(&config)])), 1);
    let out = Command::new(env!("CARGO_BIN_EXE_tailclust"))
        .args(["run", s(&config)])
        .env("TAILCLUST_WORKERS", "many")
        .output()
        .unwrap();
    assert_eq!(code(&out), 1);
}

#[test]
fn missing_data_is_a_clean_data_error() {
    let tmp = tempfile::tempdir().unwrap();
    let config = tmp.path().join("config.toml");
    std::fs::write(&config, "[data]\npath = \"absent.csv\"\n[split]\ndate = \"2020-01-01\"\n").unwrap();
    assert_eq!(code(&tailclust(&["validate", s(&config)])), 2);
    let o = tailclust(&["run", s(&config)]);
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("absent.csv"));
    assert!(!tmp.path().join("artifacts").exists());
}

#[test]
fn failed_stage_leaves_marker() {
    let tmp = tempfile::tempdir().unwrap();
    let config = market(tmp.path(), "");
    let text = std::fs::read_to_string(&config).unwrap();
    let moved = text.replacen("date = \"", "date = \"2100-01-01\"\n# was \"", 1);
    std::fs::write(&config, moved).unwrap();
    assert_eq!(code(&tailclust(&["run", s(&config)])), 2);
    let marker = std::fs::read_to_string(tmp.path().join("artifacts/ingest/FAILED")).unwrap();
    assert!(marker.contains("ingest"));
    assert!(!tmp.path().join("artifacts/ingest/stage.json").exists());
}

#[test]
fn stage_without_upstream_is_a_dependency_error() {
    let tmp = tempfile::tempdir().unwrap();
    let config = market(tmp.path(), "");
    let o = tailclust(&["stage", "portfolio", s(&config)]);
    assert_eq!(code(&o), 4);
    assert!(String::from_utf8_lossy(&o.stderr).contains("rerun stage `ingest`"));
    assert_eq!(code(&tailclust(&["report", s(&tmp.path().join("artifacts"))])), 4);
}

#[test]
fn run_cache_stage_and_report() {
    let tmp = tempfile::tempdir().unwrap();
    let config = market(tmp.path(), "");
    assert_eq!(code(&tailclust(&["validate", s(&config)])), 0);
    let first = tailclust(&["run", s(&config)]);
    assert_eq!(code(&first), 0, "{}", String::from_utf8_lossy(&first.stderr));
    let art = tmp.path().join("artifacts");
    let cold = tmp.path().join("cold");
    copy_dir(&art, &cold);

    let again = tailclust(&["run", s(&config)]);
    assert!(String::from_utf8_lossy(&again.stdout).contains("executed: []"));

    // a cold rerun of one stage reproduces the cached artifacts
    std::fs::remove_dir_all(art.join("consensus")).unwrap();
    let partial = tailclust(&["run", s(&config)]);
    assert!(String::from_utf8_lossy(&partial.stdout).contains("executed: [consensus]"));
    for f in ["consensus/partition.csv", "consensus/consensus.csv", "consensus/stage.json", "portfolio/stage.json"] {
        assert_eq!(read(&art, f), read(&cold, f), "{f}");
    }

    // a new alpha only touches the portfolio stage
    let text = std::fs::read_to_string(&config).unwrap();
    std::fs::write(&config, text.replace("[portfolio]\n", "[portfolio]\nalpha = 0.1\n")).unwrap();
    assert_eq!(code(&tailclust(&["stage", "portfolio", s(&config)])), 0);
    for stage in ["ingest", "marginals", "copulas", "ensemble", "consensus"] {
        let f = format!("{stage}/stage.json");
        assert_eq!(read(&art, &f), read(&cold, &f), "{f}");
    }
    assert_ne!(read(&art, "portfolio/summary.csv"), read(&cold, "portfolio/summary.csv"));

    let report = tailclust(&["report", s(&art)]);
    assert_eq!(code(&report), 0);
    let text = String::from_utf8_lossy(&report.stdout);
    assert!(text.contains("consensus partition") && text.contains("copula:clayton:average"));

    // corrupt an upstream artifact
    std::fs::write(art.join("ensemble/partitions.json"), "[]").unwrap();
    let o = tailclust(&["stage", "consensus", s(&config)]);
    assert_eq!(code(&o), 4);
    assert!(String::from_utf8_lossy(&o.stderr).contains("rerun stage `ensemble`"));
}

fn copy_dir(from: &Path, to: &Path) {
    std::fs::create_dir_all(to).unwrap();
    for entry in std::fs::read_dir(from).unwrap() {
        let entry = entry.unwrap();
        let target = to.join(entry.file_name());
        if entry.file_type().unwrap().is_dir() {
            copy_dir(&entry.path(), &target);
        } else {
            std::fs::copy(entry.path(), target).unwrap();
        }
    }
}

#[test]
fn single_member_ensemble() {
    let tmp = tempfile::tempdir().unwrap();
    let config = market(tmp.path(), "");
    let text = std::fs::read_to_string(&config).unwrap();
    let text = text
        .replace("families = [\"clayton\", \"frank\"]", "families = [\"clayton\"]\nlinkages = [\"average\"]")
        .replace("\"copula:clayton:average\"", "\"min_cvar\"");
    std::fs::write(&config, text).unwrap();
    let o = tailclust(&["run", s(&config)]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let art = tmp.path().join("artifacts");
    let manifest: serde_json::Value = serde_json::from_slice(&read(&art, "ensemble/manifest.json")).unwrap();
    assert_eq!(manifest["n_partitions"], 1);
    assert_eq!(manifest["n_matrices"], 1);

    // a new final cut rule reruns consensus only
    let copulas = read(&art, "copulas/stage.json");
    let clayton = read(&art, "copulas/clayton.json");
    let text = std::fs::read_to_string(&config).unwrap();
    std::fs::write(&config, format!("{text}\n[final]\nlinkage = \"average\"\ncut = {{ rule = \"fixed_k\", k = 2 }}\n")).unwrap();
    assert_eq!(code(&tailclust(&["stage", "consensus", s(&config)])), 0);
    assert_eq!(read(&art, "copulas/stage.json"), copulas);
    assert_eq!(read(&art, "copulas/clayton.json"), clayton);
    let part = String::from_utf8(read(&art, "consensus/partition.csv")).unwrap();
    let labels: std::collections::BTreeSet<&str> = part.lines().skip(1).filter_map(|l| l.split(',').nth(1)).collect();
    assert_eq!(labels.len(), 2);
    // the portfolio stage is now stale
    assert_eq!(code(&tailclust(&["report", s(&art)])), 4);
}
