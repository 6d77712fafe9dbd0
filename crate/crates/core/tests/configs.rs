use std::path::{Path, PathBuf};

use hetqp::cli::ExperimentConfig;
use hetqp::repro::ReproManifest;

fn root() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..")
}

#[test]
fn acceptance_manifest_lists_every_criterion() {
    let m = ReproManifest::load(root().join("configs/acceptance/manifest.toml")).unwrap();
    let ids: Vec<String> = (1..=11).map(|i| i.to_string()).collect();
    m.require_ids(&ids.iter().map(String::as_str).collect::<Vec<_>>()).unwrap();
    for c in &m.criteria {
        let text = std::fs::read_to_string(m.config_path(c)).unwrap();
        let value: toml::Table = toml::from_str(&text).unwrap();
        if let Some(exp) = value.get("experiment") {
            ExperimentConfig::parse(&toml::to_string(exp).unwrap()).unwrap();
        }
    }
}

#[test]
fn example_experiments_parse() {
    let mut n = 0;
    for entry in std::fs::read_dir(root().join("configs/experiments")).unwrap() {
        let path = entry.unwrap().path();
        let cfg = ExperimentConfig::load(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
        assert_eq!(ExperimentConfig::parse(&cfg.to_toml()).unwrap().to_toml(), cfg.to_toml());
        n += 1;
    }
    assert!(n > 0);
}
