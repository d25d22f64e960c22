use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;

use feller::cli::{self, Overrides, RunManifest, CONFIG_FILE, MANIFEST_FILE};
use feller::config::{config_hash, ConfigFile};

fn config_path(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("configs").join(name)
}

fn feller(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_feller")).args(args).output().unwrap()
}

fn rows(path: &Path) -> usize {
    fs::read_to_string(path).unwrap().lines().count() - 1
}

#[test]
fn list_names_everything() {
    let text = cli::list_text();
    for needle in [
        "paper-bpc",
        "paper-stable-like",
        "paper-nig-like",
        "paper-meixner-like",
        "symmetric-stable",
        "meixner-bump",
        "T=1000 h=0.1",
    ] {
        assert!(text.contains(needle), "{needle}");
    }
}

#[test]
fn simulate_preset_writes_three_files() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = cli::load_config("paper-bpc").unwrap();
    let out = cli::simulate(&cfg, &Overrides { seed: Some(3), ..Default::default() }, dir.path()).unwrap();
    assert_eq!(rows(&out.paths_file), 5 * 2001);
    let manifest = RunManifest::read(&dir.path().join(MANIFEST_FILE)).unwrap();
    assert_eq!(manifest, out.manifest);
    assert_eq!((manifest.n_paths, manifest.n_steps, manifest.seed), (5, 2000, 3));
    assert!(manifest.validation.ok);
    let canonical = fs::read_to_string(dir.path().join(CONFIG_FILE)).unwrap();
    assert_eq!(manifest.config_hash, config_hash(&canonical));
}

#[test]
fn long_horizon_row_count() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = cli::load_config("paper-nig-like").unwrap();
    let ov = Overrides { paths: Some(1), ..Default::default() };
    let out = cli::simulate(&cfg, &ov, dir.path()).unwrap();
    assert_eq!(rows(&out.paths_file), 10_001);
}

#[test]
fn rerunning_the_written_config_reproduces_the_csv() {
    for name in ["skewed_mixture.toml", "bpc_regions.toml", "mean_reverting_nig.toml"] {
        let first = tempfile::tempdir().unwrap();
        let cfg = cli::load_config(config_path(name).to_str().unwrap()).unwrap();
        let a = cli::simulate(&cfg, &Overrides::default(), first.path()).unwrap();

        let second = tempfile::tempdir().unwrap();
        let written = first.path().join(CONFIG_FILE);
        let again = cli::load_config(written.to_str().unwrap()).unwrap();
        let b = cli::simulate(&again, &Overrides::default(), second.path()).unwrap();

        assert_eq!(fs::read(&a.paths_file).unwrap(), fs::read(&b.paths_file).unwrap(), "{name}");
        assert_eq!(a.manifest.config_hash, b.manifest.config_hash);
        assert_eq!(
            fs::read_to_string(written).unwrap(),
            fs::read_to_string(second.path().join(CONFIG_FILE)).unwrap()
        );
    }
}

#[test]
fn canonical_config_round_trips() {
    for name in ["skewed_mixture.toml", "bpc_regions.toml", "mean_reverting_nig.toml", "square_drift.toml"] {
        let text = fs::read_to_string(config_path(name)).unwrap();
        let cfg = ConfigFile::parse(&text).unwrap();
        let family = cfg.family.build().unwrap();
        let canonical = cli::canonical_config(&family, &cli::resolve_settings(&cfg, &Overrides::default()));
        let reparsed = ConfigFile::parse(&canonical.to_toml().unwrap()).unwrap();
        assert_eq!(reparsed, canonical, "{name}");
        let rebuilt = reparsed.family.build().unwrap();
        for x in [-8.0, -1.0, 0.0, 2.5, 7.0] {
            for xi in [-4.0, 0.5, 3.0] {
                assert_eq!(rebuilt.exponent_at(x, xi).unwrap(), family.exponent_at(x, xi).unwrap());
            }
        }
    }
}

#[test]
fn overrides_beat_the_config() {
    let text = fs::read_to_string(config_path("bpc_regions.toml")).unwrap();
    let cfg = ConfigFile::parse(&text).unwrap();
    let sim = cli::resolve_settings(&cfg, &Overrides { h: Some(0.1), ..Default::default() });
    assert_eq!((sim.h, sim.horizon, sim.seed, sim.n_paths), (0.1, 20.0, 1, 5));
    let sim = cli::resolve_settings(&ConfigFile::preset("paper-meixner-like"), &Overrides::default());
    assert_eq!((sim.h, sim.horizon), (0.1, 100.0));
}

#[test]
fn figure_seeds_change_paths() {
    let run = |seed| {
        let dir = tempfile::tempdir().unwrap();
        let ov = Overrides { seed: Some(seed), ..Default::default() };
        let out = cli::figure(3, None, &ov, dir.path()).unwrap();
        assert_eq!(rows(&out.paths_file), 5 * 10_001);
        fs::read(out.paths_file).unwrap()
    };
    assert_ne!(run(1), run(2));
}

#[test]
fn stable_like_figure_exports_the_index() {
    let dir = tempfile::tempdir().unwrap();
    let ov = Overrides { horizon: Some(1.0), ..Default::default() };
    let out = cli::figure(2, None, &ov, dir.path()).unwrap();
    let text = fs::read_to_string(out.paths_file).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("path_id,t,x,alpha"));
    for line in lines {
        let alpha: f64 = line.rsplit(',').next().unwrap().parse().unwrap();
        assert!((1.0..=1.95).contains(&alpha));
    }
}

#[test]
fn bad_figures_and_settings_are_errors() {
    let dir = tempfile::tempdir().unwrap();
    assert!(cli::figure(5, None, &Overrides::default(), dir.path()).is_err());
    let target = dir.path().join("never");
    let ov = Overrides { h: Some(-1.0), ..Default::default() };
    assert!(cli::simulate(&ConfigFile::preset("paper-bpc"), &ov, &target).is_err());
    assert!(!target.exists());
    assert!(cli::load_config("no-such-preset").is_err());
}

#[test]
fn validate_flags_explosive_drift() {
    let cfg = cli::load_config(config_path("square_drift.toml").to_str().unwrap()).unwrap();
    let out = cli::validate(&cfg, &Overrides::default(), &cli::DEFAULT_PROBE_STATES).unwrap();
    assert!(out.warnings);
    assert_eq!(out.exit_code(false), 0);
    assert_eq!(out.exit_code(true), 2);
    assert!(out.probes.iter().any(|p| p.overflow.is_some()));
    assert!(out.text.contains("growth bound ........ WARN"));

    let cfg = cli::load_config(config_path("bpc_regions.toml").to_str().unwrap()).unwrap();
    let out = cli::validate(&cfg, &Overrides::default(), &cli::DEFAULT_PROBE_STATES).unwrap();
    assert!(!out.warnings, "{}", out.text);
}

#[test]
fn binary_exit_codes() {
    assert_eq!(feller(&["list"]).status.code(), Some(0));
    assert_eq!(feller(&["frobnicate"]).status.code(), Some(1));

    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.toml");
    fs::write(&bad, "[family.stable-like]\nalpha = { constant = 3.0 }\n").unwrap();
    let out = feller(&["validate", "--config", bad.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).starts_with("error:"));

    let square = config_path("square_drift.toml");
    let square = square.to_str().unwrap();
    assert_eq!(feller(&["validate", "--config", square]).status.code(), Some(0));
    assert_eq!(feller(&["validate", "--config", square, "--strict"]).status.code(), Some(2));
    let out = feller(&["validate", "--config", "paper-bpc", "--strict", "--probe-states", "0,10"]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(String::from_utf8_lossy(&out.stdout).matches("probe x=").count(), 2);
}

#[test]
fn binary_simulate_writes_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().join("run");
    let status = feller(&[
        "simulate",
        "--config",
        "paper-stable-like",
        "--T",
        "2",
        "--paths",
        "2",
        "--seed",
        "11",
        "--out-dir",
        out_dir.to_str().unwrap(),
    ]);
    assert_eq!(status.status.code(), Some(0), "{}", String::from_utf8_lossy(&status.stderr));
    assert_eq!(rows(&out_dir.join("paths.csv")), 2 * 21);
    let manifest = RunManifest::read(&out_dir.join(MANIFEST_FILE)).unwrap();
    assert_eq!(manifest.command, "simulate");
    assert_eq!(manifest.family, "paper-stable-like");
}
