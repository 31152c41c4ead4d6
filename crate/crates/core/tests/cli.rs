use std::path::Path;
use std::process::Command;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_trustframe"))
}

fn config(name: &str) -> String {
    format!("{}/examples/configs/{name}", env!("CARGO_MANIFEST_DIR"))
}

fn run(args: &[&str]) -> (i32, String) {
    let out = bin().args(args).output().unwrap();
    let text =
        String::from_utf8_lossy(&out.stdout).into_owned() + &String::from_utf8_lossy(&out.stderr);
    (out.status.code().unwrap_or(-1), text)
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn run_writes_all_artifacts_and_verify_passes() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config("affine.toml");
    let (code, text) = run(&["run", "--config", &cfg, "--out", path(dir.path())]);
    assert_eq!(code, 0, "{text}");
    for f in ["costs.csv", "precision.csv", "chain.bin", "summary.txt"] {
        assert!(dir.path().join(f).exists(), "{f} missing");
    }
    let costs = std::fs::read_to_string(dir.path().join("costs.csv")).unwrap();
    assert_eq!(costs.lines().count(), 4);
    assert!(costs.starts_with("mode,scenario,tolerance,"));

    let chain = dir.path().join("chain.bin");
    let (code, text) = run(&["verify", "--chain", path(&chain), "--config", &cfg]);
    assert_eq!(code, 0, "{text}");
    assert!(text.contains("result = PASS"));

    let mut bytes = std::fs::read(&chain).unwrap();
    bytes[10] ^= 4;
    std::fs::write(&chain, bytes).unwrap();
    let (code, text) = run(&["verify", "--chain", path(&chain), "--config", &cfg]);
    assert_eq!(code, 1, "{text}");
    assert!(text.contains("integrity = FAIL at height 0"), "{text}");
}

#[test]
fn mode_and_seed_flags() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config("affine.toml");
    let (code, text) = run(&[
        "run",
        "--config",
        &cfg,
        "--out",
        path(dir.path()),
        "--mode",
        "streaming",
        "--seed",
        "9",
    ]);
    assert_eq!(code, 0, "{text}");
    assert!(text.contains("chain_mode = streaming"));
    assert!(text.contains("seed = 9"));
    let costs = std::fs::read_to_string(dir.path().join("costs.csv")).unwrap();
    assert_eq!(costs.lines().count(), 2);
}

#[test]
fn empty_chain_verifies() {
    let dir = tempfile::tempdir().unwrap();
    let chain = dir.path().join("chain.bin");
    std::fs::write(&chain, []).unwrap();
    let (code, text) = run(&[
        "verify",
        "--chain",
        path(&chain),
        "--config",
        &config("affine.toml"),
    ]);
    assert_eq!(code, 0, "{text}");
    assert!(text.contains("blocks = 0"));
}

#[test]
fn sweep_writes_tables() {
    let dir = tempfile::tempdir().unwrap();
    let text = std::fs::read_to_string(config("classifier_study.toml"))
        .unwrap()
        .replace("seeds = 10", "seeds = 1")
        .replace("iterations = 300", "iterations = 60");
    let cfg = dir.path().join("study.toml");
    std::fs::write(&cfg, text).unwrap();
    let out = dir.path().join("out");
    let (code, text) = run(&[
        "sweep",
        "--config",
        path(&cfg),
        "--tolerances",
        "0.1,1000",
        "--out",
        path(&out),
    ]);
    assert_eq!(code, 0, "{text}");
    let costs = std::fs::read_to_string(out.join("costs.csv")).unwrap();
    assert_eq!(costs.lines().count(), 1 + 3 * 2);
    let precision = std::fs::read_to_string(out.join("precision.csv")).unwrap();
    assert_eq!(precision.lines().count(), 1 + 2 + 3);
    let summary = std::fs::read_to_string(out.join("summary.txt")).unwrap();
    assert!(summary.contains("learning_rate = 0.5"));
}

#[test]
fn infeasible_config_fails_before_running() {
    let dir = tempfile::tempdir().unwrap();
    let text = std::fs::read_to_string(config("affine.toml"))
        .unwrap()
        .replace("max_error = 0.005", "max_error = 0.5");
    let cfg = dir.path().join("bad.toml");
    std::fs::write(&cfg, text).unwrap();
    let out = dir.path().join("out");
    let (code, text) = run(&["run", "--config", path(&cfg), "--out", path(&out)]);
    assert_eq!(code, 2, "{text}");
    assert!(text.starts_with("error:"), "{text}");
    assert!(!out.exists());
}
