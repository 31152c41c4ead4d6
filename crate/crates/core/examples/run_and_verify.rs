// Execute a configured run, write its artifacts, and verify the chain file from disk.

use trustframe::experiment::{
    execute_run, verify_files, write_run, RunConfig, VerifyOutcome, CHAIN_FILE,
};

const CONFIG: &str = include_str!("configs/affine.toml");

pub fn run_example() -> trustframe::Result<VerifyOutcome> {
    let cfg = RunConfig::from_toml(CONFIG)?;
    let artifacts = execute_run(&cfg, None, None)?;
    let dir = std::env::temp_dir().join(format!("trustframe-run-{}", std::process::id()));
    write_run(&dir, &artifacts)?;
    let config_path = dir.join("config.toml");
    std::fs::write(&config_path, CONFIG)?;
    let outcome = verify_files(&dir.join(CHAIN_FILE), &config_path);
    let _ = std::fs::remove_dir_all(&dir);
    outcome
}

fn main() -> trustframe::Result<()> {
    print!("{}", run_example()?.render());
    Ok(())
}
