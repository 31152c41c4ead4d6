// Sweep the validation tolerance for a small classifier trained under randomized validation,
// across the base, coarse-compression and large-frame scenarios.

use trustframe::experiment::{run_sweep, RunConfig, SweepOutput};
use trustframe::protocol::ProtocolMode;

const CONFIG: &str = include_str!("configs/classifier_study.toml");

pub fn run_example() -> trustframe::Result<SweepOutput> {
    let mut cfg = RunConfig::from_toml(CONFIG)?;
    cfg.experiment.seeds = 2;
    let tolerances = [0.1, 1.0, 1000.0];
    run_sweep(&cfg, &tolerances, ProtocolMode::Batch)
}

fn main() -> trustframe::Result<()> {
    let out = run_example()?;
    println!(
        "{:<20} {:>9} {:>13} {:>14}",
        "scenario", "tolerance", "recomp/iter", "comm bits/dim"
    );
    for r in &out.costs {
        println!(
            "{:<20} {:>9} {:>13.3} {:>14.3}",
            r.scenario.name(),
            r.tolerance,
            r.recomputations_per_iter,
            r.comm_bits_per_dim
        );
    }
    for p in &out.precision {
        let tol = p.tolerance.map_or("-".to_string(), |t| t.to_string());
        println!(
            "{:<9} batch {:>3} tolerance {:>6} accuracy {:.4}",
            p.series, p.batch_size, tol, p.accuracy
        );
    }
    Ok(())
}
