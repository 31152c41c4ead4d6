//! The `run`, `verify` and `sweep` commands and the files they write.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::Serialize;

use super::config::{ComputationConfig, ResolvedRun, RunConfig};
use super::sweep::{run_sweep, CostRow, PrecisionRow, SweepOutput};
use super::validated::{run_validated, vanilla_run};
use crate::compute::Computation;
use crate::error::{Error, Result};
use crate::ledger::{
    hash_hex, parse_hash_hex, verify_chain_bytes, verify_computation, AuditChain, Hash,
    IntegrityReport, VerificationReport,
};
use crate::netsim::run_session;
use crate::protocol::{verification_bound, ProtocolMode, ToleranceSchedule};

pub const COSTS_FILE: &str = "costs.csv";
pub const PRECISION_FILE: &str = "precision.csv";
pub const CHAIN_FILE: &str = "chain.bin";
pub const SUMMARY_FILE: &str = "summary.txt";

/// Everything `run` writes, before it touches the disk.
#[derive(Debug)]
pub struct RunArtifacts {
    pub costs: Vec<CostRow>,
    pub precision: Vec<PrecisionRow>,
    pub chain_mode: ProtocolMode,
    pub chain: AuditChain,
    /// Replay of the stored chain, for deterministic computations.
    pub verification: Option<VerificationReport>,
    pub summary: String,
}

/// Outcome of `verify`.
#[derive(Debug)]
pub struct VerifyOutcome {
    pub integrity: IntegrityReport,
    pub blocks: usize,
    pub tip_checked: bool,
    pub computation: Option<VerificationReport>,
    pub verify_tolerance: f64,
    pub bound: Option<f64>,
}

impl VerifyOutcome {
    pub fn passed(&self) -> bool {
        self.integrity.is_ok() && self.computation.as_ref().is_none_or(|r| r.passed())
    }

    pub fn render(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "blocks = {}", self.blocks);
        let _ = writeln!(s, "tip_checked = {}", self.tip_checked);
        match self.integrity {
            IntegrityReport::Ok => {
                let _ = writeln!(s, "integrity = PASS");
            }
            IntegrityReport::FirstBad(h) => {
                let _ = writeln!(s, "integrity = FAIL at height {h}");
            }
        }
        if let Some(r) = &self.computation {
            let deviations: Vec<f64> = r.checks.iter().filter_map(|c| c.deviation).collect();
            let mean = if deviations.is_empty() {
                0.0
            } else {
                deviations.iter().sum::<f64>() / deviations.len() as f64
            };
            let _ = writeln!(s, "audits = {}", r.checks.len());
            let _ = writeln!(s, "compared = {}", deviations.len());
            let _ = writeln!(s, "max_deviation = {:e}", r.max_deviation);
            let _ = writeln!(s, "mean_deviation = {mean:e}");
            let _ = writeln!(s, "verify_tolerance = {:e}", self.verify_tolerance);
            if let Some(b) = self.bound {
                let _ = writeln!(s, "deviation_bound = {b:e}");
            }
            for c in r.checks.iter().filter(|c| !c.passed) {
                let _ = writeln!(
                    s,
                    "failed audit: height {} t {}..{} deviation {:?}",
                    c.height, c.t_start, c.t_end, c.deviation
                );
            }
        } else {
            let _ = writeln!(s, "computation = not replayable (stochastic)");
        }
        let _ = writeln!(
            s,
            "result = {}",
            if self.passed() { "PASS" } else { "FAIL" }
        );
        s
    }
}

fn chain_mode(cfg: &RunConfig, requested: Option<ProtocolMode>) -> ProtocolMode {
    requested.unwrap_or_else(|| {
        if cfg.modes.contains(&ProtocolMode::Batch) || cfg.modes.is_empty() {
            ProtocolMode::Batch
        } else {
            cfg.modes[0]
        }
    })
}

/// Executes one configured run. `mode` restricts it to a single protocol mode; `seed`
/// overrides the configured seed.
pub fn execute_run(
    cfg: &RunConfig,
    mode: Option<ProtocolMode>,
    seed: Option<u64>,
) -> Result<RunArtifacts> {
    let mut cfg = cfg.clone();
    if let Some(s) = seed {
        cfg.seed = s;
    }
    let modes = match mode {
        Some(m) => vec![m],
        None if cfg.modes.is_empty() => ProtocolMode::ALL.to_vec(),
        None => cfg.modes.clone(),
    };
    let kept = chain_mode(&cfg, mode);
    let res = cfg.resolve()?;
    let d = res.op.dimension();
    let mut costs = Vec::new();
    let mut precision = Vec::new();
    let mut chain = None;
    let mut accuracy = None;
    let mut halted = Vec::new();
    for &m in &modes {
        let tol = res.tolerance_scale();
        if res.op.is_stochastic() {
            let run = run_validated(&res, m)?;
            costs.push(CostRow::from_costs(
                m,
                res.scenario,
                tol,
                &run.costs,
                d,
                res.randomized.endorsers,
            ));
            if m == kept {
                accuracy = run.accuracy;
                chain = Some(run.chain);
            }
        } else {
            let out = run_session(&res.op, &res.x0, res.iterations, m, &res.session)?;
            costs.push(CostRow::from_costs(
                m,
                res.scenario,
                tol,
                &out.costs,
                d,
                res.session.endorsers,
            ));
            if let Some(h) = out.halted_at {
                halted.push((m, h));
            }
            if m == kept {
                chain = Some(out.chain);
            }
        }
    }
    let chain = chain.unwrap_or_default();
    if let (Some(acc), Some(model)) = (accuracy, res.op.classifier_model()) {
        precision.push(PrecisionRow {
            series: "validated".into(),
            batch_size: model.config.batch_size,
            tolerance: Some(res.tolerance_scale()),
            accuracy: acc,
            seeds: 1,
        });
        let w = vanilla_run(&res.op, &res.x0, res.iterations, res.seed)?;
        precision.push(PrecisionRow {
            series: "vanilla".into(),
            batch_size: model.config.batch_size,
            tolerance: None,
            accuracy: model.test_accuracy(w.as_slice()),
            seeds: 1,
        });
    }
    let verification = if res.op.is_stochastic() {
        None
    } else {
        let q = res.validation.quantizer(d)?;
        Some(verify_computation(
            &chain,
            &res.op,
            &q,
            res.validation.verify_tolerance,
        )?)
    };
    let summary = run_summary(
        &cfg,
        &res,
        kept,
        &chain,
        verification.as_ref(),
        accuracy,
        &halted,
    );
    Ok(RunArtifacts {
        costs,
        precision,
        chain_mode: kept,
        chain,
        verification,
        summary,
    })
}

fn schedule_text(s: &ToleranceSchedule) -> String {
    match s {
        ToleranceSchedule::Constant(v) => format!("constant {v}"),
        ToleranceSchedule::Logarithmic { max } => format!("{max} / ln(t + 1), t >= 1"),
    }
}

fn config_lines(s: &mut String, cfg: &RunConfig, res: &ResolvedRun) {
    let v = &res.validation;
    let _ = writeln!(s, "scenario = {}", res.scenario);
    let _ = writeln!(s, "iterations = {}", res.iterations);
    let _ = writeln!(s, "seed = {}", res.seed);
    let _ = writeln!(s, "dimension = {}", res.op.dimension());
    let _ = writeln!(s, "lipschitz = {:e}", v.lipschitz);
    let _ = writeln!(s, "tolerance = {}", schedule_text(&v.tolerance));
    let _ = writeln!(s, "log_base = e");
    let _ = writeln!(s, "verify_tolerance = {:e}", v.verify_tolerance);
    let _ = writeln!(s, "max_error = {:e}", v.max_error);
    let _ = writeln!(s, "quant_radius = {}", v.quant_radius);
    let _ = writeln!(s, "frame_cap = {}", v.frame_cap);
    let _ = writeln!(s, "period = {}", res.session.period);
    if res.op.is_stochastic() {
        let _ = writeln!(s, "endorsers = {}", res.randomized.endorsers);
        let _ = writeln!(s, "margin = {:e}", res.randomized.margin);
        let _ = writeln!(s, "max_retries = {}", res.max_retries);
    } else {
        let _ = writeln!(s, "endorsers = {}", res.session.endorsers);
        let _ = writeln!(s, "pool = {}", res.session.pool);
    }
    if let ComputationConfig::Classifier { model } = &cfg.computation {
        let _ = writeln!(s, "train_size = {}", model.train_size);
        let _ = writeln!(s, "test_size = {}", model.test_size);
        let _ = writeln!(s, "features = {}", model.features);
        let _ = writeln!(s, "hidden = {}", model.hidden);
        let _ = writeln!(s, "batch_size = {}", model.batch_size);
        let _ = writeln!(s, "learning_rate = {}", model.learning_rate);
        let _ = writeln!(s, "separation = {}", model.separation);
        let _ = writeln!(s, "data_seed = {}", model.data_seed);
    }
}

fn run_summary(
    cfg: &RunConfig,
    res: &ResolvedRun,
    kept: ProtocolMode,
    chain: &AuditChain,
    verification: Option<&VerificationReport>,
    accuracy: Option<f64>,
    halted: &[(ProtocolMode, u64)],
) -> String {
    let mut s = String::new();
    config_lines(&mut s, cfg, res);
    let _ = writeln!(s, "chain_mode = {kept}");
    let _ = writeln!(s, "chain_blocks = {}", chain.len());
    let _ = writeln!(s, "chain_tip = {}", hash_hex(&chain.tip()));
    for (m, h) in halted {
        let _ = writeln!(s, "halted = {m} at unit {h}");
    }
    if let Some(r) = verification {
        let v = &res.validation;
        let bound = verification_bound(v.lipschitz, res.session.period, v.max_error);
        let _ = writeln!(s, "max_audit_deviation = {:e}", r.max_deviation);
        let _ = writeln!(s, "audit_deviation_bound = {bound:e}");
        let _ = writeln!(
            s,
            "verification = {}",
            if r.passed() { "PASS" } else { "FAIL" }
        );
    }
    if let Some(a) = accuracy {
        let _ = writeln!(s, "test_accuracy = {a}");
    }
    s
}

fn write_csv<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| Error::Io(e.to_string()))?;
    for r in rows {
        w.serialize(r).map_err(|e| Error::Io(e.to_string()))?;
    }
    w.flush()?;
    Ok(())
}

/// CSV headers for empty tables, which `csv` cannot infer from zero rows.
fn write_table<T: Serialize>(path: &Path, rows: &[T], header: &str) -> Result<()> {
    if rows.is_empty() {
        fs::write(path, format!("{header}\n"))?;
        Ok(())
    } else {
        write_csv(path, rows)
    }
}

const COST_HEADER: &str = "mode,scenario,tolerance,comp_ops_per_iter,comm_bits_per_dim,storage_bits_per_dim,recomputations_per_iter";
const PRECISION_HEADER: &str = "series,batch_size,tolerance,accuracy,seeds";

pub fn write_run(out: &Path, a: &RunArtifacts) -> Result<()> {
    fs::create_dir_all(out)?;
    write_table(&out.join(COSTS_FILE), &a.costs, COST_HEADER)?;
    write_table(&out.join(PRECISION_FILE), &a.precision, PRECISION_HEADER)?;
    fs::write(out.join(CHAIN_FILE), a.chain.to_bytes())?;
    fs::write(out.join(SUMMARY_FILE), &a.summary)?;
    Ok(())
}

/// Reads `chain_tip = <hex>` from a summary file.
pub fn tip_from_summary(text: &str) -> Result<Option<Hash>> {
    for line in text.lines() {
        if let Some((k, v)) = line.split_once('=') {
            if k.trim() == "chain_tip" {
                return parse_hash_hex(v.trim()).map(Some);
            }
        }
    }
    Ok(None)
}

/// Checks a chain file's integrity against `tip` and, for deterministic computations, replays
/// its audits under the configuration.
pub fn execute_verify(bytes: &[u8], cfg: &RunConfig, tip: Option<&Hash>) -> Result<VerifyOutcome> {
    let integrity = verify_chain_bytes(bytes, tip);
    let res = cfg.resolve()?;
    let v = &res.validation;
    let mut outcome = VerifyOutcome {
        integrity,
        blocks: 0,
        tip_checked: tip.is_some(),
        computation: None,
        verify_tolerance: v.verify_tolerance,
        bound: None,
    };
    if !integrity.is_ok() {
        return Ok(outcome);
    }
    let chain = AuditChain::from_bytes(bytes)?;
    outcome.blocks = chain.len();
    if !res.op.is_stochastic() {
        let q = v.quantizer(res.op.dimension())?;
        outcome.computation = Some(verify_computation(&chain, &res.op, &q, v.verify_tolerance)?);
        outcome.bound = Some(verification_bound(
            v.lipschitz,
            res.session.period,
            v.max_error,
        ));
    }
    Ok(outcome)
}

/// `verify` on files: the tip is taken from `summary.txt` next to the chain when present.
pub fn verify_files(chain_path: &Path, config_path: &Path) -> Result<VerifyOutcome> {
    let bytes = fs::read(chain_path)?;
    let cfg = RunConfig::load(config_path)?;
    let summary = chain_path
        .parent()
        .map(|p| p.join(SUMMARY_FILE))
        .filter(|p| p.exists());
    let tip = match summary {
        Some(p) => tip_from_summary(&fs::read_to_string(p)?)?,
        None => None,
    };
    execute_verify(&bytes, &cfg, tip.as_ref())
}

/// Runs a sweep in the batch mode (or the configured mode if batch is not listed).
pub fn execute_sweep(cfg: &RunConfig, tolerances: &[f64]) -> Result<SweepOutput> {
    run_sweep(cfg, tolerances, chain_mode(cfg, None))
}

pub fn write_sweep(out: &Path, cfg: &RunConfig, sweep: &SweepOutput) -> Result<()> {
    fs::create_dir_all(out)?;
    write_table(&out.join(COSTS_FILE), &sweep.costs, COST_HEADER)?;
    write_table(
        &out.join(PRECISION_FILE),
        &sweep.precision,
        PRECISION_HEADER,
    )?;
    let mut cfg = cfg.clone();
    let swept = sweep_tolerances(sweep);
    if !swept.is_empty() {
        cfg.experiment.tolerances = swept.clone();
    }
    let mut s = String::new();
    let res = cfg.resolve()?;
    config_lines(&mut s, &cfg, &res);
    let _ = writeln!(s, "sweep_mode = {}", chain_mode(&cfg, None));
    let _ = writeln!(s, "sweep_seeds = {}", cfg.experiment.seeds);
    let tols: Vec<String> = swept.iter().map(|t| t.to_string()).collect();
    let _ = writeln!(s, "sweep_tolerances = {}", tols.join(","));
    fs::write(out.join(SUMMARY_FILE), s)?;
    Ok(())
}

fn sweep_tolerances(sweep: &SweepOutput) -> Vec<f64> {
    let mut t: Vec<f64> = Vec::new();
    for r in &sweep.costs {
        if !t.contains(&r.tolerance) {
            t.push(r.tolerance);
        }
    }
    t
}

/// Parses `a,b,c`.
pub fn parse_tolerances(s: &str) -> Result<Vec<f64>> {
    s.split(',')
        .map(|p| {
            p.trim()
                .parse::<f64>()
                .map_err(|e| Error::Config(format!("tolerance `{p}`: {e}")))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    const AFFINE: &str = r#"
iterations = 60
seed = 3
scenario = "custom"
[computation]
kind = "affine"
singular_values = [0.9, 0.5, 0.3]
offset = [0.1, -0.2, 0.05]
matrix_seed = 4
initial_state = [1.0, 2.0, -1.0]
[validation]
tolerance = { constant = 0.5 }
quant_radius = 4.0
"#;

    #[test]
    fn run_then_verify_passes_and_detects_flips() {
        let cfg = RunConfig::from_toml(AFFINE).unwrap();
        let a = execute_run(&cfg, None, None).unwrap();
        assert_eq!(a.costs.len(), 3);
        assert_eq!(a.chain_mode, ProtocolMode::Batch);
        assert!(a.verification.as_ref().unwrap().passed());
        let dir = tempfile::tempdir().unwrap();
        write_run(dir.path(), &a).unwrap();
        let tip = tip_from_summary(&a.summary).unwrap().unwrap();
        assert_eq!(tip, a.chain.tip());
        let bytes = fs::read(dir.path().join(CHAIN_FILE)).unwrap();
        let ok = execute_verify(&bytes, &cfg, Some(&tip)).unwrap();
        assert!(ok.passed(), "{}", ok.render());
        let mut bad = bytes.clone();
        let last = bad.len() - 1;
        bad[last] ^= 1;
        let fail = execute_verify(&bad, &cfg, Some(&tip)).unwrap();
        assert!(!fail.passed());
        assert!(fail.render().contains("FAIL at height"));
    }

    #[test]
    fn empty_chain_verifies() {
        let cfg = RunConfig::from_toml(AFFINE).unwrap();
        let out = execute_verify(&[], &cfg, None).unwrap();
        assert!(out.passed());
        assert_eq!(out.blocks, 0);
    }

    #[test]
    fn tolerance_lists() {
        assert_eq!(parse_tolerances("0.1, 1,10").unwrap(), vec![0.1, 1.0, 10.0]);
        assert!(parse_tolerances("1,x").is_err());
    }
}
