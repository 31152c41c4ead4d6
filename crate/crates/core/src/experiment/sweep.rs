//! Tolerance sweeps over the study scenarios, averaged over seeds.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::{ComputationConfig, RunConfig, Scenario};
use super::validated::{run_validated, vanilla_run};
use crate::compute::{AtomicOpSpec, Computation};
use crate::error::{Error, Result};
use crate::netsim::CostLedger;
use crate::protocol::ProtocolMode;

/// One line of `costs.csv`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CostRow {
    pub mode: ProtocolMode,
    pub scenario: Scenario,
    pub tolerance: f64,
    pub comp_ops_per_iter: f64,
    pub comm_bits_per_dim: f64,
    pub storage_bits_per_dim: f64,
    pub recomputations_per_iter: f64,
}

impl CostRow {
    /// Per-iteration and per-dimension payload rates from pooled counters; fixed per-message
    /// metadata is left out. `copies` is the number of endorsers each report goes to; client
    /// upload is counted once per report.
    pub fn from_costs(
        mode: ProtocolMode,
        scenario: Scenario,
        tolerance: f64,
        costs: &CostLedger,
        dimension: usize,
        copies: usize,
    ) -> Self {
        let iters = costs.iterations().max(1) as f64;
        let per_dim = iters * dimension.max(1) as f64;
        CostRow {
            mode,
            scenario,
            tolerance,
            comp_ops_per_iter: costs.comp_ops() as f64 / iters,
            comm_bits_per_dim: costs.report_bits() as f64 / copies.max(1) as f64 / per_dim,
            storage_bits_per_dim: costs.storage_bits() as f64 / per_dim,
            recomputations_per_iter: costs.recomputations() as f64 / iters,
        }
    }
}

/// One line of `precision.csv`. Vanilla baselines have no tolerance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrecisionRow {
    pub series: String,
    pub batch_size: usize,
    pub tolerance: Option<f64>,
    pub accuracy: f64,
    pub seeds: u64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct SweepOutput {
    pub costs: Vec<CostRow>,
    pub precision: Vec<PrecisionRow>,
}

impl SweepOutput {
    pub fn cost(&self, scenario: Scenario, tolerance: f64) -> Option<&CostRow> {
        self.costs
            .iter()
            .find(|r| r.scenario == scenario && r.tolerance == tolerance)
    }

    pub fn validated_accuracy(&self, tolerance: f64) -> Option<f64> {
        self.precision
            .iter()
            .find(|r| r.series == "validated" && r.tolerance == Some(tolerance))
            .map(|r| r.accuracy)
    }

    pub fn vanilla_accuracy(&self, batch_size: usize) -> Option<f64> {
        self.precision
            .iter()
            .find(|r| r.series == "vanilla" && r.batch_size == batch_size)
            .map(|r| r.accuracy)
    }
}

/// Scenarios a sweep covers: the three study cases, or just the custom one.
pub fn sweep_scenarios(cfg: &RunConfig) -> Vec<Scenario> {
    match cfg.scenario {
        Scenario::Custom => vec![Scenario::Custom],
        _ => Scenario::STUDY.to_vec(),
    }
}

fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len().max(1) as f64
}

/// Runs every scenario at every tolerance for `experiment.seeds` consecutive seeds starting at
/// `seed`. Configurations are resolved, and rejected, before any run starts.
pub fn run_sweep(cfg: &RunConfig, tolerances: &[f64], mode: ProtocolMode) -> Result<SweepOutput> {
    if tolerances.is_empty() {
        return Err(Error::Config("no tolerances to sweep".into()));
    }
    let mut cfg = cfg.clone();
    cfg.experiment.tolerances = tolerances.to_vec();
    let op = cfg.build_op()?;
    let seeds: Vec<u64> = (0..cfg.experiment.seeds.max(1))
        .map(|i| cfg.seed + i)
        .collect();
    let scenarios = sweep_scenarios(&cfg);
    let mut points = Vec::new();
    for &scenario in &scenarios {
        for &tol in tolerances {
            for &seed in &seeds {
                points.push(cfg.resolve_with(&op, scenario, tol, seed)?);
            }
        }
    }
    let results: Vec<(CostLedger, Option<f64>)> = points
        .par_iter()
        .map(|r| run_validated(r, mode).map(|run| (run.costs, run.accuracy)))
        .collect::<Result<_>>()?;

    let mut out = SweepOutput::default();
    let d = op.dimension();
    let copies = cfg.randomized.endorsers;
    let mut chunks = results.chunks(seeds.len());
    for &scenario in &scenarios {
        for &tol in tolerances {
            let chunk = chunks.next().expect("one chunk per point");
            let mut pooled = CostLedger::new();
            chunk.iter().for_each(|(c, _)| pooled.absorb(c));
            out.costs
                .push(CostRow::from_costs(mode, scenario, tol, &pooled, d, copies));
            let acc: Vec<f64> = chunk.iter().filter_map(|(_, a)| *a).collect();
            if scenario == scenarios[0] && !acc.is_empty() {
                out.precision.push(PrecisionRow {
                    series: "validated".into(),
                    batch_size: op.classifier_model().map_or(0, |c| c.config.batch_size),
                    tolerance: Some(tol),
                    accuracy: mean(&acc),
                    seeds: acc.len() as u64,
                });
            }
        }
    }
    if let ComputationConfig::Classifier { model } = &cfg.computation {
        for &batch in &cfg.experiment.baseline_batches {
            let mut m = *model;
            m.batch_size = batch;
            let op = AtomicOpSpec::classifier(m);
            let model = op.classifier_model().expect("classifier");
            let acc: Vec<f64> = seeds
                .par_iter()
                .map(|&seed| {
                    let x0 = cfg.computation.initial_state(&op, seed)?;
                    let w = vanilla_run(&op, &x0, cfg.iterations, seed)?;
                    Ok(model.test_accuracy(w.as_slice()))
                })
                .collect::<Result<_>>()?;
            out.precision.push(PrecisionRow {
                series: "vanilla".into(),
                batch_size: batch,
                tolerance: None,
                accuracy: mean(&acc),
                seeds: acc.len() as u64,
            });
        }
    }
    Ok(out)
}
