// Run the same computation through the transaction, streaming and batch protocols and compare
// measured costs with the closed-form model.

use trustframe::compute::{AtomicOpSpec, StateVector};
use trustframe::netsim::{measured_vs_predicted, run_session, CostComparison, SessionConfig};
use trustframe::protocol::{ProtocolMode, ValidationConfig};

pub struct ModeCosts {
    pub mode: ProtocolMode,
    pub comp_ops: u64,
    /// Client upload per endorser copy, metadata included.
    pub comm_bits: f64,
    pub storage_bits: u64,
    pub comparison: CostComparison,
    pub committed: bool,
}

pub fn run_example() -> trustframe::Result<Vec<ModeCosts>> {
    let d = 12;
    let singular: Vec<f64> = (0..d).map(|i| 0.9 - 0.05 * i as f64).collect();
    let offset: Vec<f64> = (0..d)
        .map(|i| if i % 2 == 0 { 0.2 } else { -0.2 })
        .collect();
    let op = AtomicOpSpec::affine_with_spectrum(&singular, offset, 5)?;
    let validation = ValidationConfig {
        frame_cap: 50,
        quant_radius: 4.0,
        max_error: 0.01,
        ..ValidationConfig::for_tolerance(0.3, 0.9)
    };
    let cfg = SessionConfig {
        period: 4,
        ..SessionConfig::new(validation)
    };
    let x0 = StateVector::new((0..d).map(|i| (i as f64 - 6.0) * 0.5).collect())?;
    let mut out = Vec::new();
    for mode in ProtocolMode::ALL {
        let s = run_session(&op, &x0, 300, mode, &cfg)?;
        let params = s.mode_params(&cfg);
        let copies = params.endorsers;
        out.push(ModeCosts {
            mode,
            comp_ops: s.costs.comp_ops(),
            comm_bits: (s.costs.report_bits() + s.costs.report_meta_bits()) as f64 / copies,
            storage_bits: s.costs.storage_bits() + s.costs.storage_meta_bits(),
            comparison: measured_vs_predicted(&s.costs, &params),
            committed: s.completed(),
        });
    }
    Ok(out)
}

fn main() -> trustframe::Result<()> {
    println!(
        "{:<12} {:>9} {:>12} {:>12} {:>11}",
        "mode", "comp ops", "comm bits", "storage", "comm/model"
    );
    for m in run_example()? {
        println!(
            "{:<12} {:>9} {:>12.0} {:>12} {:>11.2}",
            m.mode.name(),
            m.comp_ops,
            m.comm_bits,
            m.storage_bits,
            m.comparison.comm_ratio()
        );
    }
    Ok(())
}
