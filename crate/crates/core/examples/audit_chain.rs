// Store subsampled audits of a client's frames in a hash chain, replay them, and catch a
// flipped bit in the serialized file.

use trustframe::compute::{AtomicOpSpec, StateVector};
use trustframe::ledger::{
    choose_subsample_period, hash_hex, verify_chain_bytes, verify_computation, AuditChain,
    IntegrityReport, Payload,
};
use trustframe::protocol::{client_run_frames, verification_bound, ValidationConfig};

pub struct ChainReport {
    pub period: u64,
    pub blocks: usize,
    pub tip: String,
    pub max_deviation: f64,
    pub bound: f64,
    pub verified: bool,
    pub tampered: IntegrityReport,
}

pub fn run_example() -> trustframe::Result<ChainReport> {
    let lipschitz = 0.95;
    let op = AtomicOpSpec::affine_with_spectrum(&[0.95, 0.8, 0.7, 0.4, 0.2], vec![0.3; 5], 21)?;
    let cfg = ValidationConfig {
        frame_cap: 25,
        quant_radius: 2.0,
        max_error: 0.01,
        ..ValidationConfig::for_tolerance(0.5, lipschitz)
    };
    let x0 = StateVector::new(vec![3.0, -2.0, 1.0, 0.5, -1.5])?;
    let run = client_run_frames(&op, &x0, 200, &cfg, 0)?;

    let k = choose_subsample_period(lipschitz, cfg.max_error, cfg.verify_tolerance, 25)?;
    let mut chain = AuditChain::new();
    for frame in &run.frames {
        let payload = Payload::from_frame(frame, k)?;
        chain.append(frame.index(), payload.encode())?;
    }
    let report = verify_computation(&chain, &op, &run.quantizer, cfg.verify_tolerance)?;

    let mut bytes = chain.to_bytes();
    let middle = bytes.len() / 2;
    bytes[middle] ^= 0x10;
    let tampered = verify_chain_bytes(&bytes, Some(&chain.tip()));

    Ok(ChainReport {
        period: k,
        blocks: chain.len(),
        tip: hash_hex(&chain.tip()),
        max_deviation: report.max_deviation,
        bound: verification_bound(lipschitz, k, cfg.max_error),
        verified: report.passed(),
        tampered,
    })
}

fn main() -> trustframe::Result<()> {
    let r = run_example()?;
    println!(
        "period {} over {} blocks, tip {}",
        r.period, r.blocks, r.tip
    );
    println!(
        "replay: max deviation {:.4} (bound {:.4}) -> {}",
        r.max_deviation,
        r.bound,
        if r.verified { "PASS" } else { "FAIL" }
    );
    println!("after flipping one bit: {:?}", r.tampered);
    Ok(())
}
