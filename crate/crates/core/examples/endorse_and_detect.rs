// Endorse an honest client frame by frame, then plant an error just above the detection
// threshold and watch validation stop at it.

use trustframe::compute::{AtomicOpSpec, StateVector};
use trustframe::protocol::{
    client_run_frames, detection_threshold, endorse_frame, validate_trajectory, ValidationConfig,
    Verdict,
};

pub struct DetectReport {
    pub frames_endorsed: usize,
    pub worst_honest_deviation: f64,
    pub injected_at: usize,
    pub injected_norm: f64,
    pub verdict: Verdict,
}

pub fn run_example() -> trustframe::Result<DetectReport> {
    let (tolerance, lipschitz) = (0.3, 0.9);
    let op = AtomicOpSpec::affine_with_spectrum(&[0.9, 0.6, 0.3], vec![0.5, -0.2, 0.1], 9)?;
    let cfg = ValidationConfig {
        frame_cap: 10,
        quant_radius: 3.0,
        ..ValidationConfig::for_tolerance(tolerance, lipschitz)
    };
    let x0 = StateVector::new(vec![4.0, -3.0, 2.0])?;
    let run = client_run_frames(&op, &x0, 50, &cfg, 0)?;

    let mut worst = 0.0f64;
    for frame in &run.frames {
        let checkpoint = run.dictionary.resolve(frame.checkpoint())?;
        let e = endorse_frame(frame, &checkpoint, &op, &run.quantizer, &cfg, 1)?;
        assert!(
            e.verdict.is_valid(),
            "honest frame {} rejected",
            frame.index()
        );
        worst = e.deviations.iter().copied().fold(worst, f64::max);
    }

    // Push one reported state off its trajectory by Δ_val + Lε plus a hair.
    let injected_at = 23;
    let norm = detection_threshold(tolerance, lipschitz, cfg.max_error) + 1e-6;
    let mut tampered = run.reported.clone();
    let mut shifted = tampered[injected_at + 1].as_slice().to_vec();
    shifted[0] += norm;
    tampered[injected_at + 1] = StateVector::new(shifted)?;
    let check = validate_trajectory(&op, &tampered[0], &tampered[1..], 0, &cfg.tolerance)?;

    Ok(DetectReport {
        frames_endorsed: run.frames.len(),
        worst_honest_deviation: worst,
        injected_at,
        injected_norm: norm,
        verdict: check.verdict,
    })
}

fn main() -> trustframe::Result<()> {
    let r = run_example()?;
    println!(
        "{} honest frames endorsed, worst deviation {:.4}",
        r.frames_endorsed, r.worst_honest_deviation
    );
    println!(
        "error of norm {:.4} planted at offset {}: {:?}",
        r.injected_norm, r.injected_at, r.verdict
    );
    Ok(())
}
