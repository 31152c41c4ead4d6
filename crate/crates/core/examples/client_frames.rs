// Run a client over an expanding affine map and inspect the frames it produces.

use trustframe::compute::{AtomicOpSpec, Computation, Matrix, StateVector};
use trustframe::protocol::{
    client_run_frames, frame_size_lower_bound, FrameClosure, ValidationConfig,
};

pub struct FrameReport {
    pub frames: usize,
    pub closed_by_checkpoint: usize,
    /// `(length, lower bound)` for every frame closed by the checkpoint rule.
    pub lengths: Vec<(usize, f64)>,
    pub worst_report_error: f64,
}

pub fn run_example() -> trustframe::Result<FrameReport> {
    let lipschitz = 1.2;
    let op = AtomicOpSpec::affine(Matrix::diagonal(&[1.2, 1.1, 0.9, 0.5]), vec![0.0; 4])?
        .with_lipschitz(lipschitz);
    let cfg = ValidationConfig {
        quant_radius: 2.0,
        frame_cap: 100,
        ..ValidationConfig::for_tolerance(0.2, lipschitz)
    };
    let x0 = StateVector::new(vec![1e-3, -2e-3, 3e-3, 1e-3])?;
    let run = client_run_frames(&op, &x0, 56, &cfg, 1)?;
    let mut lengths = Vec::new();
    for ((frame, closure), first) in run.frames.iter().zip(&run.closures).zip(run.first_steps()) {
        if let (FrameClosure::Checkpoint, Some(delta)) = (closure, first) {
            let bound = frame_size_lower_bound(
                op.lipschitz().unwrap_or(lipschitz),
                cfg.quant_radius,
                cfg.max_error,
                delta,
                cfg.frame_cap,
            );
            lengths.push((frame.len(), bound));
        }
    }
    let worst_report_error = run
        .reported
        .iter()
        .zip(&run.true_states)
        .map(|(r, x)| r.distance(x))
        .fold(0.0, f64::max);
    Ok(FrameReport {
        frames: run.frames.len(),
        closed_by_checkpoint: lengths.len(),
        lengths,
        worst_report_error,
    })
}

fn main() -> trustframe::Result<()> {
    let r = run_example()?;
    println!(
        "{} frames, {} closed by a checkpoint",
        r.frames, r.closed_by_checkpoint
    );
    for (len, bound) in &r.lengths {
        let ok = *len as f64 >= *bound;
        println!(
            "  length {len:>3}  lower bound {bound:>7.2}  {}",
            if ok { "ok" } else { "VIOLATED" }
        );
    }
    println!("worst reported-state error {:.4}", r.worst_report_error);
    Ok(())
}
