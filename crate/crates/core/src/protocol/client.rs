//! The client: runs the computation and compresses its trajectory into frames.

use super::config::ValidationConfig;
use crate::codec::{CheckpointDictionary, Frame, LatticeQuantizer, Reconstructor};
use crate::compute::{step, Computation, SeedPath, StateVector, CLIENT_AGENT};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FrameClosure {
    /// The next update exceeded the quantizer range.
    Checkpoint,
    /// The frame reached `M̄` updates.
    Cap,
    /// The run ended.
    EndOfRun,
}

#[derive(Debug, Clone)]
pub struct ClientRun {
    pub frames: Vec<Frame>,
    pub closures: Vec<FrameClosure>,
    /// `X̃_0 … X̃_T`.
    pub reported: Vec<StateVector>,
    /// `X_0 … X_T`.
    pub true_states: Vec<StateVector>,
    /// Unquantized `ΔX_t` for states sent as updates, `None` for checkpoints.
    pub deltas: Vec<Option<StateVector>>,
    pub dictionary: CheckpointDictionary,
    pub quantizer: LatticeQuantizer,
    pub evaluations: u64,
}

impl ClientRun {
    /// `δ_n = ‖X_{T_n+1} − X_{T_n}‖` for each frame, when the run reaches `T_n + 1`.
    pub fn first_steps(&self) -> Vec<Option<f64>> {
        self.frames
            .iter()
            .map(|f| {
                let t = f.checkpoint_time() as usize;
                self.true_states
                    .get(t + 1)
                    .map(|next| next.distance(&self.true_states[t]))
            })
            .collect()
    }

    /// Number of codec operations spent: one quantization per update, one dictionary lookup per
    /// checkpoint.
    pub fn codec_ops(&self) -> u64 {
        self.frames.iter().map(|f| f.len() as u64 + 1).sum()
    }
}

/// Runs `T` iterations from `x0`, opening a frame at `x0` and whenever an update leaves the
/// quantizer range or a frame is full.
pub fn client_run_frames<C: Computation + ?Sized>(
    op: &C,
    x0: &StateVector,
    iterations: u64,
    cfg: &ValidationConfig,
    run_seed: u64,
) -> Result<ClientRun> {
    let q = cfg.quantizer(op.dimension())?;
    let mut dictionary = CheckpointDictionary::new(q, cfg.state_bound)?;
    let mut run = ClientRun {
        frames: Vec::new(),
        closures: Vec::new(),
        reported: vec![x0.clone()],
        true_states: vec![x0.clone()],
        deltas: vec![None],
        dictionary: dictionary.clone(),
        quantizer: q,
        evaluations: 0,
    };
    if iterations == 0 {
        return Ok(run);
    }
    x0.check_dim(&StateVector::zeros(op.dimension()))?;

    let code = dictionary.encode(x0)?;
    let mut current = dictionary.resolve(&code)?;
    run.reported[0] = current.clone();
    let mut frame = Frame::new(0, code, 0);
    let mut recon = Reconstructor::new(current.clone());
    let mut x = x0.clone();

    for t in 0..iterations {
        let next_t = t + 1;
        let theta = op.draw(SeedPath::new(run_seed, CLIENT_AGENT, next_t));
        let next = step(op, &x, theta.as_ref()).map_err(|e| match e {
            Error::NonFinite { .. } => Error::Diverged { t: next_t },
            other => other,
        })?;
        run.evaluations += 1;
        let delta = next
            .sub(&current)
            .map_err(|_| Error::Diverged { t: next_t })?;
        let too_big = delta.norm() > q.clamp_radius();
        if too_big || frame.len() >= cfg.frame_cap {
            frame.seal();
            run.frames.push(frame);
            run.closures.push(if too_big {
                FrameClosure::Checkpoint
            } else {
                FrameClosure::Cap
            });
            let code = dictionary.encode(&next)?;
            current = dictionary.resolve(&code)?;
            frame = Frame::new(run.frames.len() as u64, code, next_t);
            recon = Reconstructor::new(current.clone());
            run.deltas.push(None);
        } else {
            let u = q.quantize(&delta)?;
            current = recon.advance(&q, &u)?;
            frame.push_update(u)?;
            run.deltas.push(Some(delta));
        }
        run.reported.push(current.clone());
        run.true_states.push(next.clone());
        x = next;
    }
    frame.seal();
    run.frames.push(frame);
    run.closures.push(FrameClosure::EndOfRun);
    run.dictionary = dictionary;
    Ok(run)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::compute::{AtomicOpSpec, Matrix};

    fn cfg(quant_radius: f64, max_error: f64, frame_cap: usize) -> ValidationConfig {
        ValidationConfig {
            quant_radius,
            max_error,
            frame_cap,
            strict_soundness: false,
            ..ValidationConfig::for_tolerance(1.0, 1.0)
        }
    }

    #[test]
    fn contraction_fits_in_one_frame() {
        let op = AtomicOpSpec::affine(Matrix::scaled_identity(2, 0.5), vec![0.0, 0.0]).unwrap();
        let x0 = StateVector::new(vec![1.0, 1.0]).unwrap();
        let run = client_run_frames(&op, &x0, 50, &cfg(10.0, 0.01, 100), 0).unwrap();
        assert_eq!(run.frames.len(), 1);
        assert_eq!(run.frames[0].len(), 50);
        for (a, b) in run.reported.iter().zip(&run.true_states) {
            assert!(a.distance(b) <= 0.01);
        }
    }

    #[test]
    fn empty_run_has_no_frames() {
        let op = AtomicOpSpec::affine(Matrix::identity(2), vec![0.0, 0.0]).unwrap();
        let run = client_run_frames(&op, &StateVector::zeros(2), 0, &cfg(1.0, 0.1, 5), 0).unwrap();
        assert!(run.frames.is_empty());
    }

    #[test]
    fn expansion_first_frame_meets_lower_bound() {
        let op = AtomicOpSpec::affine(Matrix::scaled_identity(1, 1.1), vec![0.0]).unwrap();
        // first step 1.1 x0 − x0 = 0.1
        let x0 = StateVector::new(vec![1.0]).unwrap();
        let run = client_run_frames(&op, &x0, 200, &cfg(1.0, 0.01, 1000), 0).unwrap();
        assert!(run.frames[0].len() >= 24, "{}", run.frames[0].len());
        assert_eq!(run.closures[0], FrameClosure::Checkpoint);
    }

    #[test]
    fn frames_respect_cap_and_tile_the_run() {
        let op =
            AtomicOpSpec::affine(Matrix::scaled_identity(3, 0.9), vec![0.1, 0.0, -0.1]).unwrap();
        let run =
            client_run_frames(&op, &StateVector::zeros(3), 37, &cfg(1.0, 0.05, 5), 1).unwrap();
        let mut t = 0;
        for f in &run.frames {
            assert!(f.len() <= 5);
            assert_eq!(f.checkpoint_time(), t);
            t = f.end_time() + 1;
        }
        assert_eq!(t, 38);
    }

    #[test]
    fn divergence_reports_iteration() {
        let op = AtomicOpSpec::affine(Matrix::scaled_identity(1, 1e200), vec![0.0]).unwrap();
        let x0 = StateVector::new(vec![1.0]).unwrap();
        let err = client_run_frames(&op, &x0, 10, &cfg(1.0, 0.1, 5), 0).unwrap_err();
        assert_eq!(err, Error::Diverged { t: 2 });
    }
}
