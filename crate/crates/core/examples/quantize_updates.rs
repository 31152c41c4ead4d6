// Quantize random state updates on the cubic lattice and refine them level by level.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use trustframe::codec::{LatticeQuantizer, UpdateRef};
use trustframe::compute::StateVector;

pub struct QuantizeReport {
    pub bits_per_update: u64,
    pub worst_error: f64,
    /// Worst error after each refinement level, starting at level 0.
    pub worst_by_level: Vec<f64>,
    pub max_error: f64,
}

pub fn run_example() -> trustframe::Result<QuantizeReport> {
    let (d, eps, radius) = (8, 0.05, 1.0);
    let q = LatticeQuantizer::new(d, eps, radius)?;
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let levels = 4;
    let mut worst_by_level = vec![0.0f64; levels + 1];
    for _ in 0..2000 {
        let raw: Vec<f64> = (0..d).map(|_| rng.random_range(-0.3..0.3)).collect();
        let delta = StateVector::new(raw)?;
        let mut u = q.quantize(&delta)?;
        for (level, worst) in worst_by_level.iter_mut().enumerate() {
            let err = q.dequantize(&u)?.distance(&delta);
            *worst = worst.max(err);
            if level < levels {
                let target = UpdateRef {
                    frame_index: 0,
                    offset: 0,
                };
                let chunk = q.refine(&delta, &u, target)?;
                u = q.apply_refinement(&u, &chunk)?;
            }
        }
    }
    Ok(QuantizeReport {
        bits_per_update: q.update_bit_cost(),
        worst_error: worst_by_level[0],
        worst_by_level,
        max_error: eps,
    })
}

fn main() -> trustframe::Result<()> {
    let r = run_example()?;
    println!("update cost: {} bits", r.bits_per_update);
    for (level, worst) in r.worst_by_level.iter().enumerate() {
        let bound = r.max_error / 2f64.powi(level as i32);
        println!("level {level}: worst error {worst:.5} (bound {bound:.5})");
    }
    Ok(())
}
