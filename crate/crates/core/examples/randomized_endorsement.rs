// Randomized validation of a noisy computation: size the endorser set for a target
// false-rejection rate and compare with a Monte-Carlo estimate.

use trustframe::compute::{
    AtomicOpSpec, Computation, RandomDraw, SeedPath, StateVector, CLIENT_AGENT,
};
use trustframe::protocol::{
    deviation_probability_bound, randomized_endorse, required_endorsers, RandomizedConfig,
};

pub struct RandomizedReport {
    pub endorsers: usize,
    pub bound: f64,
    pub trials: u64,
    pub rejections: u64,
}

impl RandomizedReport {
    pub fn rate(&self) -> f64 {
        self.rejections as f64 / self.trials as f64
    }
}

pub fn run_example() -> trustframe::Result<RandomizedReport> {
    let (d, sigma, margin, rho) = (4, 0.5, 2.0, 0.5);
    let op = AtomicOpSpec::gaussian_drift(d, sigma)?;
    let lambda = sigma * sigma;
    let m = required_endorsers(rho, d, margin, 1.0, 0.0, lambda)?;
    let bound = deviation_probability_bound(d, lambda, margin, 1.0, 0.0, m)?;
    let rcfg = RandomizedConfig {
        endorsers: m,
        outlier_prob: rho,
        margin,
        lambda: Some(lambda),
    };
    let prev = StateVector::zeros(d);
    let trials = 2000u64;
    let mut rejections = 0;
    for t in 1..=trials {
        let theta: Option<RandomDraw> = op.draw(SeedPath::new(3, CLIENT_AGENT, t));
        let report = StateVector::new(op.apply(prev.as_slice(), theta.as_ref()))?;
        let v = randomized_endorse(&op, &report, &prev, t, &rcfg, 3, 0)?;
        if !v.valid {
            rejections += 1;
        }
    }
    Ok(RandomizedReport {
        endorsers: m,
        bound,
        trials,
        rejections,
    })
}

fn main() -> trustframe::Result<()> {
    let r = run_example()?;
    println!(
        "{} endorsers give a rejection bound of {:.4}",
        r.endorsers, r.bound
    );
    println!(
        "honest rejections: {} of {} ({:.4})",
        r.rejections,
        r.trials,
        r.rate()
    );
    Ok(())
}
