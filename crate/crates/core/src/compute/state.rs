use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

/// A point in R^d carried through the iterative computation. Entries are always finite.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct StateVector(Vec<f64>);

impl StateVector {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if let Some(index) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite { index });
        }
        Ok(StateVector(values))
    }

    pub fn zeros(d: usize) -> Self {
        StateVector(vec![0.0; d])
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }

    pub fn norm(&self) -> f64 {
        norm(&self.0)
    }

    /// Euclidean distance; panics on dimension mismatch.
    pub fn distance(&self, other: &StateVector) -> f64 {
        assert_eq!(
            self.dim(),
            other.dim(),
            "distance between mismatched states"
        );
        self.0
            .iter()
            .zip(&other.0)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt()
    }

    pub fn sub(&self, other: &StateVector) -> Result<StateVector> {
        self.check_dim(other)?;
        StateVector::new(self.0.iter().zip(&other.0).map(|(a, b)| a - b).collect())
    }

    pub fn add(&self, other: &StateVector) -> Result<StateVector> {
        self.check_dim(other)?;
        StateVector::new(self.0.iter().zip(&other.0).map(|(a, b)| a + b).collect())
    }

    pub fn check_dim(&self, other: &StateVector) -> Result<()> {
        if self.dim() != other.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                actual: other.dim(),
            });
        }
        Ok(())
    }

    /// Coordinate-wise mean of equally sized states.
    pub fn mean(states: &[StateVector]) -> Result<StateVector> {
        let first = states
            .first()
            .ok_or_else(|| Error::InvalidParameter("mean of no states".into()))?;
        let mut acc = vec![0.0; first.dim()];
        for s in states {
            first.check_dim(s)?;
            acc.iter_mut().zip(&s.0).for_each(|(a, v)| *a += v);
        }
        let m = states.len() as f64;
        StateVector::new(acc.into_iter().map(|a| a / m).collect())
    }
}

impl TryFrom<Vec<f64>> for StateVector {
    type Error = Error;
    fn try_from(v: Vec<f64>) -> Result<Self> {
        StateVector::new(v)
    }
}

impl From<StateVector> for Vec<f64> {
    fn from(s: StateVector) -> Self {
        s.0
    }
}

pub(crate) fn norm(v: &[f64]) -> f64 {
    v.iter().map(|a| a * a).sum::<f64>().sqrt()
}

/// Agent id of the computing client. Endorsers use ids `1..`.
pub const CLIENT_AGENT: u64 = 0;

/// Coordinates of one external random draw: run seed, drawing agent, iteration and retry attempt.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct SeedPath {
    pub run_seed: u64,
    pub agent: u64,
    pub t: u64,
    pub attempt: u64,
}

impl SeedPath {
    pub fn new(run_seed: u64, agent: u64, t: u64) -> Self {
        SeedPath {
            run_seed,
            agent,
            t,
            attempt: 0,
        }
    }

    pub fn with_attempt(mut self, attempt: u64) -> Self {
        self.attempt = attempt;
        self
    }

    /// Counter-based generator: the key is a hash of the full path, so any two paths are independent
    /// and the same path always reproduces the same stream.
    pub fn rng(&self) -> ChaCha8Rng {
        let mut h = Sha256::new();
        h.update(b"trustframe/seed-path/v1");
        h.update(self.run_seed.to_le_bytes());
        h.update(self.agent.to_le_bytes());
        h.update(self.t.to_le_bytes());
        h.update(self.attempt.to_le_bytes());
        let digest = h.finalize();
        let mut key = [0u8; 32];
        key.copy_from_slice(&digest);
        ChaCha8Rng::from_seed(key)
    }
}

/// External randomness `θ` for one step, with the path it was derived from.
#[derive(Debug, Clone, PartialEq)]
pub struct RandomDraw {
    pub values: Vec<f64>,
    pub seed_path: SeedPath,
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn rejects_non_finite_entries() {
        assert_eq!(
            StateVector::new(vec![1.0, f64::NAN]),
            Err(Error::NonFinite { index: 1 })
        );
        assert!(StateVector::new(vec![f64::INFINITY]).is_err());
    }

    #[test]
    fn seed_paths_reproduce_and_separate() {
        let p = SeedPath::new(7, 2, 30);
        let a: u64 = p.rng().random();
        let b: u64 = p.rng().random();
        assert_eq!(a, b);
        let c: u64 = SeedPath::new(7, 3, 30).rng().random();
        let d: u64 = p.with_attempt(1).rng().random();
        assert_ne!(a, c);
        assert_ne!(a, d);
    }

    #[test]
    fn mean_of_states() {
        let m = StateVector::mean(&[
            StateVector::new(vec![1.0, 2.0]).unwrap(),
            StateVector::new(vec![3.0, 6.0]).unwrap(),
        ])
        .unwrap();
        assert_eq!(m.as_slice(), &[2.0, 4.0]);
    }
}
