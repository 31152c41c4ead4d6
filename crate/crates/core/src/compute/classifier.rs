//! Mini-batch SGD on a small classifier over a seeded two-Gaussian dataset.
//!
//! The trained parameters are the state vector. Layout for `hidden > 0`:
//! `[W1 (hidden × features, row-major), b1 (hidden), w2 (hidden), b2]`; for `hidden == 0` the model
//! is logistic regression with layout `[w (features), b]`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ClassifierConfig {
    pub features: usize,
    pub hidden: usize,
    pub train_size: usize,
    pub test_size: usize,
    /// Distance between the two class means.
    pub separation: f64,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub data_seed: u64,
}

impl Default for ClassifierConfig {
    fn default() -> Self {
        ClassifierConfig {
            features: 10,
            hidden: 8,
            train_size: 2000,
            test_size: 500,
            separation: 2.0,
            batch_size: 10,
            learning_rate: 0.5,
            data_seed: 2024,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub features: usize,
    pub train_x: Vec<Vec<f64>>,
    pub train_y: Vec<f64>,
    pub test_x: Vec<Vec<f64>>,
    pub test_y: Vec<f64>,
}

impl Dataset {
    /// Two unit-covariance Gaussians whose means sit at `±separation/2` along the all-ones direction.
    pub fn two_gaussians(cfg: &ClassifierConfig) -> Dataset {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.data_seed);
        let p = cfg.features;
        let offset = 0.5 * cfg.separation / (p as f64).sqrt();
        let mut sample = |n: usize| {
            let mut xs = Vec::with_capacity(n);
            let mut ys = Vec::with_capacity(n);
            for _ in 0..n {
                let y = if rng.random::<bool>() { 1.0 } else { 0.0 };
                let sign = 2.0 * y - 1.0;
                let x: Vec<f64> = (0..p)
                    .map(|_| sign * offset + rng.sample::<f64, _>(StandardNormal))
                    .collect();
                xs.push(x);
                ys.push(y);
            }
            (xs, ys)
        };
        let (train_x, train_y) = sample(cfg.train_size);
        let (test_x, test_y) = sample(cfg.test_size);
        Dataset {
            features: p,
            train_x,
            train_y,
            test_x,
            test_y,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Classifier {
    pub config: ClassifierConfig,
    pub data: Dataset,
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

impl Classifier {
    pub fn new(config: ClassifierConfig) -> Self {
        let data = Dataset::two_gaussians(&config);
        Classifier { config, data }
    }

    pub fn dimension(&self) -> usize {
        let p = self.config.features;
        let h = self.config.hidden;
        if h == 0 {
            p + 1
        } else {
            h * p + 2 * h + 1
        }
    }

    /// Small random weights drawn from `seed`.
    pub fn initial_weights(&self, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let p = self.config.features;
        let h = self.config.hidden;
        let mut w = vec![0.0; self.dimension()];
        if h == 0 {
            return w;
        }
        let s1 = 1.0 / (p as f64).sqrt();
        let s2 = 1.0 / (h as f64).sqrt();
        for v in w.iter_mut().take(h * p) {
            *v = s1 * rng.sample::<f64, _>(StandardNormal);
        }
        for v in w.iter_mut().skip(h * p + h).take(h) {
            *v = s2 * rng.sample::<f64, _>(StandardNormal);
        }
        w
    }

    /// Training-set indices selected by a draw of uniforms in `[0, 1)`.
    pub fn batch_indices(&self, uniforms: &[f64]) -> Vec<usize> {
        let n = self.data.train_x.len();
        uniforms
            .iter()
            .map(|u| ((u * n as f64) as usize).min(n - 1))
            .collect()
    }

    /// Forward pass: returns the logit and the hidden activations.
    fn forward(&self, w: &[f64], x: &[f64]) -> (f64, Vec<f64>) {
        let p = self.config.features;
        let h = self.config.hidden;
        if h == 0 {
            let z = w[..p].iter().zip(x).map(|(a, b)| a * b).sum::<f64>() + w[p];
            return (z, Vec::new());
        }
        let (w1, rest) = w.split_at(h * p);
        let (b1, rest) = rest.split_at(h);
        let (w2, b2) = rest.split_at(h);
        let a1: Vec<f64> = (0..h)
            .map(|j| {
                let z = w1[j * p..(j + 1) * p]
                    .iter()
                    .zip(x)
                    .map(|(a, b)| a * b)
                    .sum::<f64>()
                    + b1[j];
                z.tanh()
            })
            .collect();
        let z2 = w2.iter().zip(&a1).map(|(a, b)| a * b).sum::<f64>() + b2[0];
        (z2, a1)
    }

    /// Mean cross-entropy gradient over the given training indices.
    pub fn gradient(&self, w: &[f64], batch: &[usize]) -> Vec<f64> {
        let p = self.config.features;
        let h = self.config.hidden;
        let mut g = vec![0.0; w.len()];
        for &i in batch {
            let x = &self.data.train_x[i];
            let y = self.data.train_y[i];
            let (z, a1) = self.forward(w, x);
            let r = sigmoid(z) - y;
            if h == 0 {
                g[..p].iter_mut().zip(x).for_each(|(gi, xi)| *gi += r * xi);
                g[p] += r;
                continue;
            }
            let w2 = &w[h * p + h..h * p + 2 * h];
            for j in 0..h {
                let dz1 = r * w2[j] * (1.0 - a1[j] * a1[j]);
                let row = &mut g[j * p..(j + 1) * p];
                row.iter_mut().zip(x).for_each(|(gi, xi)| *gi += dz1 * xi);
                g[h * p + j] += dz1;
                g[h * p + h + j] += r * a1[j];
            }
            g[h * p + 2 * h] += r;
        }
        let scale = 1.0 / batch.len().max(1) as f64;
        g.iter_mut().for_each(|v| *v *= scale);
        g
    }

    /// One SGD step on the batch selected by `uniforms`.
    pub fn sgd_step(&self, w: &[f64], uniforms: &[f64]) -> Vec<f64> {
        let batch = self.batch_indices(uniforms);
        let g = self.gradient(w, &batch);
        w.iter()
            .zip(g)
            .map(|(wi, gi)| wi - self.config.learning_rate * gi)
            .collect()
    }

    pub fn test_accuracy(&self, w: &[f64]) -> f64 {
        let correct = self
            .data
            .test_x
            .iter()
            .zip(&self.data.test_y)
            .filter(|(x, y)| {
                let (z, _) = self.forward(w, x);
                (z >= 0.0) == (**y > 0.5)
            })
            .count();
        correct as f64 / self.data.test_x.len().max(1) as f64
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(hidden: usize) -> Classifier {
        Classifier::new(ClassifierConfig {
            features: 3,
            hidden,
            train_size: 40,
            test_size: 20,
            ..ClassifierConfig::default()
        })
    }

    /// Central finite differences of the batch loss.
    fn numeric_gradient(c: &Classifier, w: &[f64], batch: &[usize]) -> Vec<f64> {
        let loss = |w: &[f64]| {
            batch
                .iter()
                .map(|&i| {
                    let (z, _) = c.forward(w, &c.data.train_x[i]);
                    let p = sigmoid(z).clamp(1e-15, 1.0 - 1e-15);
                    let y = c.data.train_y[i];
                    -(y * p.ln() + (1.0 - y) * (1.0 - p).ln())
                })
                .sum::<f64>()
                / batch.len() as f64
        };
        let h = 1e-6;
        (0..w.len())
            .map(|k| {
                let mut a = w.to_vec();
                let mut b = w.to_vec();
                a[k] += h;
                b[k] -= h;
                (loss(&a) - loss(&b)) / (2.0 * h)
            })
            .collect()
    }

    #[test]
    fn gradient_matches_finite_differences() {
        for hidden in [0, 4] {
            let c = small(hidden);
            let w = c.initial_weights(5);
            let w: Vec<f64> = w
                .iter()
                .enumerate()
                .map(|(i, v)| v + 0.01 * i as f64)
                .collect();
            let batch = [0, 3, 7, 11];
            let g = c.gradient(&w, &batch);
            let n = numeric_gradient(&c, &w, &batch);
            for (a, b) in g.iter().zip(&n) {
                assert!((a - b).abs() < 1e-6, "hidden={hidden}: {a} vs {b}");
            }
        }
    }

    #[test]
    fn dataset_is_reproducible_from_seed() {
        let cfg = ClassifierConfig::default();
        assert_eq!(Dataset::two_gaussians(&cfg), Dataset::two_gaussians(&cfg));
        assert_eq!(Classifier::new(cfg).dimension(), 10 * 8 + 2 * 8 + 1);
    }
}
