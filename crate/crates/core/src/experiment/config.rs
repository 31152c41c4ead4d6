//! Run configuration, read from TOML.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::compute::{AtomicOpSpec, ClassifierConfig, Computation, StateVector};
use crate::error::{Error, Result};
use crate::ledger::{subsample_period, PeriodRule};
use crate::netsim::SessionConfig;
use crate::protocol::{
    max_quantizer_error, ProtocolMode, RandomizedConfig, RefinementPolicy, ToleranceSchedule,
    ValidationConfig,
};

#[derive(
    Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize, Default,
)]
#[serde(rename_all = "snake_case")]
pub enum Scenario {
    #[default]
    Base,
    CoarseCompression,
    LargeFrames,
    Custom,
}

impl Scenario {
    pub const STUDY: [Scenario; 3] = [
        Scenario::Base,
        Scenario::CoarseCompression,
        Scenario::LargeFrames,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Scenario::Base => "base",
            Scenario::CoarseCompression => "coarse_compression",
            Scenario::LargeFrames => "large_frames",
            Scenario::Custom => "custom",
        }
    }
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Scenario {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        [
            Scenario::Base,
            Scenario::CoarseCompression,
            Scenario::LargeFrames,
            Scenario::Custom,
        ]
        .into_iter()
        .find(|c| c.name() == s)
        .ok_or_else(|| Error::Config(format!("unknown scenario {s:?}")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ComputationConfig {
    Affine {
        singular_values: Vec<f64>,
        offset: Vec<f64>,
        #[serde(default)]
        matrix_seed: u64,
        #[serde(default)]
        initial_state: Option<Vec<f64>>,
    },
    QuadraticDescent {
        eigenvalues: Vec<f64>,
        rate: f64,
        #[serde(default)]
        matrix_seed: u64,
        #[serde(default)]
        initial_state: Option<Vec<f64>>,
    },
    Classifier {
        #[serde(default)]
        model: ClassifierConfig,
    },
    GaussianDrift {
        dimension: usize,
        sigma: f64,
    },
}

impl ComputationConfig {
    pub fn build(&self) -> Result<AtomicOpSpec> {
        match self {
            ComputationConfig::Affine {
                singular_values,
                offset,
                matrix_seed,
                ..
            } => AtomicOpSpec::affine_with_spectrum(singular_values, offset.clone(), *matrix_seed),
            ComputationConfig::QuadraticDescent {
                eigenvalues,
                rate,
                matrix_seed,
                ..
            } => AtomicOpSpec::quadratic_descent(eigenvalues, *rate, *matrix_seed),
            ComputationConfig::Classifier { model } => Ok(AtomicOpSpec::classifier(*model)),
            ComputationConfig::GaussianDrift { dimension, sigma } => {
                AtomicOpSpec::gaussian_drift(*dimension, *sigma)
            }
        }
    }

    /// Starting state: the configured one, the classifier's seeded initial weights, or zeros.
    pub fn initial_state(&self, op: &AtomicOpSpec, seed: u64) -> Result<StateVector> {
        let given = match self {
            ComputationConfig::Affine { initial_state, .. }
            | ComputationConfig::QuadraticDescent { initial_state, .. } => initial_state.clone(),
            _ => None,
        };
        if let Some(v) = given {
            let x = StateVector::new(v)?;
            x.check_dim(&StateVector::zeros(op.dimension()))?;
            return Ok(x);
        }
        match op.classifier_model() {
            Some(c) => StateVector::new(c.initial_weights(seed)),
            None => Ok(StateVector::zeros(op.dimension())),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ValidationSection {
    pub tolerance: ToleranceSchedule,
    /// Defaults to the smallest validation tolerance over the run.
    #[serde(default)]
    pub verify_tolerance: Option<f64>,
    pub quant_radius: f64,
    /// `ε` for the base and large-frame scenarios; defaults to `Δ_val/(L+1)`.
    #[serde(default)]
    pub max_error: Option<f64>,
    /// `ε` for the coarse-compression scenario.
    #[serde(default)]
    pub coarse_max_error: Option<f64>,
    /// Frame cap as a fraction of the run length, used by the custom scenario.
    #[serde(default)]
    pub frame_fraction: Option<f64>,
    #[serde(default)]
    pub lipschitz: Option<f64>,
    #[serde(default = "default_true")]
    pub strict_soundness: bool,
    #[serde(default = "default_state_bound")]
    pub state_bound: f64,
    /// Fixed subsampling period; chosen by `period_rule` when absent.
    #[serde(default)]
    pub period: Option<u64>,
    #[serde(default)]
    pub period_rule: PeriodRule,
}

fn default_true() -> bool {
    true
}

fn default_state_bound() -> f64 {
    1e3
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RandomizedSection {
    pub endorsers: usize,
    pub outlier_prob: f64,
    /// Fixed margin; the validation schedule is used when absent.
    pub margin: Option<f64>,
    pub lambda: Option<f64>,
}

impl Default for RandomizedSection {
    fn default() -> Self {
        RandomizedSection {
            endorsers: 5,
            outlier_prob: 0.05,
            margin: None,
            lambda: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NetworkSection {
    pub endorsers: usize,
    pub pool: usize,
    pub meta_bits: u64,
    pub policy: RefinementPolicy,
}

impl Default for NetworkSection {
    fn default() -> Self {
        NetworkSection {
            endorsers: 3,
            pool: 6,
            meta_bits: 256,
            policy: RefinementPolicy::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentSection {
    /// Tolerance scales (`Δ_max`, or the constant tolerance) for sweeps.
    pub tolerances: Vec<f64>,
    pub seeds: u64,
    /// Fresh draws tried after an invalidation before the endorsers' mean is adopted.
    pub max_retries: u32,
    pub baseline_batches: Vec<usize>,
    pub lipschitz_samples: usize,
}

impl Default for ExperimentSection {
    fn default() -> Self {
        ExperimentSection {
            tolerances: Vec::new(),
            seeds: 10,
            max_retries: 5,
            baseline_batches: vec![10, 30, 50],
            lipschitz_samples: 64,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct OutputSection {
    pub dir: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub scenario: Scenario,
    pub iterations: u64,
    #[serde(default)]
    pub seed: u64,
    /// Modes run by `run` when none is given on the command line.
    #[serde(default = "all_modes")]
    pub modes: Vec<ProtocolMode>,
    pub computation: ComputationConfig,
    pub validation: ValidationSection,
    #[serde(default)]
    pub randomized: RandomizedSection,
    #[serde(default)]
    pub network: NetworkSection,
    #[serde(default)]
    pub experiment: ExperimentSection,
    #[serde(default)]
    pub output: OutputSection,
}

fn all_modes() -> Vec<ProtocolMode> {
    ProtocolMode::ALL.to_vec()
}

/// Everything needed to execute one run.
#[derive(Debug, Clone)]
pub struct ResolvedRun {
    pub op: AtomicOpSpec,
    pub x0: StateVector,
    pub scenario: Scenario,
    pub iterations: u64,
    pub seed: u64,
    pub validation: ValidationConfig,
    pub randomized: RandomizedConfig,
    pub session: SessionConfig,
    pub max_retries: u32,
    /// Fixed randomized-validation margin; the tolerance schedule applies when absent.
    pub margin: Option<f64>,
}

impl ResolvedRun {
    pub fn tolerance_scale(&self) -> f64 {
        self.validation.tolerance.scale()
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    /// Frame cap for a scenario: 10% of the run, 20% for large frames.
    pub fn frame_cap(&self, scenario: Scenario) -> usize {
        let fraction = match scenario {
            Scenario::Base | Scenario::CoarseCompression => 0.1,
            Scenario::LargeFrames => 0.2,
            Scenario::Custom => self.validation.frame_fraction.unwrap_or(0.1),
        };
        ((fraction * self.iterations as f64).ceil() as usize).max(1)
    }

    fn smallest_scale(&self, tolerance_scale: f64) -> f64 {
        self.experiment
            .tolerances
            .iter()
            .copied()
            .fold(tolerance_scale, f64::min)
    }

    /// Builds the computation once; it can be shared by many [`RunConfig::resolve_with`] calls.
    pub fn build_op(&self) -> Result<AtomicOpSpec> {
        let mut op = self.computation.build()?;
        if let Some(l) = self.validation.lipschitz {
            op = op.with_lipschitz(l);
        }
        if op.lipschitz().is_none() {
            let x0 = self.computation.initial_state(&op, self.seed)?;
            let radius = x0.norm().max(1.0);
            op.ensure_lipschitz(self.experiment.lipschitz_samples.max(1), radius, self.seed)?;
        }
        Ok(op)
    }

    pub fn resolve(&self) -> Result<ResolvedRun> {
        let op = self.build_op()?;
        self.resolve_with(
            &op,
            self.scenario,
            self.validation.tolerance.scale(),
            self.seed,
        )
    }

    /// Resolves scenario rules and defaults for one tolerance scale and seed. All checks happen
    /// here, before any computation runs.
    pub fn resolve_with(
        &self,
        op: &AtomicOpSpec,
        scenario: Scenario,
        tolerance_scale: f64,
        seed: u64,
    ) -> Result<ResolvedRun> {
        if self.iterations == 0 {
            return Err(Error::Config("iterations must be positive".into()));
        }
        if !(tolerance_scale > 0.0) {
            return Err(Error::Config(format!("tolerance {tolerance_scale}")));
        }
        let lipschitz = op
            .lipschitz()
            .ok_or_else(|| Error::Config("Lipschitz constant unavailable".into()))?;
        let v = &self.validation;
        let tolerance = v.tolerance.with_scale(tolerance_scale);
        let horizon = self.iterations;
        let min_tol = tolerance.min_over(horizon);
        let nominal = self.smallest_scale(tolerance_scale);
        let base_eps = match v.max_error {
            Some(e) => e,
            None => {
                max_quantizer_error(v.tolerance.with_scale(nominal).min_over(horizon), lipschitz)
            }
        };
        let (max_error, strict) = match scenario {
            Scenario::CoarseCompression => {
                let e = v.coarse_max_error.ok_or_else(|| {
                    Error::Config("coarse_compression needs validation.coarse_max_error".into())
                })?;
                if e < nominal {
                    return Err(Error::Config(format!(
                        "coarse max error {e} must reach the smallest tolerance {nominal}"
                    )));
                }
                (e, false)
            }
            Scenario::Base | Scenario::LargeFrames => {
                if base_eps > nominal {
                    return Err(Error::Config(format!(
                        "max error {base_eps} exceeds the smallest tolerance {nominal}"
                    )));
                }
                (base_eps, v.strict_soundness)
            }
            Scenario::Custom => (base_eps, v.strict_soundness),
        };
        let frame_cap = self.frame_cap(scenario);
        let verify_tolerance = v.verify_tolerance.unwrap_or(min_tol);
        let validation = ValidationConfig {
            tolerance,
            verify_tolerance,
            quant_radius: v.quant_radius,
            max_error,
            frame_cap,
            lipschitz,
            mode: ProtocolMode::Batch,
            strict_soundness: strict && !op.is_stochastic(),
            state_bound: v.state_bound,
        };
        validation.validate(horizon)?;
        validation.quantizer(op.dimension())?;
        let period = match v.period {
            Some(0) => return Err(Error::Config("period must be at least 1".into())),
            Some(k) => k,
            None if op.is_stochastic() => 1,
            None => subsample_period(
                v.period_rule,
                lipschitz,
                max_error,
                verify_tolerance,
                min_tol,
                frame_cap as u64,
            )?,
        };
        let r = &self.randomized;
        let randomized = RandomizedConfig {
            endorsers: r.endorsers,
            outlier_prob: r.outlier_prob,
            margin: r.margin.unwrap_or(min_tol),
            lambda: r.lambda,
        };
        if r.endorsers == 0 {
            return Err(Error::Config(
                "randomized.endorsers must be at least 1".into(),
            ));
        }
        let n = &self.network;
        if n.endorsers == 0 || n.pool < n.endorsers {
            return Err(Error::Config(format!(
                "{} endorsers per unit from a pool of {}",
                n.endorsers, n.pool
            )));
        }
        let session = SessionConfig {
            validation,
            endorsers: n.endorsers,
            pool: n.pool,
            period,
            meta_bits: n.meta_bits,
            policy: n.policy,
            run_seed: seed,
        };
        let x0 = self.computation.initial_state(op, seed)?;
        Ok(ResolvedRun {
            op: op.clone(),
            x0,
            scenario,
            iterations: self.iterations,
            seed,
            validation,
            randomized,
            session,
            max_retries: self.experiment.max_retries,
            margin: r.margin,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const AFFINE: &str = r#"
iterations = 50
seed = 3

[computation]
kind = "affine"
singular_values = [0.9, 0.5]
offset = [0.1, 0.2]

[validation]
tolerance = { constant = 0.2 }
quant_radius = 0.5
"#;

    #[test]
    fn parses_and_resolves_sound_defaults() {
        let cfg = RunConfig::from_toml(AFFINE).unwrap();
        let r = cfg.resolve().unwrap();
        assert!((r.validation.max_error - 0.2 / 1.9).abs() < 1e-12);
        assert_eq!(r.validation.frame_cap, 5);
        assert!(r.session.period >= 1);
        assert_eq!(cfg.modes.len(), 3);
    }

    #[test]
    fn scenarios_set_frame_caps() {
        let cfg = RunConfig::from_toml(AFFINE).unwrap();
        assert_eq!(cfg.frame_cap(Scenario::Base), 5);
        assert_eq!(cfg.frame_cap(Scenario::LargeFrames), 10);
    }

    #[test]
    fn coarse_needs_a_large_error() {
        let text = AFFINE.replace(
            "kind = \"affine\"\nsingular_values = [0.9, 0.5]\noffset = [0.1, 0.2]",
            "kind = \"gaussian_drift\"\ndimension = 2\nsigma = 0.1",
        );
        let mut cfg = RunConfig::from_toml(&text).unwrap();
        let op = cfg.build_op().unwrap();
        assert!(cfg
            .resolve_with(&op, Scenario::CoarseCompression, 0.2, 0)
            .is_err());
        cfg.validation.coarse_max_error = Some(0.1);
        assert!(cfg
            .resolve_with(&op, Scenario::CoarseCompression, 0.2, 0)
            .is_err());
        cfg.validation.coarse_max_error = Some(0.25);
        let r = cfg
            .resolve_with(&op, Scenario::CoarseCompression, 0.2, 0)
            .unwrap();
        assert!(!r.validation.strict_soundness);
        assert_eq!(r.validation.max_error, 0.25);
    }

    #[test]
    fn coarse_deterministic_runs_cannot_be_verified() {
        let mut cfg = RunConfig::from_toml(AFFINE).unwrap();
        cfg.validation.coarse_max_error = Some(0.25);
        let op = cfg.build_op().unwrap();
        let err = cfg
            .resolve_with(&op, Scenario::CoarseCompression, 0.2, 0)
            .unwrap_err();
        assert!(matches!(err, Error::Infeasible(_)));
    }

    #[test]
    fn infeasible_period_is_reported_before_running() {
        let mut cfg = RunConfig::from_toml(AFFINE).unwrap();
        cfg.validation.max_error = Some(0.19);
        cfg.validation.strict_soundness = false;
        cfg.validation.verify_tolerance = Some(0.2);
        let err = cfg.resolve().unwrap_err();
        assert!(matches!(err, Error::Infeasible(_)), "{err:?}");
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let text = AFFINE.replace("seed = 3", "seed = 3\nbogus = 1");
        assert!(RunConfig::from_toml(&text).is_err());
    }

    #[test]
    fn round_trips_through_toml() {
        let cfg = RunConfig::from_toml(AFFINE).unwrap();
        let again = RunConfig::from_toml(&cfg.to_toml().unwrap()).unwrap();
        assert_eq!(cfg, again);
    }
}
