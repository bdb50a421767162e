//! Experiment configuration document (TOML).
//!
//! Every section is optional and falls back to the defaults below; unknown
//! keys are rejected.

use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{HarnessError, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub table1: FilterComparisonConfig,
    pub table2: FilterComparisonConfig,
    pub table3: PosteriorErrorConfig,
    pub fig2: ErrorTermConfig,
    pub fig3: ResponseCurveConfig,
    pub game_threshold: ThresholdConfig,
    pub planner_demo: PlannerDemoConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            seed: 1,
            table1: FilterComparisonConfig::default(),
            table2: FilterComparisonConfig::default(),
            table3: PosteriorErrorConfig::default(),
            fig2: ErrorTermConfig::default(),
            fig3: ResponseCurveConfig::default(),
            game_threshold: ThresholdConfig::default(),
            planner_demo: PlannerDemoConfig::default(),
        }
    }
}

/// How atoms of a finite grid are weighted.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MassRuleName {
    Uniform,
    Cell,
}

impl From<MassRuleName> for robust_sensing::grid::MassRule {
    fn from(rule: MassRuleName) -> Self {
        match rule {
            MassRuleName::Uniform => Self::Uniform,
            MassRuleName::Cell => Self::Cell,
        }
    }
}

/// EKF against the finite-grid Bayes estimator on `amplitude·sin(p) + v`,
/// truth uniform on `center ± bound`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FilterComparisonConfig {
    pub trials: usize,
    pub bounds: Vec<f64>,
    pub center: f64,
    pub amplitude: f64,
    pub noise_var: f64,
    /// Observations processed per trial.
    pub observations: usize,
    pub grid_points: usize,
    pub mass_rule: MassRuleName,
}

impl Default for FilterComparisonConfig {
    fn default() -> Self {
        Self {
            trials: 2000,
            bounds: vec![0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7],
            center: 1.5,
            amplitude: 10.0,
            noise_var: 0.01,
            observations: 3,
            grid_points: 5,
            mass_rule: MassRuleName::Uniform,
        }
    }
}

/// Posterior-computed against observed squared error of the grid estimator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PosteriorErrorConfig {
    pub trials: usize,
    pub iterations: Vec<usize>,
    pub bounds: Vec<f64>,
    pub samples_per_iteration: usize,
    pub center: f64,
    pub amplitude: f64,
    pub noise_var: f64,
    pub grid_points: usize,
    pub mass_rule: MassRuleName,
}

impl Default for PosteriorErrorConfig {
    fn default() -> Self {
        Self {
            trials: 2000,
            iterations: vec![3, 5, 7],
            bounds: vec![0.1, 0.2, 0.3, 0.4],
            samples_per_iteration: 1,
            center: 0.0,
            amplitude: 10.0,
            noise_var: 1.0,
            grid_points: 5,
            mass_rule: MassRuleName::Uniform,
        }
    }
}

/// Linear game `z = hθ + v`, `h ∈ [slope_lo, slope_hi]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ErrorTermConfig {
    pub trials: usize,
    pub slope_lo: f64,
    pub slope_hi: f64,
    pub noise_var: f64,
    pub prior_vars: Vec<f64>,
    pub atoms: usize,
}

impl Default for ErrorTermConfig {
    fn default() -> Self {
        Self {
            trials: 5000,
            slope_lo: 4.0,
            slope_hi: 5.0,
            noise_var: 1.0,
            prior_vars: vec![0.1, 0.2, 0.3, 0.4, 0.5, 1.0, 1.5, 2.0, 2.5, 3.0],
            atoms: 9,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ThresholdConfig {
    pub slope_lo: f64,
    pub slope_hi: f64,
    /// One threshold is computed per noise variance.
    pub noise_vars: Vec<f64>,
    /// Bisection range for the prior variance, in multiples of each noise variance.
    pub search: [f64; 2],
    pub atoms: usize,
}

impl Default for ThresholdConfig {
    fn default() -> Self {
        Self { slope_lo: 4.0, slope_hi: 5.0, noise_vars: vec![1.0, 4.0], search: [0.05, 8.0], atoms: 9 }
    }
}

/// Expected estimate as a function of the true parameter, for a dense-grid
/// reference and a coarse grid, averaged over one noisy observation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ResponseCurveConfig {
    pub noise_vars: Vec<f64>,
    pub amplitude: f64,
    pub half_width: f64,
    pub sweep_points: usize,
    pub quadrature_order: usize,
    pub reference_points: usize,
    pub grid_points: usize,
    pub mass_rule: MassRuleName,
}

impl Default for ResponseCurveConfig {
    fn default() -> Self {
        Self {
            noise_vars: vec![30.0, 3.0, 0.1],
            amplitude: 10.0,
            half_width: std::f64::consts::FRAC_PI_2,
            sweep_points: 61,
            quadrature_order: 80,
            reference_points: 2001,
            grid_points: 5,
            mass_rule: MassRuleName::Cell,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FeatureConfig {
    pub position: [f64; 2],
    pub normal: [f64; 2],
}

/// Camera scene: object features, pose uncertainty, candidate views.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PlannerDemoConfig {
    pub trials: usize,
    pub features: Vec<FeatureConfig>,
    pub noise_std: f64,
    /// Half-widths of the initial pose box around the nominal pose (x, y, angle).
    pub half_width: [f64; 3],
    pub tolerance: f64,
    pub confidence: f64,
    pub deadline: f64,
    pub sample_time: f64,
    pub speed: f64,
    pub grid_points: usize,
    /// Camera poses (x, y, angle).
    pub candidates: Vec<[f64; 3]>,
    pub start: [f64; 3],
    /// Trial whose stage log is written out.
    pub log_trial: usize,
}

impl Default for PlannerDemoConfig {
    fn default() -> Self {
        Self {
            trials: 500,
            features: vec![
                FeatureConfig { position: [-1.0, 1.0], normal: [-1.0, 0.0] },
                FeatureConfig { position: [-1.0, -1.0], normal: [-1.0, 0.0] },
                FeatureConfig { position: [0.0, 0.0], normal: [0.0, -1.0] },
            ],
            noise_std: 0.1,
            half_width: [0.4, 0.4, 0.4],
            tolerance: 0.05,
            confidence: 0.95,
            deadline: 1.0e6,
            sample_time: 0.01,
            speed: 1.0,
            grid_points: 5,
            candidates: vec![[0.0, -5.0, std::f64::consts::FRAC_PI_2], [-5.0, 0.0, 0.0]],
            start: [0.0, -5.0, std::f64::consts::FRAC_PI_2],
            log_trial: 0,
        }
    }
}

fn positive(what: &str, x: f64) -> Result<()> {
    if x > 0.0 && x.is_finite() {
        Ok(())
    } else {
        Err(HarnessError::Config(format!("{what} must be positive and finite, got {x}")))
    }
}

fn at_least(what: &str, n: usize, min: usize) -> Result<()> {
    if n >= min {
        Ok(())
    } else {
        Err(HarnessError::Config(format!("{what} must be at least {min}, got {n}")))
    }
}

fn nonempty<T>(what: &str, xs: &[T]) -> Result<()> {
    if xs.is_empty() {
        Err(HarnessError::Config(format!("{what} must not be empty")))
    } else {
        Ok(())
    }
}

impl FilterComparisonConfig {
    pub fn validate(&self) -> Result<()> {
        at_least("trials", self.trials, 1)?;
        nonempty("bounds", &self.bounds)?;
        self.bounds.iter().try_for_each(|b| positive("bound", *b))?;
        positive("amplitude", self.amplitude)?;
        if !(self.noise_var >= 0.0 && self.noise_var.is_finite()) {
            return Err(HarnessError::Config(format!("noise_var must be non-negative, got {}", self.noise_var)));
        }
        at_least("observations", self.observations, 1)?;
        at_least("grid_points", self.grid_points, 2)
    }
}

impl PosteriorErrorConfig {
    pub fn validate(&self) -> Result<()> {
        at_least("trials", self.trials, 1)?;
        nonempty("iterations", &self.iterations)?;
        nonempty("bounds", &self.bounds)?;
        self.iterations.iter().try_for_each(|n| at_least("iterations", *n, 1))?;
        self.bounds.iter().try_for_each(|b| positive("bound", *b))?;
        at_least("samples_per_iteration", self.samples_per_iteration, 1)?;
        positive("amplitude", self.amplitude)?;
        positive("noise_var", self.noise_var)?;
        at_least("grid_points", self.grid_points, 2)
    }
}

impl ErrorTermConfig {
    pub fn validate(&self) -> Result<()> {
        at_least("trials", self.trials, 1)?;
        nonempty("prior_vars", &self.prior_vars)?;
        self.prior_vars.iter().try_for_each(|v| positive("prior_var", *v))?;
        positive("slope_lo", self.slope_lo)?;
        if self.slope_hi < self.slope_lo {
            return Err(HarnessError::Config("slope_hi must be at least slope_lo".into()));
        }
        positive("noise_var", self.noise_var)?;
        at_least("atoms", self.atoms, 1)
    }
}

impl ThresholdConfig {
    pub fn validate(&self) -> Result<()> {
        positive("slope_lo", self.slope_lo)?;
        if self.slope_hi <= self.slope_lo {
            return Err(HarnessError::Config("slope_hi must exceed slope_lo".into()));
        }
        nonempty("noise_vars", &self.noise_vars)?;
        self.noise_vars.iter().try_for_each(|v| positive("noise_var", *v))?;
        positive("search lower end", self.search[0])?;
        if self.search[1] <= self.search[0] {
            return Err(HarnessError::Config("search range must be increasing".into()));
        }
        at_least("atoms", self.atoms, 2)
    }
}

impl ResponseCurveConfig {
    pub fn validate(&self) -> Result<()> {
        nonempty("noise_vars", &self.noise_vars)?;
        self.noise_vars.iter().try_for_each(|v| positive("noise_var", *v))?;
        positive("amplitude", self.amplitude)?;
        positive("half_width", self.half_width)?;
        at_least("sweep_points", self.sweep_points, 2)?;
        at_least("quadrature_order", self.quadrature_order, 1)?;
        at_least("reference_points", self.reference_points, 2)?;
        at_least("grid_points", self.grid_points, 2)
    }
}

impl PlannerDemoConfig {
    pub fn validate(&self) -> Result<()> {
        at_least("trials", self.trials, 1)?;
        nonempty("features", &self.features)?;
        at_least("candidates", self.candidates.len(), 2)?;
        positive("noise_std", self.noise_std)?;
        self.half_width.iter().try_for_each(|w| positive("half_width", *w))?;
        positive("tolerance", self.tolerance)?;
        if !(self.confidence > 0.0 && self.confidence < 1.0) {
            return Err(HarnessError::Config(format!("confidence must lie in (0, 1), got {}", self.confidence)));
        }
        if self.deadline.is_nan() || self.deadline < 0.0 {
            return Err(HarnessError::Config("deadline must be non-negative".into()));
        }
        positive("sample_time", self.sample_time)?;
        positive("speed", self.speed)?;
        at_least("grid_points", self.grid_points, 3)?;
        if self.log_trial >= self.trials {
            return Err(HarnessError::Config("log_trial must be below trials".into()));
        }
        Ok(())
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let config: Self = toml::from_str(text).map_err(|e| HarnessError::Config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| HarnessError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// Hex SHA-256 of the canonical serialization.
    pub fn digest(&self) -> String {
        Sha256::digest(self.to_toml().as_bytes()).iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn validate(&self) -> Result<()> {
        self.table1.validate()?;
        self.table2.validate()?;
        self.table3.validate()?;
        self.fig2.validate()?;
        self.fig3.validate()?;
        self.game_threshold.validate()?;
        self.planner_demo.validate()
    }

    /// Overrides the trial count of every Monte Carlo experiment.
    pub fn set_trials(&mut self, trials: usize) {
        self.table1.trials = trials;
        self.table2.trials = trials;
        self.table3.trials = trials;
        self.fig2.trials = trials;
        self.planner_demo.trials = trials;
        self.planner_demo.log_trial = self.planner_demo.log_trial.min(trials.saturating_sub(1));
    }
}
