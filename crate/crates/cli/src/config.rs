//! TOML run configuration.
//!
//! ```toml
//! [ensemble]
//! distribution = "rademacher"   # gaussian | rademacher | uniform_symmetric | discrete_symmetric
//! sigma = 1.0
//! # values = [1.0, 3.0]; probs = [0.8, 0.2]   (discrete_symmetric only)
//! # epsilon = 0.1                            (omit to sample untruncated atoms)
//!
//! [geometry]
//! n = 300
//! m = 3
//! delta = 0.5
//! target = "product"            # product | linearized | xi_process
//! # points = [[1.3, 0.0]]       (xi_process only)
//!
//! [functions]
//! coefficients = [[[0.0, 0.0], [0.0, 2.0], [1.0, 0.0]]]   # z^2 + 2iz
//!
//! [mc]
//! trials = 1000
//! seed = 1
//! threads = 0
//!
//! [event]
//! enabled = true
//! c = 0.05
//! gridpoints = 64
//! # gate = false
//!
//! [tolerances]
//! relative = 0.25
//! absolute = 0.15
//! density_ks = 0.08
//! density_min_n = 50
//! ```

use std::path::Path;

use prodlab::ensembles::{AtomDistribution, AtomKind};
use prodlab::mc::{EventConfig, ExperimentConfig, Target, Tolerances};
use prodlab::spectra::{TestFunction, DEFAULT_DELTA, DEFAULT_EVENT_C, DEFAULT_GRIDPOINTS};
use prodlab::Complex64;
use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Distribution {
    Gaussian,
    Rademacher,
    UniformSymmetric,
    DiscreteSymmetric,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnsembleSection {
    pub distribution: Distribution,
    #[serde(default = "one")]
    pub sigma: f64,
    #[serde(default)]
    pub values: Vec<f64>,
    #[serde(default)]
    pub probs: Vec<f64>,
    pub epsilon: Option<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TargetKind {
    Product,
    Linearized,
    XiProcess,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeometrySection {
    pub n: usize,
    #[serde(default = "one_usize")]
    pub m: usize,
    #[serde(default = "default_delta")]
    pub delta: f64,
    #[serde(default = "default_target")]
    pub target: TargetKind,
    #[serde(default)]
    pub points: Vec<[f64; 2]>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FunctionsSection {
    #[serde(default)]
    pub coefficients: Vec<Vec<[f64; 2]>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct McSection {
    #[serde(default = "default_trials")]
    pub trials: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub threads: usize,
}

impl Default for McSection {
    fn default() -> Self {
        Self {
            trials: default_trials(),
            seed: 0,
            threads: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EventSection {
    #[serde(default = "yes")]
    pub enabled: bool,
    #[serde(default = "default_c")]
    pub c: f64,
    #[serde(default = "default_gridpoints")]
    pub gridpoints: usize,
    pub gate: Option<bool>,
}

impl Default for EventSection {
    fn default() -> Self {
        Self {
            enabled: true,
            c: DEFAULT_EVENT_C,
            gridpoints: DEFAULT_GRIDPOINTS,
            gate: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TolerancesSection {
    #[serde(default = "default_relative")]
    pub relative: f64,
    #[serde(default = "default_absolute")]
    pub absolute: f64,
    #[serde(default = "default_density_ks")]
    pub density_ks: f64,
    #[serde(default = "default_density_min_n")]
    pub density_min_n: usize,
}

impl Default for TolerancesSection {
    fn default() -> Self {
        Self {
            relative: default_relative(),
            absolute: default_absolute(),
            density_ks: default_density_ks(),
            density_min_n: default_density_min_n(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub ensemble: EnsembleSection,
    pub geometry: GeometrySection,
    #[serde(default)]
    pub functions: FunctionsSection,
    #[serde(default)]
    pub mc: McSection,
    #[serde(default)]
    pub event: EventSection,
    #[serde(default)]
    pub tolerances: TolerancesSection,
}

fn one() -> f64 {
    1.0
}
fn one_usize() -> usize {
    1
}
fn yes() -> bool {
    true
}
fn default_delta() -> f64 {
    DEFAULT_DELTA
}
fn default_target() -> TargetKind {
    TargetKind::Product
}
fn default_trials() -> usize {
    1000
}
fn default_c() -> f64 {
    DEFAULT_EVENT_C
}
fn default_gridpoints() -> usize {
    DEFAULT_GRIDPOINTS
}
fn default_relative() -> f64 {
    Tolerances::default().relative
}
fn default_absolute() -> f64 {
    Tolerances::default().absolute
}
fn default_density_ks() -> f64 {
    0.08
}
fn default_density_min_n() -> usize {
    50
}

fn config_err(e: impl std::fmt::Display) -> CliError {
    CliError::Config(e.to_string())
}

/// Command-line overrides applied on top of the file.
#[derive(Clone, Copy, Debug, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub threads: Option<usize>,
    pub tolerance_scale: Option<f64>,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(config_err)
    }

    pub fn apply(&mut self, o: Overrides) -> Result<(), CliError> {
        if let Some(seed) = o.seed {
            self.mc.seed = seed;
        }
        if let Some(t) = o.threads {
            self.mc.threads = t;
        }
        if let Some(s) = o.tolerance_scale {
            if !(s > 0.0 && s.is_finite()) {
                return Err(config_err(format!(
                    "tolerance scale must be positive, got {s}"
                )));
            }
            self.tolerances.relative *= s;
            self.tolerances.absolute *= s;
            self.tolerances.density_ks *= s;
        }
        Ok(())
    }

    pub fn distribution(&self) -> Result<AtomDistribution, CliError> {
        let e = &self.ensemble;
        let dist = match e.distribution {
            Distribution::Gaussian => AtomDistribution::new(AtomKind::Gaussian, e.sigma),
            Distribution::Rademacher => AtomDistribution::new(AtomKind::Rademacher, e.sigma),
            Distribution::UniformSymmetric => {
                AtomDistribution::new(AtomKind::UniformSymmetric, e.sigma)
            }
            Distribution::DiscreteSymmetric => {
                AtomDistribution::discrete_symmetric(e.values.clone(), e.probs.clone(), e.sigma)
            }
        };
        dist.map_err(config_err)
    }

    pub fn functions(&self) -> Result<Vec<TestFunction>, CliError> {
        self.functions
            .coefficients
            .iter()
            .map(|cs| {
                let cs = cs.iter().map(|&[re, im]| Complex64::new(re, im)).collect();
                TestFunction::new(cs, self.geometry.delta).map_err(config_err)
            })
            .collect()
    }

    pub fn target(&self) -> Target {
        match self.geometry.target {
            TargetKind::Product => Target::Product,
            TargetKind::Linearized => Target::Linearized,
            TargetKind::XiProcess => Target::XiProcess {
                points: self
                    .geometry
                    .points
                    .iter()
                    .map(|&[re, im]| Complex64::new(re, im))
                    .collect(),
            },
        }
    }

    /// Validated experiment description.
    pub fn experiment(&self) -> Result<ExperimentConfig, CliError> {
        let g = &self.geometry;
        let mut cfg = ExperimentConfig::new(g.n, g.m, self.distribution()?, self.target());
        cfg.functions = self.functions()?;
        cfg.trials = self.mc.trials;
        cfg.delta = g.delta;
        cfg.epsilon = self.ensemble.epsilon;
        cfg.master_seed = self.mc.seed;
        cfg.threads = self.mc.threads;
        cfg.event = EventConfig {
            enabled: self.event.enabled,
            c: self.event.c,
            gridpoints: self.event.gridpoints,
            gate: self.event.gate,
        };
        cfg.tolerances = Tolerances {
            relative: self.tolerances.relative,
            absolute: self.tolerances.absolute,
        };
        cfg.validate().map_err(config_err)?;
        Ok(cfg)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const QUADRATIC: &str = r#"
[ensemble]
distribution = "rademacher"

[geometry]
n = 300
m = 3

[functions]
coefficients = [[[0.0, 0.0], [0.0, 2.0], [1.0, 0.0]]]

[mc]
trials = 1000
seed = 5
"#;

    #[test]
    fn parses_with_defaults() {
        let cfg = RunConfig::parse(QUADRATIC).unwrap();
        let exp = cfg.experiment().unwrap();
        assert_eq!(exp.n, 300);
        assert_eq!(exp.delta, DEFAULT_DELTA);
        assert_eq!(exp.functions[0].coefficient(1), Complex64::new(0.0, 2.0));
        assert!(exp.event.enabled);
        assert_eq!(exp.target, Target::Product);
    }

    #[test]
    fn overrides_take_precedence() {
        let mut cfg = RunConfig::parse(QUADRATIC).unwrap();
        cfg.apply(Overrides {
            seed: Some(9),
            threads: Some(2),
            tolerance_scale: Some(2.0),
        })
        .unwrap();
        assert_eq!(cfg.mc.seed, 9);
        assert_eq!(cfg.mc.threads, 2);
        assert_eq!(cfg.tolerances.relative, 0.5);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(
            RunConfig::parse("[ensemble]\ndistribution = \"cauchy\"\n[geometry]\nn = 3").is_err()
        );
        assert!(RunConfig::parse(
            "[ensemble]\ndistribution = \"gaussian\"\n[geometry]\nn = 3\nbogus = 1"
        )
        .is_err());
        let mut cfg = RunConfig::parse(QUADRATIC).unwrap();
        cfg.ensemble.epsilon = Some(0.7);
        assert!(matches!(cfg.experiment(), Err(CliError::Config(_))));
    }
}
